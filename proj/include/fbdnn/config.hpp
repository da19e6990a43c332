#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fbdnn/selection.hpp"
#include "fbdnn/simgen.hpp"

namespace fbdnn {

/// Everything the CLI can be told, with the library defaults.
struct RunConfig {
  SelectionConfig selection;
  SimDesign design;
  std::vector<Criterion> criteria{Criterion::fbic};  // used by `replicate`
  std::size_t replicates = 10;
  std::uint64_t seed = 0;
  int workers = 0;
};

/// `key = value` lines; '#' starts a comment, blank lines are skipped.
/// Later duplicates win. Throws ConfigError on malformed lines.
std::map<std::string, std::string> parse_key_values(std::istream& in);

/// Applies recognised keys on top of `config`; unknown keys are an error.
void apply_config(const std::map<std::string, std::string>& values, RunConfig& config);

RunConfig load_config(const std::filesystem::path& file, RunConfig base = {});

/// Writes every key with its current value, in a form parse_key_values reads back.
void write_config(std::ostream& out, const RunConfig& config);

/// "100;100,100" -> {{100}, {100, 100}}: ';' between candidates, ',' between layers.
std::vector<std::vector<std::size_t>> parse_hidden_grid(const std::string& text);
std::string format_hidden_grid(const std::vector<std::vector<std::size_t>>& grid);

}  // namespace fbdnn
