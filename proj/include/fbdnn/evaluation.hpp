#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbdnn/selection.hpp"
#include "fbdnn/simgen.hpp"

namespace fbdnn {

struct MatchResult {
  int match = 0;       // 1 iff selected == truth
  std::size_t fp = 0;  // |selected \ truth|
};

/// Both sets are 1-based feature indices in 1..p; order and duplicates are ignored.
MatchResult emr_fp(std::span<const std::size_t> selected,
                   std::span<const std::size_t> truth, std::size_t p);

double accuracy(std::span<const int> preds, std::span<const int> labels);

struct ReplicateRow {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  int emr = 0;
  std::size_t fp = 0;
  double accuracy = 0.0;
  std::size_t p0 = 0;
  Candidate chosen;
  double lambda = 0.0;
  double criterion_value = 0.0;
  std::vector<std::size_t> selected;  // 1-based
  double runtime_seconds = 0.0;       // wall clock, never written to reports
};

struct AggregateRow {
  std::size_t replicates = 0;
  std::size_t failed = 0;
  double emr = 0.0;
  double fp = 0.0;
  double accuracy = 0.0;
  double p0 = 0.0;
};

struct MetricsReport {
  Criterion criterion = Criterion::fbic;
  bool criterion_forced = false;
  SimDesign design;
  std::vector<ReplicateRow> rows;
  AggregateRow aggregate;
};

/// Means over the successful rows; NaN when none succeeded.
AggregateRow aggregate_rows(std::span<const ReplicateRow> rows);

using ReplicateProgress = std::function<void(std::size_t index, double seconds)>;

/// Replicate r uses seed base_seed + r for both data generation and
/// selection. All criteria are scored on the same fitted paths. Each report
/// depends only on the seeds, never on `workers` or scheduling order.
std::vector<MetricsReport> run_replicates(const SimDesign& design,
                                          const SelectionConfig& config,
                                          std::span<const Criterion> criteria,
                                          std::size_t replicates, std::uint64_t base_seed,
                                          int workers = 0,
                                          const ReplicateProgress& progress = {});

void write_report_csv(std::ostream& out, const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report);
nlohmann::json design_to_json(const SimDesign& design);

/// Per-replicate wall-clock times, kept apart from the reports so those stay
/// byte-identical between runs.
void write_timing_csv(std::ostream& out, const MetricsReport& report);

}  // namespace fbdnn
