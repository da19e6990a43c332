#include "fbdnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "fbdnn/error.hpp"

namespace fbdnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] != '-') x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, char sep, F f) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    s += f(xs[i]);
  }
  return s;
}

LossKind loss_from_string(const std::string& v) {
  if (v == "cross_entropy" || v == "softmax") return LossKind::cross_entropy;
  if (v == "hinge") return LossKind::hinge;
  throw ConfigError("unknown loss '" + v + "' (expected cross_entropy or hinge)");
}

}  // namespace

std::vector<std::vector<std::size_t>> parse_hidden_grid(const std::string& text) {
  std::vector<std::vector<std::size_t>> grid;
  for (const auto& cand : split(text, ';')) {
    std::vector<std::size_t> widths;
    for (const auto& w : split(cand, ',')) widths.push_back(to_uint("hidden", w));
    grid.push_back(widths);
  }
  return grid;
}

std::string format_hidden_grid(const std::vector<std::vector<std::size_t>>& grid) {
  return join(grid, ';', [](const std::vector<std::size_t>& h) {
    return join(h, ',', [](std::size_t w) { return std::to_string(w); });
  });
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& values, RunConfig& config) {
  auto& sel = config.selection;
  auto& d = config.design;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"learning_rate", [&](auto& k, auto& v) { sel.prox.learning_rate = to_double(k, v); }},
      {"hierarchy", [&](auto& k, auto& v) { sel.prox.hierarchy = to_double(k, v); }},
      {"prox_rule", [&](auto&, auto& v) { sel.prox.rule = prox_rule_from_string(v); }},
      {"multiplier", [&](auto& k, auto& v) { sel.path.multiplier = to_double(k, v); }},
      {"warmup_epochs", [&](auto& k, auto& v) { sel.path.warmup_epochs = to_uint(k, v); }},
      {"epochs_per_step", [&](auto& k, auto& v) { sel.path.epochs_per_step = to_uint(k, v); }},
      {"batch_rule", [&](auto&, auto& v) { sel.path.batch_rule = batch_rule_from_string(v); }},
      {"lambda_start", [&](auto& k, auto& v) { sel.path.lambda_start = to_double(k, v); }},
      {"lambda_start_rule",
       [&](auto&, auto& v) { sel.path.lambda_start_rule = lambda_start_rule_from_string(v); }},
      {"lambda_start_factor",
       [&](auto& k, auto& v) { sel.path.lambda_start_factor = to_double(k, v); }},
      {"lambda_bound_factor",
       [&](auto& k, auto& v) { sel.path.lambda_bound_factor = to_double(k, v); }},
      {"lambda_max", [&](auto& k, auto& v) { sel.path.lambda_max = to_double(k, v); }},
      {"max_steps", [&](auto& k, auto& v) { sel.path.max_steps = to_uint(k, v); }},
      {"split",
       [&](auto& k, auto& v) {
         const auto parts = split(v, ',');
         if (parts.size() != 3) throw ConfigError("'split' expects train,validation,test");
         sel.ratios = {to_double(k, parts[0]), to_double(k, parts[1]), to_double(k, parts[2])};
       }},
      {"tau", [&](auto& k, auto& v) { sel.tau = to_double(k, v); }},
      {"penalty_n", [&](auto&, auto& v) { sel.penalty_n = penalty_n_from_string(v); }},
      {"criterion", [&](auto&, auto& v) { sel.criterion = criterion_from_string(v); }},
      {"criteria",
       [&](auto&, auto& v) {
         config.criteria.clear();
         std::string list = v;
         std::replace(list.begin(), list.end(), ',', ';');
         for (const auto& c : split(list, ';')) config.criteria.push_back(criterion_from_string(c));
       }},
      {"fbic_ties", [&](auto&, auto& v) { sel.fbic_ties = tie_break_from_string(v); }},
      {"mr_ties", [&](auto&, auto& v) { sel.mr_ties = tie_break_from_string(v); }},
      {"loss", [&](auto&, auto& v) { sel.loss = loss_from_string(v); }},
      {"standardize", [&](auto& k, auto& v) { sel.standardize = to_bool(k, v); }},
      {"hidden", [&](auto&, auto& v) { sel.grid.hidden = parse_hidden_grid(v); }},
      {"truncations",
       [&](auto& k, auto& v) {
         sel.grid.truncations.clear();
         for (const auto& q : split(v, ';')) sel.grid.truncations.push_back(to_uint(k, q));
       }},
      {"dropouts",
       [&](auto& k, auto& v) {
         sel.grid.dropouts.clear();
         for (const auto& g : split(v, ';')) sel.grid.dropouts.push_back(to_double(k, g));
       }},
      {"model", [&](auto&, auto& v) { d.model = model_from_string(v); }},
      {"n_per_class", [&](auto& k, auto& v) { d.n_per_class = to_uint(k, v); }},
      {"p", [&](auto& k, auto& v) { d.p = to_uint(k, v); }},
      {"grid_size", [&](auto& k, auto& v) { d.grid_size = to_uint(k, v); }},
      {"curve_grid_size", [&](auto& k, auto& v) { d.curve_grid_size = to_uint(k, v); }},
      {"curve_features", [&](auto& k, auto& v) { d.curve_features = to_uint(k, v); }},
      {"noise_sd", [&](auto& k, auto& v) { d.noise_sd = to_double(k, v); }},
      {"replicates", [&](auto& k, auto& v) { config.replicates = to_uint(k, v); }},
      {"seed", [&](auto& k, auto& v) { config.seed = to_uint(k, v); }},
      {"workers",
       [&](auto& k, auto& v) { config.workers = static_cast<int>(to_uint(k, v)); }},
  };
  for (const auto& [key, value] : values) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }
}

RunConfig load_config(const std::filesystem::path& file, RunConfig base) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open config file " + file.string());
  apply_config(parse_key_values(in), base);
  return base;
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto& s = c.selection;
  const auto& d = c.design;
  out << "# optimisation\n"
      << "learning_rate = " << num(s.prox.learning_rate) << '\n'
      << "hierarchy = " << num(s.prox.hierarchy) << '\n'
      << "prox_rule = " << to_string(s.prox.rule) << '\n'
      << "multiplier = " << num(s.path.multiplier) << '\n'
      << "warmup_epochs = " << s.path.warmup_epochs << '\n'
      << "epochs_per_step = " << s.path.epochs_per_step << '\n'
      << "batch_rule = " << to_string(s.path.batch_rule) << '\n'
      << "lambda_start = " << num(s.path.lambda_start) << '\n'
      << "lambda_start_rule = " << to_string(s.path.lambda_start_rule) << '\n'
      << "lambda_start_factor = " << num(s.path.lambda_start_factor) << '\n'
      << "lambda_bound_factor = " << num(s.path.lambda_bound_factor) << '\n'
      << "lambda_max = " << num(s.path.lambda_max) << '\n'
      << "max_steps = " << s.path.max_steps << '\n'
      << "# selection\n"
      << "split = " << num(s.ratios.train) << ',' << num(s.ratios.validation) << ','
      << num(s.ratios.test) << '\n'
      << "criterion = " << to_string(s.criterion) << '\n'
      << "criteria = " << join(c.criteria, ';', [](Criterion x) { return to_string(x); }) << '\n'
      << "tau = " << num(s.tau) << '\n'
      << "penalty_n = " << to_string(s.penalty_n) << '\n'
      << "fbic_ties = " << to_string(s.fbic_ties) << '\n'
      << "mr_ties = " << to_string(s.mr_ties) << '\n'
      << "loss = " << (s.loss == LossKind::hinge ? "hinge" : "cross_entropy") << '\n'
      << "standardize = " << (s.standardize ? "true" : "false") << '\n'
      << "hidden = " << format_hidden_grid(s.grid.hidden) << '\n'
      << "truncations = "
      << join(s.grid.truncations, ';', [](std::size_t q) { return std::to_string(q); }) << '\n'
      << "dropouts = " << join(s.grid.dropouts, ';', [](double g) { return num(g); }) << '\n'
      << "# simulation\n"
      << "model = " << model_name(d.model) << '\n'
      << "n_per_class = " << d.n_per_class << '\n'
      << "p = " << d.p << '\n'
      << "grid_size = " << d.grid_size << '\n'
      << "curve_grid_size = " << d.curve_grid_size << '\n'
      << "curve_features = " << d.curve_features << '\n'
      << "noise_sd = " << num(d.noise_sd) << '\n'
      << "replicates = " << c.replicates << '\n'
      << "# run\n"
      << "seed = " << c.seed << '\n'
      << "workers = " << c.workers << '\n';
}

}  // namespace fbdnn
