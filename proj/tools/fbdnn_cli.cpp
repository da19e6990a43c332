// Command-line front end: simulate, train, select, evaluate, replicate.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbdnn/checkpoint.hpp"
#include "fbdnn/config.hpp"
#include "fbdnn/error.hpp"
#include "fbdnn/evaluation.hpp"
#include "fbdnn/funcdata.hpp"
#include "fbdnn/lassonet.hpp"
#include "fbdnn/selection.hpp"
#include "fbdnn/simgen.hpp"

namespace fs = std::filesystem;
using namespace fbdnn;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string config_file;
};

// Command-line design overrides shared by simulate and replicate.
struct DesignFlags {
  std::string model;
  std::optional<std::size_t> n_per_class, p, grid_size;
  std::optional<double> noise_sd;

  void add(CLI::App* cmd) {
    cmd->add_option("--model", model, "Simulation model, I..VI");
    cmd->add_option("--n-per-class", n_per_class, "Samples per class");
    cmd->add_option("--p", p, "Number of functional features");
    cmd->add_option("--grid-size", grid_size, "Grid points per axis of 2D features");
    cmd->add_option("--noise-sd", noise_sd, "Standard deviation of the grid noise");
  }
  void apply(SimDesign& d) const {
    if (!model.empty()) d.model = model_from_string(model);
    if (n_per_class) d.n_per_class = *n_per_class;
    if (p) d.p = *p;
    if (grid_size) d.grid_size = *grid_size;
    if (noise_sd) d.noise_sd = *noise_sd;
  }
};

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config_file.empty() ? RunConfig{} : load_config(g.config_file);
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  c.selection.workers = c.workers;
  return c;
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  std::ofstream out(file);
  if (!out) throw LoadError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError("cannot write " + file.string());
  return out;
}

nlohmann::json split_to_json(const SplitIndices& s) {
  return {{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

nlohmann::json candidate_to_json(const Candidate& c) {
  return {{"hidden", c.hidden}, {"truncation", c.truncation}, {"dropout", c.dropout}};
}

std::vector<std::size_t> one_based(const std::vector<std::size_t>& s) {
  std::vector<std::size_t> out;
  for (auto j : s) out.push_back(j + 1);
  return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::string cur;
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), ',', ';');
  std::istringstream in(normalized);
  while (std::getline(in, cur, ';')) {
    if (cur.empty()) continue;
    try {
      out.push_back(std::stoull(cur));
    } catch (const std::exception&) {
      throw ConfigError("bad feature index '" + cur + "'");
    }
  }
  return out;
}

int cmd_simulate(const Globals& g, const DesignFlags& flags, const std::string& out_dir) {
  auto c = resolve(g);
  flags.apply(c.design);
  c.design.seed = c.seed;
  const auto data = gen_model(c.design);
  save_dataset(data, out_dir);
  write_json(fs::path(out_dir) / "design.json", design_to_json(c.design));
  std::cerr << "wrote " << data.size() << " samples x " << data.num_features()
            << " features to " << out_dir << '\n';
  return 0;
}

int cmd_train(const Globals& g, const std::string& data_dir, const std::string& out_dir,
              const std::string& hidden, std::size_t truncation, double dropout,
              bool all_checkpoints) {
  const auto c = resolve(g);
  const auto data = load_dataset(data_dir);
  const auto& sel = c.selection;
  const auto split = split_dataset(data, sel.ratios, derive_seed(c.seed, 0));

  const auto basis = BasisSpec::uniform(data.feature_grids, truncation);
  const Projector projector(data.feature_grids, basis);
  auto scores = project_rows(data, split.train, projector, c.workers);
  const auto scaler = sel.standardize ? fit_scaler(scores) : ScoreScaler::identity(scores.cols);
  for (std::size_t r = 0; r < scores.rows; ++r) scaler.apply(scores.row(r));
  std::vector<int> labels;
  for (auto i : split.train) labels.push_back(data.labels[i]);

  const auto widths = parse_hidden_grid(hidden);
  if (widths.size() != 1) throw ConfigError("train takes a single hidden shape");
  const auto arch = Architecture::for_task(basis.truncations(), widths.front(),
                                           data.num_classes, sel.loss, dropout);

  fs::create_directories(fs::path(out_dir) / "checkpoints");
  std::vector<std::size_t> last_selected{static_cast<std::size_t>(-1)};
  std::size_t written = 0;
  PathConfig path = sel.path;
  path.store_params = false;
  const auto save = [&](const PathCheckpoint& cp) {
    if (!all_checkpoints && cp.selected == last_selected && cp.p0 != 0) return;
    last_selected = cp.selected;
    char name[64];
    std::snprintf(name, sizeof name, "step_%05zu.json", cp.step);
    save_model({basis, scaler, cp.params}, fs::path(out_dir) / "checkpoints" / name);
    ++written;
  };
  const auto result = train_path(scores, labels, arch, sel.prox, path, c.seed, save);

  auto log = open_out(fs::path(out_dir) / "path.csv");
  write_path_log(log, result.checkpoints);
  nlohmann::json summary{{"status", to_string(result.status)},
                         {"lambda_start", result.lambda_start},
                         {"warmup_loss", result.warmup_loss},
                         {"checkpoints", result.checkpoints.size()},
                         {"saved_checkpoints", written},
                         {"prox_branches",
                          {{"bracket", result.prox.bracket},
                           {"search", result.prox.search},
                           {"zero_skip", result.prox.zero_skip}}},
                         {"split", split_to_json(split)}};
  write_json(fs::path(out_dir) / "train.json", summary);
  std::cerr << result.checkpoints.size() << " checkpoints, status "
            << to_string(result.status) << '\n';
  return result.status == PathStatus::diverged ? 3 : 0;
}

int cmd_select(const Globals& g, const std::string& data_dir, const std::string& out_dir) {
  const auto c = resolve(g);
  const auto data = load_dataset(data_dir);
  const auto result = select_model(data, c.selection, c.seed);

  fs::create_directories(out_dir);
  auto table = open_out(fs::path(out_dir) / "criterion_table.csv");
  write_criterion_table(table, result, c.selection);
  save_model(result.model, fs::path(out_dir) / "model.json");

  auto cands = nlohmann::json::array();
  for (const auto& r : result.candidates) {
    cands.push_back({{"candidate", candidate_to_json(r.candidate)},
                     {"status", to_string(r.status)},
                     {"checkpoints", r.checkpoints},
                     {"lambda_start", r.lambda_start},
                     {"error", r.error}});
  }
  nlohmann::json j{{"criterion", to_string(result.criterion)},
                   {"criterion_forced", result.criterion_forced},
                   {"tau", c.selection.tau},
                   {"chosen", candidate_to_json(result.candidates[result.chosen].candidate)},
                   {"step", result.step},
                   {"lambda", result.lambda},
                   {"value", result.value},
                   {"selected", one_based(result.selected)},
                   {"split", split_to_json(result.split)},
                   {"candidates", cands}};
  write_json(fs::path(out_dir) / "selection.json", j);
  if (result.criterion_forced)
    std::cerr << "note: hinge loss has no class probabilities; selected by MR\n";
  std::cerr << "selected features: " << join_features(result.selected) << '\n';
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& model_file, const std::string& data_dir,
                 const std::string& split_file, const std::string& truth,
                 const std::string& out_file) {
  const auto c = resolve(g);
  const auto model = load_model(model_file);
  const auto data = load_dataset(data_dir);
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (!split_file.empty()) {
    std::ifstream in(split_file);
    if (!in) throw LoadError("cannot open " + split_file);
    const auto j = nlohmann::json::parse(in);
    rows = j.at("split").at("test").get<std::vector<std::size_t>>();
  }
  const auto preds = predict_labels(model, data, rows, c.workers);
  std::vector<int> labels;
  for (auto r : rows) labels.push_back(data.labels[r]);
  const auto selected = one_based(model.params.active_features());
  nlohmann::json j{{"rows", rows.size()},
                   {"accuracy", accuracy(preds, labels)},
                   {"selected", selected},
                   {"p0", selected.size()}};
  if (!truth.empty()) {
    const auto t = parse_index_list(truth);
    const auto m = emr_fp(selected, t, data.num_features());
    j["exact_match"] = m.match;
    j["false_positives"] = m.fp;
  }
  if (out_file.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out_file, j);
  }
  return 0;
}

int cmd_replicate(const Globals& g, const DesignFlags& flags, std::optional<std::size_t> reps,
                  const std::string& criteria, const std::string& out_dir) {
  auto c = resolve(g);
  flags.apply(c.design);
  if (reps) c.replicates = *reps;
  if (!criteria.empty()) {
    RunConfig tmp;
    apply_config({{"criteria", criteria}}, tmp);
    c.criteria = tmp.criteria;
  }
  const auto reports = run_replicates(
      c.design, c.selection, c.criteria, c.replicates, c.seed, c.workers,
      [](std::size_t i, double s) { std::fprintf(stderr, "replicate %zu: %.1fs\n", i, s); });

  fs::create_directories(out_dir);
  for (const auto& r : reports) {
    const auto stem = "report_" + to_string(r.criterion);
    auto csv = open_out(fs::path(out_dir) / (stem + ".csv"));
    write_report_csv(csv, r);
    write_json(fs::path(out_dir) / (stem + ".json"), report_to_json(r));
    auto timing = open_out(fs::path(out_dir) / ("timing_" + to_string(r.criterion) + ".csv"));
    write_timing_csv(timing, r);
    std::fprintf(stderr, "%s: EMR %.3f  FP %.3f  accuracy %.4f  (%zu/%zu ok)\n",
                 to_string(r.criterion).c_str(), r.aggregate.emr, r.aggregate.fp,
                 r.aggregate.accuracy, r.aggregate.replicates - r.aggregate.failed,
                 r.aggregate.replicates);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-data classification with feature selection along a sparse path"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->expected(1);
  app.add_option("--workers", g.workers, "Worker threads (0: OpenMP default)");
  app.add_option("--config", g.config_file, "key = value configuration file");

  DesignFlags sim_flags, rep_flags;
  std::string out_dir, data_dir, model_file, split_file, truth, out_file, criteria;
  std::string hidden = "100";
  std::size_t truncation = 6;
  double dropout = 0.0;
  bool all_checkpoints = false;
  std::optional<std::size_t> reps;

  auto* sim = app.add_subcommand("simulate", "Generate a simulated dataset directory");
  sim_flags.add(sim);
  sim->add_option("--out", out_dir, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Fit one dense-to-sparse path");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--hidden", hidden, "Hidden widths, comma separated");
  train->add_option("--truncation", truncation, "Basis functions per feature");
  train->add_option("--dropout", dropout, "Dropout rate");
  train->add_flag("--all-checkpoints", all_checkpoints,
                  "Save every checkpoint, not only those where the selected set changes");

  auto* select = app.add_subcommand("select", "Pick architecture, basis size and lambda");
  select->add_option("--data", data_dir, "Dataset directory")->required();
  select->add_option("--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Score a fitted model on a dataset");
  eval->add_option("--model", model_file, "Model JSON")->required();
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--split", split_file, "selection.json whose test rows to use");
  eval->add_option("--truth", truth, "True feature set, 1-based, ';' or ',' separated");
  eval->add_option("--out", out_file, "Write metrics JSON here instead of stdout");

  auto* rep = app.add_subcommand("replicate", "Simulation study over seeded replicates");
  rep_flags.add(rep);
  rep->add_option("--replicates", reps, "Number of replicates");
  rep->add_option("--criteria", criteria, "Criteria, ';' or ',' separated (fbic,mr)");
  rep->add_option("--out", out_dir, "Output directory")->required();

  auto* defaults = app.add_subcommand("defaults", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(g, sim_flags, out_dir);
    if (*train) return cmd_train(g, data_dir, out_dir, hidden, truncation, dropout, all_checkpoints);
    if (*select) return cmd_select(g, data_dir, out_dir);
    if (*eval) return cmd_evaluate(g, model_file, data_dir, split_file, truth, out_file);
    if (*rep) return cmd_replicate(g, rep_flags, reps, criteria, out_dir);
    if (*defaults) {
      write_config(std::cout, resolve(g));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
