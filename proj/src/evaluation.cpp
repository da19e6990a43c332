#include "fbdnn/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>

#include <omp.h>

#include "fbdnn/error.hpp"

namespace fbdnn {

MatchResult emr_fp(std::span<const std::size_t> selected,
                   std::span<const std::size_t> truth, std::size_t p) {
  const auto check = [p](std::span<const std::size_t> s, const char* what) {
    for (auto j : s)
      if (j < 1 || j > p)
        throw DomainError(std::string(what) + " index " + std::to_string(j) +
                          " outside 1.." + std::to_string(p));
  };
  check(selected, "selected");
  check(truth, "truth");
  const std::set<std::size_t> s(selected.begin(), selected.end());
  const std::set<std::size_t> t(truth.begin(), truth.end());
  MatchResult r;
  r.match = s == t ? 1 : 0;
  for (auto j : s) r.fp += t.count(j) == 0;
  return r;
}

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  return 1.0 - misclassification_risk(preds, labels);
}

AggregateRow aggregate_rows(std::span<const ReplicateRow> rows) {
  AggregateRow a;
  a.replicates = rows.size();
  std::size_t ok = 0;
  for (const auto& r : rows) {
    if (!r.ok) {
      ++a.failed;
      continue;
    }
    ++ok;
    a.emr += r.emr;
    a.fp += static_cast<double>(r.fp);
    a.accuracy += r.accuracy;
    a.p0 += static_cast<double>(r.p0);
  }
  if (ok == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    a.emr = a.fp = a.accuracy = a.p0 = nan;
    return a;
  }
  const double n = static_cast<double>(ok);
  a.emr /= n;
  a.fp /= n;
  a.accuracy /= n;
  a.p0 /= n;
  return a;
}

std::vector<MetricsReport> run_replicates(const SimDesign& design,
                                          const SelectionConfig& config,
                                          std::span<const Criterion> criteria,
                                          std::size_t replicates, std::uint64_t base_seed,
                                          int workers, const ReplicateProgress& progress) {
  if (replicates < 1) throw ConfigError("need at least one replicate");
  if (criteria.empty()) throw ConfigError("no selection criterion given");
  design.validate();
  config.validate();

  const std::size_t nc = criteria.size();
  const auto truth = design.truth();
  // rows[k][r]: criterion k, replicate r.
  std::vector<std::vector<ReplicateRow>> rows(nc, std::vector<ReplicateRow>(replicates));
  std::vector<bool> forced(nc, false);

  const int threads = workers > 0 ? workers : omp_get_max_threads();
  SelectionConfig inner = config;
  inner.workers = 1;  // parallelism lives at the replicate level
  const auto count = static_cast<std::ptrdiff_t>(replicates);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t ri = 0; ri < count; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = base_seed + r;
    for (std::size_t k = 0; k < nc; ++k) {
      rows[k][r].index = r;
      rows[k][r].seed = seed;
    }
    try {
      SimDesign d = design;
      d.seed = seed;
      const auto data = gen_model(d);
      const auto split = split_dataset(data, inner.ratios, derive_seed(seed, 0));
      const auto results = select_models(data, split, inner, criteria, seed);
      const auto y_test = [&] {
        std::vector<int> y;
        for (auto i : split.test) y.push_back(data.labels[i]);
        return y;
      }();
      for (std::size_t k = 0; k < nc; ++k) {
        const auto& res = results[k];
        auto& row = rows[k][r];
        std::vector<std::size_t> sel;
        for (auto j : res.selected) sel.push_back(j + 1);
        const auto m = emr_fp(sel, truth, d.p);
        row.emr = m.match;
        row.fp = m.fp;
        row.p0 = sel.size();
        row.selected = sel;
        row.chosen = res.candidates[res.chosen].candidate;
        row.lambda = res.lambda;
        row.criterion_value = res.value;
        row.accuracy = split.test.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : accuracy(predict_labels(res.model, data, split.test, 1), y_test);
        if (res.criterion_forced) {
#pragma omp critical(fbdnn_forced)
          forced[k] = true;
        }
      }
    } catch (const std::exception& e) {
      for (std::size_t k = 0; k < nc; ++k) {
        rows[k][r].ok = false;
        rows[k][r].error = e.what();
      }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t k = 0; k < nc; ++k) rows[k][r].runtime_seconds = secs;
    if (progress) {
#pragma omp critical(fbdnn_progress)
      progress(r, secs);
    }
  }

  std::vector<MetricsReport> reports(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    reports[k].criterion = config.loss == LossKind::hinge ? Criterion::mr : criteria[k];
    reports[k].criterion_forced = forced[k];
    reports[k].design = design;
    reports[k].rows = std::move(rows[k]);
    reports[k].aggregate = aggregate_rows(reports[k].rows);
  }
  return reports;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_one_based(const std::vector<std::size_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(s[i]);
  }
  return out;
}

// CSV-safe: error messages may contain commas or quotes.
std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "replicate,seed,status,emr,fp,accuracy,p0,L,widths,q1,gamma,lambda,criterion_value,"
         "selected,error\n";
  for (const auto& r : report.rows) {
    out << r.index << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      out << r.emr << ',' << r.fp << ',' << num(r.accuracy) << ',' << r.p0 << ','
          << r.chosen.hidden.size() << ',' << join_widths(r.chosen.hidden) << ','
          << r.chosen.truncation << ',' << num(r.chosen.dropout) << ',' << num(r.lambda)
          << ',' << num(r.criterion_value) << ',' << join_one_based(r.selected) << ",\n";
    } else {
      out << ",,,,,,,,,,," << quoted(r.error) << '\n';
    }
  }
  const auto& a = report.aggregate;
  out << "mean,," << a.replicates - a.failed << '/' << a.replicates << ',' << num(a.emr)
      << ',' << num(a.fp) << ',' << num(a.accuracy) << ',' << num(a.p0) << ",,,,,,,,\n";
}

nlohmann::json design_to_json(const SimDesign& d) {
  nlohmann::json j;
  j["model"] = model_name(d.model);
  j["n_per_class"] = d.n_per_class;
  j["p"] = d.p;
  j["grid_size"] = d.grid_size;
  if (d.mixed()) {
    j["curve_grid_size"] = d.curve_grid_size;
    j["curve_features"] = d.curve_features;
  }
  j["noise_sd"] = d.noise_sd;
  j["seed"] = d.seed;
  j["classes"] = SimDesign::kClasses;
  j["truth"] = d.truth();
  return j;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["criterion"] = to_string(report.criterion);
  j["criterion_forced"] = report.criterion_forced;
  j["design"] = design_to_json(report.design);
  j["design"].erase("seed");
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row;
    row["replicate"] = r.index;
    row["seed"] = r.seed;
    row["ok"] = r.ok;
    if (r.ok) {
      row["emr"] = r.emr;
      row["fp"] = r.fp;
      row["accuracy"] = r.accuracy;
      row["p0"] = r.p0;
      row["selected"] = r.selected;
      row["hidden"] = r.chosen.hidden;
      row["truncation"] = r.chosen.truncation;
      row["dropout"] = r.chosen.dropout;
      row["lambda"] = r.lambda;
      row["criterion_value"] = r.criterion_value;
    } else {
      row["error"] = r.error;
    }
    rows.push_back(row);
  }
  j["replicates"] = rows;
  const auto& a = report.aggregate;
  j["aggregate"] = {{"replicates", a.replicates}, {"failed", a.failed}, {"emr", a.emr},
                    {"fp", a.fp},                 {"accuracy", a.accuracy}, {"p0", a.p0}};
  return j;
}

void write_timing_csv(std::ostream& out, const MetricsReport& report) {
  out << "replicate,seed,seconds\n";
  for (const auto& r : report.rows)
    out << r.index << ',' << r.seed << ',' << num(r.runtime_seconds) << '\n';
}

}  // namespace fbdnn
