#include "fbdnn/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <tuple>

#include <omp.h>

#include "fbdnn/error.hpp"

namespace fbdnn {

std::string to_string(Criterion c) { return c == Criterion::fbic ? "fbic" : "mr"; }

Criterion criterion_from_string(const std::string& name) {
  if (name == "fbic" || name == "f-bic") return Criterion::fbic;
  if (name == "mr") return Criterion::mr;
  throw ConfigError("unknown criterion '" + name + "' (expected fbic or mr)");
}

std::string to_string(PenaltyN n) { return n == PenaltyN::total ? "total" : "validation"; }

PenaltyN penalty_n_from_string(const std::string& name) {
  if (name == "total") return PenaltyN::total;
  if (name == "validation") return PenaltyN::validation;
  throw ConfigError("unknown penalty sample size '" + name + "'");
}

std::string to_string(TieBreak t) { return t == TieBreak::sparse ? "sparse" : "path_order"; }

TieBreak tie_break_from_string(const std::string& name) {
  if (name == "sparse") return TieBreak::sparse;
  if (name == "path_order" || name == "path-order") return TieBreak::path_order;
  throw ConfigError("unknown tie break '" + name + "'");
}

FbicTerms fbic_terms(std::span<const double> probs, std::size_t classes,
                     std::span<const int> labels, std::size_t p0, std::size_t p,
                     std::size_t n, double tau) {
  if (labels.empty()) throw ShapeError("F-BIC needs a nonempty validation set");
  if (n < 1 || p < 1) throw DomainError("F-BIC needs n >= 1 and p >= 1");
  if (classes < 1 || probs.size() != labels.size() * classes)
    throw ShapeError("probability table does not match the label count");
  FbicTerms t;
  for (std::size_t i = 0; i < labels.size(); ++i)
    t.loglik += loss_cross_entropy(probs.subspan(i * classes, classes), labels[i]);
  t.penalty = 3.0 * std::pow(10.0, tau) * static_cast<double>(p0) *
              std::log(static_cast<double>(p)) / static_cast<double>(n);
  t.value = t.loglik + t.penalty;
  return t;
}

double fbic(std::span<const double> probs, std::size_t classes, std::span<const int> labels,
            std::size_t p0, std::size_t p, std::size_t n, double tau) {
  return fbic_terms(probs, classes, labels, p0, p, n, tau).value;
}

double misclassification_risk(std::span<const int> preds, std::span<const int> labels) {
  if (preds.empty()) throw ShapeError("misclassification risk of an empty set");
  if (preds.size() != labels.size())
    throw ShapeError("predictions and labels differ in length");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) wrong += preds[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(preds.size());
}

void CandidateGrid::validate() const {
  if (hidden.empty() || truncations.empty() || dropouts.empty())
    throw ConfigError("candidate grid is empty");
  for (const auto& h : hidden) {
    if (h.empty()) throw ConfigError("a candidate has no hidden layers");
    for (auto w : h)
      if (w < 1) throw ConfigError("hidden widths must be at least 1");
  }
  for (auto q : truncations)
    if (q < 1) throw ConfigError("truncations must be at least 1");
  for (double g : dropouts)
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
}

std::vector<Candidate> CandidateGrid::expand() const {
  std::vector<Candidate> out;
  for (const auto& h : hidden)
    for (auto q : truncations)
      for (double g : dropouts) out.push_back({h, q, g});
  return out;
}

void SelectionConfig::validate() const {
  grid.validate();
  path.validate();
  prox.validate();
  if (ratios.train <= 0.0 || ratios.validation <= 0.0 || ratios.test < 0.0 ||
      ratios.train + ratios.validation + ratios.test > 1.0 + 1e-9)
    throw ConfigError("split ratios must be positive and sum to at most 1");
}

ScoreScaler fit_scaler(const ScoreMatrix& scores) {
  ScoreScaler s = ScoreScaler::identity(scores.cols);
  if (scores.rows == 0) return s;
  const double n = static_cast<double>(scores.rows);
  for (std::size_t c = 0; c < scores.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < scores.rows; ++r) mean += scores.data[r * scores.cols + c];
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < scores.rows; ++r) {
      const double z = scores.data[r * scores.cols + c] - mean;
      var += z * z;
    }
    const double sd = std::sqrt(var / n);
    s.mean[c] = mean;
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

namespace {

void standardize(ScoreMatrix& m, const ScoreScaler& s) {
  for (std::size_t r = 0; r < m.rows; ++r) s.apply(m.row(r));
}

std::vector<int> gather_labels(const FunctionalDataset& ds, std::span<const std::size_t> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(ds.labels[r]);
  return y;
}

// Ordering key for the argmin: criterion, then sparsity (zero under the
// path_order rule), then lambda, then position in the grid and along the path.
using RankKey = std::tuple<double, std::size_t, double, std::size_t, std::size_t>;

struct CandidateOutcome {
  CandidateReport report;
  std::vector<CriterionRow> rows;  // criterion column filled per result later
  std::vector<std::optional<RankKey>> best;
  std::vector<NetworkParams> best_params;
};

}  // namespace

SelectionResult select_model(const FunctionalDataset& dataset, const SelectionConfig& config,
                             std::uint64_t seed, AccessLog* log) {
  dataset.validate();
  config.validate();
  const auto split = split_dataset(dataset, config.ratios, derive_seed(seed, 0));
  return select_model(dataset, split, config, seed, log);
}

SelectionResult select_model(const FunctionalDataset& dataset, const SplitIndices& split,
                             const SelectionConfig& config, std::uint64_t seed,
                             AccessLog* log) {
  const Criterion c = config.criterion;
  return std::move(select_models(dataset, split, config, {&c, 1}, seed, log).front());
}

std::vector<SelectionResult> select_models(const FunctionalDataset& dataset,
                                           const SplitIndices& split,
                                           const SelectionConfig& config,
                                           std::span<const Criterion> criteria,
                                           std::uint64_t seed, AccessLog* log) {
  dataset.validate();
  config.validate();
  if (criteria.empty()) throw ConfigError("no selection criterion given");
  if (split.train.empty() || split.validation.empty())
    throw ShapeError("selection needs nonempty training and validation parts");

  // Hinge mode has no class probabilities, so F-BIC falls back to MR.
  std::vector<Criterion> effective(criteria.begin(), criteria.end());
  std::vector<bool> forced(criteria.size(), false);
  if (config.loss == LossKind::hinge) {
    for (std::size_t k = 0; k < effective.size(); ++k) {
      if (effective[k] == Criterion::fbic) {
        effective[k] = Criterion::mr;
        forced[k] = true;
      }
    }
  }
  const std::size_t nc = effective.size();

  const auto candidates = config.grid.expand();
  const std::size_t p = dataset.num_features();
  const std::size_t n_penalty =
      config.penalty_n == PenaltyN::total ? dataset.size() : split.validation.size();
  const auto y_train = gather_labels(dataset, split.train);
  const auto y_val = gather_labels(dataset, split.validation);

  // Projection depends only on the truncation; share it across candidates.
  std::vector<std::size_t> truncs = config.grid.truncations;
  std::sort(truncs.begin(), truncs.end());
  truncs.erase(std::unique(truncs.begin(), truncs.end()), truncs.end());
  struct Projected {
    BasisSpec basis;
    ScoreScaler scaler;
    ScoreMatrix train, val;
  };
  std::vector<Projected> projected;
  for (auto q : truncs) {
    Projected pr;
    pr.basis = BasisSpec::uniform(dataset.feature_grids, q);
    const Projector projector(dataset.feature_grids, pr.basis);
    pr.train = project_rows(dataset, split.train, projector, config.workers, log);
    pr.val = project_rows(dataset, split.validation, projector, config.workers, log);
    pr.scaler = config.standardize ? fit_scaler(pr.train)
                                   : ScoreScaler::identity(pr.train.cols);
    standardize(pr.train, pr.scaler);
    standardize(pr.val, pr.scaler);
    projected.push_back(std::move(pr));
  }
  const auto projection_for = [&](std::size_t q) -> const Projected& {
    return projected[static_cast<std::size_t>(
        std::lower_bound(truncs.begin(), truncs.end(), q) - truncs.begin())];
  };

  std::vector<CandidateOutcome> outcomes(candidates.size());
  const auto count = static_cast<std::ptrdiff_t>(candidates.size());
  const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t ci = 0; ci < count; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const Candidate& cand = candidates[c];
    CandidateOutcome& out = outcomes[c];
    out.report.candidate = cand;
    out.best.assign(nc, std::nullopt);
    out.best_params.assign(nc, NetworkParams());
    try {
      const Projected& pr = projection_for(cand.truncation);
      const auto arch = Architecture::for_task(pr.basis.truncations(), cand.hidden,
                                               dataset.num_classes, config.loss,
                                               cand.dropout);
      PathConfig path = config.path;
      path.store_params = false;

      const auto observe = [&](const PathCheckpoint& cp) {
        const auto outputs = predict_outputs_serial(cp.params, pr.val);
        const auto preds = labels_from_outputs(outputs, arch.output_dim, arch.output);
        CriterionRow row;
        row.candidate = c;
        row.step = cp.step;
        row.lambda = cp.lambda;
        row.p0 = cp.p0;
        row.selected = cp.selected;
        row.mr = misclassification_risk(preds, y_val);
        if (arch.output == OutputMode::softmax) {
          for (std::size_t t = 0; t < kTauValues.size(); ++t)
            row.fbic_by_tau[t] = fbic(outputs, arch.output_dim, y_val, cp.p0, p,
                                      n_penalty, kTauValues[t]);
          const auto terms = fbic_terms(outputs, arch.output_dim, y_val, cp.p0, p,
                                        n_penalty, config.tau);
          row.loglik = terms.loglik;
          row.penalty = terms.penalty;
        } else {
          row.loglik = std::numeric_limits<double>::quiet_NaN();
          row.penalty = std::numeric_limits<double>::quiet_NaN();
          row.fbic_by_tau.fill(std::numeric_limits<double>::quiet_NaN());
        }
        for (std::size_t k = 0; k < nc; ++k) {
          const double value =
              effective[k] == Criterion::fbic ? row.loglik + row.penalty : row.mr;
          if (!std::isfinite(value)) continue;
          const TieBreak ties =
              effective[k] == Criterion::fbic ? config.fbic_ties : config.mr_ties;
          const std::size_t sparsity = ties == TieBreak::sparse ? row.p0 : 0;
          const RankKey key{value, sparsity, row.lambda, c, row.step};
          if (!out.best[k] || key < *out.best[k]) {
            out.best[k] = key;
            out.best_params[k] = cp.params;
          }
        }
        out.rows.push_back(std::move(row));
      };

      const auto r = train_path(pr.train, y_train, arch, config.prox, path,
                                derive_seed(seed, 100 + c), observe);
      out.report.status = r.status;
      out.report.checkpoints = r.checkpoints.size();
      out.report.lambda_start = r.lambda_start;
      out.report.prox = r.prox;
      if (r.checkpoints.empty())
        out.report.error = "no checkpoint before " + to_string(r.status);
    } catch (const std::exception& e) {
      out.report.error = e.what();
      out.best.assign(nc, std::nullopt);
    }
  }

  std::vector<CandidateReport> reports;
  std::vector<CriterionRow> table;
  for (auto& o : outcomes) {
    reports.push_back(o.report);
    for (auto& row : o.rows) table.push_back(std::move(row));
  }

  std::vector<SelectionResult> results(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    SelectionResult& result = results[k];
    result.criterion = effective[k];
    result.criterion_forced = forced[k];
    result.split = split;
    result.candidates = reports;
    result.table = table;
    for (auto& row : result.table)
      row.criterion = effective[k] == Criterion::fbic ? row.loglik + row.penalty : row.mr;

    std::optional<RankKey> best;
    for (std::size_t c = 0; c < outcomes.size(); ++c) {
      const auto& b = outcomes[c].best[k];
      if (b && (!best || *b < *best)) {
        best = b;
        result.chosen = c;
      }
    }
    if (!best) {
      std::string msg = "no candidate produced a usable checkpoint:";
      for (const auto& r : reports)
        msg += " [L=" + std::to_string(r.candidate.hidden.size()) + " widths=" +
               join_widths(r.candidate.hidden) +
               " q=" + std::to_string(r.candidate.truncation) + ": " +
               (r.error.empty() ? to_string(r.status) : r.error) + "]";
      throw SelectionError(msg);
    }
    const Projected& pr = projection_for(candidates[result.chosen].truncation);
    result.value = std::get<0>(*best);
    result.lambda = std::get<2>(*best);
    result.step = std::get<4>(*best);
    result.model.basis = pr.basis;
    result.model.scaler = pr.scaler;
    result.model.params = outcomes[result.chosen].best_params[k];
    result.selected = result.model.params.active_features();
  }
  return results;
}

ScoreMatrix model_scores(const FittedModel& model, const FunctionalDataset& dataset,
                         std::span<const std::size_t> rows, int workers, AccessLog* log) {
  if (model.basis.num_features() != dataset.num_features())
    throw ShapeError("model expects " + std::to_string(model.basis.num_features()) +
                     " features, dataset has " + std::to_string(dataset.num_features()));
  const Projector projector(dataset.feature_grids, model.basis);
  auto scores = project_rows(dataset, rows, projector, workers, log);
  standardize(scores, model.scaler);
  return scores;
}

std::vector<int> predict_labels(const FittedModel& model, const FunctionalDataset& dataset,
                                std::span<const std::size_t> rows, int workers,
                                AccessLog* log) {
  const auto scores = model_scores(model, dataset, rows, workers, log);
  const auto& arch = model.params.arch();
  return labels_from_outputs(predict_outputs(model.params, scores, workers),
                             arch.output_dim, arch.output);
}

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(widths[i]);
  }
  return s;
}

void write_criterion_table(std::ostream& out, const SelectionResult& result,
                           const SelectionConfig& config) {
  const auto candidates = config.grid.expand();
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "candidate,L,widths,q1,gamma,step,lambda,p0,loglik,penalty,criterion,mr";
  for (double t : kTauValues) out << ",fbic_tau" << num(t);
  out << ",selected\n";
  for (const auto& row : result.table) {
    const auto& c = candidates.at(row.candidate);
    out << row.candidate << ',' << c.hidden.size() << ',' << join_widths(c.hidden) << ','
        << c.truncation << ',' << num(c.dropout) << ',' << row.step << ','
        << num(row.lambda) << ',' << row.p0 << ',' << num(row.loglik) << ','
        << num(row.penalty) << ',' << num(row.criterion) << ',' << num(row.mr);
    for (double v : row.fbic_by_tau) out << ',' << num(v);
    out << ',' << join_features(row.selected) << '\n';
  }
}

}  // namespace fbdnn
