#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fbdnn/checkpoint.hpp"
#include "fbdnn/funcdata.hpp"
#include "fbdnn/kernels.hpp"
#include "fbdnn/lassonet.hpp"
#include "fbdnn/network.hpp"

namespace fbdnn {

enum class Criterion { fbic, mr };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& name);

/// Which sample size divides the F-BIC penalty.
enum class PenaltyN { total, validation };

std::string to_string(PenaltyN n);
PenaltyN penalty_n_from_string(const std::string& name);

/// How equal criterion values are ordered. `sparse`: smaller p0, then
/// smaller lambda. `path_order`: smaller lambda only, i.e. the first minimizer
/// met when walking each path from dense to sparse.
enum class TieBreak { sparse, path_order };

std::string to_string(TieBreak t);
TieBreak tie_break_from_string(const std::string& name);

/// The values of tau reported side by side in criterion tables.
inline constexpr std::array<double, 4> kTauValues{-1.0, 0.0, 1.0, 2.0};

struct FbicTerms {
  double loglik = 0.0;   // sum of -log(max(p_{i,y_i}, floor)) over validation rows
  double penalty = 0.0;  // 3 * 10^tau * p0 * ln(p) / n
  double value = 0.0;
};

/// `probs` is row-major, one simplex vector of width `classes` per label.
FbicTerms fbic_terms(std::span<const double> probs, std::size_t classes,
                     std::span<const int> labels, std::size_t p0, std::size_t p,
                     std::size_t n, double tau);
double fbic(std::span<const double> probs, std::size_t classes,
            std::span<const int> labels, std::size_t p0, std::size_t p, std::size_t n,
            double tau);

/// Fraction of positions where the prediction differs from the label.
double misclassification_risk(std::span<const int> preds, std::span<const int> labels);

/// One architecture x basis combination.
struct Candidate {
  std::vector<std::size_t> hidden;
  std::size_t truncation = 1;
  double dropout = 0.0;

  bool operator==(const Candidate&) const = default;
};

/// Cartesian product of hidden-layer shapes, truncations and dropout rates.
struct CandidateGrid {
  std::vector<std::vector<std::size_t>> hidden{{100}};
  std::vector<std::size_t> truncations{6};
  std::vector<double> dropouts{0.0};

  void validate() const;
  /// Hidden shape varies slowest, dropout fastest.
  std::vector<Candidate> expand() const;
};

struct SelectionConfig {
  CandidateGrid grid;
  PathConfig path;
  ProxConfig prox;
  SplitRatios ratios;
  Criterion criterion = Criterion::fbic;
  double tau = 0.0;
  PenaltyN penalty_n = PenaltyN::total;
  TieBreak fbic_ties = TieBreak::sparse;
  TieBreak mr_ties = TieBreak::path_order;
  LossKind loss = LossKind::cross_entropy;
  bool standardize = true;
  int workers = 0;  // <= 0: OpenMP default

  void validate() const;
};

/// One (candidate, checkpoint) line of the criterion table.
struct CriterionRow {
  std::size_t candidate = 0;
  std::size_t step = 0;
  double lambda = 0.0;
  std::size_t p0 = 0;
  double loglik = 0.0;
  double penalty = 0.0;                     // at the configured tau
  std::array<double, kTauValues.size()> fbic_by_tau{};
  double mr = 0.0;
  double criterion = 0.0;                   // the value being minimized
  std::vector<std::size_t> selected;        // 0-based
};

struct CandidateReport {
  Candidate candidate;
  PathStatus status = PathStatus::completed;
  std::size_t checkpoints = 0;
  double lambda_start = 0.0;
  ProxStats prox;
  std::string error;  // non-empty if the candidate could not be fitted
};

struct SelectionResult {
  Criterion criterion = Criterion::fbic;
  bool criterion_forced = false;  // hinge mode has no probabilities, so MR is used
  std::size_t chosen = 0;         // index into `candidates`
  std::size_t step = 0;
  double lambda = 0.0;
  double value = 0.0;
  FittedModel model;
  std::vector<std::size_t> selected;  // 0-based, features with nonzero residual block
  SplitIndices split;
  std::vector<CandidateReport> candidates;
  std::vector<CriterionRow> table;
};

/// Splits the data, fits a path per candidate on the training part, scores
/// every checkpoint on the validation part and returns the minimizer. Ties
/// follow the configured TieBreak for the criterion, then the earlier
/// candidate. Test rows are never read. Throws SelectionError if no candidate produced a checkpoint.
SelectionResult select_model(const FunctionalDataset& dataset,
                             const SelectionConfig& config, std::uint64_t seed,
                             AccessLog* log = nullptr);

/// Same, on a caller-supplied split.
SelectionResult select_model(const FunctionalDataset& dataset, const SplitIndices& split,
                             const SelectionConfig& config, std::uint64_t seed,
                             AccessLog* log = nullptr);

/// Several criteria over one set of fitted paths, one result per criterion.
std::vector<SelectionResult> select_models(const FunctionalDataset& dataset,
                                           const SplitIndices& split,
                                           const SelectionConfig& config,
                                           std::span<const Criterion> criteria,
                                           std::uint64_t seed, AccessLog* log = nullptr);

/// Mean and standard deviation per column; constant columns keep scale 1.
ScoreScaler fit_scaler(const ScoreMatrix& scores);

/// Projected and standardized scores of `rows` under a fitted model.
ScoreMatrix model_scores(const FittedModel& model, const FunctionalDataset& dataset,
                         std::span<const std::size_t> rows, int workers = 0,
                         AccessLog* log = nullptr);
std::vector<int> predict_labels(const FittedModel& model, const FunctionalDataset& dataset,
                                std::span<const std::size_t> rows, int workers = 0,
                                AccessLog* log = nullptr);

/// CSV with one row per (candidate, checkpoint).
void write_criterion_table(std::ostream& out, const SelectionResult& result,
                           const SelectionConfig& config);

std::string join_widths(const std::vector<std::size_t>& widths);

}  // namespace fbdnn
