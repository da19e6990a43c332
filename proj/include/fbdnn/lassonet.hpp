#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fbdnn/funcdata.hpp"
#include "fbdnn/network.hpp"

namespace fbdnn {

/// How hier_prox picks the active count u among the sorted first-layer weights.
///
/// `fixed_factor`: the bracket rule with the fixed C / (1 + C^2) factor, falling
/// back to `group_search` when no u satisfies the bracket.
/// `group_search`: every u gets its exact candidate radius
/// C / (1 + u C^2) * S(||b|| + C * sum of the u largest |w|), and the one with
/// the smallest proximal objective wins. This is the global minimizer.
enum class ProxRule { fixed_factor, group_search };

std::string to_string(ProxRule rule);
ProxRule prox_rule_from_string(const std::string& name);

struct ProxConfig {
  double hierarchy = 10.0;      // C
  double learning_rate = 1e-3;  // alpha, shared with Adam
  ProxRule rule = ProxRule::group_search;

  void validate() const;
};

enum class ProxBranch { zero_skip, bracket, search };

struct ProxOutcome {
  ProxBranch branch = ProxBranch::zero_skip;
  std::size_t active = 0;  // u*
  double radius = 0.0;     // zeta_{u*}
};

/// sign(z) * max(|z| - t, 0).
double soft_threshold(double z, double t);

/// Proximal objective 1/2||b - b0||^2 + 1/2||W - W0||^2 + t ||b||.
double prox_objective(std::span<const double> b, std::span<const double> w,
                      std::span<const double> b0, std::span<const double> w0,
                      double threshold);

/// Hierarchical proximal update of one feature's residual block `b` and
/// first-hidden-layer block `w`, in place. On exit ||w||_inf <= C ||b||.
/// A zero residual block zeroes both. Throws NumericalError on non-finite input.
ProxOutcome hier_prox(std::span<double> b, std::span<double> w, double threshold,
                      double hierarchy, ProxRule rule = ProxRule::group_search);

enum class BatchRule { natural_log, base2_log };

std::string to_string(BatchRule rule);
BatchRule batch_rule_from_string(const std::string& name);

/// 2^floor(log n), capped at n.
std::size_t batch_size_for(std::size_t n, BatchRule rule);

/// Starting penalty when none is given explicitly.
///
/// `gradient`: factor times the mean |dLoss/dB| after warm-up. Collapses
/// towards zero when the warm-up fits the training set, which leaves a long
/// stretch of path steps where nothing is penalised.
/// `prox_bound`: factor times min_j (||b_j|| + C ||W1_j||_1) / alpha, the
/// threshold at which one prox call is certain to zero some feature.
enum class LambdaStartRule { gradient, prox_bound };

std::string to_string(LambdaStartRule rule);
LambdaStartRule lambda_start_rule_from_string(const std::string& name);

struct PathConfig {
  double lambda_start = 0.0;  // > 0 overrides the rule below
  LambdaStartRule lambda_start_rule = LambdaStartRule::prox_bound;
  double lambda_start_factor = 1e-3;  // gradient rule
  double lambda_bound_factor = 1e-4;  // prox_bound rule
  double multiplier = 0.02;        // delta
  std::size_t warmup_epochs = 200; // B_init
  std::size_t epochs_per_step = 20;// B
  BatchRule batch_rule = BatchRule::natural_log;
  double lambda_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 5000;
  bool store_params = true;

  void validate() const;
};

struct PathCheckpoint {
  std::size_t step = 0;
  double lambda = 0.0;
  NetworkParams params;
  std::size_t p0 = 0;
  std::vector<std::size_t> selected;  // 0-based feature indices
  double train_loss = 0.0;
};

struct ProxStats {
  std::size_t bracket = 0;
  std::size_t search = 0;
  std::size_t zero_skip = 0;
};

enum class PathStatus { completed, lambda_ceiling, step_limit, diverged };

std::string to_string(PathStatus status);

struct PathResult {
  std::vector<PathCheckpoint> checkpoints;
  PathStatus status = PathStatus::completed;
  double lambda_start = 0.0;
  double warmup_loss = 0.0;
  ProxStats prox;
};

/// Called once per recorded checkpoint, before it is stored.
using CheckpointObserver = std::function<void(const PathCheckpoint&)>;

/// Dense-to-sparse training along the geometric lambda path: a dense Adam
/// warm-up, then repeated (lambda *= 1 + delta; B epochs of Adam + hier_prox)
/// until no feature survives. Bitwise deterministic given the seed.
PathResult train_path(const ScoreMatrix& scores, std::span<const int> labels,
                      const Architecture& arch, const ProxConfig& prox,
                      const PathConfig& path, std::uint64_t seed,
                      const CheckpointObserver& observer = {});

/// Mean training loss of `params` over all rows, eval mode.
double mean_loss(const NetworkParams& params, const ScoreMatrix& scores,
                 std::span<const int> labels);

/// Path log: lambda,p0,train_loss,selected (1-based, ';'-joined).
void write_path_log(std::ostream& out, const std::vector<PathCheckpoint>& path);
std::string join_features(const std::vector<std::size_t>& zero_based);

/// 64-bit mixing used to derive independent seeds from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace fbdnn
