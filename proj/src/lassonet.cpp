#include "fbdnn/lassonet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "fbdnn/error.hpp"

namespace fbdnn {

std::string to_string(ProxRule rule) {
  return rule == ProxRule::fixed_factor ? "fixed-factor" : "group-search";
}

ProxRule prox_rule_from_string(const std::string& name) {
  if (name == "fixed-factor" || name == "fixed_factor") return ProxRule::fixed_factor;
  if (name == "group-search" || name == "group_search") return ProxRule::group_search;
  throw ConfigError("unknown prox rule '" + name + "'");
}

void ProxConfig::validate() const {
  if (!(hierarchy > 0.0)) throw ConfigError("hierarchy coefficient C must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

double soft_threshold(double z, double t) {
  const double m = std::abs(z) - t;
  return m > 0.0 ? std::copysign(m, z) : 0.0;
}

double prox_objective(std::span<const double> b, std::span<const double> w,
                      std::span<const double> b0, std::span<const double> w0,
                      double threshold) {
  double db = 0.0, dw = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    db += (b[i] - b0[i]) * (b[i] - b0[i]);
    nb += b[i] * b[i];
  }
  for (std::size_t i = 0; i < w.size(); ++i) dw += (w[i] - w0[i]) * (w[i] - w0[i]);
  return 0.5 * db + 0.5 * dw + threshold * std::sqrt(nb);
}

namespace {

// Objective of the candidate with first-layer bound `radius`, given the
// magnitudes sorted descending with prefix sums of values and squares.
double candidate_objective(double radius, double norm_b, double threshold,
                           double hierarchy, const std::vector<double>& sorted,
                           const std::vector<double>& sum,
                           const std::vector<double>& sum_sq) {
  const auto it = std::partition_point(sorted.begin(), sorted.end(),
                                       [radius](double v) { return v > radius; });
  const auto m = static_cast<std::size_t>(it - sorted.begin());
  const double r = radius / hierarchy;
  const double clipped = sum_sq[m] - 2.0 * radius * sum[m] +
                         static_cast<double>(m) * radius * radius;
  return 0.5 * (r - norm_b) * (r - norm_b) + 0.5 * clipped + threshold * r;
}

double exact_radius(std::size_t u, double norm_b, double partial, double threshold,
                    double hierarchy) {
  return hierarchy / (1.0 + static_cast<double>(u) * hierarchy * hierarchy) *
         soft_threshold(norm_b + hierarchy * partial, threshold);
}

double printed_radius(double norm_b, double partial, double threshold,
                      double hierarchy) {
  return hierarchy / (1.0 + hierarchy * hierarchy) *
         soft_threshold(norm_b + hierarchy * partial, threshold);
}

// Scans u = 0, 1, ... in order of decreasing |w| using a heap, returning the
// first u whose radius falls inside [|w_(u+1)|, |w_(u)|].
template <class RadiusFn>
bool bracket_scan(std::vector<double> heap, RadiusFn radius_for, ProxOutcome& out) {
  std::make_heap(heap.begin(), heap.end());
  double upper = std::numeric_limits<double>::infinity();
  double partial = 0.0;
  for (std::size_t u = 0;; ++u) {
    const double next = heap.empty() ? 0.0 : heap.front();
    const double zeta = radius_for(u, partial);
    if (upper >= zeta && zeta >= next) {
      out.active = u;
      out.radius = zeta;
      return true;
    }
    if (heap.empty()) return false;
    std::pop_heap(heap.begin(), heap.end());
    heap.pop_back();
    partial += next;
    upper = next;
  }
}

}  // namespace

ProxOutcome hier_prox(std::span<double> b, std::span<double> w, double threshold,
                      double hierarchy, ProxRule rule) {
  if (!(hierarchy > 0.0)) throw ConfigError("hierarchy coefficient C must be positive");
  if (!(threshold >= 0.0)) throw ConfigError("prox threshold must be non-negative");
  double nb2 = 0.0;
  for (double v : b) {
    if (!std::isfinite(v)) throw NumericalError("non-finite residual weight in prox");
    nb2 += v * v;
  }
  for (double v : w)
    if (!std::isfinite(v)) throw NumericalError("non-finite hidden weight in prox");

  ProxOutcome out;
  const double norm_b = std::sqrt(nb2);
  if (norm_b == 0.0) {
    std::fill(b.begin(), b.end(), 0.0);
    std::fill(w.begin(), w.end(), 0.0);
    out.branch = ProxBranch::zero_skip;
    return out;
  }

  std::vector<double> mags(w.size());
  std::transform(w.begin(), w.end(), mags.begin(), [](double v) { return std::abs(v); });

  bool found = false;
  if (rule == ProxRule::fixed_factor) {
    found = bracket_scan(mags,
                         [&](std::size_t, double partial) {
                           return printed_radius(norm_b, partial, threshold, hierarchy);
                         },
                         out);
  } else {
    found = bracket_scan(mags,
                         [&](std::size_t u, double partial) {
                           return exact_radius(u, norm_b, partial, threshold, hierarchy);
                         },
                         out);
  }
  out.branch = found ? ProxBranch::bracket : ProxBranch::search;

  if (!found) {
    // Exhaustive candidate search over all u by proximal objective.
    std::sort(mags.begin(), mags.end(), std::greater<>());
    std::vector<double> sum(mags.size() + 1, 0.0), sum_sq(mags.size() + 1, 0.0);
    for (std::size_t i = 0; i < mags.size(); ++i) {
      sum[i + 1] = sum[i] + mags[i];
      sum_sq[i + 1] = sum_sq[i] + mags[i] * mags[i];
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u <= mags.size(); ++u) {
      const double zeta = exact_radius(u, norm_b, sum[u], threshold, hierarchy);
      const double f =
          candidate_objective(zeta, norm_b, threshold, hierarchy, mags, sum, sum_sq);
      if (f < best) {
        best = f;
        out.active = u;
        out.radius = zeta;
      }
    }
  }

  const double scale = out.radius / hierarchy / norm_b;
  double nb_new = 0.0;
  for (auto& v : b) {
    v *= scale;
    nb_new += v * v;
  }
  const double bound = std::min(out.radius, hierarchy * std::sqrt(nb_new));
  for (auto& v : w) v = std::copysign(std::min(std::abs(v), bound), v);
  return out;
}

std::string to_string(BatchRule rule) {
  return rule == BatchRule::natural_log ? "natural" : "base2";
}

BatchRule batch_rule_from_string(const std::string& name) {
  if (name == "natural" || name == "ln") return BatchRule::natural_log;
  if (name == "base2" || name == "log2") return BatchRule::base2_log;
  throw ConfigError("unknown batch rule '" + name + "'");
}

std::size_t batch_size_for(std::size_t n, BatchRule rule) {
  if (n == 0) return 0;
  const double x = static_cast<double>(n);
  const double e = std::floor(rule == BatchRule::natural_log ? std::log(x) : std::log2(x));
  const auto size = static_cast<std::size_t>(std::ldexp(1.0, static_cast<int>(e)));
  return std::clamp<std::size_t>(size, 1, n);
}

std::string to_string(LambdaStartRule rule) {
  return rule == LambdaStartRule::gradient ? "gradient" : "prox_bound";
}

LambdaStartRule lambda_start_rule_from_string(const std::string& name) {
  if (name == "gradient") return LambdaStartRule::gradient;
  if (name == "prox_bound" || name == "prox-bound") return LambdaStartRule::prox_bound;
  throw ConfigError("unknown lambda start rule '" + name + "'");
}

void PathConfig::validate() const {
  if (!(multiplier > 0.0)) throw ConfigError("path multiplier must be positive");
  if (epochs_per_step < 1) throw ConfigError("epochs per path step must be at least 1");
  if (!(lambda_start_factor > 0.0) || !(lambda_bound_factor > 0.0))
    throw ConfigError("lambda start factors must be positive");
  if (!(lambda_max > 0.0)) throw ConfigError("lambda ceiling must be positive");
}

std::string to_string(PathStatus status) {
  switch (status) {
    case PathStatus::completed: return "completed";
    case PathStatus::lambda_ceiling: return "lambda_ceiling";
    case PathStatus::step_limit: return "step_limit";
    case PathStatus::diverged: return "diverged";
  }
  return "unknown";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  // splitmix64 finalizer over a stream-offset state.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double mean_loss(const NetworkParams& params, const ScoreMatrix& scores,
                 std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < scores.rows; ++i)
    total += sample_loss(params, scores.row(i), labels[i]);
  return total / static_cast<double>(scores.rows);
}

namespace {

class PathTrainer {
 public:
  PathTrainer(const ScoreMatrix& scores, std::span<const int> labels,
              const Architecture& arch, const ProxConfig& prox,
              const PathConfig& path, std::uint64_t seed)
      : scores_(scores),
        labels_(labels),
        prox_(prox),
        params_(init_params(arch, derive_seed(seed, 1))),
        adam_(params_.values().size(), prox.learning_rate),
        shuffle_(derive_seed(seed, 2)),
        dropout_base_(derive_seed(seed, 3)),
        order_(scores.rows),
        batch_size_(batch_size_for(scores.rows, path.batch_rule)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  NetworkParams& params() { return params_; }
  ProxStats& stats() { return stats_; }

  // One pass over shuffled mini-batches. A negative threshold skips the prox.
  // Returns false if the loss or parameters stop being finite.
  bool epoch(double threshold) {
    std::shuffle(order_.begin(), order_.end(), shuffle_);
    const auto arch = params_.arch();
    for (std::size_t start = 0; start < order_.size(); start += batch_size_) {
      const std::size_t end = std::min(start + batch_size_, order_.size());
      batch_.scores.clear();
      batch_.labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_.scores.push_back(scores_.row(order_[i]));
        batch_.labels.push_back(labels_[order_[i]]);
      }
      const auto g = backward(params_, batch_, RunMode::train,
                              derive_seed(dropout_base_, iteration_++));
      if (!std::isfinite(g.loss)) return false;
      adam_step(params_, g.grad, adam_);
      if (threshold >= 0.0) {
        for (std::size_t j = 0; j < arch.num_features(); ++j) {
          const auto o = hier_prox(params_.residual_block(j),
                                   params_.first_hidden_block(j), threshold,
                                   prox_.hierarchy, prox_.rule);
          switch (o.branch) {
            case ProxBranch::bracket: ++stats_.bracket; break;
            case ProxBranch::search: ++stats_.search; break;
            case ProxBranch::zero_skip: ++stats_.zero_skip; break;
          }
        }
      }
    }
    for (double v : params_.values())
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Mean |dLoss/dB| over the full training set, eval mode.
  double residual_gradient_scale() const {
    Batch all;
    for (std::size_t i = 0; i < scores_.rows; ++i) {
      all.scores.push_back(scores_.row(i));
      all.labels.push_back(labels_[i]);
    }
    const auto g = backward(params_, all);
    double s = 0.0;
    for (double v : g.grad.residual()) s += std::abs(v);
    return s / static_cast<double>(g.grad.residual().size());
  }

  // min_j ||b_j|| + C ||W1_j||_1; a threshold this large zeroes some feature in one prox call.
  double smallest_kill_threshold() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < params_.arch().num_features(); ++j) {
      double t = params_.residual_norm(j);
      for (double w : params_.first_hidden_block(j)) t += prox_.hierarchy * std::abs(w);
      best = std::min(best, t);
    }
    return best;
  }

 private:
  const ScoreMatrix& scores_;
  std::span<const int> labels_;
  ProxConfig prox_;
  NetworkParams params_;
  AdamState adam_;
  std::mt19937_64 shuffle_;
  std::uint64_t dropout_base_;
  std::uint64_t iteration_ = 0;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  Batch batch_;
  ProxStats stats_;
};

}  // namespace

PathResult train_path(const ScoreMatrix& scores, std::span<const int> labels,
                      const Architecture& arch, const ProxConfig& prox,
                      const PathConfig& path, std::uint64_t seed,
                      const CheckpointObserver& observer) {
  arch.validate();
  prox.validate();
  path.validate();
  if (scores.rows == 0) throw ShapeError("no training rows");
  if (labels.size() != scores.rows)
    throw ShapeError("score rows and labels differ in length");
  if (scores.cols != arch.total_scores())
    throw ShapeError("score matrix has " + std::to_string(scores.cols) +
                     " columns, architecture expects " +
                     std::to_string(arch.total_scores()));
  const std::size_t classes = arch.output == OutputMode::softmax ? arch.output_dim : 2;
  for (int y : labels)
    if (y < 1 || static_cast<std::size_t>(y) > classes)
      throw LabelError("label " + std::to_string(y) + " outside 1.." +
                       std::to_string(classes));

  PathResult result;
  PathTrainer trainer(scores, labels, arch, prox, path, seed);

  for (std::size_t e = 0; e < path.warmup_epochs; ++e) {
    if (!trainer.epoch(-1.0)) {
      result.status = PathStatus::diverged;
      return result;
    }
  }
  result.warmup_loss = mean_loss(trainer.params(), scores, labels);

  double lambda = path.lambda_start;
  if (!(lambda > 0.0)) {
    lambda = path.lambda_start_rule == LambdaStartRule::gradient
                 ? path.lambda_start_factor * trainer.residual_gradient_scale()
                 : path.lambda_bound_factor * trainer.smallest_kill_threshold() /
                       prox.learning_rate;
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) lambda = path.lambda_start_factor;
  result.lambda_start = lambda;

  std::size_t p0 = arch.num_features();
  std::size_t step = 0;
  while (p0 >= 1) {
    if (step >= path.max_steps) {
      result.status = PathStatus::step_limit;
      break;
    }
    lambda *= 1.0 + path.multiplier;
    if (lambda > path.lambda_max) {
      result.status = PathStatus::lambda_ceiling;
      break;
    }
    const double threshold = prox.learning_rate * lambda;
    bool ok = true;
    for (std::size_t e = 0; e < path.epochs_per_step && ok; ++e)
      ok = trainer.epoch(threshold);
    if (!ok) {
      result.status = PathStatus::diverged;
      break;
    }

    PathCheckpoint cp;
    cp.step = step++;
    cp.lambda = lambda;
    cp.selected = trainer.params().active_features();
    cp.p0 = cp.selected.size();
    cp.train_loss = mean_loss(trainer.params(), scores, labels);
    cp.params = trainer.params();
    p0 = cp.p0;
    if (observer) observer(cp);
    if (!path.store_params) cp.params = NetworkParams();
    result.checkpoints.push_back(std::move(cp));
  }
  result.prox = trainer.stats();
  return result;
}

std::string join_features(const std::vector<std::size_t>& zero_based) {
  std::string s;
  for (std::size_t i = 0; i < zero_based.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(zero_based[i] + 1);
  }
  return s;
}

void write_path_log(std::ostream& out, const std::vector<PathCheckpoint>& path) {
  out << "step,lambda,p0,train_loss,selected\n";
  char buf[64];
  for (const auto& cp : path) {
    out << cp.step << ',';
    std::snprintf(buf, sizeof buf, "%.17g", cp.lambda);
    out << buf << ',' << cp.p0 << ',';
    std::snprintf(buf, sizeof buf, "%.17g", cp.train_loss);
    out << buf << ',' << join_features(cp.selected) << '\n';
  }
}

}  // namespace fbdnn
