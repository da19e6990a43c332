#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fbdnn {

enum class OutputMode { identity, softmax };
enum class LossKind { hinge, cross_entropy };
enum class RunMode { train, eval };

std::string to_string(OutputMode mode);
OutputMode output_mode_from_string(const std::string& name);

/// Shape of the residual classifier.
///
/// Scores of feature j feed q_{1j} first-layer units. `hidden` lists the
/// widths of the L >= 1 ReLU layers; an output layer maps the last hidden
/// width to `output_dim` logits. The residual block adds B^T H straight to
/// the logits, with B stored as q_1 x output_dim.
struct Architecture {
  std::vector<std::size_t> truncations;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 1;
  double dropout = 0.0;
  OutputMode output = OutputMode::softmax;

  /// Softmax head with K outputs, or a single identity output for the
  /// binary hinge mode.
  static Architecture for_task(std::vector<std::size_t> truncations,
                               std::vector<std::size_t> hidden, int num_classes,
                               LossKind loss, double dropout = 0.0);

  void validate() const;

  std::size_t num_features() const noexcept { return truncations.size(); }
  std::size_t num_hidden() const noexcept { return hidden.size(); }
  std::size_t total_scores() const noexcept;
  std::size_t feature_offset(std::size_t j) const noexcept;
  LossKind loss() const noexcept {
    return output == OutputMode::softmax ? LossKind::cross_entropy
                                         : LossKind::hinge;
  }

  bool operator==(const Architecture&) const = default;
};

/// All trainable values in one flat buffer, with typed views into it.
///
/// Dense layer l (0 <= l <= L, the last being the output layer) stores its
/// weight input-major: weight(l)[i * out + k] connects input i to unit k.
/// That keeps W_1's rows for feature j, and the residual rows for feature j,
/// contiguous.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(Architecture arch);

  const Architecture& arch() const noexcept { return arch_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> scale() noexcept { return view(scale_off_, q1_); }
  std::span<const double> scale() const noexcept { return view(scale_off_, q1_); }
  std::span<double> shift() noexcept { return view(shift_off_, q1_); }
  std::span<const double> shift() const noexcept { return view(shift_off_, q1_); }

  std::span<double> residual() noexcept { return view(res_off_, q1_ * out_); }
  std::span<const double> residual() const noexcept {
    return view(res_off_, q1_ * out_);
  }
  std::span<double> residual_block(std::size_t j) noexcept;
  std::span<const double> residual_block(std::size_t j) const noexcept;

  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t layer_in(std::size_t l) const noexcept { return layers_[l].in; }
  std::size_t layer_out(std::size_t l) const noexcept { return layers_[l].out; }
  std::span<double> weight(std::size_t l) noexcept;
  std::span<const double> weight(std::size_t l) const noexcept;
  std::span<double> bias(std::size_t l) noexcept;
  std::span<const double> bias(std::size_t l) const noexcept;

  /// Rows of the first hidden weight matrix fed by feature j (W_1^{(j)}).
  std::span<double> first_hidden_block(std::size_t j) noexcept;
  std::span<const double> first_hidden_block(std::size_t j) const noexcept;

  /// Frobenius norm of feature j's residual block.
  double residual_norm(std::size_t j) const noexcept;
  /// Features with a nonzero residual block, 0-based.
  std::vector<std::size_t> active_features() const;

  bool operator==(const NetworkParams&) const = default;

 private:
  struct Layer {
    std::size_t in = 0, out = 0, w_off = 0, b_off = 0;
    bool operator==(const Layer&) const = default;
  };

  std::span<double> view(std::size_t off, std::size_t n) noexcept {
    return {values_.data() + off, n};
  }
  std::span<const double> view(std::size_t off, std::size_t n) const noexcept {
    return {values_.data() + off, n};
  }

  Architecture arch_;
  std::vector<double> values_;
  std::vector<Layer> layers_;
  std::size_t q1_ = 0, out_ = 0;
  std::size_t scale_off_ = 0, shift_off_ = 0, res_off_ = 0;
};

/// He-normal weights (variance 2 / fan-in) for every dense layer and for the
/// residual block, unit scales, zero shifts and biases.
NetworkParams init_params(const Architecture& arch, std::uint64_t seed);

/// H_{j,l} = a_{j,l} * ReLU(c_{j,l} + z_{j,l}).
std::vector<double> first_layer(std::span<const double> scores,
                                const NetworkParams& params);

/// Network output: softmax probabilities or the raw decision value.
/// Train mode applies inverted dropout to hidden activations, with the mask
/// drawn deterministically from `dropout_seed`.
std::vector<double> forward(const NetworkParams& params,
                            std::span<const double> scores,
                            RunMode mode = RunMode::eval,
                            std::uint64_t dropout_seed = 0);

/// Pre-activation output (logits, or f itself in hinge mode).
std::vector<double> forward_logits(const NetworkParams& params,
                                   std::span<const double> scores,
                                   RunMode mode = RunMode::eval,
                                   std::uint64_t dropout_seed = 0);

std::vector<double> softmax(std::span<const double> logits);

/// max(1 - (2Y - 3) f, 0) for Y in {1, 2}.
double loss_hinge(double f_value, int label);

/// Probability floor applied before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label - 1], floor)).
double loss_cross_entropy(std::span<const double> probs, int label);

/// Loss of a single sample as minimized by training: hinge on f, or
/// cross-entropy evaluated stably from the logits.
double sample_loss(const NetworkParams& params, std::span<const double> scores,
                   int label, RunMode mode = RunMode::eval,
                   std::uint64_t dropout_seed = 0);

/// A mini-batch: row views into a score matrix plus labels.
struct Batch {
  std::vector<std::span<const double>> scores;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct Gradient {
  NetworkParams grad;  // same layout as the parameters
  double loss = 0.0;   // mean batch loss
};

/// Exact gradient of the mean batch loss. Sample i of the batch uses dropout
/// seed `dropout_seed + i` in train mode. ReLU and hinge subgradients at the
/// kink are 0.
Gradient backward(const NetworkParams& params, const Batch& batch,
                  RunMode mode = RunMode::eval, std::uint64_t dropout_seed = 0);

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t step = 0;
  double rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t size, double rate) : m(size, 0.0), v(size, 0.0), rate(rate) {}
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state);

/// 2 if f >= 0 else 1 in identity mode; lowest-index argmax in softmax mode.
int predict_label(std::span<const double> output, OutputMode mode);

/// Per-coordinate standardization of projected scores, fitted on training rows.
struct ScoreScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static ScoreScaler identity(std::size_t dim);
  void apply(std::span<double> scores) const;

  bool operator==(const ScoreScaler&) const = default;
};

}  // namespace fbdnn
