#include "fbdnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fbdnn/error.hpp"

namespace fbdnn {

std::string to_string(OutputMode mode) {
  return mode == OutputMode::softmax ? "softmax" : "identity";
}

OutputMode output_mode_from_string(const std::string& name) {
  if (name == "softmax") return OutputMode::softmax;
  if (name == "identity") return OutputMode::identity;
  throw ConfigError("unknown output mode '" + name + "'");
}

Architecture Architecture::for_task(std::vector<std::size_t> truncations,
                                    std::vector<std::size_t> hidden,
                                    int num_classes, LossKind loss,
                                    double dropout) {
  Architecture a;
  a.truncations = std::move(truncations);
  a.hidden = std::move(hidden);
  a.dropout = dropout;
  if (loss == LossKind::hinge) {
    if (num_classes != 2) throw ConfigError("hinge loss needs exactly 2 classes");
    a.output_dim = 1;
    a.output = OutputMode::identity;
  } else {
    a.output_dim = static_cast<std::size_t>(num_classes);
    a.output = OutputMode::softmax;
  }
  a.validate();
  return a;
}

void Architecture::validate() const {
  if (truncations.empty()) throw ConfigError("architecture has no features");
  for (auto q : truncations)
    if (q < 1) throw ConfigError("truncation counts must be at least 1");
  if (hidden.empty()) throw ConfigError("need at least one hidden layer");
  for (auto w : hidden)
    if (w < 1) throw ConfigError("hidden widths must be at least 1");
  if (output_dim < 1) throw ConfigError("output dimension must be at least 1");
  if (output == OutputMode::identity && output_dim != 1)
    throw ConfigError("identity output mode has a single output");
  if (output == OutputMode::softmax && output_dim < 2)
    throw ConfigError("softmax output needs at least 2 classes");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1)");
}

std::size_t Architecture::total_scores() const noexcept {
  std::size_t q = 0;
  for (auto t : truncations) q += t;
  return q;
}

std::size_t Architecture::feature_offset(std::size_t j) const noexcept {
  std::size_t q = 0;
  for (std::size_t i = 0; i < j; ++i) q += truncations[i];
  return q;
}

NetworkParams::NetworkParams(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  q1_ = arch_.total_scores();
  out_ = arch_.output_dim;
  std::size_t off = 0;
  scale_off_ = off;
  off += q1_;
  shift_off_ = off;
  off += q1_;
  res_off_ = off;
  off += q1_ * out_;
  std::size_t in = q1_;
  for (std::size_t l = 0; l <= arch_.hidden.size(); ++l) {
    const std::size_t out = l < arch_.hidden.size() ? arch_.hidden[l] : out_;
    Layer layer{in, out, off, off + in * out};
    off += in * out + out;
    layers_.push_back(layer);
    in = out;
  }
  values_.assign(off, 0.0);
}

std::span<double> NetworkParams::residual_block(std::size_t j) noexcept {
  return view(res_off_ + arch_.feature_offset(j) * out_, arch_.truncations[j] * out_);
}
std::span<const double> NetworkParams::residual_block(std::size_t j) const noexcept {
  return view(res_off_ + arch_.feature_offset(j) * out_, arch_.truncations[j] * out_);
}
std::span<double> NetworkParams::weight(std::size_t l) noexcept {
  return view(layers_[l].w_off, layers_[l].in * layers_[l].out);
}
std::span<const double> NetworkParams::weight(std::size_t l) const noexcept {
  return view(layers_[l].w_off, layers_[l].in * layers_[l].out);
}
std::span<double> NetworkParams::bias(std::size_t l) noexcept {
  return view(layers_[l].b_off, layers_[l].out);
}
std::span<const double> NetworkParams::bias(std::size_t l) const noexcept {
  return view(layers_[l].b_off, layers_[l].out);
}
std::span<double> NetworkParams::first_hidden_block(std::size_t j) noexcept {
  const auto w = layers_[0].out;
  return view(layers_[0].w_off + arch_.feature_offset(j) * w, arch_.truncations[j] * w);
}
std::span<const double> NetworkParams::first_hidden_block(std::size_t j) const noexcept {
  const auto w = layers_[0].out;
  return view(layers_[0].w_off + arch_.feature_offset(j) * w, arch_.truncations[j] * w);
}

double NetworkParams::residual_norm(std::size_t j) const noexcept {
  double s = 0.0;
  for (double v : residual_block(j)) s += v * v;
  return std::sqrt(s);
}

std::vector<std::size_t> NetworkParams::active_features() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < arch_.num_features(); ++j)
    if (residual_norm(j) != 0.0) out.push_back(j);
  return out;
}

NetworkParams init_params(const Architecture& arch, std::uint64_t seed) {
  NetworkParams p(arch);
  std::mt19937_64 rng(seed);
  const auto he = [&rng](std::span<double> w, std::size_t fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : w) v = dist(rng);
  };
  std::fill(p.scale().begin(), p.scale().end(), 1.0);
  he(p.residual(), arch.total_scores());
  for (std::size_t l = 0; l < p.num_layers(); ++l) he(p.weight(l), p.layer_in(l));
  return p;
}

namespace {

constexpr double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

// Activations of one sample, kept for the backward pass.
struct Trace {
  std::vector<double> pre_first;               // c + z
  std::vector<std::vector<double>> acts;       // acts[0] = H, acts[l+1] = hidden l output
  std::vector<std::vector<double>> pre;        // hidden pre-activations
  std::vector<std::vector<double>> mask;       // dropout multipliers (empty if none)
  std::vector<double> logits;
};

void dropout_mask(std::mt19937_64& rng, double rate, std::vector<double>& mask,
                  std::size_t n) {
  mask.resize(n);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u < rate ? 0.0 : keep;
  }
}

void run_forward(const NetworkParams& p, std::span<const double> z, RunMode mode,
                 std::uint64_t seed, Trace& t) {
  const auto& arch = p.arch();
  const std::size_t q1 = arch.total_scores();
  if (z.size() != q1)
    throw ShapeError("score vector has " + std::to_string(z.size()) +
                     " entries, network expects " + std::to_string(q1));
  const std::size_t L = arch.num_hidden();
  const std::size_t K = arch.output_dim;
  const bool drop = mode == RunMode::train && arch.dropout > 0.0;

  t.pre_first.resize(q1);
  t.acts.resize(L + 1);
  t.pre.resize(L);
  t.mask.resize(L);
  auto& h = t.acts[0];
  h.resize(q1);
  const auto a = p.scale();
  const auto c = p.shift();
  for (std::size_t i = 0; i < q1; ++i) {
    t.pre_first[i] = c[i] + z[i];
    h[i] = a[i] * relu(t.pre_first[i]);
  }

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& x = t.acts[l];
    const std::size_t in = p.layer_in(l), out = p.layer_out(l);
    const auto w = p.weight(l);
    const auto b = p.bias(l);
    auto& pre = t.pre[l];
    pre.assign(b.begin(), b.end());
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* row = w.data() + i * out;
      for (std::size_t k = 0; k < out; ++k) pre[k] += xi * row[k];
    }
    auto& y = t.acts[l + 1];
    y.resize(out);
    for (std::size_t k = 0; k < out; ++k) y[k] = relu(pre[k]);
    if (drop) {
      dropout_mask(rng, arch.dropout, t.mask[l], out);
      for (std::size_t k = 0; k < out; ++k) y[k] *= t.mask[l][k];
    } else {
      t.mask[l].clear();
    }
  }

  const auto& x = t.acts[L];
  const auto w = p.weight(L);
  const auto b = p.bias(L);
  t.logits.assign(b.begin(), b.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t k = 0; k < K; ++k) t.logits[k] += xi * w[i * K + k];
  }
  const auto res = p.residual();
  for (std::size_t i = 0; i < q1; ++i) {
    const double hi = h[i];
    if (hi == 0.0) continue;
    for (std::size_t k = 0; k < K; ++k) t.logits[k] += hi * res[i * K + k];
  }
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

int check_label(int label, std::size_t classes) {
  if (label < 1 || static_cast<std::size_t>(label) > classes)
    throw LabelError("label " + std::to_string(label) + " outside 1.." +
                     std::to_string(classes));
  return label;
}

}  // namespace

std::vector<double> first_layer(std::span<const double> scores,
                                const NetworkParams& params) {
  const std::size_t q1 = params.arch().total_scores();
  if (scores.size() != q1)
    throw ShapeError("score vector has " + std::to_string(scores.size()) +
                     " entries, network expects " + std::to_string(q1));
  std::vector<double> h(q1);
  const auto a = params.scale();
  const auto c = params.shift();
  for (std::size_t i = 0; i < q1; ++i) h[i] = a[i] * relu(c[i] + scores[i]);
  return h;
}

std::vector<double> forward_logits(const NetworkParams& params,
                                   std::span<const double> scores, RunMode mode,
                                   std::uint64_t dropout_seed) {
  Trace t;
  run_forward(params, scores, mode, dropout_seed, t);
  return t.logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) s += p[k] = std::exp(logits[k] - m);
  for (auto& v : p) v /= s;
  return p;
}

std::vector<double> forward(const NetworkParams& params,
                            std::span<const double> scores, RunMode mode,
                            std::uint64_t dropout_seed) {
  auto logits = forward_logits(params, scores, mode, dropout_seed);
  if (params.arch().output == OutputMode::softmax) return softmax(logits);
  return logits;
}

double loss_hinge(double f_value, int label) {
  check_label(label, 2);
  const double s = 2.0 * label - 3.0;
  return std::max(1.0 - s * f_value, 0.0);
}

double loss_cross_entropy(std::span<const double> probs, int label) {
  check_label(label, probs.size());
  return -std::log(std::max(probs[static_cast<std::size_t>(label - 1)],
                            kProbabilityFloor));
}

double sample_loss(const NetworkParams& params, std::span<const double> scores,
                   int label, RunMode mode, std::uint64_t dropout_seed) {
  const auto logits = forward_logits(params, scores, mode, dropout_seed);
  if (params.arch().loss() == LossKind::hinge) return loss_hinge(logits[0], label);
  check_label(label, logits.size());
  return log_sum_exp(logits) - logits[static_cast<std::size_t>(label - 1)];
}

Gradient backward(const NetworkParams& params, const Batch& batch, RunMode mode,
                  std::uint64_t dropout_seed) {
  if (batch.size() == 0) throw ShapeError("empty batch");
  if (batch.scores.size() != batch.labels.size())
    throw ShapeError("batch scores and labels differ in length");
  const auto& arch = params.arch();
  const std::size_t q1 = arch.total_scores();
  const std::size_t L = arch.num_hidden();
  const std::size_t K = arch.output_dim;

  Gradient out{NetworkParams(arch), 0.0};
  auto& g = out.grad;
  Trace t;
  std::vector<double> dlogits(K), dx, dprev;

  for (std::size_t s = 0; s < batch.size(); ++s) {
    run_forward(params, batch.scores[s], mode, dropout_seed + s, t);
    const int label = batch.labels[s];

    if (arch.loss() == LossKind::hinge) {
      check_label(label, 2);
      const double sign = 2.0 * label - 3.0;
      const double margin = 1.0 - sign * t.logits[0];
      out.loss += std::max(margin, 0.0);
      dlogits[0] = margin > 0.0 ? -sign : 0.0;
    } else {
      check_label(label, K);
      const double lse = log_sum_exp(t.logits);
      out.loss += lse - t.logits[static_cast<std::size_t>(label - 1)];
      for (std::size_t k = 0; k < K; ++k) dlogits[k] = std::exp(t.logits[k] - lse);
      dlogits[static_cast<std::size_t>(label - 1)] -= 1.0;
    }

    // Output layer and residual block.
    {
      const auto& x = t.acts[L];
      const auto w = params.weight(L);
      auto gw = g.weight(L);
      auto gb = g.bias(L);
      for (std::size_t k = 0; k < K; ++k) gb[k] += dlogits[k];
      dx.assign(x.size(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          gw[i * K + k] += x[i] * dlogits[k];
          acc += w[i * K + k] * dlogits[k];
        }
        dx[i] = acc;
      }
    }

    for (std::size_t l = L; l-- > 0;) {
      const auto& x = t.acts[l];
      const auto& pre = t.pre[l];
      const auto& mask = t.mask[l];
      const std::size_t in = params.layer_in(l), out_w = params.layer_out(l);
      for (std::size_t k = 0; k < out_w; ++k) {
        double d = pre[k] > 0.0 ? dx[k] : 0.0;
        if (!mask.empty()) d *= mask[k];
        dx[k] = d;
      }
      const auto w = params.weight(l);
      auto gw = g.weight(l);
      auto gb = g.bias(l);
      for (std::size_t k = 0; k < out_w; ++k) gb[k] += dx[k];
      dprev.assign(in, 0.0);
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = x[i];
        const double* wrow = w.data() + i * out_w;
        double* grow = gw.data() + i * out_w;
        double acc = 0.0;
        for (std::size_t k = 0; k < out_w; ++k) {
          grow[k] += xi * dx[k];
          acc += wrow[k] * dx[k];
        }
        dprev[i] = acc;
      }
      dx.swap(dprev);
    }

    // dx now holds dLoss/dH through the hidden stack; add the residual path.
    const auto& h = t.acts[0];
    const auto res = params.residual();
    auto gres = g.residual();
    const auto a = params.scale();
    auto ga = g.scale();
    auto gc = g.shift();
    for (std::size_t i = 0; i < q1; ++i) {
      double dh = dx[i];
      for (std::size_t k = 0; k < K; ++k) {
        gres[i * K + k] += h[i] * dlogits[k];
        dh += res[i * K + k] * dlogits[k];
      }
      const double u = t.pre_first[i];
      if (u > 0.0) {
        ga[i] += dh * u;
        gc[i] += dh * a[i];
      }
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& v : g.values()) v *= inv;
  out.loss *= inv;
  return out;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state) {
  auto theta = params.values();
  const auto g = grads.values();
  if (g.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size())
    throw ShapeError("Adam state and gradient must match the parameter layout");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] -= state.rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

int predict_label(std::span<const double> output, OutputMode mode) {
  if (mode == OutputMode::identity) return output[0] >= 0.0 ? 2 : 1;
  const auto it = std::max_element(output.begin(), output.end());
  return static_cast<int>(it - output.begin()) + 1;
}

ScoreScaler ScoreScaler::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

void ScoreScaler::apply(std::span<double> scores) const {
  if (scores.size() != mean.size()) throw ShapeError("scaler dimension mismatch");
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores[i] = (scores[i] - mean[i]) / scale[i];
}

}  // namespace fbdnn
