#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fbdnn/checkpoint.hpp"
#include "fbdnn/error.hpp"
#include "fbdnn/network.hpp"

using namespace fbdnn;

namespace {

std::vector<double> random_scores(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> z(n);
  for (auto& v : z) v = d(rng);
  return z;
}

Architecture small_arch(LossKind loss = LossKind::cross_entropy, double dropout = 0.0) {
  return Architecture::for_task({2, 3, 1}, {5, 4}, 3, loss, dropout);
}

}  // namespace

TEST_CASE("parameter layout") {
  const auto arch = small_arch();
  CHECK(arch.total_scores() == 6);
  CHECK(arch.feature_offset(2) == 5);
  const NetworkParams p(arch);
  REQUIRE(p.num_layers() == 3);
  CHECK(p.layer_in(0) == 6);
  CHECK(p.layer_out(0) == 5);
  CHECK(p.layer_out(2) == 3);
  CHECK(p.residual().size() == 18);
  CHECK(p.residual_block(1).size() == 9);
  CHECK(p.first_hidden_block(1).size() == 15);
  const std::size_t total = 6 + 6 + 18 + (6 * 5 + 5) + (5 * 4 + 4) + (4 * 3 + 3);
  CHECK(p.values().size() == total);

  const auto hinge = Architecture::for_task({2}, {4}, 2, LossKind::hinge);
  CHECK(hinge.output_dim == 1);
  CHECK(hinge.output == OutputMode::identity);
  CHECK_THROWS_AS(Architecture::for_task({2}, {4}, 3, LossKind::hinge).validate(), ConfigError);
  CHECK_THROWS_AS(Architecture::for_task({2}, {}, 3, LossKind::cross_entropy).validate(),
                  ConfigError);
  CHECK_THROWS_AS(Architecture::for_task({2}, {4}, 3, LossKind::cross_entropy, 1.0).validate(),
                  ConfigError);
}

TEST_CASE("He initialisation") {
  const auto arch = Architecture::for_task({10, 10, 10, 10, 10}, {400}, 3,
                                           LossKind::cross_entropy);
  const auto p = init_params(arch, 17);
  const auto w = p.weight(0);
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size() - 1);
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(2.0 / 50.0).epsilon(0.05));
  for (double a : p.scale()) CHECK(a == 1.0);
  for (double c : p.shift()) CHECK(c == 0.0);
  for (double b : p.bias(0)) CHECK(b == 0.0);
  CHECK(init_params(arch, 17) == p);
  CHECK_FALSE(init_params(arch, 18) == p);
}

TEST_CASE("first layer is a * ReLU(c + z)") {
  NetworkParams p(Architecture::for_task({3}, {2}, 2, LossKind::cross_entropy));
  p.scale()[0] = 2.0;
  p.scale()[1] = -1.5;
  p.scale()[2] = 3.0;
  p.shift()[0] = 0.5;
  p.shift()[1] = 1.0;
  p.shift()[2] = -4.0;
  const std::vector<double> z{1.0, 2.0, 3.0};
  const auto h = first_layer(z, p);
  CHECK(h[0] == 3.0);
  CHECK(h[1] == -4.5);
  CHECK(h[2] == 0.0);
  CHECK_THROWS_AS(first_layer(std::vector<double>{1.0, 2.0}, p), ShapeError);
}

TEST_CASE("softmax") {
  const auto u = softmax(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0));
  const std::vector<double> a{1.0, -2.0, 0.5};
  const std::vector<double> b{1001.0, 998.0, 1000.5};
  const auto pa = softmax(a), pb = softmax(b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
  CHECK(std::accumulate(pb.begin(), pb.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("loss values") {
  CHECK(loss_hinge(0.3, 2) == doctest::Approx(0.7));
  CHECK(loss_hinge(0.3, 1) == doctest::Approx(1.3));
  CHECK(loss_hinge(2.0, 2) == 0.0);
  CHECK(loss_hinge(-1.0, 1) == 0.0);
  CHECK_THROWS_AS(loss_hinge(0.0, 3), LabelError);
  const std::vector<double> probs{0.2, 0.5, 0.3};
  CHECK(loss_cross_entropy(probs, 2) == doctest::Approx(-std::log(0.5)));
  const std::vector<double> zero{1.0, 0.0, 0.0};
  CHECK(loss_cross_entropy(zero, 3) == doctest::Approx(-std::log(kProbabilityFloor)));
  CHECK_THROWS_AS(loss_cross_entropy(probs, 0), LabelError);
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(3);
  for (const auto loss : {LossKind::cross_entropy, LossKind::hinge}) {
    const int classes = loss == LossKind::hinge ? 2 : 3;
    const auto arch = Architecture::for_task({2, 3}, {6, 4}, classes, loss);
    auto p = init_params(arch, 11);
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (auto& v : p.shift()) v = jitter(rng);
    for (auto& v : p.scale()) v = 1.0 + jitter(rng);
    // Nonzero biases keep units off the ReLU kink, where differences are one-sided.
    for (std::size_t l = 0; l < p.num_layers(); ++l)
      for (auto& v : p.bias(l)) v = jitter(rng);
    std::vector<std::vector<double>> rows;
    Batch batch;
    for (int i = 0; i < 4; ++i) rows.push_back(random_scores(5, rng));
    for (int i = 0; i < 4; ++i) {
      batch.scores.emplace_back(rows[static_cast<std::size_t>(i)]);
      batch.labels.push_back(1 + i % classes);
    }
    const auto g = backward(p, batch);
    const auto mean_loss = [&](const NetworkParams& q) {
      double s = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i)
        s += sample_loss(q, batch.scores[i], batch.labels[i]);
      return s / static_cast<double>(batch.size());
    };
    CHECK(g.loss == doctest::Approx(mean_loss(p)).epsilon(1e-12));
    const double h = 1e-6;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < p.values().size(); ++k) {
      auto up = p, dn = p;
      up.values()[k] += h;
      dn.values()[k] -= h;
      const double fd = (mean_loss(up) - mean_loss(dn)) / (2 * h);
      const double an = g.grad.values()[k];
      CHECK(std::abs(fd - an) <= 1e-5 * std::max({std::abs(fd), std::abs(an), 1e-2}));
      ++checked;
    }
    CHECK(checked == p.values().size());
  }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  std::mt19937_64 rng(8);
  const auto arch = small_arch();
  const auto p = init_params(arch, 2);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 5; ++i) rows.push_back(random_scores(6, rng));
  Batch all;
  std::vector<double> sum(p.values().size(), 0.0);
  for (int i = 0; i < 5; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    all.scores.emplace_back(r);
    all.labels.push_back(1 + i % 3);
    Batch one;
    one.scores.emplace_back(r);
    one.labels.push_back(1 + i % 3);
    const auto g = backward(p, one);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.grad.values()[k];
  }
  const auto g = backward(p, all);
  for (std::size_t k = 0; k < sum.size(); ++k)
    CHECK(g.grad.values()[k] == doctest::Approx(sum[k] / 5.0).epsilon(1e-12));
}

TEST_CASE("dropout is inverted and seed-deterministic") {
  std::mt19937_64 rng(4);
  const auto arch = small_arch(LossKind::cross_entropy, 0.5);
  const auto p = init_params(arch, 1);
  const auto z = random_scores(6, rng);
  CHECK(forward(p, z, RunMode::eval) == forward(p, z, RunMode::eval, 99));
  CHECK(forward(p, z, RunMode::train, 5) == forward(p, z, RunMode::train, 5));
  bool differs = false;
  for (std::uint64_t s = 0; s < 8 && !differs; ++s)
    differs = forward(p, z, RunMode::train, s) != forward(p, z, RunMode::eval);
  CHECK(differs);
}

TEST_CASE("first Adam step moves every coordinate by the learning rate") {
  NetworkParams p(Architecture::for_task({2}, {2}, 2, LossKind::cross_entropy));
  NetworkParams g = p;
  for (std::size_t k = 0; k < g.values().size(); ++k)
    g.values()[k] = (k % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(k + 1);
  const auto before = p;
  AdamState st(p.values().size(), 0.01);
  adam_step(p, g, st);
  CHECK(st.step == 1);
  for (std::size_t k = 0; k < p.values().size(); ++k) {
    const double moved = before.values()[k] - p.values()[k];
    CHECK(moved == doctest::Approx((k % 2 == 0 ? 1.0 : -1.0) * 0.01).epsilon(1e-6));
  }
}

TEST_CASE("predict_label") {
  CHECK(predict_label(std::vector<double>{0.0}, OutputMode::identity) == 2);
  CHECK(predict_label(std::vector<double>{-1e-9}, OutputMode::identity) == 1);
  CHECK(predict_label(std::vector<double>{0.2, 0.5, 0.3}, OutputMode::softmax) == 2);
  CHECK(predict_label(std::vector<double>{0.4, 0.2, 0.4}, OutputMode::softmax) == 1);
}

TEST_CASE("a feature with zero residual and first-layer weights is ignored") {
  std::mt19937_64 rng(6);
  const auto arch = small_arch();
  auto p = init_params(arch, 9);
  for (auto& v : p.residual_block(1)) v = 0.0;
  for (auto& v : p.first_hidden_block(1)) v = 0.0;
  CHECK(p.active_features() == std::vector<std::size_t>{0, 2});
  for (int trial = 0; trial < 20; ++trial) {
    auto z = random_scores(6, rng);
    const auto base = forward(p, z);
    for (std::size_t i = 2; i < 5; ++i) z[i] = 50.0 * (rng() % 2 ? 1.0 : -1.0) * (1 + trial);
    CHECK(forward(p, z) == base);
  }
}

TEST_CASE("parameters round-trip through JSON exactly") {
  const auto arch = small_arch(LossKind::cross_entropy, 0.25);
  auto p = init_params(arch, 21);
  p.shift()[0] = 1.0 / 3.0;
  p.values()[7] = -0.0;
  const auto back = params_from_json(to_json(p));
  CHECK(back == p);
  CHECK(std::signbit(back.values()[7]));
  CHECK(architecture_from_json(to_json(arch)) == arch);
  CHECK(decode_double(encode_double(0.1)) == 0.1);
}
