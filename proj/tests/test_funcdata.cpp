#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "fbdnn/error.hpp"
#include "fbdnn/funcdata.hpp"
#include "fbdnn/simgen.hpp"

using namespace fbdnn;
namespace fs = std::filesystem;

namespace {

// Feature sampled from a callable on a unit grid, row-major, last axis fastest.
template <class F>
std::vector<double> sample_on(const GridSpec& g, F f) {
  std::vector<double> v(g.point_count());
  if (g.dims() == 1) {
    for (std::size_t i = 0; i < g.sizes[0]; ++i) v[i] = f(g.unit_coordinate(0, i), 0.0);
  } else {
    for (std::size_t i = 0; i < g.sizes[0]; ++i)
      for (std::size_t k = 0; k < g.sizes[1]; ++k)
        v[i * g.sizes[1] + k] = f(g.unit_coordinate(0, i), g.unit_coordinate(1, k));
  }
  return v;
}

// Gram matrix of the first `q` cosine elements under trapezoid quadrature.
std::vector<double> gram(std::size_t dims, std::size_t m, std::size_t q) {
  const auto grid = GridSpec::unit(std::vector<std::size_t>(dims, m));
  BasisSpec spec;
  spec.features.push_back({BasisFamily::cosine, q, dims});
  const Projector projector({grid}, spec);
  std::vector<double> g(q * q);
  for (std::size_t a = 0; a < q; ++a) {
    FunctionalSample s;
    s.features.push_back(sample_on(grid, [&](double x, double y) {
      const double pt[2] = {x, y};
      return basis_eval(spec, 0, a, std::span<const double>(pt, dims));
    }));
    const auto z = projector.project(s);
    for (std::size_t b = 0; b < q; ++b) g[a * q + b] = z[b];
  }
  return g;
}

double max_identity_gap(const std::vector<double>& g, std::size_t q) {
  double gap = 0.0;
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b)
      gap = std::max(gap, std::abs(g[a * q + b] - (a == b ? 1.0 : 0.0)));
  return gap;
}

FunctionalDataset tiny_dataset(std::size_t per_class, int classes) {
  FunctionalDataset ds;
  ds.num_classes = classes;
  ds.feature_grids = {GridSpec::unit({4}), GridSpec::unit({3, 2})};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 1; k <= classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      FunctionalSample s;
      s.features.resize(2);
      s.features[0].resize(4);
      s.features[1].resize(6);
      for (auto& f : s.features)
        for (auto& x : f) x = n(rng);
      ds.samples.push_back(s);
      ds.labels.push_back(k);
    }
  }
  return ds;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(FBDNN_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("grid validation rejects degenerate axes") {
  CHECK_NOTHROW(GridSpec::unit({2}).validate());
  CHECK_THROWS_AS(GridSpec::unit({1}).validate(), DomainError);
  CHECK_THROWS_AS(GridSpec::unit({30, 1}).validate(), DomainError);
  GridSpec g = GridSpec::unit({5});
  g.domain[0] = {1.0, 1.0};
  CHECK_THROWS_AS(g.validate(), DomainError);
  CHECK(GridSpec::unit({30, 30}).point_count() == 900);
}

TEST_CASE("cosine multi-indices follow total degree then lexicographic order") {
  const auto idx = cosine_multi_indices(2, 6);
  const std::vector<std::vector<int>> expected{{0, 0}, {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}};
  CHECK(idx == expected);
  const auto one = cosine_multi_indices(1, 4);
  CHECK(one == std::vector<std::vector<int>>{{0}, {1}, {2}, {3}});
}

TEST_CASE("basis_eval closed forms") {
  BasisSpec spec;
  spec.features.push_back({BasisFamily::cosine, 4, 1});
  spec.features.push_back({BasisFamily::cosine, 3, 2});
  const double s0[1] = {0.0};
  const double s3[1] = {0.3};
  const double st[2] = {0.2, 0.7};
  CHECK(basis_eval(spec, 0, 0, s0) == 1.0);
  CHECK(basis_eval(spec, 1, 0, st) == 1.0);
  CHECK(basis_eval(spec, 0, 1, s0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(basis_eval(spec, 0, 2, s3) ==
        doctest::Approx(std::sqrt(2.0) * std::cos(2 * M_PI * 0.3)).epsilon(1e-14));
  // Element 1 in 2D is (0, 1): varies along the second axis only.
  CHECK(basis_eval(spec, 1, 1, st) ==
        doctest::Approx(std::sqrt(2.0) * std::cos(M_PI * 0.7)).epsilon(1e-14));
  CHECK_THROWS_AS(basis_eval(spec, 0, 4, s0), DomainError);
  const double outside[1] = {1.5};
  CHECK_THROWS_AS(basis_eval(spec, 0, 1, outside), DomainError);
}

TEST_CASE("trapezoid weights") {
  const auto w = trapezoid_weights(5);
  REQUIRE(w.size() == 5);
  CHECK(w[0] == doctest::Approx(0.125));
  CHECK(w[2] == doctest::Approx(0.25));
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("Gram matrix is the identity to quadrature accuracy") {
  // 200-point grid, first five elements, 1e-6.
  CHECK(max_identity_gap(gram(1, 200, 5), 5) < 1e-6);
  // Grids of at least 30 points per axis stay within 1e-3.
  CHECK(max_identity_gap(gram(1, 30, 10), 10) < 1e-3);
  CHECK(max_identity_gap(gram(2, 30, 6), 6) < 1e-3);
  CHECK(max_identity_gap(gram(2, 40, 10), 10) < 1e-3);
}

TEST_CASE("projection of st against the constant element is 1/4") {
  const auto grid = GridSpec::unit({30, 30});
  FunctionalSample s;
  s.features.push_back(sample_on(grid, [](double x, double y) { return x * y; }));
  const auto z = project(s, {grid}, BasisSpec::uniform({grid}, 1));
  CHECK(std::abs(z[0] - 0.25) < 1e-9);
}

TEST_CASE("projection agrees with a refined grid") {
  const auto f = [](double x, double y) {
    return std::sin(3 * x) * std::exp(-y) + 0.5 * x * x * y + std::cos(5 * x * y);
  };
  const auto coarse = GridSpec::unit({30, 30});
  const auto fine = GridSpec::unit({600, 600});
  FunctionalSample a, b;
  a.features.push_back(sample_on(coarse, f));
  b.features.push_back(sample_on(fine, f));
  const auto za = project(a, {coarse}, BasisSpec::uniform({coarse}, 6));
  const auto zb = project(b, {fine}, BasisSpec::uniform({fine}, 6));
  for (std::size_t l = 0; l < 6; ++l) CHECK(std::abs(za[l] - zb[l]) < 1e-3);
}

TEST_CASE("projection is linear and concatenates features then basis index") {
  const auto ds = tiny_dataset(3, 2);
  const auto spec = BasisSpec::uniform(ds.feature_grids, 2);
  CHECK(spec.total_scores() == 4);
  CHECK(spec.offset(1) == 2);
  const Projector projector(ds.feature_grids, spec);
  const auto& x = ds.samples[0];
  const auto& y = ds.samples[1];
  FunctionalSample comb = x;
  const double a = 1.7, b = -0.6;
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < x.features[j].size(); ++i)
      comb.features[j][i] = a * x.features[j][i] + b * y.features[j][i];
  const auto zx = projector.project(x), zy = projector.project(y), zc = projector.project(comb);
  for (std::size_t l = 0; l < zc.size(); ++l)
    CHECK(zc[l] == doctest::Approx(a * zx[l] + b * zy[l]).epsilon(1e-13));

  // A sample whose second feature is the 2D element (0,1) projects onto index 1 of block 2.
  BasisSpec two;
  two.features.push_back({BasisFamily::cosine, 1, 1});
  two.features.push_back({BasisFamily::cosine, 3, 2});
  const auto g2 = GridSpec::unit({30, 30});
  FunctionalSample s;
  s.features.push_back(std::vector<double>(4, 0.0));
  s.features.push_back(sample_on(g2, [&](double u, double v) {
    const double pt[2] = {u, v};
    return basis_eval(two, 1, 1, pt);
  }));
  const auto z = project(s, {GridSpec::unit({4}), g2}, two);
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(std::abs(z[1] - 0.0) < 1e-12);
  CHECK(std::abs(z[2] - 1.0) < 1e-3);
  CHECK(std::abs(z[3]) < 1e-3);
}

TEST_CASE("projection rejects mismatched grids") {
  const auto ds = tiny_dataset(2, 2);
  const auto spec = BasisSpec::uniform(ds.feature_grids, 2);
  const Projector projector(ds.feature_grids, spec);
  FunctionalSample bad = ds.samples[0];
  bad.features[1].pop_back();
  CHECK_THROWS_AS(projector.project(bad), ShapeError);
  BasisSpec wrong = spec;
  wrong.features.pop_back();
  CHECK_THROWS_AS(Projector(ds.feature_grids, wrong), ShapeError);
}

TEST_CASE("split sizes, determinism and stratification") {
  SUBCASE("n = 10") {
    FunctionalDataset ds = tiny_dataset(5, 2);
    const auto s = split_dataset(ds, {}, 3);
    CHECK(s.train.size() == 6);
    CHECK(s.validation.size() == 2);
    CHECK(s.test.size() == 2);
  }
  SUBCASE("n = 300, three balanced classes") {
    FunctionalDataset ds = tiny_dataset(100, 3);
    const auto s = split_dataset(ds, {}, 11);
    CHECK(s.train.size() == 180);
    CHECK(s.validation.size() == 60);
    CHECK(s.test.size() == 60);
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      std::vector<int> counts(3, 0);
      for (auto i : *part) ++counts[static_cast<std::size_t>(ds.labels[i] - 1)];
      const double expect = static_cast<double>(part->size()) / 3.0;
      for (int c : counts) CHECK(std::abs(c - expect) <= 1.0);
    }
    const auto again = split_dataset(ds, {}, 11);
    CHECK(again.train == s.train);
    CHECK(again.validation == s.validation);
    CHECK(again.test == s.test);
    const auto other = split_dataset(ds, {}, 12);
    CHECK(other.train != s.train);
  }
}

TEST_CASE("split parts are disjoint and exhaustive") {
  for (std::size_t per : {3u, 4u, 7u, 13u, 50u}) {
    for (const SplitRatios r : {SplitRatios{}, SplitRatios{0.5, 0.3, 0.2}, SplitRatios{0.7, 0.15, 0.15}}) {
      const auto ds = tiny_dataset(per, 3);
      const auto s = split_dataset(ds, r, per);
      std::set<std::size_t> all;
      for (const auto* part : {&s.train, &s.validation, &s.test})
        for (auto i : *part) CHECK(all.insert(i).second);
      CHECK(all.size() == ds.size());
      const auto n = static_cast<double>(ds.size());
      CHECK(s.validation.size() == static_cast<std::size_t>(std::floor(r.validation * n + 1e-9)));
      CHECK(s.test.size() == static_cast<std::size_t>(std::floor(r.test * n + 1e-9)));
    }
  }
}

TEST_CASE("split refuses classes too small to stratify") {
  auto ds = tiny_dataset(4, 2);
  ds.samples.push_back(ds.samples[0]);
  ds.samples.push_back(ds.samples[0]);
  ds.labels.push_back(3);
  ds.labels.push_back(3);
  ds.num_classes = 3;
  CHECK_THROWS_AS(split_dataset(ds, {}, 1), StratificationError);
}

TEST_CASE("dataset validation") {
  auto ds = tiny_dataset(2, 2);
  CHECK_NOTHROW(ds.validate());
  auto bad_label = ds;
  bad_label.labels[0] = 0;
  CHECK_THROWS_AS(bad_label.validate(), LabelError);
  auto empty_class = ds;
  empty_class.num_classes = 3;
  CHECK_THROWS_AS(empty_class.validate(), LabelError);
  auto short_feature = ds;
  short_feature.samples[1].features[0].pop_back();
  CHECK_THROWS_AS(short_feature.validate(), ShapeError);
  auto nan = ds;
  nan.samples[0].features[1][0] = std::nan("");
  CHECK_THROWS_AS(nan.validate(), DomainError);
}

TEST_CASE("save then load reproduces the dataset bit for bit") {
  SimDesign d;
  d.model = 4;
  d.n_per_class = 4;
  d.p = 36;
  d.grid_size = 6;
  d.seed = 9;
  const auto ds = gen_model(d);
  const auto dir = scratch("roundtrip");
  save_dataset(ds, dir);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "feature_1.bin"));
  CHECK(fs::exists(dir / "feature_36.bin"));
  const auto back = load_dataset(dir);
  CHECK(back == ds);
}

TEST_CASE("load errors are descriptive") {
  const auto ds = tiny_dataset(2, 3);
  SUBCASE("missing manifest") {
    const auto dir = scratch("no_manifest");
    CHECK_THROWS_AS(load_dataset(dir), LoadError);
  }
  SUBCASE("value count mismatch") {
    FunctionalDataset big;
    big.num_classes = 1;
    big.feature_grids = {GridSpec::unit({30, 30})};
    big.samples.push_back({{std::vector<double>(900, 0.5)}});
    big.labels = {1};
    const auto dir = scratch("short_payload");
    save_dataset(big, dir);
    fs::resize_file(dir / "feature_1.bin", 899 * 8);
    try {
      load_dataset(dir);
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("899") != std::string::npos);
    }
  }
  SUBCASE("label outside the class range") {
    const auto dir = scratch("label_zero");
    save_dataset(ds, dir);
    std::ofstream(dir / "labels.csv") << "0\n1\n2\n3\n1\n2\n";
    CHECK_THROWS_AS(load_dataset(dir), LabelError);
  }
}

TEST_CASE("CSV payloads are accepted for 1D features") {
  const auto dir = scratch("csv");
  nlohmann::json m{{"format", "fbdnn-dataset"},
                   {"version", 1},
                   {"num_classes", 2},
                   {"num_samples", 2},
                   {"features",
                    {{{"index", 1}, {"dims", 1}, {"sizes", {3}}, {"file", "curve.csv"}}}}};
  std::ofstream(dir / "manifest.json") << m.dump();
  std::ofstream(dir / "curve.csv") << "0.5,1,1.5\n-1,0,2e-1\n";
  std::ofstream(dir / "labels.csv") << "1\n2\n";
  const auto ds = load_dataset(dir);
  REQUIRE(ds.size() == 2);
  CHECK(ds.samples[1].features[0] == std::vector<double>{-1.0, 0.0, 0.2});
  CHECK(ds.feature_grids[0] == GridSpec::unit({3}));
}
