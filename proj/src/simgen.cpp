#include "fbdnn/simgen.hpp"

#include <cmath>

#include "fbdnn/error.hpp"

namespace fbdnn {

ScoreDistribution ScoreDistribution::gaussian(std::vector<double> mean,
                                              std::vector<double> variance) {
  ScoreDistribution d;
  d.kind = Kind::gaussian;
  d.mean = std::move(mean);
  d.variance = std::move(variance);
  d.validate();
  return d;
}

ScoreDistribution ScoreDistribution::exponential(std::vector<double> rate) {
  ScoreDistribution d;
  d.kind = Kind::exponential;
  d.rate = std::move(rate);
  d.validate();
  return d;
}

ScoreDistribution ScoreDistribution::student_t(std::vector<double> dof, double location) {
  ScoreDistribution d;
  d.kind = Kind::student_t;
  d.dof = std::move(dof);
  d.location = location;
  d.validate();
  return d;
}

std::size_t ScoreDistribution::dim() const noexcept {
  switch (kind) {
    case Kind::gaussian: return mean.size();
    case Kind::exponential: return rate.size();
    case Kind::student_t: return dof.size();
  }
  return 0;
}

void ScoreDistribution::validate() const {
  switch (kind) {
    case Kind::gaussian:
      if (mean.empty() || mean.size() != variance.size())
        throw ConfigError("gaussian mean and variance must have equal nonzero length");
      for (double v : variance)
        if (!(v > 0.0)) throw ConfigError("gaussian variances must be positive");
      break;
    case Kind::exponential:
      if (rate.empty()) throw ConfigError("exponential law needs rates");
      for (double r : rate)
        if (!(r > 0.0)) throw ConfigError("exponential rates must be positive");
      break;
    case Kind::student_t:
      if (dof.empty()) throw ConfigError("student-t law needs degrees of freedom");
      for (double v : dof)
        if (!(v > 0.0)) throw ConfigError("degrees of freedom must be positive");
      break;
  }
}

void gen_scores_into(const ScoreDistribution& dist, std::size_t count,
                     std::mt19937_64& rng, ScoreMatrix& out) {
  const std::size_t d = dist.dim();
  out = ScoreMatrix(count, d);
  for (std::size_t i = 0; i < count; ++i) {
    auto row = out.row(i);
    for (std::size_t l = 0; l < d; ++l) {
      switch (dist.kind) {
        case ScoreDistribution::Kind::gaussian: {
          std::normal_distribution<double> n(dist.mean[l], std::sqrt(dist.variance[l]));
          row[l] = n(rng);
          break;
        }
        case ScoreDistribution::Kind::exponential: {
          std::exponential_distribution<double> e(dist.rate[l]);
          row[l] = e(rng);
          break;
        }
        case ScoreDistribution::Kind::student_t: {
          std::student_t_distribution<double> t(dist.dof[l]);
          row[l] = dist.location + t(rng);
          break;
        }
      }
    }
  }
}

ScoreMatrix gen_scores(const ScoreDistribution& dist, std::size_t count,
                       std::uint64_t seed) {
  if (count < 1) throw ConfigError("score count must be at least 1");
  dist.validate();
  std::mt19937_64 rng(seed);
  ScoreMatrix out;
  gen_scores_into(dist, count, rng, out);
  return out;
}

std::size_t synthesis_basis_size(SynthesisBasis basis) {
  return basis == SynthesisBasis::surface ? 5 : 3;
}

double synthesis_basis_eval(SynthesisBasis basis, std::size_t index,
                            std::span<const double> point) {
  if (basis == SynthesisBasis::surface) {
    const double s = point[0], t = point[1];
    switch (index) {
      case 0: return s;
      case 1: return t;
      case 2: return s * t;
      case 3: return s * s;
      case 4: return t * t;
    }
  } else {
    const double s = point[0];
    switch (index) {
      case 0: return std::log(s + 2.0);
      case 1: return s;
      case 2: return s * s * s;
    }
  }
  throw DomainError("synthesis basis index out of range");
}

namespace {

// Basis values at every grid point, point-major.
std::vector<double> basis_table(SynthesisBasis basis, const GridSpec& grid) {
  const std::size_t nb = synthesis_basis_size(basis);
  const std::size_t d = grid.dims();
  if (d != (basis == SynthesisBasis::surface ? 2u : 1u))
    throw ShapeError("synthesis basis and grid dimension disagree");
  const std::size_t npts = grid.point_count();
  std::vector<double> table(npts * nb);
  std::vector<double> pt(d);
  for (std::size_t g = 0; g < npts; ++g) {
    std::size_t rem = g;
    for (std::size_t a = d; a-- > 0;) {
      pt[a] = grid.unit_coordinate(a, rem % grid.sizes[a]);
      rem /= grid.sizes[a];
    }
    for (std::size_t l = 0; l < nb; ++l) table[g * nb + l] = synthesis_basis_eval(basis, l, pt);
  }
  return table;
}

void synthesize_from_table(std::span<const double> scores, const std::vector<double>& table,
                           std::size_t nb, double noise_sd, std::mt19937_64& rng,
                           std::vector<double>& out) {
  const std::size_t npts = table.size() / nb;
  out.resize(npts);
  std::normal_distribution<double> noise(0.0, noise_sd > 0.0 ? noise_sd : 1.0);
  for (std::size_t g = 0; g < npts; ++g) {
    double v = 0.0;
    for (std::size_t l = 0; l < nb; ++l) v += scores[l] * table[g * nb + l];
    if (noise_sd > 0.0) v += noise(rng);
    out[g] = v;
  }
}

}  // namespace

std::vector<double> synthesize(std::span<const double> scores, SynthesisBasis basis,
                               const GridSpec& grid, double noise_sd,
                               std::mt19937_64& rng) {
  const std::size_t nb = synthesis_basis_size(basis);
  if (scores.size() != nb)
    throw ShapeError("got " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(nb) + " synthesis basis functions");
  if (noise_sd < 0.0) throw ConfigError("noise sd must be non-negative");
  grid.validate();
  std::vector<double> out;
  synthesize_from_table(scores, basis_table(basis, grid), nb, noise_sd, rng, out);
  return out;
}

std::vector<double> synthesize(std::span<const double> scores, SynthesisBasis basis,
                               const GridSpec& grid, double noise_sd,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return synthesize(scores, basis, grid, noise_sd, rng);
}

int model_from_string(const std::string& name) {
  static const char* roman[] = {"I", "II", "III", "IV", "V", "VI"};
  for (int i = 0; i < 6; ++i) {
    if (name == roman[i] || name == std::to_string(i + 1)) return i + 1;
  }
  throw ConfigError("unknown simulation model '" + name + "' (expected I..VI)");
}

std::string model_name(int model) {
  static const char* roman[] = {"I", "II", "III", "IV", "V", "VI"};
  if (model < 1 || model > 6) throw ConfigError("model id must be 1..6");
  return roman[model - 1];
}

void SimDesign::validate() const {
  if (model < 1 || model > 6) throw ConfigError("model id must be 1..6");
  if (n_per_class < 1) throw ConfigError("n_per_class must be at least 1");
  if (grid_size < 2 || (mixed() && curve_grid_size < 2))
    throw DomainError("grid sizes must be at least 2");
  if (noise_sd < 0.0) throw ConfigError("noise sd must be non-negative");
  const std::size_t need = mixed() ? curve_features + 5 : 5;
  if (mixed() && curve_features < 3)
    throw ConfigError("mixed designs need at least 3 curve features");
  if (p < need)
    throw ConfigError("model " + model_name(model) + " needs p >= " + std::to_string(need));
}

std::vector<std::size_t> SimDesign::truth() const {
  if (!mixed()) return {1, 2, 3, 4, 5};
  std::vector<std::size_t> t{1, 2, 3};
  for (std::size_t j = 1; j <= 5; ++j) t.push_back(curve_features + j);
  return t;
}

SynthesisBasis SimDesign::basis(std::size_t feature) const {
  return mixed() && feature < curve_features ? SynthesisBasis::curve
                                             : SynthesisBasis::surface;
}

GridSpec SimDesign::grid(std::size_t feature) const {
  if (basis(feature) == SynthesisBasis::curve) return GridSpec::unit({curve_grid_size});
  return GridSpec::unit({grid_size, grid_size});
}

ScoreDistribution SimDesign::distribution(std::size_t feature, int label) const {
  using SD = ScoreDistribution;
  const bool curve = basis(feature) == SynthesisBasis::curve;
  const std::size_t first_surface = mixed() ? curve_features : 0;
  const bool active = curve ? feature < 3
                            : feature >= first_surface && feature < first_surface + 5;

  const auto null_law = [&] {
    return curve ? SD::gaussian({0, 0, 0}, {1, 0.64, 0.36})
                 : SD::gaussian({0, 0, 0, 0, 0}, {1, 0.64, 0.36, 0.16, 0.04});
  };
  if (!active) return null_law();

  // Which family of class laws applies: I/IV high separability, II/V low,
  // III/VI non-Gaussian.
  const int family = (model - 1) % 3;
  if (curve) {
    switch (family) {
      case 0:
        if (label == 1) return SD::gaussian({2.5, 2, 1.5}, {25, 16, 9});
        if (label == 2) return SD::gaussian({-2.5, -2, -1.5}, {9, 4, 2.25});
        return null_law();
      case 1:
        if (label == 1) return SD::gaussian({0.5, 0.5, 0.5}, {25, 16, 9});
        if (label == 2) return SD::gaussian({-0.5, -0.5, -0.5}, {9, 4, 2.25});
        return null_law();
      default:
        if (label == 1) return SD::exponential({0.1, 0.15, 0.2});
        if (label == 2) return SD::student_t({4, 6, 8}, 3.0);
        return SD::gaussian({0, 0, 0}, {1.2, 0.8, 0.4});
    }
  }
  switch (family) {
    case 0:
      if (label == 1) return SD::gaussian({2.5, 2, 1.5, 1, 0.5}, {25, 16, 9, 4, 1});
      if (label == 2)
        return SD::gaussian({-2.5, -2, -1.5, -1, -0.5}, {9, 4, 2.25, 1, 0.25});
      return null_law();
    case 1:
      if (label == 1) return SD::gaussian({0.5, 0.5, 0.5, 0.5, 0.5}, {25, 16, 9, 4, 1});
      if (label == 2)
        return SD::gaussian({-0.5, -0.5, -0.5, -0.5, -0.5}, {9, 4, 2.25, 1, 0.25});
      return null_law();
    default:
      if (label == 1) return SD::exponential({0.1, 0.12, 0.14, 0.16, 0.18});
      if (label == 2) return SD::student_t({3, 5, 7, 9, 11}, 3.0);
      return null_law();
  }
}

FunctionalDataset gen_model(const SimDesign& design) {
  design.validate();
  const std::size_t K = SimDesign::kClasses;
  const std::size_t n = K * design.n_per_class;

  FunctionalDataset ds;
  ds.num_classes = static_cast<int>(K);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    ds.labels[i] = static_cast<int>(i / design.n_per_class) + 1;
  ds.samples.resize(n);
  for (auto& s : ds.samples) s.features.resize(design.p);

  std::mt19937_64 rng(design.seed);
  ScoreMatrix scores;
  for (std::size_t j = 0; j < design.p; ++j) {
    const auto grid = design.grid(j);
    const auto basis = design.basis(j);
    const auto table = basis_table(basis, grid);
    const std::size_t nb = synthesis_basis_size(basis);
    ds.feature_grids.push_back(grid);
    for (std::size_t k = 0; k < K; ++k) {
      const auto dist = design.distribution(j, static_cast<int>(k + 1));
      gen_scores_into(dist, design.n_per_class, rng, scores);
      for (std::size_t r = 0; r < design.n_per_class; ++r) {
        auto& out = ds.samples[k * design.n_per_class + r].features[j];
        synthesize_from_table(scores.row(r), table, nb, design.noise_sd, rng, out);
      }
    }
  }
  return ds;
}

}  // namespace fbdnn
