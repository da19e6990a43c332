#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fbdnn/funcdata.hpp"

namespace fbdnn {

/// Per-coordinate law of the synthesis scores of one feature and class.
struct ScoreDistribution {
  enum class Kind { gaussian, exponential, student_t };

  Kind kind = Kind::gaussian;
  std::vector<double> mean;      // gaussian
  std::vector<double> variance;  // gaussian, diagonal covariance
  std::vector<double> rate;      // exponential; mean is 1 / rate
  std::vector<double> dof;       // student_t degrees of freedom
  double location = 0.0;         // student_t shift

  static ScoreDistribution gaussian(std::vector<double> mean, std::vector<double> variance);
  static ScoreDistribution exponential(std::vector<double> rate);
  static ScoreDistribution student_t(std::vector<double> dof, double location);

  std::size_t dim() const noexcept;
  void validate() const;
};

/// Draws `count` i.i.d. rows from `dist`.
ScoreMatrix gen_scores(const ScoreDistribution& dist, std::size_t count,
                       std::uint64_t seed);
void gen_scores_into(const ScoreDistribution& dist, std::size_t count,
                     std::mt19937_64& rng, ScoreMatrix& out);

/// Data-generating bases: {s, t, st, s^2, t^2} on [0,1]^2 and
/// {log(s + 2), s, s^3} on [0,1].
enum class SynthesisBasis { surface, curve };

std::size_t synthesis_basis_size(SynthesisBasis basis);
double synthesis_basis_eval(SynthesisBasis basis, std::size_t index,
                            std::span<const double> point);

/// Sum_l scores[l] phi_l evaluated on the grid plus i.i.d. N(0, noise_sd^2).
std::vector<double> synthesize(std::span<const double> scores, SynthesisBasis basis,
                               const GridSpec& grid, double noise_sd,
                               std::mt19937_64& rng);
std::vector<double> synthesize(std::span<const double> scores, SynthesisBasis basis,
                               const GridSpec& grid, double noise_sd,
                               std::uint64_t seed);

struct SimDesign {
  int model = 1;                 // I..VI as 1..6
  std::size_t n_per_class = 100;
  std::size_t p = 50;            // total features
  std::size_t grid_size = 30;    // m, per axis of the 2D features
  std::size_t curve_grid_size = 15;
  std::size_t curve_features = 30;  // 1D features in the mixed designs
  double noise_sd = 0.1;
  std::uint64_t seed = 0;

  static constexpr int kClasses = 3;

  bool mixed() const noexcept { return model >= 4; }
  void validate() const;
  /// True feature set, 1-based.
  std::vector<std::size_t> truth() const;
  /// Law of feature j's scores (0-based) under class k (1-based).
  ScoreDistribution distribution(std::size_t feature, int label) const;
  SynthesisBasis basis(std::size_t feature) const;
  GridSpec grid(std::size_t feature) const;
};

int model_from_string(const std::string& name);
std::string model_name(int model);

FunctionalDataset gen_model(const SimDesign& design);

}  // namespace fbdnn
