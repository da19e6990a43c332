#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fbdnn {

/// Evenly spaced sampling grid of one functional feature, endpoints included.
struct GridSpec {
  std::vector<std::size_t> sizes;                   // points per axis
  std::vector<std::pair<double, double>> domain;    // per-axis interval

  static GridSpec unit(std::vector<std::size_t> sizes);

  std::size_t dims() const noexcept { return sizes.size(); }
  std::size_t point_count() const noexcept;

  /// Throws DomainError if an axis has fewer than two points or an empty interval.
  void validate() const;

  /// Coordinate of grid index `i` along `axis`, rescaled to [0, 1].
  double unit_coordinate(std::size_t axis, std::size_t i) const noexcept {
    return static_cast<double>(i) / static_cast<double>(sizes[axis] - 1);
  }

  bool operator==(const GridSpec&) const = default;
};

/// One observation: a row-major value array per feature.
struct FunctionalSample {
  std::vector<std::vector<double>> features;

  bool operator==(const FunctionalSample&) const = default;
};

struct FunctionalDataset {
  std::vector<FunctionalSample> samples;
  std::vector<int> labels;                // 1-based class labels
  std::vector<GridSpec> feature_grids;
  int num_classes = 0;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t num_features() const noexcept { return feature_grids.size(); }

  /// Checks every structural invariant; throws ShapeError, LabelError or DomainError.
  void validate() const;

  bool operator==(const FunctionalDataset&) const = default;
};

enum class BasisFamily { cosine };

std::string to_string(BasisFamily family);
BasisFamily basis_family_from_string(const std::string& name);

/// Functional weights used by the first layer, one block per feature.
struct BasisSpec {
  struct Feature {
    BasisFamily family = BasisFamily::cosine;
    std::size_t truncation = 1;  // q_{1j}
    std::size_t dims = 1;

    bool operator==(const Feature&) const = default;
  };
  std::vector<Feature> features;

  /// Same family and truncation for every feature, dims taken from the grids.
  static BasisSpec uniform(const std::vector<GridSpec>& grids,
                           std::size_t truncation,
                           BasisFamily family = BasisFamily::cosine);

  std::size_t num_features() const noexcept { return features.size(); }
  std::size_t total_scores() const noexcept;  // q_1
  /// Offset of feature j's first score in the concatenated score vector.
  std::size_t offset(std::size_t feature) const noexcept;
  std::vector<std::size_t> truncations() const;

  bool operator==(const BasisSpec&) const = default;
};

/// Frequency multi-indices of the d-dimensional cosine family, ordered by
/// total degree with lexicographic tie-breaking. Returns the first `count`.
std::vector<std::vector<int>> cosine_multi_indices(std::size_t dims,
                                                   std::size_t count);

/// Value of basis element `index` of `feature` at a point in [0, 1]^d.
double basis_eval(const BasisSpec& spec, std::size_t feature, std::size_t index,
                  std::span<const double> point);

/// Trapezoid weights for one axis of `size` points on [0, 1].
std::vector<double> trapezoid_weights(std::size_t size);

/// Precomputed quadrature-weighted basis tables for a fixed set of grids.
class Projector {
 public:
  Projector(std::vector<GridSpec> grids, BasisSpec spec);

  const BasisSpec& spec() const noexcept { return spec_; }
  const std::vector<GridSpec>& grids() const noexcept { return grids_; }
  std::size_t total_scores() const noexcept { return spec_.total_scores(); }

  /// Writes the q_1 scores of `sample` into `out`.
  void project_into(const FunctionalSample& sample, std::span<double> out) const;
  std::vector<double> project(const FunctionalSample& sample) const;

 private:
  std::vector<GridSpec> grids_;
  BasisSpec spec_;
  // Per feature: truncation x point_count, quadrature weight folded in.
  std::vector<std::vector<double>> tables_;
};

/// Scores <X_j, phi_{j,l}> concatenated over features then basis index.
std::vector<double> project(const FunctionalSample& sample,
                            const std::vector<GridSpec>& grids,
                            const BasisSpec& spec);

/// Row-major n x q_1 table of projected scores, one row per sample.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data.data() + i * cols, cols};
  }

  bool operator==(const ScoreMatrix&) const = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

/// Stratified, seed-deterministic split. Part sizes are floor(ratio * n),
/// remainders go to train; per-class quotas use largest remainders.
SplitIndices split_dataset(const FunctionalDataset& dataset,
                           const SplitRatios& ratios, std::uint64_t seed);

/// Directory layout: manifest.json, labels.csv, feature_<j>.bin (or .csv for 1D).
FunctionalDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const FunctionalDataset& dataset,
                  const std::filesystem::path& dir);

}  // namespace fbdnn
