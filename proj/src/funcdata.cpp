#include "fbdnn/funcdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fbdnn/error.hpp"

namespace fbdnn {

GridSpec GridSpec::unit(std::vector<std::size_t> sizes) {
  GridSpec g;
  g.domain.assign(sizes.size(), {0.0, 1.0});
  g.sizes = std::move(sizes);
  return g;
}

std::size_t GridSpec::point_count() const noexcept {
  std::size_t n = 1;
  for (auto s : sizes) n *= s;
  return sizes.empty() ? 0 : n;
}

void GridSpec::validate() const {
  if (sizes.empty()) throw DomainError("grid has no axes");
  if (domain.size() != sizes.size())
    throw DomainError("grid domain has " + std::to_string(domain.size()) +
                      " intervals for " + std::to_string(sizes.size()) + " axes");
  for (std::size_t a = 0; a < sizes.size(); ++a) {
    if (sizes[a] < 2)
      throw DomainError("grid axis " + std::to_string(a) +
                        " has fewer than 2 points");
    if (!(domain[a].second > domain[a].first))
      throw DomainError("grid axis " + std::to_string(a) + " has an empty interval");
  }
}

void FunctionalDataset::validate() const {
  if (labels.size() != samples.size())
    throw ShapeError("dataset has " + std::to_string(samples.size()) +
                     " samples but " + std::to_string(labels.size()) + " labels");
  if (num_classes < 1) throw LabelError("class count must be positive");
  for (const auto& g : feature_grids) g.validate();

  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 1 || y > num_classes)
      throw LabelError("label " + std::to_string(y) + " at sample " +
                       std::to_string(i) + " outside 1.." +
                       std::to_string(num_classes));
    ++counts[static_cast<std::size_t>(y - 1)];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0)
      throw LabelError("class " + std::to_string(k + 1) + " has no samples");
  }

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.features.size() != feature_grids.size())
      throw ShapeError("sample " + std::to_string(i) + " has " +
                       std::to_string(s.features.size()) + " features, expected " +
                       std::to_string(feature_grids.size()));
    for (std::size_t j = 0; j < s.features.size(); ++j) {
      if (s.features[j].size() != feature_grids[j].point_count())
        throw ShapeError("sample " + std::to_string(i) + " feature " +
                         std::to_string(j + 1) + " has " +
                         std::to_string(s.features[j].size()) + " values, expected " +
                         std::to_string(feature_grids[j].point_count()));
      for (double v : s.features[j]) {
        if (!std::isfinite(v))
          throw DomainError("non-finite value in sample " + std::to_string(i) +
                            " feature " + std::to_string(j + 1));
      }
    }
  }
}

std::string to_string(BasisFamily family) {
  switch (family) {
    case BasisFamily::cosine:
      return "cosine";
  }
  return "unknown";
}

BasisFamily basis_family_from_string(const std::string& name) {
  if (name == "cosine") return BasisFamily::cosine;
  throw ConfigError("unknown basis family '" + name + "'");
}

BasisSpec BasisSpec::uniform(const std::vector<GridSpec>& grids,
                             std::size_t truncation, BasisFamily family) {
  if (truncation < 1) throw DomainError("basis truncation must be at least 1");
  BasisSpec spec;
  spec.features.reserve(grids.size());
  for (const auto& g : grids) spec.features.push_back({family, truncation, g.dims()});
  return spec;
}

std::size_t BasisSpec::total_scores() const noexcept {
  std::size_t q = 0;
  for (const auto& f : features) q += f.truncation;
  return q;
}

std::size_t BasisSpec::offset(std::size_t feature) const noexcept {
  std::size_t q = 0;
  for (std::size_t j = 0; j < feature; ++j) q += features[j].truncation;
  return q;
}

std::vector<std::size_t> BasisSpec::truncations() const {
  std::vector<std::size_t> t;
  t.reserve(features.size());
  for (const auto& f : features) t.push_back(f.truncation);
  return t;
}

namespace {

// Appends all compositions of `total` into `dims` parts in lexicographic order.
void compositions(std::size_t dims, int total, std::vector<int>& prefix,
                  std::vector<std::vector<int>>& out, std::size_t limit) {
  if (out.size() >= limit) return;
  if (prefix.size() + 1 == dims) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int k = 0; k <= total && out.size() < limit; ++k) {
    prefix.push_back(k);
    compositions(dims, total - k, prefix, out, limit);
    prefix.pop_back();
  }
}

double cosine_factor(int k, double s) {
  return k == 0 ? 1.0 : std::sqrt(2.0) * std::cos(M_PI * k * s);
}

}  // namespace

std::vector<std::vector<int>> cosine_multi_indices(std::size_t dims,
                                                   std::size_t count) {
  if (dims == 0) throw DomainError("basis dimension must be positive");
  std::vector<std::vector<int>> out;
  out.reserve(count);
  std::vector<int> prefix;
  for (int total = 0; out.size() < count; ++total) {
    compositions(dims, total, prefix, out, count);
  }
  return out;
}

double basis_eval(const BasisSpec& spec, std::size_t feature, std::size_t index,
                  std::span<const double> point) {
  if (feature >= spec.features.size())
    throw DomainError("basis feature " + std::to_string(feature) + " out of range");
  const auto& f = spec.features[feature];
  if (index >= f.truncation)
    throw DomainError("basis index " + std::to_string(index) +
                      " not below truncation " + std::to_string(f.truncation));
  if (point.size() != f.dims)
    throw DomainError("point has " + std::to_string(point.size()) +
                      " coordinates, basis is " + std::to_string(f.dims) + "-d");
  for (double s : point) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("point outside [0, 1]^d");
  }
  const auto freq = cosine_multi_indices(f.dims, index + 1).back();
  double v = 1.0;
  for (std::size_t a = 0; a < f.dims; ++a) v *= cosine_factor(freq[a], point[a]);
  return v;
}

std::vector<double> trapezoid_weights(std::size_t size) {
  if (size < 2) throw DomainError("trapezoid rule needs at least 2 points");
  const double h = 1.0 / static_cast<double>(size - 1);
  std::vector<double> w(size, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

Projector::Projector(std::vector<GridSpec> grids, BasisSpec spec)
    : grids_(std::move(grids)), spec_(std::move(spec)) {
  if (grids_.size() != spec_.num_features())
    throw ShapeError("basis has " + std::to_string(spec_.num_features()) +
                     " features but data has " + std::to_string(grids_.size()));
  tables_.resize(grids_.size());
  for (std::size_t j = 0; j < grids_.size(); ++j) {
    const auto& g = grids_[j];
    g.validate();
    const auto& f = spec_.features[j];
    if (f.dims != g.dims())
      throw ShapeError("feature " + std::to_string(j + 1) + " is " +
                       std::to_string(g.dims()) + "-d but its basis is " +
                       std::to_string(f.dims) + "-d");
    const std::size_t d = g.dims();
    const std::size_t npts = g.point_count();
    const auto freqs = cosine_multi_indices(d, f.truncation);

    std::vector<std::vector<double>> axis_w(d);
    for (std::size_t a = 0; a < d; ++a) axis_w[a] = trapezoid_weights(g.sizes[a]);

    auto& table = tables_[j];
    table.assign(f.truncation * npts, 0.0);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t pt = 0; pt < npts; ++pt) {
      // Row-major: last axis varies fastest.
      std::size_t rem = pt;
      for (std::size_t a = d; a-- > 0;) {
        idx[a] = rem % g.sizes[a];
        rem /= g.sizes[a];
      }
      double w = 1.0;
      for (std::size_t a = 0; a < d; ++a) w *= axis_w[a][idx[a]];
      for (std::size_t l = 0; l < f.truncation; ++l) {
        double v = w;
        for (std::size_t a = 0; a < d; ++a)
          v *= cosine_factor(freqs[l][a], g.unit_coordinate(a, idx[a]));
        table[l * npts + pt] = v;
      }
    }
  }
}

void Projector::project_into(const FunctionalSample& sample,
                             std::span<double> out) const {
  if (sample.features.size() != grids_.size())
    throw ShapeError("sample has " + std::to_string(sample.features.size()) +
                     " features, projector expects " + std::to_string(grids_.size()));
  if (out.size() != total_scores())
    throw ShapeError("score buffer has wrong length");
  std::size_t o = 0;
  for (std::size_t j = 0; j < grids_.size(); ++j) {
    const auto& x = sample.features[j];
    const std::size_t npts = grids_[j].point_count();
    if (x.size() != npts)
      throw ShapeError("feature " + std::to_string(j + 1) + " has " +
                       std::to_string(x.size()) + " values, grid has " +
                       std::to_string(npts));
    const auto& table = tables_[j];
    for (std::size_t l = 0; l < spec_.features[j].truncation; ++l) {
      const double* row = table.data() + l * npts;
      double acc = 0.0;
      for (std::size_t pt = 0; pt < npts; ++pt) acc += row[pt] * x[pt];
      out[o++] = acc;
    }
  }
}

std::vector<double> Projector::project(const FunctionalSample& sample) const {
  std::vector<double> z(total_scores());
  project_into(sample, z);
  return z;
}

std::vector<double> project(const FunctionalSample& sample,
                            const std::vector<GridSpec>& grids,
                            const BasisSpec& spec) {
  return Projector(grids, spec).project(sample);
}

namespace {

// Largest-remainder apportionment of `target` units proportional to `shares`.
std::vector<std::size_t> apportion(const std::vector<double>& shares,
                                   std::size_t target) {
  std::vector<std::size_t> out(shares.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < shares.size(); ++c) {
    const double fl = std::floor(shares[c]);
    out[c] = static_cast<std::size_t>(fl);
    assigned += out[c];
    rem.emplace_back(shares[c] - fl, c);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < rem.size(); ++i, ++assigned)
    ++out[rem[i].second];
  return out;
}

}  // namespace

SplitIndices split_dataset(const FunctionalDataset& dataset,
                           const SplitRatios& ratios, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n == 0) throw StratificationError("cannot split an empty dataset");
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be positive and sum to 1");

  const auto K = static_cast<std::size_t>(dataset.num_classes);
  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = dataset.labels[i];
    if (y < 1 || static_cast<std::size_t>(y) > K)
      throw LabelError("label " + std::to_string(y) + " outside 1.." +
                       std::to_string(K));
    by_class[static_cast<std::size_t>(y - 1)].push_back(i);
  }

  constexpr std::size_t parts = 3;
  for (std::size_t k = 0; k < K; ++k) {
    if (by_class[k].size() < parts)
      throw StratificationError("class " + std::to_string(k + 1) + " has " +
                                std::to_string(by_class[k].size()) +
                                " samples, fewer than the 3 split parts");
  }

  const auto floor_n = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  std::vector<double> val_share(K), test_share(K);
  for (std::size_t k = 0; k < K; ++k) {
    val_share[k] = ratios.validation * static_cast<double>(by_class[k].size());
    test_share[k] = ratios.test * static_cast<double>(by_class[k].size());
  }
  const auto val_q = apportion(val_share, floor_n(ratios.validation));
  const auto test_q = apportion(test_share, floor_n(ratios.test));

  SplitIndices split;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < K; ++k) {
    auto idx = by_class[k];
    if (val_q[k] + test_q[k] >= idx.size())
      throw StratificationError("class " + std::to_string(k + 1) +
                                " too small for the requested split");
    std::shuffle(idx.begin(), idx.end(), rng);
    auto it = idx.begin();
    split.validation.insert(split.validation.end(), it, it + val_q[k]);
    it += static_cast<std::ptrdiff_t>(val_q[k]);
    split.test.insert(split.test.end(), it, it + test_q[k]);
    it += static_cast<std::ptrdiff_t>(test_q[k]);
    split.train.insert(split.train.end(), it, idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace fbdnn
