#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fbdnn/error.hpp"
#include "fbdnn/funcdata.hpp"

namespace fbdnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
    return r;
  }
  return v;
}

std::vector<double> read_f64le(const fs::path& file, std::size_t expected) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw LoadError("cannot open " + file.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % 8 != 0)
    throw ShapeError(file.string() + " size " + std::to_string(bytes) +
                     " is not a whole number of 64-bit floats");
  if (bytes / 8 != expected)
    throw ShapeError(file.string() + " holds " + std::to_string(bytes / 8) +
                     " values, manifest implies " + std::to_string(expected));
  in.seekg(0);
  std::vector<double> out(expected);
  for (auto& v : out) {
    std::uint64_t raw = 0;
    in.read(reinterpret_cast<char*>(&raw), 8);
    raw = to_le(raw);
    std::memcpy(&v, &raw, 8);
  }
  if (!in) throw LoadError("short read on " + file.string());
  return out;
}

std::vector<double> read_csv_rows(const fs::path& file, std::size_t rows,
                                  std::size_t cols) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open " + file.string());
  std::vector<double> out;
  out.reserve(rows * cols);
  std::string line;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        out.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw LoadError(file.string() + " row " + std::to_string(r + 1) +
                        ": cannot parse '" + cell + "'");
      }
      ++c;
    }
    if (c != cols)
      throw ShapeError(file.string() + " row " + std::to_string(r + 1) + " has " +
                       std::to_string(c) + " values, grid has " +
                       std::to_string(cols));
    ++r;
  }
  if (r != rows)
    throw ShapeError(file.string() + " has " + std::to_string(r) +
                     " rows, manifest declares " + std::to_string(rows) + " samples");
  return out;
}

template <class T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw LoadError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(where + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace

FunctionalDataset load_dataset(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw LoadError("missing manifest " + manifest_path.string());
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest: " + std::string(e.what()));
  }

  FunctionalDataset ds;
  ds.num_classes = required<int>(manifest, "num_classes", "manifest");
  const auto n = required<std::size_t>(manifest, "num_samples", "manifest");
  const auto features = required<json>(manifest, "features", "manifest");
  if (!features.is_array() || features.empty())
    throw LoadError("manifest: 'features' must be a non-empty array");

  std::vector<std::vector<double>> payload;
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    const std::string where = "manifest feature " + std::to_string(j + 1);
    GridSpec g;
    g.sizes = required<std::vector<std::size_t>>(f, "sizes", where);
    const auto dims = required<std::size_t>(f, "dims", where);
    if (dims != g.sizes.size())
      throw ShapeError(where + ": dims " + std::to_string(dims) + " but " +
                       std::to_string(g.sizes.size()) + " grid sizes");
    if (f.contains("domain")) {
      for (const auto& iv : f.at("domain"))
        g.domain.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
    } else {
      g.domain.assign(dims, {0.0, 1.0});
    }
    g.validate();

    const auto file = dir / required<std::string>(f, "file", where);
    const std::string encoding =
        f.value("encoding", file.extension() == ".csv" ? "csv" : "f64le");
    const std::size_t npts = g.point_count();
    if (encoding == "f64le") {
      payload.push_back(read_f64le(file, n * npts));
    } else if (encoding == "csv") {
      if (dims != 1) throw LoadError(where + ": CSV encoding is only for 1D features");
      payload.push_back(read_csv_rows(file, n, npts));
    } else {
      throw LoadError(where + ": unknown encoding '" + encoding + "'");
    }
    ds.feature_grids.push_back(std::move(g));
  }

  std::ifstream lf(dir / "labels.csv");
  if (!lf) throw LoadError("missing " + (dir / "labels.csv").string());
  std::string line;
  while (std::getline(lf, line)) {
    if (line.empty() || line == "\r") continue;
    try {
      ds.labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw LoadError("labels.csv: cannot parse '" + line + "'");
    }
  }
  if (ds.labels.size() != n)
    throw ShapeError("labels.csv has " + std::to_string(ds.labels.size()) +
                     " labels, manifest declares " + std::to_string(n));

  ds.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.samples[i].features.resize(payload.size());
    for (std::size_t j = 0; j < payload.size(); ++j) {
      const std::size_t npts = ds.feature_grids[j].point_count();
      const auto first = payload[j].begin() + static_cast<std::ptrdiff_t>(i * npts);
      ds.samples[i].features[j].assign(first, first + static_cast<std::ptrdiff_t>(npts));
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const FunctionalDataset& dataset, const fs::path& dir) {
  dataset.validate();
  fs::create_directories(dir);

  json manifest;
  manifest["format"] = "fbdnn-dataset";
  manifest["version"] = kFormatVersion;
  manifest["num_classes"] = dataset.num_classes;
  manifest["num_samples"] = dataset.size();
  json features = json::array();
  for (std::size_t j = 0; j < dataset.num_features(); ++j) {
    const auto& g = dataset.feature_grids[j];
    json f;
    f["index"] = j + 1;
    f["dims"] = g.dims();
    f["sizes"] = g.sizes;
    json dom = json::array();
    for (const auto& [lo, hi] : g.domain) dom.push_back({lo, hi});
    f["domain"] = dom;
    const std::string name = "feature_" + std::to_string(j + 1) + ".bin";
    f["file"] = name;
    f["encoding"] = "f64le";
    features.push_back(f);

    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write " + (dir / name).string());
    for (const auto& s : dataset.samples) {
      for (double v : s.features[j]) {
        std::uint64_t raw = 0;
        std::memcpy(&raw, &v, 8);
        raw = to_le(raw);
        out.write(reinterpret_cast<const char*>(&raw), 8);
      }
    }
  }
  manifest["features"] = features;

  std::ofstream mf(dir / "manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << '\n';
  std::ofstream lf(dir / "labels.csv", std::ios::trunc);
  for (int y : dataset.labels) lf << y << '\n';
  if (!mf || !lf) throw LoadError("failed writing dataset to " + dir.string());
}

}  // namespace fbdnn
