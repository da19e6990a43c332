#include "fbdnn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "fbdnn/error.hpp"

namespace fbdnn {

using nlohmann::json;

namespace {

constexpr int kModelVersion = 1;

json encode_vector(std::span<const double> v) {
  json arr = json::array();
  for (double x : v) arr.push_back(encode_double(x));
  return arr;
}

std::vector<double> decode_vector(const json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& s : arr) out.push_back(decode_double(s.get<std::string>()));
  return out;
}

}  // namespace

std::string encode_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double decode_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw LoadError("bad float literal '" + s + "'");
  return v;
}

json to_json(const Architecture& arch) {
  return {{"truncations", arch.truncations},
          {"hidden", arch.hidden},
          {"output_dim", arch.output_dim},
          {"dropout", encode_double(arch.dropout)},
          {"output", to_string(arch.output)}};
}

Architecture architecture_from_json(const json& j) {
  Architecture a;
  a.truncations = j.at("truncations").get<std::vector<std::size_t>>();
  a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  a.output_dim = j.at("output_dim").get<std::size_t>();
  a.dropout = decode_double(j.at("dropout").get<std::string>());
  a.output = output_mode_from_string(j.at("output").get<std::string>());
  a.validate();
  return a;
}

json to_json(const BasisSpec& spec) {
  json arr = json::array();
  for (const auto& f : spec.features)
    arr.push_back({{"family", to_string(f.family)},
                   {"truncation", f.truncation},
                   {"dims", f.dims}});
  return arr;
}

BasisSpec basis_from_json(const json& j) {
  BasisSpec spec;
  for (const auto& f : j)
    spec.features.push_back({basis_family_from_string(f.at("family").get<std::string>()),
                             f.at("truncation").get<std::size_t>(),
                             f.at("dims").get<std::size_t>()});
  return spec;
}

json to_json(const NetworkParams& params) {
  return {{"architecture", to_json(params.arch())},
          {"values", encode_vector(params.values())}};
}

NetworkParams params_from_json(const json& j) {
  NetworkParams p(architecture_from_json(j.at("architecture")));
  const auto values = decode_vector(j.at("values"));
  if (values.size() != p.values().size())
    throw ShapeError("checkpoint holds " + std::to_string(values.size()) +
                     " parameters, architecture needs " +
                     std::to_string(p.values().size()));
  std::copy(values.begin(), values.end(), p.values().begin());
  return p;
}

json to_json(const FittedModel& model) {
  return {{"format", "fbdnn-model"},
          {"version", kModelVersion},
          {"basis", to_json(model.basis)},
          {"scaler",
           {{"mean", encode_vector(model.scaler.mean)},
            {"scale", encode_vector(model.scaler.scale)}}},
          {"network", to_json(model.params)}};
}

FittedModel model_from_json(const json& j) {
  try {
    if (j.value("version", 0) != kModelVersion)
      throw LoadError("unsupported model version");
    FittedModel m;
    m.basis = basis_from_json(j.at("basis"));
    m.scaler.mean = decode_vector(j.at("scaler").at("mean"));
    m.scaler.scale = decode_vector(j.at("scaler").at("scale"));
    m.params = params_from_json(j.at("network"));
    if (m.basis.truncations() != m.params.arch().truncations)
      throw ShapeError("basis and network truncations disagree");
    return m;
  } catch (const json::exception& e) {
    throw LoadError("malformed model record: " + std::string(e.what()));
  }
}

void save_model(const FittedModel& model, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw LoadError("cannot write " + file.string());
  out << to_json(model).dump() << '\n';
}

FittedModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError("malformed model file: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace fbdnn
