#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbdnn/funcdata.hpp"
#include "fbdnn/network.hpp"

namespace fbdnn {

/// Everything needed to classify raw functional observations.
struct FittedModel {
  BasisSpec basis;
  ScoreScaler scaler;
  NetworkParams params;

  bool operator==(const FittedModel&) const = default;
};

/// Doubles are stored as C99 hex-float strings so the record round-trips exactly.
std::string encode_double(double v);
double decode_double(const std::string& s);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BasisSpec& spec);
BasisSpec basis_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetworkParams& params);
NetworkParams params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);

void save_model(const FittedModel& model, const std::filesystem::path& file);
FittedModel load_model(const std::filesystem::path& file);

}  // namespace fbdnn
