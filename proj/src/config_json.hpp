#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ecgtf/classifier.hpp"
#include "ecgtf/error.hpp"
#include "ecgtf/featurize.hpp"
#include "ecgtf/rpeak.hpp"

namespace ecgtf::config_json {

using nlohmann::json;

/// Missing keys keep the default; keys outside `allowed` are rejected so a
/// typo in a config file cannot silently fall back to a default.
void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed);

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string(where) + "." + std::string(key) + ": " + e.what());
  }
}

json to_json(const nn::NetworkConfig& c);
nn::NetworkConfig network_from_json(const json& j);

/// `with_seed` false leaves the seed out (the pipeline carries it at top level).
json to_json(const nn::TrainConfig& c, bool with_seed = true);
nn::TrainConfig train_from_json(const json& j, bool with_seed = true);

json to_json(const rpeak::DetectorConfig& c);
rpeak::DetectorConfig detector_from_json(const json& j);

json to_json(const featurize::GateConfig& c);
featurize::GateConfig gate_from_json(const json& j);

std::string_view to_string(rpeak::HighpassVariant v);
rpeak::HighpassVariant highpass_from_string(std::string_view s);

}  // namespace ecgtf::config_json
