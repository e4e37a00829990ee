#include "config_json.hpp"

#include <algorithm>

namespace ecgtf::config_json {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InvalidArgument("unknown key " + std::string(where) + "." + key);
    }
  }
}

json to_json(const nn::NetworkConfig& c) {
  return {{"stem_width", c.stem_width},
          {"stage_widths", c.stage_widths},
          {"blocks_per_stage", c.blocks_per_stage},
          {"input_height", c.input_height},
          {"input_width", c.input_width},
          {"class_count", c.class_count},
          {"normalization", c.normalization}};
}

nn::NetworkConfig network_from_json(const json& j) {
  constexpr std::string_view w = "network";
  check_keys(j, w, {"stem_width", "stage_widths", "blocks_per_stage", "input_height", "input_width",
                    "class_count", "normalization"});
  nn::NetworkConfig c;
  read(j, "stem_width", c.stem_width, w);
  read(j, "stage_widths", c.stage_widths, w);
  read(j, "blocks_per_stage", c.blocks_per_stage, w);
  read(j, "input_height", c.input_height, w);
  read(j, "input_width", c.input_width, w);
  read(j, "class_count", c.class_count, w);
  read(j, "normalization", c.normalization, w);
  c.validate();
  return c;
}

json to_json(const nn::TrainConfig& c, bool with_seed) {
  json j = {{"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"clip_norm", c.clip_norm}};
  if (with_seed) j["seed"] = c.seed;
  return j;
}

nn::TrainConfig train_from_json(const json& j, bool with_seed) {
  constexpr std::string_view w = "train";
  if (with_seed) {
    check_keys(j, w, {"learning_rate", "momentum", "batch_size", "epochs", "clip_norm", "seed"});
  } else {
    check_keys(j, w, {"learning_rate", "momentum", "batch_size", "epochs", "clip_norm"});
  }
  nn::TrainConfig c;
  read(j, "learning_rate", c.learning_rate, w);
  read(j, "momentum", c.momentum, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "epochs", c.epochs, w);
  read(j, "clip_norm", c.clip_norm, w);
  if (with_seed) read(j, "seed", c.seed, w);
  return c;
}

std::string_view to_string(rpeak::HighpassVariant v) {
  return v == rpeak::HighpassVariant::kClassic ? "classic" : "printed";
}

rpeak::HighpassVariant highpass_from_string(std::string_view s) {
  if (s == "printed") return rpeak::HighpassVariant::kPrinted;
  if (s == "classic") return rpeak::HighpassVariant::kClassic;
  throw InvalidArgument("highpass must be \"printed\" or \"classic\", got \"" + std::string(s) + "\"");
}

json to_json(const rpeak::DetectorConfig& c) {
  return {{"window", c.window},
          {"refractory_s", c.refractory_s},
          {"threshold_fraction", c.threshold_fraction},
          {"update_factor", c.update_factor},
          {"searchback_rr_factor", c.searchback_rr_factor},
          {"searchback_threshold_scale", c.searchback_threshold_scale},
          {"learning_s", c.learning_s},
          {"refine_s", c.refine_s},
          {"t_wave_s", c.t_wave_s},
          {"highpass", to_string(c.highpass)}};
}

rpeak::DetectorConfig detector_from_json(const json& j) {
  constexpr std::string_view w = "detector";
  check_keys(j, w, {"window", "refractory_s", "threshold_fraction", "update_factor", "searchback_rr_factor",
                    "searchback_threshold_scale", "learning_s", "refine_s", "t_wave_s", "highpass"});
  rpeak::DetectorConfig c;
  read(j, "window", c.window, w);
  read(j, "refractory_s", c.refractory_s, w);
  read(j, "threshold_fraction", c.threshold_fraction, w);
  read(j, "update_factor", c.update_factor, w);
  read(j, "searchback_rr_factor", c.searchback_rr_factor, w);
  read(j, "searchback_threshold_scale", c.searchback_threshold_scale, w);
  read(j, "learning_s", c.learning_s, w);
  read(j, "refine_s", c.refine_s, w);
  read(j, "t_wave_s", c.t_wave_s, w);
  std::string hp(to_string(c.highpass));
  read(j, "highpass", hp, w);
  c.highpass = highpass_from_string(hp);
  return c;
}

json to_json(const featurize::GateConfig& c) { return {{"min_bpm", c.min_bpm}, {"max_bpm", c.max_bpm}}; }

featurize::GateConfig gate_from_json(const json& j) {
  constexpr std::string_view w = "gate";
  check_keys(j, w, {"min_bpm", "max_bpm"});
  featurize::GateConfig c;
  read(j, "min_bpm", c.min_bpm, w);
  read(j, "max_bpm", c.max_bpm, w);
  return c;
}

}  // namespace ecgtf::config_json
