#include "ecgtf/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "config_json.hpp"

namespace ecgtf::pipeline {

namespace fs = std::filesystem;
using config_json::json;

void PipelineConfig::validate() const {
  if (!(fs > 0.0)) throw InvalidArgument("config: fs must be positive");
  if (!(int_scale > 0.0)) throw InvalidArgument("config: int_scale must be positive");
  if (butterworth_order < 1) throw InvalidArgument("config: butterworth_order must be >= 1");
  if (!(butterworth_cutoff_hz > 0.0)) throw InvalidArgument("config: butterworth_cutoff_hz must be positive");
  if (detector.window < 1) throw InvalidArgument("config: detector.window must be >= 1");
  if (!(gate.min_bpm >= 0.0 && gate.max_bpm >= gate.min_bpm)) {
    throw InvalidArgument("config: gate band must satisfy 0 <= min_bpm <= max_bpm");
  }
  if (feature_length < 2) throw InvalidArgument("config: feature_length must be >= 2");
  if (scale_count < 1) throw InvalidArgument("config: scale_count must be >= 1");
  if (wavelet_iterations < 4) throw InvalidArgument("config: wavelet_iterations must be >= 4");
  if (cwt_stride < 1) throw InvalidArgument("config: cwt_stride must be >= 1");
  network.validate();
  train.validate();
  const std::size_t cols = (feature_length + cwt_stride - 1) / cwt_stride;
  if (scale_count % network.input_height != 0 || cols % network.input_width != 0) {
    throw InvalidArgument("config: a " + std::to_string(scale_count) + "x" + std::to_string(cols) +
                          " scalogram does not area-average onto the " + std::to_string(network.input_height) +
                          "x" + std::to_string(network.input_width) + " network input");
  }
}

LoadOptions PipelineConfig::load_options() const { return {fs, int_scale}; }

nn::TrainConfig PipelineConfig::effective_train() const {
  auto t = train;
  t.seed = seed;
  return t;
}

std::string to_json(const PipelineConfig& c) {
  const json j = {{"fs", c.fs},
                  {"int_scale", c.int_scale},
                  {"butterworth_order", c.butterworth_order},
                  {"butterworth_cutoff_hz", c.butterworth_cutoff_hz},
                  {"detector", config_json::to_json(c.detector)},
                  {"gate", config_json::to_json(c.gate)},
                  {"feature_length", c.feature_length},
                  {"scale_count", c.scale_count},
                  {"wavelet_iterations", c.wavelet_iterations},
                  {"cwt_stride", c.cwt_stride},
                  {"network", config_json::to_json(c.network)},
                  {"train", config_json::to_json(c.train, false)},
                  {"seed", c.seed}};
  return j.dump(2) + "\n";
}

PipelineConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what(), e.byte);
  }
  constexpr std::string_view w = "config";
  config_json::check_keys(j, w,
                          {"fs", "int_scale", "butterworth_order", "butterworth_cutoff_hz", "detector", "gate",
                           "feature_length", "scale_count", "wavelet_iterations", "cwt_stride", "network", "train",
                           "seed"});
  PipelineConfig c;
  config_json::read(j, "fs", c.fs, w);
  config_json::read(j, "int_scale", c.int_scale, w);
  config_json::read(j, "butterworth_order", c.butterworth_order, w);
  config_json::read(j, "butterworth_cutoff_hz", c.butterworth_cutoff_hz, w);
  if (j.contains("detector")) c.detector = config_json::detector_from_json(j.at("detector"));
  if (j.contains("gate")) c.gate = config_json::gate_from_json(j.at("gate"));
  config_json::read(j, "feature_length", c.feature_length, w);
  config_json::read(j, "scale_count", c.scale_count, w);
  config_json::read(j, "wavelet_iterations", c.wavelet_iterations, w);
  config_json::read(j, "cwt_stride", c.cwt_stride, w);
  if (j.contains("network")) c.network = config_json::network_from_json(j.at("network"));
  if (j.contains("train")) c.train = config_json::train_from_json(j.at("train"), false);
  config_json::read(j, "seed", c.seed, w);
  c.validate();
  return c;
}

void save_config(const PipelineConfig& config, const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << to_json(config);
  if (!f) throw IoError("failed writing " + path.string());
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

std::string error_kind(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->kind();
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const DivergenceError*>(&e)) return "DivergenceError";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "InternalError";
}

EcgRecord load(const fs::path& path, const PipelineConfig& config) {
  return in_stage("ingest", [&] { return load_record(path, config.load_options()); });
}

EcgRecord preprocess(const EcgRecord& record, const PipelineConfig& config) {
  return in_stage("preprocess", [&] {
    validate(record);
    const auto filter =
        dsp::design_butterworth_lowpass(config.butterworth_order, config.butterworth_cutoff_hz, record.fs);
    EcgRecord out = record;
    out.samples = dsp::apply_filter(filter, record.samples);
    return out;
  });
}

rpeak::RPeaks detect(const EcgRecord& filtered, const PipelineConfig& config) {
  return in_stage("detect", [&] { return rpeak::detect_rpeaks(filtered, config.detector); });
}

featurize::FeatureWave extract(const EcgRecord& filtered, const rpeak::RPeaks& peaks, const PipelineConfig& config) {
  return in_stage("featurize",
                  [&] { return featurize::featurize(filtered, peaks, config.gate, config.feature_length); });
}

scalogram::Scalogram transform(const featurize::FeatureWave& wave, const PipelineConfig& config,
                               const scalogram::WaveletTable& wavelet) {
  return in_stage("scalogram", [&] {
    const auto scales = scalogram::default_scales(config.scale_count);
    return scalogram::cwt(wave.samples, scales, wavelet, wave.fs, config.cwt_stride);
  });
}

std::vector<double> network_input(const scalogram::GrayImage& image, const PipelineConfig& config) {
  return in_stage("classify", [&] {
    return nn::image_to_input(image, config.network.input_height, config.network.input_width);
  });
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  wavelet_ = scalogram::build_db4(config_.wavelet_iterations);
}

Stages Pipeline::run(const EcgRecord& record) const {
  Stages s;
  s.filtered = preprocess(record, config_);
  s.peaks = detect(s.filtered, config_);
  s.wave = extract(s.filtered, s.peaks, config_);
  s.scalogram = transform(s.wave, config_, wavelet_);
  s.image = scalogram::to_grayscale(s.scalogram);
  s.input = network_input(s.image, config_);
  return s;
}

void write_record_csv(const EcgRecord& record, const fs::path& path) {
  write_csv_values(path, record.samples);
  const json meta = {{"id", record.id}, {"fs", record.fs}, {"scale", record.scale}};
  const auto side = sidecar_path(path);
  std::ofstream f(side, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + side.string() + " for writing");
  f << meta.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + side.string());
}

fs::path find_record(const fs::path& dir, const std::string& id) {
  for (const char* ext : {".mat", ".csv", ".bin", ".dat"}) {
    const auto p = dir / (id + ext);
    if (fs::exists(p)) return p;
  }
  throw IoError("no data file for record '" + id + "' in " + dir.string());
}

nn::Dataset build_dataset(const Pipeline& pipeline, const fs::path& dir, const LabelSet& labels,
                          const ProgressFn& progress) {
  const auto& cfg = pipeline.config();
  nn::Dataset data;
  data.height = cfg.network.input_height;
  data.width = cfg.network.input_width;
  for (std::size_t i = 0; i < labels.ids.size(); ++i) {
    const auto& id = labels.ids[i];
    const auto path = in_stage("ingest", [&] { return find_record(dir, id); });
    const auto record = load(path, cfg);
    auto stages = pipeline.run(record);
    data.examples.push_back({std::move(stages.input), static_cast<int>(labels.by_id.at(id))});
    if (progress) progress(i + 1, labels.ids.size(), id);
  }
  return data;
}

}  // namespace ecgtf::pipeline
