#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ecgtf/classifier.hpp"
#include "ecgtf/dsp.hpp"
#include "ecgtf/error.hpp"
#include "ecgtf/featurize.hpp"
#include "ecgtf/ingest.hpp"
#include "ecgtf/rpeak.hpp"
#include "ecgtf/scalogram.hpp"

namespace ecgtf::pipeline {

/// Every tunable default of the pipeline in one place.
struct PipelineConfig {
  double fs = 200.0;                 ///< used when a record has no sidecar
  double int_scale = 1e-3;           ///< mV per ADC count for 16-bit formats
  int butterworth_order = 6;
  double butterworth_cutoff_hz = 35.0;
  rpeak::DetectorConfig detector;
  featurize::GateConfig gate;
  std::size_t feature_length = featurize::kDefaultLength;
  std::size_t scale_count = 64;
  int wavelet_iterations = 10;
  std::size_t cwt_stride = 1;
  /// The network input size doubles as the area-averaging target for images.
  nn::NetworkConfig network;
  nn::TrainConfig train;             ///< its seed is ignored in favour of `seed`
  std::uint64_t seed = 1;

  void validate() const;
  LoadOptions load_options() const;
  nn::TrainConfig effective_train() const;

  bool operator==(const PipelineConfig&) const = default;
};

/// Pretty-printed JSON; reading it back yields an equal config.
std::string to_json(const PipelineConfig& config);
/// Missing keys keep their defaults, unknown keys are rejected.
PipelineConfig config_from_json(std::string_view text);
void save_config(const PipelineConfig& config, const std::filesystem::path& path);
PipelineConfig load_config(const std::filesystem::path& path);

/// Runs `fn`, rethrowing any library error as a StageError tagged `stage`.
template <typename Fn>
auto in_stage(std::string_view stage, Fn&& fn) -> decltype(fn());

// ---- stages -------------------------------------------------------------------------

EcgRecord load(const std::filesystem::path& path, const PipelineConfig& config);

/// Butterworth low-pass at the record's own rate.
EcgRecord preprocess(const EcgRecord& record, const PipelineConfig& config);

rpeak::RPeaks detect(const EcgRecord& filtered, const PipelineConfig& config);

featurize::FeatureWave extract(const EcgRecord& filtered, const rpeak::RPeaks& peaks, const PipelineConfig& config);

scalogram::Scalogram transform(const featurize::FeatureWave& wave, const PipelineConfig& config,
                               const scalogram::WaveletTable& wavelet);

std::vector<double> network_input(const scalogram::GrayImage& image, const PipelineConfig& config);

struct Stages {
  EcgRecord filtered;
  rpeak::RPeaks peaks;
  featurize::FeatureWave wave;
  scalogram::Scalogram scalogram;
  scalogram::GrayImage image;
  std::vector<double> input;
};

/// Record to network input, keeping every intermediate.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const scalogram::WaveletTable& wavelet() const { return wavelet_; }

  Stages run(const EcgRecord& record) const;

 private:
  PipelineConfig config_;
  scalogram::WaveletTable wavelet_;
};

/// csv samples plus the {id, fs, scale} sidecar, so the record reloads unchanged.
void write_record_csv(const EcgRecord& record, const std::filesystem::path& path);

/// Data file for `id` in `dir`: the first of id.mat, id.csv, id.bin, id.dat that exists.
std::filesystem::path find_record(const std::filesystem::path& dir, const std::string& id);

using ProgressFn = std::function<void(std::size_t done, std::size_t total, const std::string& id)>;

/// Every labelled record in `dir` run through the pipeline, in label-file order.
nn::Dataset build_dataset(const Pipeline& pipeline, const std::filesystem::path& dir, const LabelSet& labels,
                          const ProgressFn& progress = {});

// ---- implementation ------------------------------------------------------------------

std::string error_kind(const std::exception& e);

template <typename Fn>
auto in_stage(std::string_view stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(std::string(stage), error_kind(e), e.what());
  }
}

}  // namespace ecgtf::pipeline
