#include "ecgtf/featurize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ecgtf/dsp.hpp"
#include "ecgtf/error.hpp"

namespace ecgtf::featurize {

CountBand plausible_count_band(double duration_s, const GateConfig& config) {
  if (!(duration_s > 0.0)) throw InvalidArgument("gate: duration must be positive");
  if (!(config.min_bpm >= 0.0 && config.max_bpm >= config.min_bpm)) {
    throw InvalidArgument("gate: heart-rate band must satisfy 0 <= low <= high");
  }
  // Guard against 29.999999 style products landing on the wrong integer.
  const double lo = duration_s * config.min_bpm / 60.0;
  const double hi = duration_s * config.max_bpm / 60.0;
  const auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  };
  return {static_cast<std::size_t>(std::ceil(snap(lo))), static_cast<std::size_t>(std::floor(snap(hi)))};
}

bool gate_noise(std::size_t peak_count, double duration_s, const GateConfig& config) {
  const auto band = plausible_count_band(duration_s, config);
  return peak_count < band.low || peak_count > band.high;
}

bool gate_noise(const rpeak::RPeaks& peaks, double duration_s, const GateConfig& config) {
  return gate_noise(peaks.count(), duration_s, config);
}

CycleWindow four_cycle_window(std::span<const std::size_t> peaks) {
  if (peaks.size() < kMinPeaks) {
    throw InvalidArgument("four-cycle window needs at least " + std::to_string(kMinPeaks) + " peaks");
  }
  const std::size_t m = peaks.size() / 2;
  return {peaks[m - 2], peaks[m + 2]};
}

FeatureWave extract_feature_wave(const EcgRecord& filtered, const rpeak::RPeaks& peaks, bool gated,
                                 std::size_t length) {
  if (length == 0) throw InvalidArgument("feature length must be positive");
  FeatureWave wave;
  wave.source_id = filtered.id;
  wave.fs = filtered.fs;
  if (!gated && peaks.count() < kMinPeaks) {
    gated = true;
    wave.degenerate = true;
  }
  if (gated) {
    wave.is_noise_gated = true;
    wave.samples.assign(length, 0.0);
    return wave;
  }
  const auto window = four_cycle_window(peaks.indices);
  if (window.last >= filtered.samples.size() || window.last <= window.first) {
    throw InvalidArgument("peak indices fall outside record '" + filtered.id + "'");
  }
  const std::span<const double> cycles(filtered.samples.data() + window.first, window.last - window.first + 1);
  wave.samples = dsp::resample_to_length(cycles, length);
  return wave;
}

FeatureWave featurize(const EcgRecord& filtered, const rpeak::RPeaks& peaks, const GateConfig& gate,
                      std::size_t length) {
  const bool gated = gate_noise(peaks, filtered.duration(), gate);
  return extract_feature_wave(filtered, peaks, gated, length);
}

void write_feature_wave(const FeatureWave& wave, const std::filesystem::path& path) {
  write_csv_values(path, wave.samples);
  const nlohmann::json meta = {{"source_id", wave.source_id},
                               {"gated", wave.is_noise_gated},
                               {"degenerate", wave.degenerate},
                               {"fs", wave.fs},
                               {"length", wave.samples.size()}};
  std::ofstream out(sidecar_path(path));
  if (!out) throw IoError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

FeatureWave read_feature_wave(const std::filesystem::path& path) {
  FeatureWave wave;
  wave.samples = read_csv_values(path);
  wave.source_id = path.stem().string();
  const auto meta_path = sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto meta = nlohmann::json::parse(ss.str());
    wave.source_id = meta.value("source_id", wave.source_id);
    wave.is_noise_gated = meta.value("gated", false);
    wave.degenerate = meta.value("degenerate", false);
    wave.fs = meta.value("fs", wave.fs);
  }
  if (wave.samples.empty()) throw InvalidArgument("feature wave " + path.string() + " is empty");
  return wave;
}

}  // namespace ecgtf::featurize
