#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ecgtf/ingest.hpp"
#include "ecgtf/rpeak.hpp"

namespace ecgtf::featurize {

/// Fixed-length input to the scalogram stage: four cardiac cycles resampled
/// to `length` points, or all zeros when the record was gated as noise.
struct FeatureWave {
  std::vector<double> samples;
  bool is_noise_gated = false;
  /// Gated because fewer peaks than a four-cycle window needs, although the
  /// count was inside the plausible band.
  bool degenerate = false;
  std::string source_id;
  double fs = 200.0;  ///< sampling rate of the source record
};

struct GateConfig {
  double min_bpm = 30.0;
  double max_bpm = 200.0;

  bool operator==(const GateConfig&) const = default;
};

/// Closed band of plausible R counts for a record of `duration_s`:
/// [ceil(d * min_bpm / 60), floor(d * max_bpm / 60)].
struct CountBand {
  std::size_t low;
  std::size_t high;
};
CountBand plausible_count_band(double duration_s, const GateConfig& config = {});

/// True when the peak count falls outside the plausible band (noise).
bool gate_noise(std::size_t peak_count, double duration_s, const GateConfig& config = {});
bool gate_noise(const rpeak::RPeaks& peaks, double duration_s, const GateConfig& config = {});

inline constexpr std::size_t kDefaultLength = 1024;
inline constexpr std::size_t kMinPeaks = 6;

/// Window [p(m-2), p(m+2)] around the middle peak m = count / 2, inclusive.
struct CycleWindow {
  std::size_t first;
  std::size_t last;
};
CycleWindow four_cycle_window(std::span<const std::size_t> peaks);

/// Gated → zeros. Otherwise the four-cycle window of `filtered`, resampled to
/// `length` points. Fewer than six peaks falls back to the gated wave with
/// `degenerate` set.
FeatureWave extract_feature_wave(const EcgRecord& filtered, const rpeak::RPeaks& peaks,
                                 bool gated, std::size_t length = kDefaultLength);

/// Gate and extract in one step.
FeatureWave featurize(const EcgRecord& filtered, const rpeak::RPeaks& peaks,
                      const GateConfig& gate = {}, std::size_t length = kDefaultLength);

/// Values as one-per-line csv plus `<stem>.json` with {source_id, gated, degenerate, fs, length}.
void write_feature_wave(const FeatureWave& wave, const std::filesystem::path& path);
FeatureWave read_feature_wave(const std::filesystem::path& path);

}  // namespace ecgtf::featurize
