#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ecgtf/dsp.hpp"
#include "ecgtf/ingest.hpp"

namespace ecgtf::rpeak {

/// The integer-coefficient filters are designed for this rate; other records
/// are resampled to it before detection.
inline constexpr double kDesignFs = 200.0;

/// (1 - z^-6)^2 / (1 - z^-1)^2
dsp::RationalFilter pt_lowpass();

/// (-1 + 32 z^-16 + z^-32) / (1 + z^-1), coefficients taken verbatim. Its DC
/// gain is 16 and it has a pole at z = -1, so it is not a high-pass; see
/// pt_highpass_classic().
dsp::RationalFilter pt_highpass();

/// (-1 + 32 z^-16 - 32 z^-17 + z^-32) / (1 - z^-1): the original Pan-Tompkins
/// high-pass (all-pass delay minus a 32-point running mean).
dsp::RationalFilter pt_highpass_classic();

enum class HighpassVariant { kPrinted, kClassic };

std::vector<double> pt_bandpass(std::span<const double> x,
                                HighpassVariant variant = HighpassVariant::kPrinted);

/// Five-point centred derivative, y(n) = (-x(n-2) - 2x(n-1) + 2x(n+1) + x(n+2)) * fs / 8,
/// zero outside the signal.
std::vector<double> pt_derivative(std::span<const double> x, double fs = kDesignFs);

std::vector<double> pt_square(std::span<const double> x);

/// Causal moving mean over `window` samples with zero history.
std::vector<double> pt_integrate(std::span<const double> x, int window = 30);

struct PtChainOutput {
  std::vector<double> bandpassed;
  std::vector<double> derivative;
  std::vector<double> squared;
  std::vector<double> integrated;
};

struct DetectorConfig {
  int window = 30;                     ///< integration window N (samples at 200 Hz)
  double refractory_s = 0.2;
  double threshold_fraction = 0.25;    ///< thr = noise + fraction * (signal - noise)
  double update_factor = 0.125;        ///< running-estimate weight of a new peak
  double searchback_rr_factor = 1.66;
  double searchback_threshold_scale = 0.5;
  double learning_s = 2.0;
  double refine_s = 0.1;               ///< half-width of the R refinement window
  double t_wave_s = 0.36;              ///< slope test applies to peaks this close to the last QRS
  HighpassVariant highpass = HighpassVariant::kPrinted;

  bool operator==(const DetectorConfig&) const = default;
};

PtChainOutput pt_chain(std::span<const double> x, double fs, const DetectorConfig& config = {});

/// Detected R-wave positions, strictly increasing, in samples of the record.
struct RPeaks {
  std::vector<std::size_t> indices;
  double fs = kDesignFs;

  std::size_t count() const { return indices.size(); }
};

RPeaks detect_rpeaks(const EcgRecord& record, const DetectorConfig& config = {});

/// The four intermediate taps for `record`, exactly as the detector sees them
/// (resampled to 200 Hz, offset removed), trimmed to the resampled length.
PtChainOutput detection_taps(const EcgRecord& record, const DetectorConfig& config = {});

/// Total delay of pt_bandpass in samples at 200 Hz for QRS-band content.
int bandpass_delay(HighpassVariant variant);

struct PeakScore {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  double sensitivity() const;
  double positive_predictivity() const;
};

/// One-to-one greedy matching of detections to reference peaks within
/// ±tolerance samples.
PeakScore score_peaks(std::span<const std::size_t> detected, std::span<const std::size_t> reference,
                      std::size_t tolerance);

}  // namespace ecgtf::rpeak
