#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <variant>
#include <vector>

namespace ecgtf::dsp {

/// One second-order section, a0 normalized to 1:
///   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z_inv) const;
};

/// Cascade of second-order sections followed by a scalar gain.
struct IirCascade {
  std::vector<Biquad> sections;
  double gain = 1.0;

  /// Poles of every section (complex-conjugate pairs, or a single real pole
  /// for a first-order section stored with a2 = 0).
  std::vector<std::complex<double>> poles() const;
  bool is_stable() const;
};

/// Numerator and denominator in ascending powers of z^-1.
struct RationalFilter {
  std::vector<double> numerator;
  std::vector<double> denominator;
};

/// Digital Butterworth low-pass by bilinear transform with prewarping,
/// realized as ceil(order/2) sections with unity DC gain.
IirCascade design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

std::vector<double> apply_filter(const IirCascade& filter, std::span<const double> x);
std::vector<double> apply_filter(const RationalFilter& filter, std::span<const double> x);

using AnyFilter = std::variant<IirCascade, RationalFilter>;
std::vector<double> apply_filter(const AnyFilter& filter, std::span<const double> x);

/// Complex frequency response at f Hz.
std::complex<double> frequency_response(const IirCascade& filter, double f_hz, double fs_hz);
std::complex<double> frequency_response(const RationalFilter& filter, double f_hz, double fs_hz);

/// |H(e^{j 2π f / fs})|, 0 <= f <= fs/2.
double magnitude_response(const IirCascade& filter, double f_hz, double fs_hz);
double magnitude_response(const RationalFilter& filter, double f_hz, double fs_hz);
double magnitude_response(const AnyFilter& filter, double f_hz, double fs_hz);

inline double to_db(double magnitude) { return 20.0 * std::log10(magnitude); }

/// Linear-interpolation resampling from fs_in to fs_out. Output sample k sits
/// at time k / fs_out; samples past the last input time are dropped.
std::vector<double> resample_linear(std::span<const double> x, double fs_in, double fs_out);

/// Resample `x` onto exactly `length` points covering the half-open interval
/// [0, x.size() - 1): point i reads position i * (x.size() - 1) / length.
std::vector<double> resample_to_length(std::span<const double> x, std::size_t length);

}  // namespace ecgtf::dsp
