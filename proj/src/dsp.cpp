#include "ecgtf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ecgtf/error.hpp"

namespace ecgtf::dsp {

namespace {

void require_finite(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw InvalidArgument("filter input has a non-finite sample at index " + std::to_string(i));
    }
  }
}

std::complex<double> unit_delay(double f_hz, double fs_hz) {
  return std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
}

// Horner in z^-1.
std::complex<double> poly_at(std::span<const double> c, std::complex<double> z_inv) {
  std::complex<double> acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z_inv + *it;
  return acc;
}

std::vector<double> derivative(std::span<const double> c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  return d;
}

double abs_sum(std::span<const double> c) {
  double s = 0.0;
  for (double v : c) s += std::abs(v);
  return s;
}

}  // namespace

std::complex<double> Biquad::response(std::complex<double> z_inv) const {
  const auto num = b0 + z_inv * (b1 + z_inv * b2);
  const auto den = 1.0 + z_inv * (a1 + z_inv * a2);
  return num / den;
}

std::vector<std::complex<double>> IirCascade::poles() const {
  std::vector<std::complex<double>> out;
  for (const auto& s : sections) {
    if (s.a2 == 0.0) {
      if (s.a1 != 0.0) out.emplace_back(-s.a1, 0.0);
      continue;
    }
    // z^2 + a1 z + a2 = 0
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    out.push_back((-s.a1 + disc) / 2.0);
    out.push_back((-s.a1 - disc) / 2.0);
  }
  return out;
}

bool IirCascade::is_stable() const {
  const auto p = poles();
  return std::all_of(p.begin(), p.end(), [](auto z) { return std::abs(z) < 1.0; });
}

IirCascade design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
  if (order < 1) throw InvalidArgument("Butterworth order must be positive");
  if (!(fs_hz > 0.0)) throw InvalidArgument("sampling rate must be positive");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2.0)) {
    throw InvalidArgument("Butterworth cutoff " + std::to_string(cutoff_hz) +
                          " Hz must lie strictly between 0 and Nyquist (" +
                          std::to_string(fs_hz / 2.0) + " Hz)");
  }
  const double k = 2.0 * fs_hz;
  const double warped = k * std::tan(std::numbers::pi * cutoff_hz / fs_hz);

  IirCascade cascade;
  for (int i = 0; i < order / 2; ++i) {
    const double theta = std::numbers::pi * (2.0 * i + order + 1.0) / (2.0 * order);
    const std::complex<double> s = warped * std::polar(1.0, theta);
    const std::complex<double> z = (k + s) / (k - s);
    Biquad bq;
    bq.a1 = -2.0 * z.real();
    bq.a2 = std::norm(z);
    const double g = (1.0 + bq.a1 + bq.a2) / 4.0;
    bq.b0 = g;
    bq.b1 = 2.0 * g;
    bq.b2 = g;
    cascade.sections.push_back(bq);
  }
  if (order % 2 == 1) {
    const double z = (k - warped) / (k + warped);
    Biquad bq;
    bq.a1 = -z;
    const double g = (1.0 + bq.a1) / 2.0;
    bq.b0 = g;
    bq.b1 = g;
    cascade.sections.push_back(bq);
  }
  return cascade;
}

std::vector<double> apply_filter(const IirCascade& filter, std::span<const double> x) {
  require_finite(x);
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : filter.sections) {
    // Transposed direct form II.
    double w1 = 0.0, w2 = 0.0;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + w1;
      w1 = s.b1 * in - s.a1 * out + w2;
      w2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  if (filter.gain != 1.0) {
    for (auto& v : y) v *= filter.gain;
  }
  return y;
}

std::vector<double> apply_filter(const RationalFilter& filter, std::span<const double> x) {
  require_finite(x);
  const auto& b = filter.numerator;
  const auto& a = filter.denominator;
  if (a.empty() || a.front() == 0.0) throw InvalidArgument("denominator leading coefficient must be nonzero");
  const double a0 = a.front();
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    const std::size_t nb = std::min(b.size(), n + 1);
    for (std::size_t k = 0; k < nb; ++k) {
      if (b[k] != 0.0) acc += b[k] * x[n - k];
    }
    const std::size_t na = std::min(a.size(), n + 1);
    for (std::size_t k = 1; k < na; ++k) {
      if (a[k] != 0.0) acc -= a[k] * y[n - k];
    }
    y[n] = acc / a0;
  }
  return y;
}

std::vector<double> apply_filter(const AnyFilter& filter, std::span<const double> x) {
  return std::visit([&](const auto& f) { return apply_filter(f, x); }, filter);
}

std::complex<double> frequency_response(const IirCascade& filter, double f_hz, double fs_hz) {
  const auto z_inv = unit_delay(f_hz, fs_hz);
  std::complex<double> h = filter.gain;
  for (const auto& s : filter.sections) h *= s.response(z_inv);
  return h;
}

std::complex<double> frequency_response(const RationalFilter& filter, double f_hz, double fs_hz) {
  const auto z_inv = unit_delay(f_hz, fs_hz);
  std::vector<double> num = filter.numerator, den = filter.denominator;
  // Pole-zero cancellation on the unit circle (the integer filters at DC or
  // Nyquist): take the limit by differentiating both sides.
  while (!den.empty()) {
    const auto d = poly_at(den, z_inv);
    const auto n = poly_at(num, z_inv);
    const bool d_zero = std::abs(d) <= 1e-13 * abs_sum(den);
    const bool n_zero = std::abs(n) <= 1e-13 * abs_sum(num);
    if (!d_zero || !n_zero) return n / d;
    num = derivative(num);
    den = derivative(den);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double magnitude_response(const IirCascade& filter, double f_hz, double fs_hz) {
  return std::abs(frequency_response(filter, f_hz, fs_hz));
}

double magnitude_response(const RationalFilter& filter, double f_hz, double fs_hz) {
  return std::abs(frequency_response(filter, f_hz, fs_hz));
}

double magnitude_response(const AnyFilter& filter, double f_hz, double fs_hz) {
  return std::visit([&](const auto& f) { return magnitude_response(f, f_hz, fs_hz); }, filter);
}

std::vector<double> resample_linear(std::span<const double> x, double fs_in, double fs_out) {
  if (!(fs_in > 0.0 && fs_out > 0.0)) throw InvalidArgument("resample: rates must be positive");
  if (x.empty()) return {};
  if (fs_in == fs_out) return {x.begin(), x.end()};
  const double step = fs_in / fs_out;
  const double last = static_cast<double>(x.size() - 1);
  const auto n_out = static_cast<std::size_t>(std::floor(last / step)) + 1;
  std::vector<double> y(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double pos = static_cast<double>(k) * step;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    y[k] = (i + 1 < x.size()) ? x[i] + frac * (x[i + 1] - x[i]) : x[i];
  }
  return y;
}

std::vector<double> resample_to_length(std::span<const double> x, std::size_t length) {
  if (x.empty()) throw InvalidArgument("resample: empty input");
  if (length == 0) throw InvalidArgument("resample: target length must be positive");
  std::vector<double> y(length);
  const double span_len = static_cast<double>(x.size() - 1);
  for (std::size_t k = 0; k < length; ++k) {
    const double pos = static_cast<double>(k) * span_len / static_cast<double>(length);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    y[k] = (frac != 0.0 && i + 1 < x.size()) ? x[i] + frac * (x[i + 1] - x[i]) : x[i];
  }
  return y;
}

}  // namespace ecgtf::dsp
