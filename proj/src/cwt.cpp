#include <cmath>
#include <string>

#include "ecgtf/error.hpp"
#include "ecgtf/scalogram.hpp"

namespace ecgtf::scalogram {

std::vector<double> default_scales(std::size_t count) {
  std::vector<double> s(count);
  for (std::size_t j = 0; j < count; ++j) s[j] = static_cast<double>(j + 1);
  return s;
}

Scalogram cwt(std::span<const double> wave, std::span<const double> scales, const WaveletTable& wavelet, double fs,
              std::size_t stride) {
  if (wave.empty()) throw InvalidArgument("cwt: empty input");
  if (scales.empty()) throw InvalidArgument("cwt: no scales");
  if (!(fs > 0.0)) throw InvalidArgument("cwt: sampling rate must be positive");
  if (stride == 0) throw InvalidArgument("cwt: stride must be positive");
  const std::size_t length = wave.size();
  for (const double a : scales) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("cwt: scales must be positive and finite");
    if (wavelet.support_width() * a > 8.0 * static_cast<double>(length)) {
      throw InvalidArgument("cwt: scale " + std::to_string(a) + " dilates the wavelet past 8x the signal length");
    }
  }

  Scalogram out;
  out.rows = scales.size();
  out.cols = (length + stride - 1) / stride;
  out.coeffs.assign(out.rows * out.cols, 0.0);
  out.scales.assign(scales.begin(), scales.end());
  out.fs = fs;
  const double dt = 1.0 / fs;

  std::vector<double> kernel;
  for (std::size_t r = 0; r < out.rows; ++r) {
    const double a = scales[r];
    // ψ(m / a) for every shift m that lands on the table.
    const double t_end = wavelet.t_min + static_cast<double>(wavelet.psi.size()) / wavelet.resolution;
    const auto m_first = static_cast<std::ptrdiff_t>(std::floor(wavelet.t_min * a)) - 1;
    const auto m_last = static_cast<std::ptrdiff_t>(std::ceil(t_end * a)) + 1;
    kernel.assign(static_cast<std::size_t>(m_last - m_first + 1), 0.0);
    for (auto m = m_first; m <= m_last; ++m) {
      kernel[static_cast<std::size_t>(m - m_first)] = wavelet.value_at(static_cast<double>(m) / a);
    }
    const double prefactor = dt / std::sqrt(a);

    double* row = out.coeffs.data() + r * out.cols;
    for (std::size_t c = 0; c < out.cols; ++c) {
      const auto b = static_cast<std::ptrdiff_t>(c * stride);
      const auto k_lo = std::max<std::ptrdiff_t>(0, b + m_first);
      const auto k_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(length) - 1, b + m_last);
      double acc = 0.0;
      for (auto k = k_lo; k <= k_hi; ++k) {
        acc += wave[static_cast<std::size_t>(k)] * kernel[static_cast<std::size_t>(k - b - m_first)];
      }
      row[c] = prefactor * acc;
    }
  }
  return out;
}

}  // namespace ecgtf::scalogram
