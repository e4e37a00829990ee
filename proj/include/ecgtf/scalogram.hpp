#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ecgtf::scalogram {

// ---- Daubechies wavelets -------------------------------------------------------

/// Minimum-phase Daubechies scaling filter with `vanishing_moments` vanishing
/// moments (2 * vanishing_moments taps), built by spectral factorization of
///   P(y) = sum_{k<N} C(N-1+k, k) y^k,  y = sin^2(w/2),
/// and normalized to sum sqrt(2).
std::vector<double> daubechies_scaling_filter(int vanishing_moments);

/// g_k = (-1)^k h_{L-1-k}
std::vector<double> quadrature_mirror(std::span<const double> lowpass);

/// Mother wavelet sampled on a dyadic grid.
struct WaveletTable {
  std::vector<double> psi;       ///< psi[n] ≈ ψ(t_min + n / resolution)
  double t_min = 0.0;
  double t_max = 0.0;            ///< end of the compact support
  double resolution = 1.0;       ///< samples per unit time, 2^iterations
  int iterations = 0;
  std::vector<double> lowpass;   ///< scaling filter the table was built from

  /// Nearest-sample lookup; zero outside the table.
  double value_at(double t) const;
  double support_width() const { return t_max - t_min; }

  /// Riemann sums of ψ and ψ² over the table.
  double integral() const;
  double energy() const;
};

/// Cascade algorithm: `iterations` dyadic refinements of the box function
/// through the two-scale relation, then one wavelet step.
WaveletTable build_wavelet(std::span<const double> lowpass, int iterations);

/// db4: four vanishing moments, support [0, 7]. Requires iterations >= 4.
WaveletTable build_db4(int iterations = 10);

// ---- CWT ---------------------------------------------------------------------

/// S × columns coefficient matrix, row j holds scale scales[j].
struct Scalogram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> coeffs;  ///< row-major
  std::vector<double> scales;  ///< in samples
  double fs = 200.0;

  double at(std::size_t r, std::size_t c) const { return coeffs[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return coeffs[r * cols + c]; }
};

/// a_j = j for j = 1..count.
std::vector<double> default_scales(std::size_t count = 64);

/// W(a, b) = a^{-1/2} Δt Σ_k f[k] ψ((k - b) / a), scales and shifts in
/// samples, Δt = 1 / fs, f zero outside [0, L). Column c uses b = c * stride.
/// Each kernel ψ(m / a) is tabulated once per scale.
Scalogram cwt(std::span<const double> wave, std::span<const double> scales, const WaveletTable& wavelet,
              double fs, std::size_t stride = 1);

// ---- images --------------------------------------------------------------------

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  ///< row-major

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Affine min-max map onto [0, 255], rounding half up. A constant matrix maps
/// to black.
GrayImage to_grayscale(std::span<const double> values, std::size_t rows, std::size_t cols);
GrayImage to_grayscale(const Scalogram& s);

/// "P5\n<width> <height>\n255\n" followed by the pixels.
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

/// Row-major little-endian float32 plus `<stem>.json` {rows, cols, scales, fs}.
void write_f32(const Scalogram& s, const std::filesystem::path& path);
Scalogram read_f32(const std::filesystem::path& path);

}  // namespace ecgtf::scalogram
