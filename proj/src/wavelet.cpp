#include <cmath>
#include <complex>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "ecgtf/error.hpp"
#include "ecgtf/scalogram.hpp"

namespace ecgtf::scalogram {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Roots of c[0] + c[1] x + ... + c[d] x^d from the companion matrix.
std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& c) {
  const int d = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(d, d);
  for (int i = 1; i < d; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < d; ++i) companion(i, d - 1) = -c[static_cast<std::size_t>(i)] / c.back();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<std::complex<double>> roots;
  for (int i = 0; i < d; ++i) roots.push_back(solver.eigenvalues()[i]);

  // One Newton polish per root against the original coefficients.
  for (auto& r : roots) {
    for (int it = 0; it < 3; ++it) {
      std::complex<double> p = 0.0, dp = 0.0;
      for (int k = d; k >= 0; --k) {
        dp = dp * r + p;
        p = p * r + c[static_cast<std::size_t>(k)];
      }
      if (std::abs(dp) == 0.0) break;
      r -= p / dp;
    }
  }
  return roots;
}

std::vector<std::complex<double>> convolve(const std::vector<std::complex<double>>& a,
                                           const std::vector<std::complex<double>>& b) {
  std::vector<std::complex<double>> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// y = scale * (x convolved with filter upsampled by `spacing`)
std::vector<double> a_trous(const std::vector<double>& x, std::span<const double> filter, std::size_t spacing,
                            double scale) {
  std::vector<double> y(x.size() + (filter.size() - 1) * spacing, 0.0);
  for (std::size_t k = 0; k < filter.size(); ++k) {
    const double w = scale * filter[k];
    const std::size_t shift = k * spacing;
    for (std::size_t n = 0; n < x.size(); ++n) y[n + shift] += w * x[n];
  }
  return y;
}

}  // namespace

std::vector<double> daubechies_scaling_filter(int vanishing_moments) {
  const int n = vanishing_moments;
  if (n < 1) throw InvalidArgument("Daubechies order must be positive");

  // Minimum-phase factor: one zero inside the unit circle per root of P.
  std::vector<std::complex<double>> q = {1.0};
  if (n > 1) {
    std::vector<double> p(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) p[static_cast<std::size_t>(k)] = binomial(n - 1 + k, k);
    for (const auto y : polynomial_roots(p)) {
      // y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
      const auto b = 2.0 - 4.0 * y;
      const auto disc = std::sqrt(b * b - 4.0);
      auto z = (b + disc) / 2.0;
      if (std::abs(z) > 1.0) z = 1.0 / z;
      q = convolve(q, {1.0, -z});
    }
  }
  for (int k = 0; k < n; ++k) q = convolve(q, {1.0, 1.0});

  std::vector<double> h(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) h[i] = q[i].real();
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v *= std::sqrt(2.0) / sum;
  return h;
}

std::vector<double> quadrature_mirror(std::span<const double> lowpass) {
  const std::size_t len = lowpass.size();
  std::vector<double> g(len);
  for (std::size_t k = 0; k < len; ++k) g[k] = (k % 2 == 0 ? 1.0 : -1.0) * lowpass[len - 1 - k];
  return g;
}

double WaveletTable::value_at(double t) const {
  const double pos = std::floor((t - t_min) * resolution + 0.5);
  if (pos < 0.0 || pos >= static_cast<double>(psi.size())) return 0.0;
  return psi[static_cast<std::size_t>(pos)];
}

double WaveletTable::integral() const {
  return std::accumulate(psi.begin(), psi.end(), 0.0) / resolution;
}

double WaveletTable::energy() const {
  double acc = 0.0;
  for (double v : psi) acc += v * v;
  return acc / resolution;
}

WaveletTable build_wavelet(std::span<const double> lowpass, int iterations) {
  if (iterations < 1) throw InvalidArgument("cascade needs at least one iteration");
  if (lowpass.size() < 2) throw InvalidArgument("scaling filter needs at least two taps");
  const double root2 = std::sqrt(2.0);
  const auto highpass = quadrature_mirror(lowpass);

  // φ after K-1 refinements, piecewise constant on a 2^-(K-1) grid.
  std::vector<double> phi = {1.0};
  for (int j = 0; j + 1 < iterations; ++j) phi = a_trous(phi, lowpass, std::size_t{1} << j, root2);

  WaveletTable table;
  table.psi = a_trous(phi, highpass, std::size_t{1} << (iterations - 1), root2);
  table.iterations = iterations;
  table.resolution = std::ldexp(1.0, iterations);
  table.t_min = 0.0;
  table.t_max = static_cast<double>(lowpass.size() - 1);
  table.lowpass.assign(lowpass.begin(), lowpass.end());
  return table;
}

WaveletTable build_db4(int iterations) {
  if (iterations < 4) {
    throw InvalidArgument("db4 table needs at least 4 cascade iterations, got " + std::to_string(iterations));
  }
  return build_wavelet(daubechies_scaling_filter(4), iterations);
}

}  // namespace ecgtf::scalogram
