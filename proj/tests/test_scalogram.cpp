#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "ecgtf/error.hpp"
#include "ecgtf/scalogram.hpp"
#include "support.hpp"

using namespace ecgtf;
using namespace ecgtf::scalogram;

namespace {

const WaveletTable& db4() {
  static const WaveletTable table = build_db4(10);
  return table;
}

// Term-by-term evaluation of W(a, b) = a^{-1/2} Δt Σ_k f[k] ψ((k - b) / a).
double brute_force(std::span<const double> f, double a, std::size_t b, const WaveletTable& psi, double fs) {
  double acc = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double t = static_cast<double>(static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(b)) / a;
    acc += f[k] * psi.value_at(t);
  }
  return (1.0 / fs) / std::sqrt(a) * acc;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("db4 scaling filter admissibility") {
  const auto h = daubechies_scaling_filter(4);
  REQUIRE(h.size() == 8);
  double sum = 0.0;
  for (double v : h) sum += v;
  CHECK(std::abs(sum - std::numbers::sqrt2) <= 1e-12);

  for (std::size_t m = 0; m < 4; ++m) {
    double dot = 0.0;
    for (std::size_t k = 0; k + 2 * m < h.size(); ++k) dot += h[k] * h[k + 2 * m];
    CHECK(std::abs(dot - (m == 0 ? 1.0 : 0.0)) <= 1e-12);
  }

  const auto g = quadrature_mirror(h);
  for (int p = 0; p < 4; ++p) {
    double moment = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) moment += g[k] * std::pow(static_cast<double>(k), p);
    CHECK(std::abs(moment) <= 1e-8);
  }
  // fifth moment is where db4 stops vanishing
  double m4 = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) m4 += g[k] * std::pow(static_cast<double>(k), 4);
  CHECK(std::abs(m4) > 1e-3);
}

TEST_CASE("db4 agrees with the tabulated toolbox coefficients") {
  const double reference[] = {0.23037781330885523,  0.7148465705525415,   0.6308807679295904,
                              -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
                              0.032883011666982945, -0.010597401784997278};
  const auto h = daubechies_scaling_filter(4);
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(h[k] - reference[k]) <= 1e-12);
}

TEST_CASE("db2 has its closed form") {
  const double s3 = std::sqrt(3.0), d = 4.0 * std::numbers::sqrt2;
  const double expected[] = {(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d};
  const auto h = daubechies_scaling_filter(2);
  REQUIRE(h.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(h[k] - expected[k]) <= 1e-12);
}

TEST_CASE("quadrature mirror") {
  const std::vector<double> h = {1.0, 2.0, 3.0, 4.0};
  CHECK(quadrature_mirror(h) == std::vector<double>{4.0, -3.0, 2.0, -1.0});
}

TEST_CASE("cascade-sampled wavelet") {
  for (int k : {8, 10, 12}) {
    CAPTURE(k);
    const auto w = build_db4(k);
    CHECK(w.t_min == 0.0);
    CHECK(w.t_max == 7.0);
    CHECK(w.resolution == std::ldexp(1.0, k));
    CHECK(std::abs(w.integral()) <= 1e-6);
    CHECK(std::abs(w.energy() - 1.0) <= 1e-6);
    CHECK(w.value_at(-0.5) == 0.0);
    CHECK(w.value_at(7.5) == 0.0);
  }
  CHECK_THROWS_AS(build_db4(3), InvalidArgument);
}

TEST_CASE("zero input gives zero coefficients") {
  const std::vector<double> zeros(300, 0.0);
  const auto s = cwt(zeros, default_scales(8), db4(), 200.0);
  CHECK(s.rows == 8);
  CHECK(s.cols == 300);
  CHECK(max_abs(s.coeffs) == 0.0);
}

TEST_CASE("fast path equals the term-by-term sum") {
  Rng rng(41);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const auto f = testing::random_signal(rng, n);
    std::vector<double> scales;
    const std::size_t count = 1 + rng.below(6);
    for (std::size_t j = 0; j < count; ++j) {
      const double a = rng.uniform(0.3, 40.0);
      if (7.0 * a <= 8.0 * static_cast<double>(n)) scales.push_back(a);
    }
    if (scales.empty()) scales.push_back(1.0);
    const double fs = rng.uniform(100.0, 400.0);
    const auto s = cwt(f, scales, db4(), fs);
    for (std::size_t r = 0; r < s.rows; ++r) {
      for (std::size_t c = 0; c < s.cols; ++c) {
        CHECK(testing::rel_err(s.at(r, c), brute_force(f, scales[r], c, db4(), fs)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("strided columns read every stride-th shift") {
  Rng rng(43);
  const auto f = testing::random_signal(rng, 257);
  const auto full = cwt(f, default_scales(5), db4(), 200.0);
  const auto strided = cwt(f, default_scales(5), db4(), 200.0, 4);
  CHECK(strided.cols == 65);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < strided.cols; ++c) CHECK(strided.at(r, c) == full.at(r, 4 * c));
  }
}

TEST_CASE("transform is linear and homogeneous") {
  Rng rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testing::random_signal(rng, 200);
    const auto g = testing::random_signal(rng, 200);
    const double alpha = rng.uniform(-5.0, 5.0);
    std::vector<double> sum(200), scaled(200);
    for (std::size_t i = 0; i < 200; ++i) sum[i] = f[i] + g[i], scaled[i] = alpha * f[i];
    const auto sc = default_scales(12);
    const auto wf = cwt(f, sc, db4(), 200.0), wg = cwt(g, sc, db4(), 200.0);
    const auto ws = cwt(sum, sc, db4(), 200.0), wa = cwt(scaled, sc, db4(), 200.0);
    const double norm = max_abs(ws.coeffs) + max_abs(wa.coeffs);
    for (std::size_t i = 0; i < wf.coeffs.size(); ++i) {
      CHECK(std::abs(ws.coeffs[i] - (wf.coeffs[i] + wg.coeffs[i])) <= 1e-12 * norm);
      CHECK(std::abs(wa.coeffs[i] - alpha * wf.coeffs[i]) <= 1e-12 * norm);
    }
  }
}

TEST_CASE("integer shifts move interior coefficients") {
  Rng rng(45);
  const std::size_t n = 400, d = 17;
  auto f = testing::random_signal(rng, n);
  std::fill(f.begin() + (n - d - 100), f.end(), 0.0);  // keep content away from the right edge
  std::vector<double> shifted(n, 0.0);
  std::copy(f.begin(), f.end() - static_cast<std::ptrdiff_t>(d), shifted.begin() + static_cast<std::ptrdiff_t>(d));
  const auto sc = default_scales(10);
  const auto w = cwt(f, sc, db4(), 200.0), ws = cwt(shifted, sc, db4(), 200.0);
  for (std::size_t r = 0; r < sc.size(); ++r) {
    for (std::size_t c = d; c < n; ++c) CHECK(std::abs(ws.at(r, c) - w.at(r, c - d)) <= 1e-9);
  }
}

TEST_CASE("cwt preconditions") {
  const std::vector<double> f(16, 1.0);
  CHECK_THROWS_AS(cwt(std::vector<double>{}, default_scales(1), db4(), 200.0), InvalidArgument);
  CHECK_THROWS_AS(cwt(f, std::vector<double>{}, db4(), 200.0), InvalidArgument);
  CHECK_THROWS_AS(cwt(f, std::vector<double>{-1.0}, db4(), 200.0), InvalidArgument);
  // support 7a against 8L = 128
  CHECK_NOTHROW(cwt(f, std::vector<double>{128.0 / 7.0}, db4(), 200.0));
  CHECK_THROWS_AS(cwt(f, std::vector<double>{19.0}, db4(), 200.0), InvalidArgument);
}

TEST_CASE("grayscale mapping") {
  SUBCASE("endpoints") {
    const auto img = to_grayscale(std::vector<double>{0.0, 1.0}, 1, 2);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, 255});
  }
  SUBCASE("midpoint rounds half up") {
    const auto img = to_grayscale(std::vector<double>{-2.0, 0.0, 2.0}, 1, 3);
    CHECK(img.pixels == std::vector<std::uint8_t>{0, 128, 255});
  }
  SUBCASE("constant matrix is black") {
    const auto img = to_grayscale(std::vector<double>(12, 0.0), 3, 4);
    CHECK(img.width == 4);
    CHECK(img.height == 3);
    CHECK(img.pixels == std::vector<std::uint8_t>(12, 0));
    CHECK(to_grayscale(std::vector<double>(6, 4.2), 2, 3).pixels == std::vector<std::uint8_t>(6, 0));
  }
  SUBCASE("full-range integer matrices map to themselves") {
    Rng rng(46);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v(50);
      for (auto& x : v) x = static_cast<double>(rng.below(256));
      const auto lo = rng.below(50);
      v[lo] = 0.0;
      v[(lo + 1 + rng.below(49)) % 50] = 255.0;
      const auto img = to_grayscale(v, 5, 10);
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(img.pixels[i] == static_cast<std::uint8_t>(v[i]));
    }
  }
}

TEST_CASE("pgm layout") {
  testing::TempDir dir;
  GrayImage img{2, 2, {0, 64, 128, 255}};
  const auto bytes = encode_pgm(img);
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 4);
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  write_pgm(img, dir / "a.pgm");
  const auto back = read_pgm(dir / "a.pgm");
  CHECK(back.pixels == img.pixels);
  CHECK(back.width == 2);

  GrayImage big{1024, 64, std::vector<std::uint8_t>(1024 * 64, 7)};
  const auto big_bytes = encode_pgm(big);
  const std::string big_header = "P5\n1024 64\n255\n";
  CHECK(std::equal(big_header.begin(), big_header.end(), big_bytes.begin()));
  CHECK(big_bytes.size() == big_header.size() + 1024 * 64);

  testing::write_file(dir / "bad.pgm", "P2\n2 2\n255\n0 0 0 0\n");
  CHECK_THROWS_AS(read_pgm(dir / "bad.pgm"), FormatError);
  CHECK_THROWS_AS(write_pgm(img, dir / "missing" / "a.pgm"), IoError);
}

TEST_CASE("f32 export round trip") {
  testing::TempDir dir;
  Rng rng(47);
  const auto f = testing::random_signal(rng, 128);
  const auto s = cwt(f, default_scales(6), db4(), 300.0);
  write_f32(s, dir / "s.f32");
  const auto back = read_f32(dir / "s.f32");
  CHECK(back.rows == s.rows);
  CHECK(back.cols == s.cols);
  CHECK(back.scales == s.scales);
  CHECK(back.fs == 300.0);
  REQUIRE(back.coeffs.size() == s.coeffs.size());
  for (std::size_t i = 0; i < s.coeffs.size(); ++i) {
    CHECK(back.coeffs[i] == static_cast<double>(static_cast<float>(s.coeffs[i])));
  }
  const auto raw = testing::read_file(dir / "s.f32");
  CHECK(raw.size() == 4 * s.coeffs.size());
  float first;
  std::memcpy(&first, raw.data(), 4);  // host is little-endian here
  CHECK(first == static_cast<float>(s.coeffs[0]));
}
