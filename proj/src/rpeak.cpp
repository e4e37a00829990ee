#include "ecgtf/rpeak.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgtf/error.hpp"

namespace ecgtf::rpeak {

namespace {

struct Candidate {
  std::size_t pos;
  double value;
};

std::vector<Candidate> local_maxima(std::span<const double> y) {
  std::vector<Candidate> out;
  const std::size_t n = y.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) out.push_back({i, y[i]});
  }
  return out;
}

double max_abs(std::span<const double> y, std::size_t lo, std::size_t hi) {
  double m = 0.0;
  for (std::size_t i = lo; i <= hi && i < y.size(); ++i) m = std::max(m, std::abs(y[i]));
  return m;
}

// The record as the detector consumes it: at 200 Hz, first sample subtracted
// (so the zero-state filters see no start-up step), padded at the end with its
// last value so beats close to the end still complete in the integrator.
struct Prepared {
  std::vector<double> samples;
  std::size_t valid = 0;  // samples before padding
};

Prepared prepare(const EcgRecord& record, const DetectorConfig& config) {
  validate(record);
  if (record.duration() < config.learning_s) {
    throw InvalidArgument("record '" + record.id + "' is shorter than " +
                          std::to_string(config.learning_s) + " s; cannot detect R peaks");
  }
  Prepared p;
  p.samples = dsp::resample_linear(record.samples, record.fs, kDesignFs);
  p.valid = p.samples.size();
  const double offset = p.samples.front();
  for (auto& v : p.samples) v -= offset;
  const auto pad = static_cast<std::size_t>(std::lround(0.5 * kDesignFs));
  p.samples.insert(p.samples.end(), pad, p.samples.back());
  return p;
}

}  // namespace

dsp::RationalFilter pt_lowpass() {
  dsp::RationalFilter f;
  f.numerator.assign(13, 0.0);
  f.numerator[0] = 1.0;
  f.numerator[6] = -2.0;
  f.numerator[12] = 1.0;
  f.denominator = {1.0, -2.0, 1.0};
  return f;
}

dsp::RationalFilter pt_highpass() {
  dsp::RationalFilter f;
  f.numerator.assign(33, 0.0);
  f.numerator[0] = -1.0;
  f.numerator[16] = 32.0;
  f.numerator[32] = 1.0;
  f.denominator = {1.0, 1.0};
  return f;
}

dsp::RationalFilter pt_highpass_classic() {
  dsp::RationalFilter f;
  f.numerator.assign(33, 0.0);
  f.numerator[0] = -1.0;
  f.numerator[16] = 32.0;
  f.numerator[17] = -32.0;
  f.numerator[32] = 1.0;
  f.denominator = {1.0, -1.0};
  return f;
}

std::vector<double> pt_bandpass(std::span<const double> x, HighpassVariant variant) {
  const auto low = dsp::apply_filter(pt_lowpass(), x);
  const auto high = variant == HighpassVariant::kPrinted ? pt_highpass() : pt_highpass_classic();
  return dsp::apply_filter(high, low);
}

int bandpass_delay(HighpassVariant variant) {
  // Low-pass: symmetric 11-tap response, 5 samples. Printed high-pass: ≈16.5
  // samples at low frequency; classic high-pass: 16 samples.
  return variant == HighpassVariant::kPrinted ? 21 : 21;
}

std::vector<double> pt_derivative(std::span<const double> x, double fs) {
  if (!(fs > 0.0)) throw InvalidArgument("derivative: sampling rate must be positive");
  const std::size_t n = x.size();
  const auto at = [&](std::ptrdiff_t i) {
    return (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : x[static_cast<std::size_t>(i)];
  };
  std::vector<double> y(n);
  const double k = fs / 8.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::ptrdiff_t>(i);
    y[i] = k * (-at(s - 2) - 2.0 * at(s - 1) + 2.0 * at(s + 1) + at(s + 2));
  }
  return y;
}

std::vector<double> pt_square(std::span<const double> x) {
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v * v; });
  return y;
}

std::vector<double> pt_integrate(std::span<const double> x, int window) {
  if (window < 1) throw InvalidArgument("integration window must be at least 1 sample");
  const auto w = static_cast<std::size_t>(window);
  std::vector<double> y(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= w) acc -= x[i - w];
    y[i] = acc / static_cast<double>(window);
  }
  return y;
}

PtChainOutput pt_chain(std::span<const double> x, double fs, const DetectorConfig& config) {
  PtChainOutput out;
  out.bandpassed = pt_bandpass(x, config.highpass);
  out.derivative = pt_derivative(out.bandpassed, fs);
  out.squared = pt_square(out.derivative);
  out.integrated = pt_integrate(out.squared, config.window);
  return out;
}

PtChainOutput detection_taps(const EcgRecord& record, const DetectorConfig& config) {
  const auto prepared = prepare(record, config);
  auto taps = pt_chain(prepared.samples, kDesignFs, config);
  for (auto* v : {&taps.bandpassed, &taps.derivative, &taps.squared, &taps.integrated}) {
    v->resize(prepared.valid);
  }
  return taps;
}

RPeaks detect_rpeaks(const EcgRecord& record, const DetectorConfig& config) {
  const auto prepared = prepare(record, config);
  const auto chain = pt_chain(prepared.samples, kDesignFs, config);
  const auto& iw = chain.integrated;

  RPeaks result;
  result.fs = record.fs;

  const auto learn = std::min(iw.size(), static_cast<std::size_t>(std::lround(config.learning_s * kDesignFs)));
  double spki = *std::max_element(iw.begin(), iw.begin() + static_cast<std::ptrdiff_t>(learn));
  double npki = std::accumulate(iw.begin(), iw.begin() + static_cast<std::ptrdiff_t>(learn), 0.0) /
                static_cast<double>(learn);
  if (!(spki > 0.0)) return result;

  const auto refractory = static_cast<std::size_t>(std::lround(config.refractory_s * kDesignFs));
  const auto t_wave = static_cast<std::size_t>(std::lround(config.t_wave_s * kDesignFs));
  const auto win = static_cast<std::size_t>(config.window);
  const double f = config.update_factor;

  const auto threshold = [&] { return npki + config.threshold_fraction * (spki - npki); };
  const auto slope_of = [&](std::size_t pos) {
    return max_abs(chain.derivative, pos + 1 >= win ? pos + 1 - win : 0, pos);
  };

  std::vector<Candidate> qrs;
  std::vector<double> qrs_slope;
  std::vector<Candidate> noise_since_last;

  const auto accept = [&](const Candidate& c, double weight) {
    qrs.push_back(c);
    qrs_slope.push_back(slope_of(c.pos));
    spki = weight * c.value + (1.0 - weight) * spki;
    std::erase_if(noise_since_last, [&](const Candidate& n) { return n.pos <= c.pos; });
  };

  const auto rr_average = [&] {
    const std::size_t k = std::min<std::size_t>(8, qrs.size() - 1);
    return static_cast<double>(qrs.back().pos - qrs[qrs.size() - 1 - k].pos) / static_cast<double>(k);
  };

  const auto search_back = [&](std::size_t now) {
    while (qrs.size() >= 2 && static_cast<double>(now - qrs.back().pos) > config.searchback_rr_factor * rr_average()) {
      const double low = config.searchback_threshold_scale * threshold();
      const Candidate* best = nullptr;
      for (const auto& n : noise_since_last) {
        if (n.pos - qrs.back().pos < refractory || n.value <= low) continue;
        if (best == nullptr || n.value > best->value) best = &n;
      }
      if (best == nullptr) return;
      accept(*best, 2.0 * f);
    }
  };

  for (const auto& c : local_maxima(iw)) {
    if (!(c.value > 0.0)) continue;
    search_back(c.pos);
    if (!qrs.empty() && c.pos - qrs.back().pos < refractory) {
      // Same complex: keep the taller integrator peak.
      if (c.value > qrs.back().value) {
        qrs.back() = c;
        qrs_slope.back() = std::max(qrs_slope.back(), slope_of(c.pos));
      }
      continue;
    }
    bool is_qrs = c.value > threshold();
    if (is_qrs && !qrs.empty() && c.pos - qrs.back().pos < t_wave &&
        slope_of(c.pos) < 0.5 * qrs_slope.back()) {
      is_qrs = false;  // T wave
    }
    if (is_qrs) {
      accept(c, f);
    } else {
      npki = f * c.value + (1.0 - f) * npki;
      noise_since_last.push_back(c);
    }
  }
  search_back(iw.size());

  // Refine each integrator peak to the band-passed maximum, undo filter delays.
  const auto& bp = chain.bandpassed;
  const auto reach = static_cast<std::ptrdiff_t>(std::lround(config.refine_s * kDesignFs));
  const auto integrator_delay = static_cast<std::ptrdiff_t>((config.window - 1) / 2);
  const auto bp_delay = static_cast<std::ptrdiff_t>(bandpass_delay(config.highpass));
  const auto last = static_cast<std::ptrdiff_t>(bp.size()) - 1;

  struct Refined {
    std::size_t index;  // in record samples
    double height;
  };
  std::vector<Refined> refined;
  for (const auto& q : qrs) {
    const auto centre = static_cast<std::ptrdiff_t>(q.pos) - integrator_delay;
    const auto lo = std::clamp<std::ptrdiff_t>(centre - reach, 0, last);
    const auto hi = std::clamp<std::ptrdiff_t>(centre + reach, 0, last);
    auto best = lo;
    for (auto i = lo + 1; i <= hi; ++i) {
      if (bp[static_cast<std::size_t>(i)] > bp[static_cast<std::size_t>(best)]) best = i;
    }
    const auto r200 = best - bp_delay;
    if (r200 < 0 || r200 >= static_cast<std::ptrdiff_t>(prepared.valid)) continue;
    const auto r = static_cast<std::size_t>(
        std::llround(static_cast<double>(r200) * record.fs / kDesignFs));
    if (r >= record.samples.size()) continue;
    refined.push_back({r, bp[static_cast<std::size_t>(best)]});
  }

  // Refinement can pull two neighbours inside the refractory period.
  const auto min_gap = static_cast<std::size_t>(std::ceil(config.refractory_s * record.fs - 1e-9));
  for (const auto& r : refined) {
    if (!result.indices.empty() && r.index < result.indices.back() + min_gap) {
      continue;
    }
    result.indices.push_back(r.index);
  }
  return result;
}

double PeakScore::sensitivity() const {
  const auto total = true_positives + false_negatives;
  return total == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(total);
}

double PeakScore::positive_predictivity() const {
  const auto total = true_positives + false_positives;
  return total == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(total);
}

PeakScore score_peaks(std::span<const std::size_t> detected, std::span<const std::size_t> reference,
                      std::size_t tolerance) {
  PeakScore s;
  std::vector<bool> used(reference.size(), false);
  for (const auto d : detected) {
    std::size_t best = reference.size();
    std::size_t best_dist = tolerance + 1;
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (used[j]) continue;
      const auto dist = d > reference[j] ? d - reference[j] : reference[j] - d;
      if (dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    if (best < reference.size()) {
      used[best] = true;
      ++s.true_positives;
    } else {
      ++s.false_positives;
    }
  }
  s.false_negatives = reference.size() - s.true_positives;
  return s;
}

}  // namespace ecgtf::rpeak
