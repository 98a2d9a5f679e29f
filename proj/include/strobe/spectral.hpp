#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "strobe/error.hpp"
#include "strobe/fft.hpp"
#include "strobe/readout.hpp"
#include "strobe/sampler.hpp"

namespace strobe {

// Unnormalised one-sided power, Y_j = |y^_j|^2 for j = 0..floor(L/2), where
// L = padding * N. With padding 1 the bin width is f_s/N.
struct PowerSpectrum {
  std::vector<double> power;
  double bin_width_hz = 0.0;
  double sample_rate_hz = 0.0;
  std::size_t num_samples = 0;  // N before padding
  std::size_t padding = 1;

  std::size_t size() const { return power.size(); }
  std::size_t transform_length() const { return num_samples * padding; }
  double frequency(double bin) const { return bin * bin_width_hz; }
  std::size_t nearest_bin(double f) const {
    const double b = std::round(f / bin_width_hz);
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(power.size() - 1)));
  }
  // Sum over all two-sided bins, reconstructed from the one-sided half.
  double two_sided_total() const {
    const std::size_t L = transform_length();
    double total = power.front();
    for (std::size_t j = 1; j < power.size(); ++j) total += (2 * j == L ? 1.0 : 2.0) * power[j];
    return total;
  }
};

inline PowerSpectrum power_spectrum(std::span<const double> samples, double sample_rate_hz, std::size_t padding = 1) {
  detail::require(samples.size() >= 2, "power_spectrum: need at least 2 samples");
  detail::require(sample_rate_hz > 0.0, "power_spectrum: sample rate must be > 0");
  detail::require(padding >= 1, "power_spectrum: padding must be >= 1");
  PowerSpectrum s;
  s.num_samples = samples.size();
  s.padding = padding;
  s.sample_rate_hz = sample_rate_hz;
  s.bin_width_hz = sample_rate_hz / static_cast<double>(s.transform_length());
  s.power = dft_power(samples, s.transform_length());
  return s;
}

inline PowerSpectrum power_spectrum(const TimeTrace& trace, std::size_t padding = 1) {
  const auto y = trace.values();
  return power_spectrum(y, trace.rate(), padding);
}

// Relative Parseval mismatch |sum_j |y^_j|^2 - L sum_k y_k^2| / (L sum y^2).
inline double parseval_error(const PowerSpectrum& spec, std::span<const double> samples) {
  const double energy = std::inner_product(samples.begin(), samples.end(), samples.begin(), 0.0);
  const double expected = static_cast<double>(spec.transform_length()) * energy;
  if (expected == 0.0) return spec.two_sided_total();
  return std::fabs(spec.two_sided_total() - expected) / expected;
}

// Half-open bin range [begin, end).
struct BinRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool contains(std::size_t j) const { return j >= begin && j < end; }
};

// Highest bin in `range`; ties go to the lowest index.
inline std::size_t peak_bin(const PowerSpectrum& spec, BinRange range) {
  range.end = std::min(range.end, spec.size());
  detail::require(range.size() > 0, "peak_bin: empty search range");
  std::size_t best = range.begin;
  for (std::size_t j = range.begin + 1; j < range.end; ++j) {
    if (spec.power[j] > spec.power[best]) best = j;
  }
  return best;
}

// All bins at least `guard_bins` away from every listed signal bin, without
// DC and the last (Nyquist-side) bin, as maximal contiguous ranges.
inline std::vector<BinRange> default_noise_band(const PowerSpectrum& spec, std::span<const std::size_t> signal_bins,
                                                std::size_t guard_bins = 10) {
  std::vector<bool> usable(spec.size(), true);
  usable.front() = false;
  usable.back() = false;
  for (std::size_t s : signal_bins) {
    const std::size_t lo = s > guard_bins ? s - guard_bins : 0;
    const std::size_t hi = std::min(spec.size(), s + guard_bins);
    for (std::size_t j = lo; j < hi; ++j) usable[j] = false;
  }
  std::vector<BinRange> bands;
  for (std::size_t j = 0; j < usable.size();) {
    if (!usable[j]) {
      ++j;
      continue;
    }
    std::size_t k = j;
    while (k < usable.size() && usable[k]) ++k;
    bands.push_back({j, k});
    j = k;
  }
  return bands;
}

enum class SnrForm {
  kLargeSnr,  // Y_peak / std(noise), the usual large-SNR form
  kExact,     // (Y_peak - mean(noise)) / std(noise)
};

struct SnrReport {
  double measured = 0.0;
  double predicted_ideal = std::numeric_limits<double>::quiet_NaN();
  double predicted_depolarized = std::numeric_limits<double>::quiet_NaN();
  std::size_t peak_bin = 0;
  std::vector<BinRange> noise_band;
  double peak_power = 0.0;
  double noise_mean = 0.0;
  double noise_std = 0.0;
};

struct NoiseStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t bins = 0;
};

inline NoiseStats noise_statistics(const PowerSpectrum& spec, std::span<const BinRange> band) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : band) {
    for (std::size_t j = r.begin; j < std::min(r.end, spec.size()); ++j) {
      sum += spec.power[j];
      ++n;
    }
  }
  detail::require(n >= 2, "noise band must contain at least 2 bins");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& r : band) {
    for (std::size_t j = r.begin; j < std::min(r.end, spec.size()); ++j) ss += (spec.power[j] - mean) * (spec.power[j] - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(n - 1)), n};
}

inline SnrReport measure_snr(const PowerSpectrum& spec, std::size_t peak, std::span<const BinRange> noise_band,
                             SnrForm form = SnrForm::kLargeSnr) {
  detail::require(peak < spec.size(), "measure_snr: peak bin outside spectrum");
  for (const auto& r : noise_band) {
    if (r.contains(peak)) throw ConfigError("measure_snr: noise band overlaps the peak bin");
    if (r.contains(0)) throw ConfigError("measure_snr: noise band includes the DC bin");
  }
  const NoiseStats ns = noise_statistics(spec, noise_band);
  if (ns.std == 0.0) throw NumericalError("measure_snr: noise band has zero spread");
  SnrReport r;
  r.peak_bin = peak;
  r.noise_band.assign(noise_band.begin(), noise_band.end());
  r.peak_power = spec.power[peak];
  r.noise_mean = ns.mean;
  r.noise_std = ns.std;
  r.measured = (form == SnrForm::kLargeSnr ? r.peak_power : r.peak_power - ns.mean) / ns.std;
  r.measured = std::max(0.0, r.measured);
  return r;
}

// SNR = (1/16)(C eps)^2 N phi^2 [e^{-2 Gamma n}] / (1/4 (C eps)^2 + C (1 - eps/2)).
// Small-signal result: the sin(phi) response is linearised, valid for phi_max <~ 1.
inline double predicted_snr(double phi_max, double num_samples, const ReadoutModel& model, bool depolarized) {
  model.validate();
  const double ce = model.gain() * model.contrast;
  const double signal = ce * ce * num_samples * phi_max * phi_max / 16.0 * (depolarized ? signal_power_factor(model) : 1.0);
  return signal / noise_variance(model);
}

inline SnrReport with_prediction(SnrReport report, double phi_max, double num_samples, const ReadoutModel& model) {
  report.predicted_ideal = predicted_snr(phi_max, num_samples, model, false);
  report.predicted_depolarized = predicted_snr(phi_max, num_samples, model, true);
  return report;
}

}  // namespace strobe
