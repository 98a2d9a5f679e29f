#pragma once

// Multi-step workflows shared by the command-line tool and the tests:
// averaged per-rate record spectra for wideband reconstruction, and the
// SNR-versus-repetitions sweep.

#include <cmath>
#include <optional>
#include <vector>

#include "strobe/csrecon.hpp"
#include "strobe/sampler.hpp"
#include "strobe/spectral.hpp"

namespace strobe {

// Record length used for a rate: the integer sample count closest to rate * T.
inline std::size_t record_length(double rate_hz, double duration_s) {
  return static_cast<std::size_t>(std::llround(rate_hz * duration_s));
}

// `averages` consecutive records of `record_length` samples, their power
// spectra averaged bin by bin. The returned spectrum describes one record.
inline PowerSpectrum averaged_record_spectrum(const SignalSet& signals, const CpmgSequence& seq, const ReadoutModel& model,
                                              double rate_hz, double duration_s, std::size_t averages, std::uint64_t seed,
                                              const SimulationOptions& sim = {}) {
  detail::require(averages >= 1, "averaged_record_spectrum: averages must be >= 1");
  const std::size_t n = record_length(rate_hz, duration_s);
  detail::require(n >= 4, "averaged_record_spectrum: record shorter than 4 samples");
  const auto sched = SamplingSchedule::with_period(seq, model, 1.0 / rate_hz, n * averages);
  const TimeTrace trace = run_sampling(signals, seq, model, sched, seed, sim);
  const auto values = trace.values();
  PowerSpectrum mean;
  for (std::size_t a = 0; a < averages; ++a) {
    const PowerSpectrum s = power_spectrum(std::span<const double>(values).subspan(a * n, n), rate_hz);
    if (a == 0) {
      mean = s;
    } else {
      for (std::size_t j = 0; j < s.size(); ++j) mean.power[j] += s.power[j];
    }
  }
  for (auto& v : mean.power) v /= static_cast<double>(averages);
  return mean;
}

struct WidebandRun {
  std::vector<PowerSpectrum> spectra;
  std::vector<SamplingMatrix> matrices;
  WidebandSpectrum result;
};

// Simulates one averaged record per rate and reconstructs the wideband
// spectrum on `grid` restricted to `support`.
inline WidebandRun simulate_and_reconstruct(const SignalSet& signals, const CpmgSequence& seq, const ReadoutModel& model,
                                            std::span<const double> rates_hz, double record_duration_s, std::size_t averages,
                                            const WidebandGrid& grid, const std::vector<BinRange>& support,
                                            std::uint64_t seed, const ReconstructionOptions& options = {},
                                            const SimulationOptions& sim = {}) {
  WidebandRun run;
  for (std::size_t i = 0; i < rates_hz.size(); ++i) {
    const double r = rates_hz[i];
    const std::size_t n = record_length(r, record_duration_s);
    run.matrices.push_back(build_sampling_matrix(r, static_cast<double>(n) / r, grid, support));
    run.spectra.push_back(averaged_record_spectrum(signals, seq, model, r, record_duration_s, averages,
                                                   splitmix64(seed + 0x9e37ULL * (i + 1)), sim));
  }
  run.result = reconstruct(run.spectra, run.matrices, options);
  return run;
}

struct SnrSweepRow {
  int repetitions = 0;
  double period_s = 0.0;
  double gain_photons = 0.0;
  double measured = 0.0;          // mean over seeds
  double measured_spread = 0.0;   // sample standard deviation over seeds (0 for one seed)
  double predicted_ideal = 0.0;
  double predicted_depolarized = 0.0;
};

struct SnrSweepSettings {
  std::vector<int> repetitions;
  std::size_t samples = 0;
  std::vector<std::pair<int, double>> periods;  // (max_repetitions, period_s), ascending
  double signal_hz = 0.0;
  std::size_t guard_bins = 10;
  std::size_t seeds = 1;
  SnrForm form = SnrForm::kLargeSnr;
};

inline double period_for(const SnrSweepSettings& s, int n) {
  for (const auto& [max_n, period] : s.periods) {
    if (n <= max_n) return period;
  }
  throw ConfigError("snr sweep: no sampling period configured for n = " + std::to_string(n));
}

// Peak phase of the tracked line: the summed filtered amplitude of every
// spectral line at the tracked frequency.
inline double tracked_phase_amplitude(const SignalSet& signals, const CpmgSequence& seq, double f_hz) {
  double phi = 0.0;
  for (const auto& s : signals) {
    for (const Tone& t : spectral_lines(s)) {
      if (std::fabs(t.frequency_hz - f_hz) <= 1e-9 * std::max(1.0, f_hz)) phi += t.amplitude_omega * filter_gain(t.frequency_hz, seq);
    }
  }
  return phi;
}

inline std::vector<SnrSweepRow> snr_sweep(const SignalSet& signals, const CpmgSequence& seq, const ReadoutModel& base,
                                          const SnrSweepSettings& cfg, std::uint64_t seed, const SimulationOptions& sim = {}) {
  detail::require(!cfg.repetitions.empty() && cfg.samples >= 16, "snr sweep: need repetitions and >= 16 samples");
  const double phi = tracked_phase_amplitude(signals, seq, cfg.signal_hz);
  if (!(phi > 0.0)) throw ConfigError("snr sweep: no signal line at signal_hz = " + std::to_string(cfg.signal_hz));
  std::vector<SnrSweepRow> rows;
  for (std::size_t i = 0; i < cfg.repetitions.size(); ++i) {
    const int n = cfg.repetitions[i];
    const ReadoutModel model = base.with_repetitions(n);
    const double period = period_for(cfg, n);
    const auto sched = SamplingSchedule::with_period(seq, model, period, cfg.samples);
    std::vector<double> snrs;
    for (std::size_t k = 0; k < cfg.seeds; ++k) {
      const std::uint64_t run_seed = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) * 7919ULL + k));
      SignalSet reseeded = signals;
      for (auto& s : reseeded) {
        if (s.fm) {
          s.fm->rng_seed = splitmix64(run_seed + 3);
          s.phase_noise.reset();
        }
      }
      const TimeTrace trace = run_sampling(reseeded, seq, model, sched, run_seed, sim);
      const PowerSpectrum spec = power_spectrum(trace);
      const std::size_t peak = undersampled_bin(cfg.signal_hz, spec.sample_rate_hz, spec.num_samples);
      const std::size_t sig[] = {peak};
      const auto band = default_noise_band(spec, sig, cfg.guard_bins);
      snrs.push_back(measure_snr(spec, peak, band, cfg.form).measured);
    }
    SnrSweepRow row;
    row.repetitions = n;
    row.period_s = period;
    row.gain_photons = model.gain();
    double m = 0.0;
    for (double v : snrs) m += v;
    m /= static_cast<double>(snrs.size());
    double ss = 0.0;
    for (double v : snrs) ss += (v - m) * (v - m);
    row.measured = m;
    row.measured_spread = snrs.size() > 1 ? std::sqrt(ss / static_cast<double>(snrs.size() - 1)) : 0.0;
    row.predicted_ideal = predicted_snr(phi, static_cast<double>(cfg.samples), model, false);
    row.predicted_depolarized = predicted_snr(phi, static_cast<double>(cfg.samples), model, true);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace strobe
