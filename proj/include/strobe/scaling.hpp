#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "strobe/lorentzian.hpp"
#include "strobe/sampler.hpp"
#include "strobe/spectral.hpp"

namespace strobe {

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "loglog_slope: length mismatch");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::require(x[i] > 0.0 && y[i] > 0.0, "loglog_slope: values must be > 0");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ScalingStudyConfig {
  SignalSet signals;
  CpmgSequence cpmg;
  ReadoutModel readout;
  double period_s = 0.0;
  std::vector<double> durations_s;
  int repetitions = 8;
  std::uint64_t seed = 0;

  double target_frequency_hz = 0.0;  // true frequency of the line being tracked
  double linewidth_hz = 0.0;         // its intrinsic width, for regime labels

  // Fit window half width: the larger of window_bins/T and window_hz.
  double window_bins = 0.0;
  double window_hz = 0.0;
  std::size_t padding = 1;

  // gamma_int * T above resolved_product counts as resolved, below
  // unresolved_product as unresolved; points in between are reported only.
  double resolved_product = 5.0;
  double unresolved_product = 0.2;

  SimulationOptions simulation;
};

struct ScalingPoint {
  double duration_s = 0.0;
  std::size_t samples = 0;
  double gamma_hz = 0.0;            // mean fitted width over repetitions
  double sigma_center_hz = 0.0;     // mean covariance-based uncertainty
  double center_scatter_hz = 0.0;   // spread of fitted centres across repetitions
  std::string regime;               // "resolved", "unresolved" or "transition"
  int failed_fits = 0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  double sigma_slope_unresolved = std::numeric_limits<double>::quiet_NaN();
  double sigma_slope_resolved = std::numeric_limits<double>::quiet_NaN();
  double gamma_slope_unresolved = std::numeric_limits<double>::quiet_NaN();
  double gamma_plateau_hz = std::numeric_limits<double>::quiet_NaN();  // mean gamma over resolved points
};

inline ScalingResult scaling_study(const ScalingStudyConfig& cfg) {
  detail::require(cfg.durations_s.size() >= 2, "scaling_study: need at least two durations");
  detail::require(cfg.repetitions >= 1, "scaling_study: repetitions must be >= 1");
  detail::require(cfg.period_s > 0.0 && cfg.target_frequency_hz > 0.0, "scaling_study: period and target must be > 0");
  ScalingResult result;
  const double fs = 1.0 / cfg.period_s;
  const double alias = alias_frequency(cfg.target_frequency_hz, fs);
  for (std::size_t pi = 0; pi < cfg.durations_s.size(); ++pi) {
    const double T = cfg.durations_s[pi];
    const auto n = static_cast<std::size_t>(std::llround(T / cfg.period_s));
    detail::require(n >= 16, "scaling_study: duration too short for the sampling period");
    const auto sched = SamplingSchedule::with_period(cfg.cpmg, cfg.readout, cfg.period_s, n);
    ScalingPoint pt;
    pt.duration_s = T;
    pt.samples = n;
    const double product = cfg.linewidth_hz * T;
    pt.regime = product >= cfg.resolved_product ? "resolved" : product <= cfg.unresolved_product ? "unresolved" : "transition";
    std::vector<double> gammas, sigmas, centers;
    for (int r = 0; r < cfg.repetitions; ++r) {
      const std::uint64_t run_seed = splitmix64(cfg.seed ^ splitmix64(pi * 1000003ULL + static_cast<std::uint64_t>(r)));
      SignalSet signals = cfg.signals;
      for (auto& s : signals) {
        if (s.fm) {
          s.fm->rng_seed = splitmix64(run_seed + 17);
          s.phase_noise.reset();
        }
      }
      const TimeTrace trace = run_sampling(signals, cfg.cpmg, cfg.readout, sched, run_seed, cfg.simulation);
      const PowerSpectrum spec = power_spectrum(trace, cfg.padding);
      const double half = std::max(cfg.window_bins / T, cfg.window_hz);
      const BinRange window = window_around(spec, alias, half);
      try {
        const LorentzianFit fit = fit_lorentzian(spec, window);
        gammas.push_back(fit.params.width_hz);
        sigmas.push_back(fit.sigma_center_hz);
        centers.push_back(fit.params.center_hz);
      } catch (const NumericalError&) {
        ++pt.failed_fits;
      }
    }
    if (gammas.empty()) throw NumericalError("scaling_study: every fit failed at T = " + std::to_string(T) + " s");
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
    pt.gamma_hz = mean(gammas);
    pt.sigma_center_hz = mean(sigmas);
    const double cm = mean(centers);
    double ss = 0.0;
    for (double c : centers) ss += (c - cm) * (c - cm);
    pt.center_scatter_hz = centers.size() > 1 ? std::sqrt(ss / static_cast<double>(centers.size() - 1)) : 0.0;
    result.points.push_back(pt);
  }

  std::vector<double> tu, su, gu, tr, sr, gr;
  for (const auto& p : result.points) {
    if (p.regime == "unresolved") {
      tu.push_back(p.duration_s);
      su.push_back(p.sigma_center_hz);
      gu.push_back(p.gamma_hz);
    } else if (p.regime == "resolved") {
      tr.push_back(p.duration_s);
      sr.push_back(p.sigma_center_hz);
      gr.push_back(p.gamma_hz);
    }
  }
  if (tu.size() >= 2) {
    result.sigma_slope_unresolved = loglog_slope(tu, su);
    result.gamma_slope_unresolved = loglog_slope(tu, gu);
  }
  if (tr.size() >= 2) result.sigma_slope_resolved = loglog_slope(tr, sr);
  if (!gr.empty()) result.gamma_plateau_hz = std::accumulate(gr.begin(), gr.end(), 0.0) / static_cast<double>(gr.size());
  return result;
}

}  // namespace strobe
