#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "strobe/error.hpp"
#include "strobe/random.hpp"

namespace strobe {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Electron gyromagnetic ratio, rad/s per tesla.
inline constexpr double kGammaElectron = kTwoPi * 28e9;

inline double field_to_omega(double tesla) { return kGammaElectron * tesla; }
inline double omega_to_field(double omega) { return omega / kGammaElectron; }

inline double normalize_phase(double phase) {
  double r = std::fmod(phase, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

// 2*pi*frac(f*t). The product is formed in extended precision so that
// MHz carriers stay phase-accurate over hours of simulated time.
inline double cycle_phase(double frequency_hz, double t) {
  const long double cycles = static_cast<long double>(frequency_hz) * static_cast<long double>(t);
  return static_cast<double>(kTwoPi * static_cast<double>(cycles - std::floor(cycles)));
}

struct Tone {
  double amplitude_omega = 0.0;  // rad/s
  double frequency_hz = 0.0;
  double phase_rad = 0.0;

  static Tone make(double amplitude_omega, double frequency_hz, double phase_rad = 0.0) {
    Tone t{amplitude_omega, frequency_hz, normalize_phase(phase_rad)};
    t.validate();
    return t;
  }

  void validate() const {
    detail::require(std::isfinite(amplitude_omega) && amplitude_omega >= 0.0,
                    "tone amplitude must be finite and >= 0");
    detail::require(std::isfinite(frequency_hz) && frequency_hz > 0.0, "tone frequency must be > 0");
    detail::require(phase_rad >= 0.0 && phase_rad < kTwoPi, "tone phase must lie in [0, 2pi)");
  }
};

struct AmplitudeModulation {
  double frequency_hz = 0.0;
  double depth = 0.0;
};

struct FrequencyNoise {
  double linewidth_hz = 0.0;  // gamma_int, half width at half maximum of the resulting line
  std::uint64_t rng_seed = 0;
  double correlation_time_s = 0.0;  // 0 selects the default below

  // Default correlation time keeps the process in the motional-narrowing
  // regime (2*pi*sigma*tau_c = sqrt(1/50)), so the line is Lorentzian out to
  // roughly fifty linewidths from the centre.
  double effective_correlation_time() const {
    if (correlation_time_s > 0.0) return correlation_time_s;
    return 1.0 / (kTwoPi * 50.0 * linewidth_hz);
  }

  // Stationary standard deviation (Hz) of the frequency offset. For an OU
  // process the phase diffuses with rate (2 pi sigma)^2 tau_c, which is the
  // Lorentzian half width in rad/s; equating it to 2 pi gamma_int gives this.
  double offset_std_hz() const {
    return std::sqrt(linewidth_hz / (kTwoPi * effective_correlation_time()));
  }
};

// Frozen, immutable realisation of the accumulated FM phase theta(t) on a
// uniform grid starting at t = 0; linear interpolation in between.
class PhaseNoisePath {
 public:
  PhaseNoisePath(double dt, std::vector<double> phase) : dt_(dt), phase_(std::move(phase)) {
    detail::require(dt_ > 0.0 && phase_.size() >= 2, "phase-noise path needs dt > 0 and >= 2 points");
  }

  double dt() const { return dt_; }
  double duration() const { return dt_ * static_cast<double>(phase_.size() - 1); }
  const std::vector<double>& samples() const { return phase_; }

  double phase_at(double t) const {
    const double x = t / dt_;
    const double last = static_cast<double>(phase_.size() - 1);
    if (!(x >= 0.0) || x > last * (1.0 + 1e-12)) {
      throw std::out_of_range("phase-noise path evaluated at t=" + std::to_string(t) +
                              " outside materialised span [0, " + std::to_string(duration()) + "]");
    }
    const double xc = std::min(x, last);
    const auto i = std::min(static_cast<std::size_t>(xc), phase_.size() - 2);
    const double frac = xc - static_cast<double>(i);
    return phase_[i] + frac * (phase_[i + 1] - phase_[i]);
  }

 private:
  double dt_;
  std::vector<double> phase_;
};

struct AcSignal {
  std::vector<Tone> tones;
  std::optional<AmplitudeModulation> am;
  std::optional<FrequencyNoise> fm;
  std::shared_ptr<const PhaseNoisePath> phase_noise;  // attached by with_fm_noise

  void validate() const {
    detail::require(!tones.empty(), "signal needs at least one tone");
    for (const auto& t : tones) t.validate();
    if (am) {
      detail::require(am->depth >= 0.0 && am->depth <= 1.0, "AM depth must lie in [0, 1]");
      detail::require(am->frequency_hz > 0.0, "AM frequency must be > 0");
    }
    if (fm) {
      detail::require(fm->linewidth_hz >= 0.0 && std::isfinite(fm->linewidth_hz),
                      "FM linewidth must be >= 0");
      detail::require(fm->correlation_time_s >= 0.0, "FM correlation time must be >= 0");
    }
  }

  bool needs_phase_noise() const { return fm && fm->linewidth_hz > 0.0; }
};

inline AcSignal single_tone(double amplitude_omega, double frequency_hz, double phase_rad = 0.0) {
  AcSignal s;
  s.tones.push_back(Tone::make(amplitude_omega, frequency_hz, phase_rad));
  return s;
}

// Ornstein-Uhlenbeck frequency offset delta_f(t), integrated (trapezoid) into
// theta(t) = 2 pi * integral delta_f. Uses the exact OU transition so any
// dt below the correlation time is statistically faithful.
inline PhaseNoisePath materialize_fm_noise(const AcSignal& signal, double duration, double dt) {
  detail::require(signal.fm.has_value(), "materialize_fm_noise: signal has no FM configured");
  detail::require(duration > 0.0 && dt > 0.0, "materialize_fm_noise: duration and dt must be > 0");
  const FrequencyNoise& fm = *signal.fm;
  const auto steps = static_cast<std::size_t>(std::ceil(duration / dt));
  std::vector<double> theta(steps + 1, 0.0);
  if (fm.linewidth_hz == 0.0) return PhaseNoisePath(dt, std::move(theta));

  const double tau_c = fm.effective_correlation_time();
  detail::require(dt < 0.5 * tau_c,
                  "materialize_fm_noise: dt must be below half the FM correlation time (" +
                      std::to_string(0.5 * tau_c) + " s)");
  const double sigma = fm.offset_std_hz();
  const double a = std::exp(-dt / tau_c);
  const double kick = sigma * std::sqrt(1.0 - a * a);
  Rng rng = stream_rng(fm.rng_seed, streams::kPhaseNoise);
  std::normal_distribution<double> normal(0.0, 1.0);
  double offset = sigma * normal(rng);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double next = a * offset + kick * normal(rng);
    theta[i] = theta[i - 1] + kTwoPi * dt * 0.5 * (offset + next);
    offset = next;
  }
  return PhaseNoisePath(dt, std::move(theta));
}

// Copy of `signal` with an FM path covering [0, duration] attached. dt <= 0
// picks a tenth of the correlation time.
inline AcSignal with_fm_noise(AcSignal signal, double duration, double dt = 0.0) {
  if (!signal.needs_phase_noise()) return signal;
  if (dt <= 0.0) dt = 0.1 * signal.fm->effective_correlation_time();
  signal.phase_noise = std::make_shared<const PhaseNoisePath>(materialize_fm_noise(signal, duration, dt));
  return signal;
}

inline double fm_phase(const AcSignal& signal, double t) {
  if (!signal.needs_phase_noise()) return 0.0;
  if (!signal.phase_noise) {
    throw std::logic_error("FM signal evaluated before its phase-noise path was materialised");
  }
  return signal.phase_noise->phase_at(t);
}

// The signal as a plain sum of cosines: AM with depth d is exactly a carrier
// plus two sidebands of relative amplitude d/2. FM is not included here; it
// is a common phase offset applied on top of every line.
inline std::vector<Tone> spectral_lines(const AcSignal& signal) {
  if (!signal.am || signal.am->depth == 0.0) return signal.tones;
  std::vector<Tone> lines;
  lines.reserve(3 * signal.tones.size());
  const double fam = signal.am->frequency_hz;
  const double half_depth = 0.5 * signal.am->depth;
  for (const auto& t : signal.tones) {
    lines.push_back(t);
    lines.push_back(Tone{t.amplitude_omega * half_depth, t.frequency_hz + fam, t.phase_rad});
    const double lower = t.frequency_hz - fam;
    if (lower > 0.0) {
      lines.push_back(Tone{t.amplitude_omega * half_depth, lower, t.phase_rad});
    } else if (lower < 0.0) {
      lines.push_back(Tone{t.amplitude_omega * half_depth, -lower, normalize_phase(-t.phase_rad)});
    } else {
      // A sideband at exactly DC is a constant offset; keep it as a zero-frequency
      // line by folding it into the evaluate path below.
      lines.push_back(Tone{t.amplitude_omega * half_depth * std::cos(t.phase_rad), 0.0, 0.0});
    }
  }
  return lines;
}

inline double evaluate(const AcSignal& signal, double t) {
  if (!(t >= 0.0)) throw std::domain_error("evaluate: t must be >= 0");
  const double theta = fm_phase(signal, t);
  double sum = 0.0;
  const double envelope =
      signal.am ? 1.0 + signal.am->depth * std::cos(cycle_phase(signal.am->frequency_hz, t)) : 1.0;
  for (const auto& tone : signal.tones) {
    sum += tone.amplitude_omega * std::cos(cycle_phase(tone.frequency_hz, t) + tone.phase_rad + theta);
  }
  return envelope * sum;
}

}  // namespace strobe
