#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "strobe/error.hpp"
#include "strobe/signal.hpp"
#include "strobe/special.hpp"

namespace strobe {

// Where the pi pulses sit inside the sensing window [0, K tau).
//  kCentered: standard CPMG, pulses at (j + 1/2) tau. This is the timing for
//             which phi(t) on resonance is proportional to x(t) itself.
//  kAligned:  pulses at j tau, i.e. g(t') = (-1)^floor(t'/tau). On resonance
//             the response is in quadrature with x(t).
enum class PulseTiming { kCentered, kAligned };

struct CpmgSequence {
  int pulse_count = 0;  // K, even
  double tau_s = 0.0;
  int harmonic = 1;  // m, odd
  PulseTiming timing = PulseTiming::kCentered;

  double duration() const { return pulse_count * tau_s; }
  double lockin_frequency() const { return harmonic / (2.0 * tau_s); }

  static CpmgSequence from_duration(int pulse_count, double duration_s, int harmonic = 1,
                                    PulseTiming timing = PulseTiming::kCentered) {
    CpmgSequence s{pulse_count, duration_s / pulse_count, harmonic, timing};
    s.validate();
    return s;
  }

  // Pulse spacing chosen so that m/(2 tau) equals `frequency_hz` exactly.
  static CpmgSequence tuned_to(double frequency_hz, int pulse_count, int harmonic = 1,
                               PulseTiming timing = PulseTiming::kCentered) {
    CpmgSequence s{pulse_count, harmonic / (2.0 * frequency_hz), harmonic, timing};
    s.validate();
    return s;
  }

  void validate() const {
    detail::require(pulse_count > 0 && pulse_count % 2 == 0, "CPMG pulse count K must be a positive even integer");
    detail::require(std::isfinite(tau_s) && tau_s > 0.0, "CPMG tau must be > 0");
    detail::require(harmonic > 0 && harmonic % 2 == 1, "CPMG harmonic m must be a positive odd integer");
  }
};

inline int modulation_function(double t_prime, const CpmgSequence& seq) {
  seq.validate();
  if (!(t_prime >= 0.0 && t_prime < seq.duration())) {
    throw ConfigError("modulation_function: t' outside [0, K tau)");
  }
  const double shift = seq.timing == PulseTiming::kCentered ? 0.5 : 0.0;
  const auto k = static_cast<long long>(std::floor(t_prime / seq.tau_s + shift));
  return (k % 2 == 0) ? 1 : -1;
}

namespace detail {

// Chebyshev polynomial of the second kind, U_n(c) = sin((n+1) u)/sin(u) for
// c = cos(u). Using it for sin(K u/2)/sin(u) removes the removable
// singularities at u = j pi without a separate limit branch.
inline double chebyshev_u(int n, double c) {
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 2.0 * c;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * c * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// Signed envelope of the filter per unit Omega (seconds), i.e. phi = Omega *
// gain * carrier(t), and the carrier is cos(...) for centered timing and
// sin(...) for aligned timing.
inline double filter_envelope(double frequency_hz, const CpmgSequence& seq) {
  if (frequency_hz == 0.0) return 0.0;
  const double omega = kTwoPi * frequency_hz;
  const double u = omega * seq.tau_s;
  const double ratio = chebyshev_u(seq.pulse_count / 2 - 1, std::cos(u));  // sin(K u/2)/sin(u)
  if (seq.timing == PulseTiming::kCentered) {
    const double s4 = std::sin(0.25 * u);
    return -8.0 / omega * ratio * s4 * s4 * std::sin(0.5 * u);
  }
  const double s2 = std::sin(0.5 * u);
  return 4.0 / omega * s2 * s2 * ratio;
}

inline double carrier(double frequency_hz, double phase, double t, const CpmgSequence& seq) {
  const double arg = cycle_phase(frequency_hz, t) + cycle_phase(frequency_hz, 0.5 * seq.duration()) + phase;
  return seq.timing == PulseTiming::kCentered ? std::cos(arg) : std::sin(arg);
}

}  // namespace detail

// |phi| per unit Omega for a tone at `frequency_hz` (seconds). On resonance
// this is 2 t_a/(m pi).
inline double filter_gain(double frequency_hz, const CpmgSequence& seq) {
  seq.validate();
  return std::fabs(detail::filter_envelope(frequency_hz, seq));
}

// Nominal peak phase 2 t_a Omega/(m pi) of a resonant tone.
inline double phase_amplitude(double amplitude_omega, const CpmgSequence& seq) {
  seq.validate();
  return 2.0 * seq.duration() * amplitude_omega / (seq.harmonic * kPi);
}

// Amplitude Omega needed for a resonant tone to reach phase amplitude phi_max.
inline double omega_for_phase(double phi_max, const CpmgSequence& seq) {
  seq.validate();
  return phi_max * seq.harmonic * kPi / (2.0 * seq.duration());
}

struct LockinResponse {
  double phi_max = 0.0;
  double probability_bias = 0.5;
};

inline LockinResponse lockin_response(const Tone& tone, const CpmgSequence& seq) {
  return {tone.amplitude_omega * filter_gain(tone.frequency_hz, seq), 0.5};
}

// Phase accumulated by a single tone during the block that starts at t.
inline double phase_closed_form(const Tone& tone, const CpmgSequence& seq, double t) {
  seq.validate();
  if (tone.amplitude_omega == 0.0 || tone.frequency_hz == 0.0) return 0.0;
  return tone.amplitude_omega * detail::filter_envelope(tone.frequency_hz, seq) *
         detail::carrier(tone.frequency_hz, tone.phase_rad, t, seq);
}

// Phase for a full signal. Lines are summed by linearity; AM is expanded
// exactly into sidebands and the FM phase offset is taken at the block
// midpoint (the noise varies on a seconds scale, the block lasts microseconds).
inline double accumulated_phase(const AcSignal& signal, const CpmgSequence& seq, double t) {
  const double theta = fm_phase(signal, t + 0.5 * seq.duration());
  double phi = 0.0;
  for (const Tone& line : spectral_lines(signal)) {
    Tone shifted = line;
    shifted.phase_rad = line.phase_rad + theta;
    phi += phase_closed_form(shifted, seq, t);
  }
  return phi;
}

// Brute-force reference: integral of x(t + t') g(t') over the block. Each
// constant-sign segment is integrated with Romberg extrapolation of the
// trapezoid rule (steps h, h/2, h/4; error O(h^6)).
inline double phase_by_integration(const AcSignal& signal, const CpmgSequence& seq, double t, double dt) {
  seq.validate();
  detail::require(dt > 0.0 && dt <= seq.tau_s / 100.0 * (1.0 + 1e-12),
                  "phase_by_integration: dt must satisfy 0 < dt <= tau/100");
  std::vector<double> edges;
  const int K = seq.pulse_count;
  edges.push_back(0.0);
  const double shift = seq.timing == PulseTiming::kCentered ? 0.5 : 0.0;
  for (int j = 0; j < K; ++j) {
    const double e = (j + shift) * seq.tau_s;
    if (e > 0.0) edges.push_back(e);
  }
  edges.push_back(seq.duration());

  auto f = [&](double tp) { return evaluate(signal, t + tp); };
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s];
    const double b = edges[s + 1];
    const auto n = static_cast<std::size_t>(std::ceil((b - a) / dt - 1e-9));
    const std::size_t fine = 4 * std::max<std::size_t>(n, 1);
    const double h = (b - a) / static_cast<double>(fine);
    double sum1 = 0.5 * (f(a) + f(b));  // points shared by all three levels
    double sum2 = 0.0;                  // extra points of the h/2 level
    double sum4 = 0.0;                  // extra points of the h/4 level
    for (std::size_t i = 1; i < fine; ++i) {
      const double v = f(a + h * static_cast<double>(i));
      if (i % 4 == 0) sum1 += v;
      else if (i % 2 == 0) sum2 += v;
      else sum4 += v;
    }
    const double t1 = 4.0 * h * sum1;
    const double t2 = 2.0 * h * (sum1 + sum2);
    const double t4 = h * (sum1 + sum2 + sum4);
    const double r1 = (4.0 * t2 - t1) / 3.0;
    const double r2 = (4.0 * t4 - t2) / 3.0;
    const double romberg = (16.0 * r2 - r1) / 15.0;
    total += (s % 2 == 0 ? 1.0 : -1.0) * romberg;
  }
  return total;
}

inline double transition_probability(double phi) {
  const double p = 0.5 * (1.0 - std::sin(phi));
  return std::clamp(p, 0.0, 1.0);
}

struct Harmonic {
  int order = 1;              // 2k+1
  double frequency_hz = 0.0;  // (2k+1) f_ac
  double amplitude = 0.0;     // J_{2k+1}(phi_max)
  double coefficient = 0.0;   // coefficient of cos((2k+1) 2 pi f t) in p(t): -(-1)^k J_{2k+1}
};

inline std::vector<Harmonic> nonlinear_spectrum_prediction(double phi_max, double f_ac, int k_max) {
  detail::require(k_max >= 0, "nonlinear_spectrum_prediction: k_max must be >= 0");
  const auto j = bessel_j_sequence(2 * k_max + 1, phi_max);
  std::vector<Harmonic> out;
  out.reserve(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) {
    const int order = 2 * k + 1;
    const double amp = j[static_cast<std::size_t>(order)];
    out.push_back({order, order * f_ac, amp, (k % 2 == 0 ? -amp : amp)});
  }
  return out;
}

// Sum over all odd harmonics of J^2_{2k+1}(phi_max).
inline double total_harmonic_power(double phi_max) {
  const int k_max = static_cast<int>(std::fabs(phi_max)) + 40;
  double sum = 0.0;
  for (const auto& h : nonlinear_spectrum_prediction(phi_max, 1.0, k_max)) sum += h.amplitude * h.amplitude;
  return sum;
}

}  // namespace strobe
