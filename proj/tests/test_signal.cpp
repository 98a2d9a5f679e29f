#include <gtest/gtest.h>

#include <cmath>

#include "strobe/fft.hpp"
#include "strobe/lorentzian.hpp"
#include "strobe/signal.hpp"
#include "strobe/spectral.hpp"

using namespace strobe;

TEST(Signal, UnitToneAtOrigin) {
  EXPECT_DOUBLE_EQ(evaluate(single_tone(1.0, 1.0), 0.0), 1.0);
}

TEST(Signal, ToneValidation) {
  EXPECT_THROW(Tone::make(-1.0, 10.0), ConfigError);
  EXPECT_THROW(Tone::make(1.0, 0.0), ConfigError);
  EXPECT_NEAR(Tone::make(1.0, 1.0, -kPi / 2).phase_rad, 1.5 * kPi, 1e-15);
  AcSignal empty;
  EXPECT_THROW(empty.validate(), ConfigError);
  AcSignal am = single_tone(1.0, 5.0);
  am.am = AmplitudeModulation{1.0, 1.5};
  EXPECT_THROW(am.validate(), ConfigError);
}

TEST(Signal, PeriodicWithoutFm) {
  const AcSignal s = single_tone(3.0, 601254.7, 0.4);
  for (double t : {0.0, 0.13, 17.5, 3599.9}) {
    const double a = evaluate(s, t);
    const double b = evaluate(s, t + 1.0 / 601254.7);
    // cos of an argument near 2 pi f t carries an absolute error of about eps * 2 pi f t
    EXPECT_NEAR(a, b, 3.0 * 4e-16 * (1.0 + kTwoPi * 601254.7 * t));
  }
}

TEST(Signal, FixtureAmplitudeIs170NanoTesla) {
  const double omega = kTwoPi * 4700.0;
  EXPECT_NEAR(omega_to_field(omega), 170e-9, 3e-9);
  EXPECT_NEAR(field_to_omega(omega_to_field(omega)), omega, 1e-9);
}

TEST(Signal, EvaluateIsPure) {
  AcSignal s = single_tone(2.0, 100.0);
  s.fm = FrequencyNoise{0.5, 11};
  s = with_fm_noise(s, 10.0);
  EXPECT_EQ(evaluate(s, 3.3), evaluate(s, 3.3));
}

TEST(Signal, FmRequiresMaterializedPath) {
  AcSignal s = single_tone(1.0, 100.0);
  s.fm = FrequencyNoise{0.5, 1};
  EXPECT_THROW(evaluate(s, 1.0), std::logic_error);
  const AcSignal ready = with_fm_noise(s, 2.0);
  EXPECT_NO_THROW(evaluate(ready, 1.5));
  EXPECT_THROW(evaluate(ready, 5.0), std::out_of_range);
}

TEST(Signal, FmStepMustResolveCorrelationTime) {
  AcSignal s = single_tone(1.0, 100.0);
  s.fm = FrequencyNoise{1.0, 1};
  const double tau_c = s.fm->effective_correlation_time();
  EXPECT_THROW(materialize_fm_noise(s, 10.0, tau_c), ConfigError);
  EXPECT_NO_THROW(materialize_fm_noise(s, 10.0, 0.1 * tau_c));
}

TEST(Signal, FmPathIsReproducible) {
  AcSignal s = single_tone(1.0, 100.0);
  s.fm = FrequencyNoise{0.2, 42};
  const auto a = materialize_fm_noise(s, 5.0, 0.001);
  const auto b = materialize_fm_noise(s, 5.0, 0.001);
  EXPECT_EQ(a.samples(), b.samples());
  s.fm->rng_seed = 43;
  EXPECT_NE(materialize_fm_noise(s, 5.0, 0.001).samples(), a.samples());
}

// Sampled at exactly 4 points per carrier cycle, a unit-depth AM signal gives
// sidebands at a quarter of the carrier power.
TEST(Signal, AmSidebandRatioOneToFourToOne) {
  const double fs = 64.0, fc = 16.0, fam = 0.5;
  const std::size_t n = 4096;
  AcSignal s = single_tone(1.0, fc);
  s.am = AmplitudeModulation{fam, 1.0};
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = evaluate(s, static_cast<double>(k) / fs);
  const PowerSpectrum spec = power_spectrum(x, fs);
  const double carrier = spec.power[spec.nearest_bin(fc)];
  EXPECT_NEAR(spec.power[spec.nearest_bin(fc + fam)] / carrier, 0.25, 1e-9);
  EXPECT_NEAR(spec.power[spec.nearest_bin(fc - fam)] / carrier, 0.25, 1e-9);
}

TEST(Signal, AmLinesAreExactExpansion) {
  AcSignal s = single_tone(2.0, 50.0, 0.3);
  s.am = AmplitudeModulation{0.7, 0.6};
  const auto lines = spectral_lines(s);
  ASSERT_EQ(lines.size(), 3u);
  for (double t : {0.0, 0.011, 1.37}) {
    double sum = 0.0;
    for (const auto& l : lines) sum += l.amplitude_omega * std::cos(kTwoPi * l.frequency_hz * t + l.phase_rad);
    EXPECT_NEAR(sum, evaluate(s, t), 1e-12);
  }
}

// The OU-broadened line, averaged over realisations, has half width gamma_int.
TEST(Signal, FmLinewidthMatchesTarget) {
  const double gamma = 0.05, fs = 8.0, f0 = 2.0;
  const std::size_t n = 1 << 14;
  const double T = n / fs;
  std::vector<double> avg(n / 2 + 1, 0.0);
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    AcSignal s = single_tone(1.0, f0);
    s.fm = FrequencyNoise{gamma, static_cast<std::uint64_t>(1000 + r)};
    s = with_fm_noise(s, T + 1.0);
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = evaluate(s, static_cast<double>(k) / fs);
    const auto p = dft_power(x, n);
    for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += p[j] / reps;
  }
  PowerSpectrum spec{avg, fs / n, fs, n, 1};
  const LorentzianFit fit = fit_lorentzian(spec, window_around(spec, f0, 20 * gamma));
  EXPECT_NEAR(fit.params.width_hz, gamma, 0.15 * gamma);
  EXPECT_NEAR(fit.params.center_hz, f0, 0.1 * gamma);
}
