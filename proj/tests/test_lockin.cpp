#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "strobe/lockin.hpp"
#include "strobe/special.hpp"

using namespace strobe;

namespace {
CpmgSequence aligned(int k, double tau) { return {k, tau, 1, PulseTiming::kAligned}; }
}  // namespace

TEST(Modulation, FloorConventionExamples) {
  const auto seq = aligned(4, 1.0);
  EXPECT_EQ(modulation_function(0.0, seq), 1);
  EXPECT_EQ(modulation_function(1.5, seq), -1);
  for (int k = 1; k < 4; ++k) {
    EXPECT_NE(modulation_function(k - 1e-9, seq), modulation_function(k + 1e-9, seq)) << "k=" << k;
  }
}

TEST(Modulation, CenteredTimingFlipsAtHalfSpacing) {
  const CpmgSequence seq{4, 1.0, 1, PulseTiming::kCentered};
  EXPECT_EQ(modulation_function(0.4, seq), 1);
  EXPECT_EQ(modulation_function(0.6, seq), -1);
  EXPECT_EQ(modulation_function(1.6, seq), 1);
  EXPECT_EQ(modulation_function(3.9, seq), 1);
}

TEST(Modulation, RejectsOutOfRange) {
  const auto seq = aligned(4, 1.0);
  EXPECT_THROW(modulation_function(-0.1, seq), ConfigError);
  EXPECT_THROW(modulation_function(4.0, seq), ConfigError);
}

TEST(Cpmg, Validation) {
  EXPECT_THROW(CpmgSequence::from_duration(3, 1e-5), ConfigError);
  EXPECT_THROW(CpmgSequence::from_duration(4, 1e-5, 2), ConfigError);
  EXPECT_THROW(CpmgSequence::from_duration(4, -1.0), ConfigError);
  const auto s = CpmgSequence::tuned_to(1e6, 16, 3);
  EXPECT_DOUBLE_EQ(s.lockin_frequency(), 1e6);
}

TEST(Phase, ResonantLimitIsProportionalToInstantaneousValue) {
  const double f = 400e3;
  const auto seq = CpmgSequence::tuned_to(f, 16);
  const Tone tone = Tone::make(1000.0, f);
  for (double t : {0.0, 1.3e-7, 2.2e-6, 0.5}) {
    const double expected = 2.0 * seq.duration() / kPi * 1000.0 * std::cos(kTwoPi * f * t);
    EXPECT_NEAR(phase_closed_form(tone, seq, t), expected, 1e-9 * 2.0 * seq.duration() / kPi * 1000.0);
  }
}

TEST(Phase, VanishesAtLowFrequency) {
  const auto seq = CpmgSequence::tuned_to(400e3, 16);
  EXPECT_NEAR(phase_closed_form(Tone::make(1000.0, 1e-3), seq, 0.2), 0.0, 1e-12);
}

TEST(Phase, ZeroSignalIntegratesToZero) {
  const auto seq = CpmgSequence::tuned_to(400e3, 8);
  EXPECT_EQ(phase_by_integration(single_tone(0.0, 400e3), seq, 0.1, seq.tau_s / 200), 0.0);
}

TEST(Phase, IntegrationStepMustResolvePulseSpacing) {
  const auto seq = CpmgSequence::tuned_to(400e3, 8);
  EXPECT_THROW(phase_by_integration(single_tone(1.0, 400e3), seq, 0.0, seq.tau_s / 10), ConfigError);
}

TEST(Phase, ClosedFormMatchesIntegrationBothTimings) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto timing : {PulseTiming::kCentered, PulseTiming::kAligned}) {
    for (int i = 0; i < 40; ++i) {
      const int k = 2 * (1 + static_cast<int>(u(rng) * 16));
      const CpmgSequence seq{k, 1e-7 + 1e-6 * u(rng), 1, timing};
      const double f = (0.2 + 2.0 * u(rng)) / (2.0 * seq.tau_s);
      const Tone tone = Tone::make(1e4, f, kTwoPi * u(rng));
      AcSignal s;
      s.tones = {tone};
      const double t = 10.0 * u(rng);
      const double ref = phase_by_integration(s, seq, t, seq.tau_s / 200);
      EXPECT_NEAR(phase_closed_form(tone, seq, t), ref, 1e-8 * 1e4 * seq.duration());
    }
  }
}

TEST(Phase, DetunedToFirstFilterNull) {
  const double f0 = 400e3;
  const auto seq = CpmgSequence::tuned_to(f0, 32);
  const Tone tone = Tone::make(1e4, f0 + 1.0 / seq.duration());
  EXPECT_LT(filter_gain(tone.frequency_hz, seq), 1e-3 * filter_gain(f0, seq));
  AcSignal s;
  s.tones = {tone};
  EXPECT_NEAR(phase_closed_form(tone, seq, 0.3), phase_by_integration(s, seq, 0.3, seq.tau_s / 200),
              1e-9 * 1e4 * seq.duration());
}

TEST(Phase, TwoTonesAddLinearly) {
  const auto seq = CpmgSequence::tuned_to(400e3, 16);
  AcSignal s;
  s.tones = {Tone::make(3e3, 399e3, 0.2), Tone::make(5e3, 401.5e3, 1.0)};
  AcSignal a, b;
  a.tones = {s.tones[0]};
  b.tones = {s.tones[1]};
  const double dt = seq.tau_s / 200;
  EXPECT_NEAR(phase_by_integration(s, seq, 0.01, dt),
              phase_by_integration(a, seq, 0.01, dt) + phase_by_integration(b, seq, 0.01, dt), 1e-12);
  EXPECT_NEAR(accumulated_phase(s, seq, 0.01), phase_by_integration(s, seq, 0.01, dt), 1e-8 * 8e3 * seq.duration());
}

TEST(Phase, HalfRadianFixture) {
  const auto seq = CpmgSequence::from_duration(32, 26.622e-6);
  EXPECT_NEAR(phase_amplitude(kTwoPi * 4700.0, seq), 0.5005, 5e-4);
}

TEST(Phase, HigherHarmonicScalesByOneOverM) {
  const auto seq1 = CpmgSequence::tuned_to(400e3, 16, 1);
  const CpmgSequence seq3{16, seq1.tau_s, 3, seq1.timing};
  EXPECT_NEAR(filter_gain(1.2e6, seq3), filter_gain(400e3, seq1) / 3.0, 1e-12 * filter_gain(400e3, seq1));
}

TEST(Probability, TransitionProbability) {
  EXPECT_DOUBLE_EQ(transition_probability(0.0), 0.5);
  EXPECT_NEAR(transition_probability(kPi / 2), 0.0, 1e-16);
  EXPECT_NEAR(transition_probability(1e-4), 0.5 * (1 - 1e-4), 1e-12);
  for (double phi : {-7.0, -1.0, 0.3, 2.0, 12.0}) {
    const double p = transition_probability(phi);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_NEAR(p + transition_probability(-phi), 1.0, 1e-15);
  }
}

TEST(Bessel, MatchesStandardLibrary) {
  for (double x : {0.01, 0.5, 3.7, 14.0, 21.6, 40.0}) {
    const auto seq = bessel_j_sequence(30, x);
    for (int n = 0; n <= 30; ++n) {
      EXPECT_NEAR(seq[n], std::cyl_bessel_j(static_cast<double>(n), x), 1e-13) << "n=" << n << " x=" << x;
    }
  }
}

TEST(Bessel, ThreeTermRecurrence) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(0.1, 30.0);
  std::uniform_int_distribution<int> un(1, 40);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng);
    const int n = un(rng);
    const double lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
    const double rhs = 2.0 * n / x * bessel_j(n, x);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::fabs(rhs)));
  }
}

TEST(Harmonics, SmallPhaseLimit) {
  const auto h = nonlinear_spectrum_prediction(1e-3, 100.0, 3);
  EXPECT_NEAR(h[0].amplitude, 5e-4, 1e-10);
  EXPECT_DOUBLE_EQ(h[1].frequency_hz, 300.0);
  EXPECT_LT(std::fabs(h[1].amplitude), 1e-9);
}

TEST(Harmonics, ExpansionReproducesProbability) {
  const double phi_max = 2.3, f = 10.0;
  const auto h = nonlinear_spectrum_prediction(phi_max, f, 20);
  for (double t : {0.0, 0.013, 0.07}) {
    double p = 0.5;
    for (const auto& c : h) p += c.coefficient * std::cos(kTwoPi * c.frequency_hz * t);
    EXPECT_NEAR(p, transition_probability(phi_max * std::cos(kTwoPi * f * t)), 1e-12);
  }
}

TEST(Harmonics, CumulativePowerApproachesQuarter) {
  EXPECT_NEAR(total_harmonic_power(200.0), 0.25, 0.01);
  EXPECT_NEAR(total_harmonic_power(14.0), 0.2683, 1e-3);
  EXPECT_LT(total_harmonic_power(1.0), 0.25);
}

TEST(Harmonics, OrderTwentyOneVisibleAtLargePhase) {
  const auto h = nonlinear_spectrum_prediction(21.6, 1.0, 15);
  int highest = 0;
  for (const auto& c : h) {
    if (std::fabs(c.amplitude) > 1e-3) highest = c.order;
  }
  EXPECT_GE(highest, 21);
}
