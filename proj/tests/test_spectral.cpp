#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "strobe/experiments.hpp"
#include "strobe/lorentzian.hpp"
#include "strobe/sampler.hpp"
#include "strobe/spectral.hpp"

using namespace strobe;

namespace {

std::vector<double> brute_force_power(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> p(n / 2 + 1);
  for (std::size_t j = 0; j < p.size(); ++j) {
    std::complex<long double> acc = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const long double a = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((j * k) % n) / n;
      acc += static_cast<long double>(x[k]) * std::complex<long double>(std::cos(a), std::sin(a));
    }
    p[j] = static_cast<double>(std::norm(acc));
  }
  return p;
}

// Tone frequency that lands exactly on bin j of an N-point record at rate fs,
// folded from above the q-th multiple of fs.
double on_bin(double fs, std::size_t n, std::size_t q, std::size_t j) {
  return static_cast<double>(q) * fs + static_cast<double>(j) * fs / static_cast<double>(n);
}

}  // namespace

TEST(Spectrum, ConstantTrace) {
  const std::vector<double> x(1000, 3.0);
  const auto s = power_spectrum(x, 10.0);
  EXPECT_NEAR(s.power[0], 9e6, 1e-6);
  for (std::size_t j = 1; j < s.size(); ++j) EXPECT_LT(s.power[j], 1e-12);
}

TEST(Spectrum, MatchesBruteForceDftForOddLength) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(3.0, 1.0);
  for (std::size_t n : {385u, 1001u, 64u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    const auto fast = power_spectrum(x, 1.0);
    const auto slow = brute_force_power(x);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t j = 0; j < slow.size(); ++j) EXPECT_NEAR(fast.power[j], slow[j], 1e-9 * (1 + slow[j]));
  }
}

TEST(Spectrum, ParsevalHolds) {
  std::mt19937_64 rng(3);
  std::poisson_distribution<int> p(20);
  for (std::size_t n : {999u, 1000u, 385263u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = p(rng);
    const auto s = power_spectrum(x, 1.0);
    EXPECT_LT(parseval_error(s, x), 1e-6) << n;
  }
}

TEST(Spectrum, OneHourResolution) {
  const std::size_t n = static_cast<std::size_t>(std::llround(3600.0 / 4.21152e-3));
  const std::vector<double> x(n, 1.0);
  EXPECT_NEAR(power_spectrum(x, 1.0 / 4.21152e-3).bin_width_hz, 278e-6, 0.5e-6);
}

TEST(Spectrum, PaddingRefinesGrid) {
  std::vector<double> x(100, 0.0);
  x[3] = 1.0;
  const auto s = power_spectrum(x, 10.0, 4);
  EXPECT_EQ(s.transform_length(), 400u);
  EXPECT_NEAR(s.bin_width_hz, 10.0 / 400, 1e-15);
}

TEST(Spectrum, OnBinSinusoidPeak) {
  const std::size_t n = 1000;
  const double a = 2.5;
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = 10.0 + a * std::cos(kTwoPi * 37.0 * k / n);
  const auto s = power_spectrum(x, 1.0);
  EXPECT_NEAR(s.power[37], std::pow(n * a / 2, 2), 1e-6);
}

TEST(Snr, RejectsOverlappingBand) {
  std::vector<double> x(256, 1.0);
  x[5] = 2.0;
  const auto s = power_spectrum(x, 1.0);
  const BinRange band[] = {{10, 100}};
  EXPECT_THROW(measure_snr(s, 50, band), ConfigError);
  const BinRange dc[] = {{0, 20}};
  EXPECT_THROW(measure_snr(s, 50, dc), ConfigError);
}

TEST(Snr, NoiseBandExcludesSignalAndEdges) {
  PowerSpectrum s{std::vector<double>(101, 1.0), 1.0, 200.0, 200, 1};
  const std::size_t sig[] = {50};
  const auto band = default_noise_band(s, sig, 10);
  for (const auto& r : band) {
    EXPECT_FALSE(r.contains(0));
    EXPECT_FALSE(r.contains(100));
    for (std::size_t j = 41; j < 60; ++j) EXPECT_FALSE(r.contains(j));
  }
}

// A zero-signal spectrum is exponentially distributed: std equals mean and
// the peak-to-std ratio of a single bin is Exp(1).
TEST(Snr, ZeroSignalNoiseFloorIsExponential) {
  const auto seq = CpmgSequence::from_duration(16, 6.654e-6);
  const auto model = ReadoutModel{}.with_repetitions(260);
  const std::size_t n = 200000;
  const auto sched = SamplingSchedule::with_period(seq, model, 1.31524e-3, n);
  const auto s = power_spectrum(run_sampling(single_tone(0.0, 1e6), seq, model, sched, 21));
  const std::size_t none[] = {0};
  const auto band = default_noise_band(s, std::span<const std::size_t>(none, 0));
  const NoiseStats ns = noise_statistics(s, band);
  EXPECT_NEAR(ns.std / ns.mean, 1.0, 0.02);
  EXPECT_NEAR(ns.mean, n * noise_variance(model), 4 * n * noise_variance(model) / std::sqrt(ns.bins));
  std::size_t above = 0;
  for (std::size_t j = 1; j + 1 < s.size(); ++j) above += s.power[j] > ns.std;
  EXPECT_NEAR(static_cast<double>(above) / (s.size() - 2), std::exp(-1.0), 0.01);
}

TEST(Snr, PredictionLimits) {
  const auto m = ReadoutModel{}.with_repetitions(260);
  EXPECT_NEAR(predicted_snr(0.1, 2e5, m, false) / predicted_snr(0.1, 1e5, m, false), 2.0, 1e-12);
  ReadoutModel huge{1, 1e9, 0.35};
  EXPECT_NEAR(predicted_snr(0.1, 1e5, huge, false), 1e5 * 0.01 / 4, 1e-3);
  ReadoutModel dep = m;
  dep.depolarization_rate = 1.4e-4;
  EXPECT_NEAR(predicted_snr(0.1, 1e5, dep, true) / predicted_snr(0.1, 1e5, dep, false), std::exp(-2 * 1.4e-4 * 260), 1e-12);
}

// Depolarized optimum over n from a dense scan agrees with the stationary
// point of the closed form (bisection on its derivative).
TEST(Snr, DepolarizedOptimumMatchesStationaryPoint) {
  ReadoutModel m;
  m.depolarization_rate = 1.4e-4;
  int best = 1;
  for (int n = 1; n <= 4000; ++n) {
    if (predicted_snr(0.1, 1e5, m.with_repetitions(n), true) > predicted_snr(0.1, 1e5, m.with_repetitions(best), true)) best = n;
  }
  auto f = [&](double n) {
    const double c = 0.105 * n, e = 0.35;
    return std::log(c * c * e * e) - 2 * 1.4e-4 * n - std::log(0.25 * c * c * e * e + c * (1 - e / 2));
  };
  double lo = 10, hi = 4000;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid + 1e-6) - f(mid - 1e-6) > 0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(best, lo, 1.0);
}

TEST(Snr, OnBinSignalPowerMatchesComposition) {
  const auto seq = CpmgSequence::from_duration(16, 6.654e-6);
  ReadoutModel model = ReadoutModel{}.with_repetitions(260);
  model.depolarization_rate = 1.4e-4;
  const std::size_t n = 100000;
  const double fs = 1.0 / 1.31524e-3;
  const double f = on_bin(fs, n, 1578, 12345);
  const auto sched = SamplingSchedule::with_period(seq, model, 1.31524e-3, n);
  const AcSignal tone = single_tone(omega_for_phase(0.2, seq), f);
  const double phi = tracked_phase_amplitude({tone}, seq, f);
  const double c = model.gain(), e = model.contrast;
  const double expected = n * n * c * c * e * e * phi * phi / 16 * signal_power_factor(model);
  double mean = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const auto s = power_spectrum(run_sampling(tone, seq, model, sched, 300 + r));
    mean += s.power[12345] / reps;
  }
  // Peak fluctuation ~ sqrt(2 * S * N sigma^2) per record, plus the Bessel correction at phi = 0.2.
  const double se = std::sqrt(2 * expected * n * noise_variance(model) / reps);
  EXPECT_NEAR(mean, expected, 4 * se + 0.03 * expected);
}

TEST(Snr, SweepPointAt260WithinTwentyPercent) {
  const auto seq = CpmgSequence::from_duration(16, 6.654e-6);
  ReadoutModel model = ReadoutModel{}.with_repetitions(260);
  model.depolarization_rate = 1.4e-4;
  const std::size_t n = 385263;
  const double fs = 1.0 / 1.31524e-3;
  const double f = on_bin(fs, n, 1578, 110956);
  const AcSignal tone = single_tone(omega_for_phase(0.149, seq), f);
  const double phi = tracked_phase_amplitude({tone}, seq, f);
  const double predicted = predicted_snr(phi, n, model, true);
  EXPECT_NEAR(predicted, 1.0e3, 50.0);
  const auto s = power_spectrum(run_sampling(tone, seq, model, SamplingSchedule::with_period(seq, model, 1.31524e-3, n), 5));
  const std::size_t peak = undersampled_bin(f, fs, n);
  EXPECT_EQ(peak, 110956u);
  const std::size_t sig[] = {peak};
  const auto report = measure_snr(s, peak, default_noise_band(s, sig));
  EXPECT_NEAR(report.measured, predicted, 0.2 * predicted);
}

TEST(Lorentzian, ExactDataRecovered) {
  const LorentzianParams truth{3.2, 0.05, 7.0, 0.4};
  std::vector<double> f, v;
  for (int i = 0; i < 61; ++i) {
    f.push_back(3.0 + 0.4 * i / 60.0);
    v.push_back(lorentzian(f.back(), truth));
  }
  const auto fit = fit_lorentzian(f, v);
  EXPECT_NEAR(fit.params.center_hz, truth.center_hz, 1e-9 * truth.center_hz);
  EXPECT_NEAR(fit.params.width_hz, truth.width_hz, 1e-9 * truth.width_hz);
  EXPECT_NEAR(fit.params.amplitude, truth.amplitude, 1e-9 * truth.amplitude);
  EXPECT_NEAR(fit.params.offset, truth.offset, 1e-8);
  EXPECT_LT(fit.sigma_center_hz, 1e-9);
  EXPECT_TRUE(fit.converged);
}

TEST(Lorentzian, RejectsDegenerateInput) {
  std::vector<double> f{1, 2, 3, 4, 5, 6}, v(6, 2.0);
  EXPECT_THROW(fit_lorentzian(f, v), NumericalError);
  std::vector<double> f4{1, 2, 3, 4}, v4{1, 2, 1, 0};
  EXPECT_THROW(fit_lorentzian(f4, v4), ConfigError);
}

TEST(Lorentzian, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int i = 0; i < 100; ++i) {
    const LorentzianParams p{u(rng), 0.1 * u(rng), u(rng), 0.1 * u(rng)};
    const double f = p.center_hz + (u(rng) - 1.25) * p.width_hz * 4;
    const Eigen::Vector4d g = lorentzian_gradient(f, p);
    for (int k = 0; k < 4; ++k) {
      LorentzianParams a = p, b = p;
      double* pa[] = {&a.center_hz, &a.width_hz, &a.amplitude, &a.offset};
      double* pb[] = {&b.center_hz, &b.width_hz, &b.amplitude, &b.offset};
      const double h = 1e-6 * std::max(1e-3, std::fabs(*pa[k]));
      *pa[k] += h;
      *pb[k] -= h;
      const double fd = (lorentzian(f, a) - lorentzian(f, b)) / (2 * h);
      EXPECT_NEAR(g[k], fd, 1e-6 * (std::fabs(fd) + 1e-3)) << "param " << k;
    }
  }
}

// The covariance-based centre uncertainty agrees with the spread of fits over
// independent noise realisations.
TEST(Lorentzian, CovarianceMatchesResampledSpread) {
  const LorentzianParams truth{10.0, 0.2, 5.0, 1.0};
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.25);
  std::vector<double> f;
  for (int i = 0; i < 81; ++i) f.push_back(9.0 + 2.0 * i / 80.0);
  std::vector<double> centers, sigmas;
  for (int r = 0; r < 300; ++r) {
    std::vector<double> v;
    for (double x : f) v.push_back(lorentzian(x, truth) + noise(rng));
    const auto fit = fit_lorentzian(f, v);
    centers.push_back(fit.params.center_hz);
    sigmas.push_back(fit.sigma_center_hz);
  }
  double m = 0, s2 = 0, ms = 0;
  for (double c : centers) m += c / centers.size();
  for (double c : centers) s2 += (c - m) * (c - m) / (centers.size() - 1);
  for (double s : sigmas) ms += s / sigmas.size();
  const double ratio = ms / std::sqrt(s2);
  EXPECT_GT(ratio, 1 / 1.5);
  EXPECT_LT(ratio, 1.5);
}

TEST(Lorentzian, WindowAroundClipsToSpectrum) {
  PowerSpectrum s{std::vector<double>(11, 0.0), 1.0, 20.0, 20, 1};
  const auto w = window_around(s, 1.0, 5.0);
  EXPECT_EQ(w.begin, 1u);
  EXPECT_EQ(w.end, 7u);
  const auto e = window_around(s, 10.0, 2.0);
  EXPECT_EQ(e.end, 10u);
}
