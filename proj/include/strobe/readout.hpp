#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "strobe/error.hpp"
#include "strobe/random.hpp"

namespace strobe {

struct ReadoutModel {
  int qnd_repetitions = 1;                 // n
  double gain_slope = 0.105;               // photons per repetition
  double contrast = 0.35;                  // epsilon
  double depolarization_rate = 0.0;        // Gamma, per repetition
  double readout_unit_time_s = 2.32e-6;    // duration of one repetition

  double gain() const { return qnd_repetitions * gain_slope; }  // C(n)
  double readout_time() const { return qnd_repetitions * readout_unit_time_s; }

  void validate() const {
    detail::require(qnd_repetitions > 0, "readout: qnd_repetitions must be > 0");
    detail::require(gain_slope > 0.0 && std::isfinite(gain_slope), "readout: gain_slope must be > 0");
    detail::require(contrast > 0.0 && contrast < 1.0, "readout: contrast must lie in (0, 1)");
    detail::require(depolarization_rate >= 0.0 && std::isfinite(depolarization_rate),
                    "readout: depolarization_rate must be >= 0");
    detail::require(readout_unit_time_s >= 0.0, "readout: unit time must be >= 0");
  }

  ReadoutModel with_repetitions(int n) const {
    ReadoutModel m = *this;
    m.qnd_repetitions = n;
    return m;
  }
};

inline double depolarization_survival(const ReadoutModel& model) {
  return std::exp(-model.depolarization_rate * model.qnd_repetitions);
}

// Attenuation of signal power by memory depolarization, e^{-2 Gamma n}.
inline double signal_power_factor(const ReadoutModel& model) {
  const double s = depolarization_survival(model);
  return s * s;
}

// Probability that the readout reports the flipped state once depolarization
// is mixed in: with probability 1 - e^{-Gamma n} the stored state is lost and
// the block reports the unbiased p = 1/2 distribution.
inline double effective_probability(double p, const ReadoutModel& model) {
  const double s = depolarization_survival(model);
  return s * p + (1.0 - s) * 0.5;
}

inline double expected_counts(double p, const ReadoutModel& model) {
  return model.gain() * (1.0 - model.contrast * effective_probability(p, model));
}

// Law of total variance over the Bernoulli state b and Poisson shot noise.
inline double count_variance(double p, const ReadoutModel& model) {
  const double q = effective_probability(p, model);
  const double c = model.gain();
  const double ce = c * model.contrast;
  return c * (1.0 - model.contrast * q) + ce * ce * q * (1.0 - q);
}

// sigma_y^2 at the p = 1/2 bias point: projection noise plus shot noise.
inline double noise_variance(const ReadoutModel& model) {
  const double c = model.gain();
  const double ce = c * model.contrast;
  return 0.25 * ce * ce + c * (1.0 - 0.5 * model.contrast);
}

// Gain at which projection and shot noise are equal.
inline double threshold_gain(double contrast) {
  detail::require(contrast > 0.0 && contrast < 1.0, "threshold_gain: contrast must lie in (0, 1)");
  return 4.0 / (contrast * contrast) - 2.0 / contrast;
}

// Draws aggregated photon counts for one readout model. The two Poisson
// distributions (dark and bright state) are built once; one sampler is used
// per RNG stream.
class CountSampler {
 public:
  explicit CountSampler(const ReadoutModel& model)
      : model_(model),
        bright_(model.gain()),
        dark_(model.gain() * (1.0 - model.contrast)) {
    model.validate();
  }

  // Mixing depolarization into p first and drawing b ~ Bernoulli(p_eff) gives
  // the same distribution as drawing "memory survived?" and then b.
  std::int64_t operator()(double p, Rng& rng) {
    detail::require(p >= 0.0 && p <= 1.0, "sample_counts: p must lie in [0, 1]");
    const double q = effective_probability(p, model_);
    const bool flipped = uniform_(rng) < q;
    return flipped ? dark_(rng) : bright_(rng);
  }

 private:
  ReadoutModel model_;
  std::poisson_distribution<std::int64_t> bright_;
  std::poisson_distribution<std::int64_t> dark_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// One aggregated count for a block whose qubit flip probability is p. The n
// repetitions are drawn as a single Poisson variate (Poisson additivity).
inline std::int64_t sample_counts(double p, const ReadoutModel& model, Rng& rng) {
  CountSampler sampler(model);
  return sampler(p, rng);
}

}  // namespace strobe
