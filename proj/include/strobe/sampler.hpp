#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "strobe/error.hpp"
#include "strobe/lockin.hpp"
#include "strobe/random.hpp"
#include "strobe/readout.hpp"
#include "strobe/serialization.hpp"
#include "strobe/signal.hpp"

namespace strobe {

// Several independent sources add up in x(t); the accumulated phase is linear in x.
using SignalSet = std::vector<AcSignal>;

enum class PhaseModel {
  kFilter,         // full lock-in filter response of each line (default)
  kInstantaneous,  // phi_k = (-1)^q 2 t_a/(m pi) x(t_k): the ideal narrow-band limit
};

struct SamplingSchedule {
  double acquisition_s = 0.0;  // t_a
  double readout_s = 0.0;      // t_r
  double delay_s = 0.0;        // t_d
  std::size_t num_samples = 0;
  double start_time_s = 0.0;
  double jitter_s = 0.0;  // std of an independent Gaussian offset on every t_k

  double period() const { return acquisition_s + readout_s + delay_s; }
  double rate() const { return 1.0 / period(); }
  double span() const { return start_time_s + static_cast<double>(num_samples) * period(); }

  static SamplingSchedule make(const CpmgSequence& seq, const ReadoutModel& model, double delay_s, std::size_t n) {
    SamplingSchedule s{seq.duration(), model.readout_time(), delay_s, n};
    s.validate();
    return s;
  }

  // Delay chosen to hit a requested period; fails if t_a + t_r already exceeds it.
  static SamplingSchedule with_period(const CpmgSequence& seq, const ReadoutModel& model, double period_s,
                                      std::size_t n) {
    const double busy = seq.duration() + model.readout_time();
    if (period_s < busy * (1.0 - 1e-12)) {
      throw ConfigError("sampling period " + std::to_string(period_s) + " s is shorter than t_a + t_r = " +
                        std::to_string(busy) + " s");
    }
    return make(seq, model, std::max(0.0, period_s - busy), n);
  }

  void validate() const {
    detail::require(acquisition_s > 0.0 && readout_s >= 0.0 && delay_s >= 0.0,
                    "schedule: t_a must be > 0 and t_r, t_d >= 0");
    detail::require(num_samples >= 1, "schedule: need at least one sample");
    detail::require(start_time_s >= 0.0 && jitter_s >= 0.0, "schedule: start time and jitter must be >= 0");
  }
};

struct SimulationOptions {
  PhaseModel phase_model = PhaseModel::kFilter;
  std::size_t block_size = 4096;  // samples per RNG stream; part of the reproducibility contract
  unsigned threads = 1;           // 0 = hardware concurrency
};

struct TimeTrace {
  std::vector<std::int64_t> counts;
  double period_s = 0.0;
  double start_time_s = 0.0;
  Json metadata = Json::object();

  std::size_t size() const { return counts.size(); }
  double rate() const { return 1.0 / period_s; }
  double time_at(std::size_t k) const { return start_time_s + static_cast<double>(k) * period_s; }
  double duration() const { return static_cast<double>(counts.size()) * period_s; }
  std::vector<double> values() const { return {counts.begin(), counts.end()}; }
};

inline Json to_json(const SamplingSchedule& s) {
  return Json{{"acquisition_s", s.acquisition_s}, {"readout_s", s.readout_s}, {"delay_s", s.delay_s},
              {"period_s", s.period()},           {"samples", s.num_samples}, {"start_time_s", s.start_time_s},
              {"jitter_s", s.jitter_s}};
}

// Folded position of f_true in [0, f_s/2].
inline double alias_frequency(double f_true, double f_s) {
  detail::require(f_s > 0.0, "alias_frequency: f_s must be > 0");
  const long double fs = f_s;
  long double r = std::fmod(static_cast<long double>(std::fabs(f_true)), fs);
  if (r > fs / 2) r = fs - r;
  return static_cast<double>(r);
}

inline std::size_t undersampled_bin(double f_true, double f_s, std::size_t n) {
  detail::require(n >= 1, "undersampled_bin: N must be >= 1");
  const double bin = std::round(alias_frequency(f_true, f_s) * static_cast<double>(n) / f_s);
  return std::min(static_cast<std::size_t>(bin), n / 2);
}

namespace detail {

inline int harmonic_sign(int m) { return ((m - 1) / 2) % 2 == 0 ? 1 : -1; }

inline void check_phase_model(PhaseModel model, const CpmgSequence& seq) {
  if (model == PhaseModel::kInstantaneous && seq.timing != PulseTiming::kCentered) {
    throw ConfigError("instantaneous phase model needs centered CPMG timing");
  }
}

// FM paths must cover the last block; missing or short paths are generated
// here from the signal's own seed, so the result stays deterministic.
inline SignalSet prepared(const SignalSet& signals, double span) {
  SignalSet out = signals;
  for (auto& s : out) {
    s.validate();
    if (s.needs_phase_noise() && (!s.phase_noise || s.phase_noise->duration() < span)) {
      s.phase_noise.reset();
      s = with_fm_noise(std::move(s), span);
    }
  }
  return out;
}

template <class Body>
void parallel_blocks(std::size_t n_blocks, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
  if (threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t b = next++; b < n_blocks; b = next++) body(b);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_blocks;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// Block start times t_k. Jitter (if any) is drawn from a dedicated stream.
inline std::vector<double> sample_times(const SamplingSchedule& sched, std::uint64_t seed) {
  sched.validate();
  std::vector<double> t(sched.num_samples);
  const double period = sched.period();
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = sched.start_time_s + static_cast<double>(k) * period;
  if (sched.jitter_s > 0.0) {
    Rng rng = stream_rng(seed, streams::kJitter);
    std::normal_distribution<double> normal(0.0, sched.jitter_s);
    for (auto& v : t) v = std::max(0.0, v + normal(rng));
  }
  return t;
}

// Per-sample phase evaluation with everything that does not depend on t
// (line list, filter envelopes, carrier offsets) worked out once.
class PhaseEvaluator {
 public:
  PhaseEvaluator(const SignalSet& signals, const CpmgSequence& seq, PhaseModel model)
      : signals_(signals), seq_(seq), model_(model) {
    seq.validate();
    detail::check_phase_model(model, seq);
    for (std::size_t i = 0; i < signals_.size(); ++i) {
      for (const Tone& line : spectral_lines(signals_[i])) {
        if (line.frequency_hz == 0.0 || line.amplitude_omega == 0.0) continue;
        const double gain = line.amplitude_omega * detail::filter_envelope(line.frequency_hz, seq);
        const double offset = cycle_phase(line.frequency_hz, 0.5 * seq.duration()) + line.phase_rad;
        lines_.push_back({i, line.frequency_hz, gain, offset});
      }
    }
    scale_ = detail::harmonic_sign(seq.harmonic) * 2.0 * seq.duration() / (seq.harmonic * kPi);
  }

  double operator()(double t) const {
    if (model_ == PhaseModel::kInstantaneous) {
      double x = 0.0;
      for (const auto& s : signals_) x += evaluate(s, t);
      return scale_ * x;
    }
    theta_.resize(signals_.size());
    const double mid = t + 0.5 * seq_.duration();
    for (std::size_t i = 0; i < signals_.size(); ++i) theta_[i] = fm_phase(signals_[i], mid);
    const bool centered = seq_.timing == PulseTiming::kCentered;
    double phi = 0.0;
    for (const auto& l : lines_) {
      const double arg = cycle_phase(l.frequency_hz, t) + l.offset + theta_[l.source];
      phi += l.gain * (centered ? std::cos(arg) : std::sin(arg));
    }
    return phi;
  }

 private:
  struct Line {
    std::size_t source;
    double frequency_hz;
    double gain;
    double offset;
  };
  SignalSet signals_;
  CpmgSequence seq_;
  PhaseModel model_;
  std::vector<Line> lines_;
  double scale_ = 0.0;
  mutable std::vector<double> theta_;  // scratch; one evaluator per thread
};

inline std::vector<double> phase_sequence(const SignalSet& signals, const CpmgSequence& seq,
                                          std::span<const double> times, PhaseModel model = PhaseModel::kFilter) {
  seq.validate();
  detail::check_phase_model(model, seq);
  const double span = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end()) + seq.duration();
  const PhaseEvaluator phase(detail::prepared(signals, span), seq, model);
  std::vector<double> phi(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) phi[k] = phase(times[k]);
  return phi;
}

// E[y_k] given the schedule; the noiseless counterpart of run_sampling.
inline std::vector<double> expected_trace(const SignalSet& signals, const CpmgSequence& seq, const ReadoutModel& model,
                                          const SamplingSchedule& sched, std::uint64_t seed = 0,
                                          PhaseModel phase_model = PhaseModel::kFilter) {
  model.validate();
  const auto times = sample_times(sched, seed);
  auto phi = phase_sequence(signals, seq, times, phase_model);
  for (auto& v : phi) v = expected_counts(transition_probability(v), model);
  return phi;
}

inline Json trace_metadata(const SignalSet& signals, const CpmgSequence& seq, const ReadoutModel& model,
                           const SamplingSchedule& sched, std::uint64_t seed, const SimulationOptions& options) {
  Json sig = Json::array();
  for (const auto& s : signals) sig.push_back(to_json(s));
  return Json{{"signals", sig},
              {"cpmg", to_json(seq)},
              {"readout", to_json(model)},
              {"schedule", to_json(sched)},
              {"seed", seed},
              {"block_size", options.block_size},
              {"phase_model", options.phase_model == PhaseModel::kFilter ? "filter" : "instantaneous"}};
}

// Simulates N blocks: phase -> transition probability -> photon count. Block b
// of `options.block_size` samples uses RNG stream (seed, b), so the result is
// independent of the thread count.
inline TimeTrace run_sampling(const SignalSet& signals, const CpmgSequence& seq, const ReadoutModel& model,
                              const SamplingSchedule& sched, std::uint64_t seed, const SimulationOptions& options = {}) {
  seq.validate();
  model.validate();
  sched.validate();
  detail::check_phase_model(options.phase_model, seq);
  detail::require(options.block_size >= 1, "run_sampling: block_size must be >= 1");
  if (std::fabs(sched.acquisition_s - seq.duration()) > 1e-12 * seq.duration()) {
    throw ConfigError("run_sampling: schedule t_a does not match the CPMG duration");
  }
  const auto times = sample_times(sched, seed);
  const double span = *std::max_element(times.begin(), times.end()) + seq.duration();
  const SignalSet ready = detail::prepared(signals, span);

  TimeTrace trace;
  trace.counts.resize(sched.num_samples);
  trace.period_s = sched.period();
  trace.start_time_s = sched.start_time_s;
  const std::size_t bs = options.block_size;
  const std::size_t n_blocks = (sched.num_samples + bs - 1) / bs;
  detail::parallel_blocks(n_blocks, options.threads, [&](std::size_t b) {
    Rng rng = stream_rng(seed, b);
    CountSampler draw(model);
    const PhaseEvaluator phase(ready, seq, options.phase_model);
    const std::size_t end = std::min(sched.num_samples, (b + 1) * bs);
    for (std::size_t k = b * bs; k < end; ++k) {
      trace.counts[k] = draw(transition_probability(phase(times[k])), rng);
    }
  });
  trace.metadata = trace_metadata(signals, seq, model, sched, seed, options);
  return trace;
}

inline TimeTrace run_sampling(const AcSignal& signal, const CpmgSequence& seq, const ReadoutModel& model,
                              const SamplingSchedule& sched, std::uint64_t seed, const SimulationOptions& options = {}) {
  return run_sampling(SignalSet{signal}, seq, model, sched, seed, options);
}

}  // namespace strobe
