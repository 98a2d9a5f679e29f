// Simulates a weak resonant tone under the default readout model and compares
// the measured spectral SNR with the closed-form prediction.

#include <cstdio>

#include "strobe/strobe.hpp"

int main() {
  using namespace strobe;
  const auto seq = CpmgSequence::from_duration(16, 6.654e-6, 1, PulseTiming::kCentered);
  const ReadoutModel readout = ReadoutModel{}.with_repetitions(260);
  const double f = 1200000.0005052167;  // on-bin for the record below
  const AcSignal tone = single_tone(omega_for_phase(0.15, seq), f);
  const auto sched = SamplingSchedule::with_period(seq, readout, 1.31524e-3, 385263);

  const TimeTrace trace = run_sampling(tone, seq, readout, sched, 7);
  const PowerSpectrum spec = power_spectrum(trace);
  const std::size_t peak = undersampled_bin(f, spec.sample_rate_hz, spec.num_samples);
  const std::size_t bins[] = {peak};
  const SnrReport snr = with_prediction(measure_snr(spec, peak, default_noise_band(spec, bins)),
                                        tracked_phase_amplitude({tone}, seq, f), static_cast<double>(spec.num_samples), readout);

  std::printf("alias frequency  %.9f Hz (bin %zu of %zu)\n", alias_frequency(f, spec.sample_rate_hz), peak, spec.size());
  std::printf("measured SNR     %.1f\n", snr.measured);
  std::printf("predicted SNR    %.1f\n", snr.predicted_ideal);
  return 0;
}
