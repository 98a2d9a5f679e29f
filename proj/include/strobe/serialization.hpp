#pragma once

// JSON mapping of the model types. Every physical quantity carries its unit
// in the key name. Parsers report failures with the full field path.

#include <initializer_list>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "strobe/error.hpp"
#include "strobe/lockin.hpp"
#include "strobe/readout.hpp"
#include "strobe/signal.hpp"

namespace strobe {

using Json = nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

inline void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void reject_unknown(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) throw ConfigError(join_path(path, it.key()) + ": unknown field");
  }
}

inline double get_number(const Json& j, const std::string& key, const std::string& path) {
  const std::string p = join_path(path, key);
  if (!j.contains(key)) throw ConfigError(p + ": required field missing");
  if (!j.at(key).is_number()) throw ConfigError(p + ": expected a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ConfigError(p + ": must be finite");
  return v;
}

inline double get_number_or(const Json& j, const std::string& key, const std::string& path, double fallback) {
  return j.contains(key) ? get_number(j, key, path) : fallback;
}

inline long long get_integer(const Json& j, const std::string& key, const std::string& path) {
  const std::string p = join_path(path, key);
  if (!j.contains(key)) throw ConfigError(p + ": required field missing");
  if (!j.at(key).is_number_integer()) throw ConfigError(p + ": expected an integer");
  return j.at(key).get<long long>();
}

inline long long get_integer_or(const Json& j, const std::string& key, const std::string& path, long long fallback) {
  return j.contains(key) ? get_integer(j, key, path) : fallback;
}

inline std::uint64_t get_seed(const Json& j, const std::string& key, const std::string& path) {
  const std::string p = join_path(path, key);
  if (!j.contains(key)) throw ConfigError(p + ": required field missing");
  const Json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError(p + ": expected a non-negative integer");
}

inline std::string get_string_or(const Json& j, const std::string& key, const std::string& path,
                                 const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(join_path(path, key) + ": expected a string");
  return j.at(key).get<std::string>();
}

// Re-throws validation failures of a constructed object with the path prefixed.
template <class F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

}  // namespace detail

// ---- CPMG -----------------------------------------------------------------

inline Json to_json(const CpmgSequence& s) {
  return Json{{"pulses", s.pulse_count},
              {"tau_s", s.tau_s},
              {"harmonic", s.harmonic},
              {"timing", s.timing == PulseTiming::kCentered ? "centered" : "aligned"}};
}

// Exactly one of tau_s, duration_s (t_a) or lockin_frequency_hz fixes the spacing.
inline CpmgSequence parse_cpmg(const Json& j, const std::string& path) {
  detail::reject_unknown(j, path, {"pulses", "tau_s", "duration_s", "lockin_frequency_hz", "harmonic", "timing"});
  CpmgSequence s;
  s.pulse_count = static_cast<int>(detail::get_integer(j, "pulses", path));
  s.harmonic = static_cast<int>(detail::get_integer_or(j, "harmonic", path, 1));
  const std::string timing = detail::get_string_or(j, "timing", path, "centered");
  if (timing == "centered") s.timing = PulseTiming::kCentered;
  else if (timing == "aligned") s.timing = PulseTiming::kAligned;
  else throw ConfigError(detail::join_path(path, "timing") + ": expected \"centered\" or \"aligned\"");
  const int given = static_cast<int>(j.contains("tau_s")) + static_cast<int>(j.contains("duration_s")) +
                    static_cast<int>(j.contains("lockin_frequency_hz"));
  if (given != 1) throw ConfigError(path + ": give exactly one of tau_s, duration_s, lockin_frequency_hz");
  if (j.contains("tau_s")) s.tau_s = detail::get_number(j, "tau_s", path);
  if (j.contains("duration_s")) {
    if (s.pulse_count <= 0) throw ConfigError(detail::join_path(path, "pulses") + ": must be > 0");
    s.tau_s = detail::get_number(j, "duration_s", path) / s.pulse_count;
  }
  if (j.contains("lockin_frequency_hz")) {
    const double f = detail::get_number(j, "lockin_frequency_hz", path);
    if (f <= 0.0) throw ConfigError(detail::join_path(path, "lockin_frequency_hz") + ": must be > 0");
    s.tau_s = s.harmonic / (2.0 * f);
  }
  detail::with_path(path, [&] { s.validate(); return 0; });
  return s;
}

// ---- readout --------------------------------------------------------------

inline Json to_json(const ReadoutModel& m) {
  return Json{{"repetitions", m.qnd_repetitions},
              {"gain_slope_photons", m.gain_slope},
              {"contrast", m.contrast},
              {"depolarization_rate_per_readout", m.depolarization_rate},
              {"unit_time_s", m.readout_unit_time_s}};
}

inline ReadoutModel parse_readout(const Json& j, const std::string& path) {
  detail::reject_unknown(j, path, {"repetitions", "gain_slope_photons", "contrast",
                                   "depolarization_rate_per_readout", "unit_time_s"});
  ReadoutModel m;
  m.qnd_repetitions = static_cast<int>(detail::get_integer(j, "repetitions", path));
  m.gain_slope = detail::get_number_or(j, "gain_slope_photons", path, m.gain_slope);
  m.contrast = detail::get_number_or(j, "contrast", path, m.contrast);
  m.depolarization_rate = detail::get_number_or(j, "depolarization_rate_per_readout", path, 0.0);
  m.readout_unit_time_s = detail::get_number_or(j, "unit_time_s", path, m.readout_unit_time_s);
  detail::with_path(path, [&] { m.validate(); return 0; });
  return m;
}

// ---- signal ---------------------------------------------------------------

inline Json to_json(const AcSignal& s) {
  Json tones = Json::array();
  for (const auto& t : s.tones) {
    tones.push_back({{"amplitude_rad_per_s", t.amplitude_omega}, {"frequency_hz", t.frequency_hz}, {"phase_rad", t.phase_rad}});
  }
  Json out{{"tones", tones}};
  if (s.am) out["am"] = {{"frequency_hz", s.am->frequency_hz}, {"depth", s.am->depth}};
  if (s.fm) {
    out["fm"] = {{"linewidth_hz", s.fm->linewidth_hz},
                 {"rng_seed", s.fm->rng_seed},
                 {"correlation_time_s", s.fm->effective_correlation_time()}};
    if (s.fm->linewidth_hz == 0.0) out["fm"]["correlation_time_s"] = s.fm->correlation_time_s;
  }
  return out;
}

// Tone amplitudes may be given as rad/s, as a field in tesla, or as the
// resonant phase amplitude in rad (needs the CPMG sequence).
inline Tone parse_tone(const Json& j, const std::string& path, const CpmgSequence* seq) {
  detail::reject_unknown(j, path, {"amplitude_rad_per_s", "amplitude_tesla", "phase_amplitude_rad", "frequency_hz", "phase_rad"});
  const int given = static_cast<int>(j.contains("amplitude_rad_per_s")) + static_cast<int>(j.contains("amplitude_tesla")) +
                    static_cast<int>(j.contains("phase_amplitude_rad"));
  if (given != 1) {
    throw ConfigError(path + ": give exactly one of amplitude_rad_per_s, amplitude_tesla, phase_amplitude_rad");
  }
  double omega = 0.0;
  if (j.contains("amplitude_rad_per_s")) omega = detail::get_number(j, "amplitude_rad_per_s", path);
  if (j.contains("amplitude_tesla")) omega = field_to_omega(detail::get_number(j, "amplitude_tesla", path));
  if (j.contains("phase_amplitude_rad")) {
    if (seq == nullptr) throw ConfigError(detail::join_path(path, "phase_amplitude_rad") + ": needs a cpmg section");
    omega = omega_for_phase(detail::get_number(j, "phase_amplitude_rad", path), *seq);
  }
  const double f = detail::get_number(j, "frequency_hz", path);
  const double phase = detail::get_number_or(j, "phase_rad", path, 0.0);
  return detail::with_path(path, [&] { return Tone::make(omega, f, phase); });
}

// `fallback_seed` seeds FM noise when the config does not pin rng_seed.
inline AcSignal parse_signal(const Json& j, const std::string& path, const CpmgSequence* seq,
                             std::uint64_t fallback_seed) {
  detail::reject_unknown(j, path, {"tones", "am", "fm"});
  AcSignal s;
  const std::string tp = detail::join_path(path, "tones");
  if (!j.contains("tones") || !j.at("tones").is_array()) throw ConfigError(tp + ": expected an array of tones");
  for (std::size_t i = 0; i < j.at("tones").size(); ++i) {
    s.tones.push_back(parse_tone(j.at("tones")[i], detail::index_path(tp, i), seq));
  }
  if (j.contains("am")) {
    const std::string ap = detail::join_path(path, "am");
    detail::reject_unknown(j.at("am"), ap, {"frequency_hz", "depth"});
    s.am = AmplitudeModulation{detail::get_number(j.at("am"), "frequency_hz", ap),
                               detail::get_number(j.at("am"), "depth", ap)};
  }
  if (j.contains("fm")) {
    const std::string fp = detail::join_path(path, "fm");
    const Json& f = j.at("fm");
    detail::reject_unknown(f, fp, {"linewidth_hz", "rng_seed", "correlation_time_s"});
    FrequencyNoise fm;
    fm.linewidth_hz = detail::get_number(f, "linewidth_hz", fp);
    fm.rng_seed = f.contains("rng_seed") ? detail::get_seed(f, "rng_seed", fp) : fallback_seed;
    fm.correlation_time_s = detail::get_number_or(f, "correlation_time_s", fp, 0.0);
    s.fm = fm;
  }
  detail::with_path(path, [&] { s.validate(); return 0; });
  return s;
}

}  // namespace strobe
