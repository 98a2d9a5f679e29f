#pragma once

// Experiment configuration files (JSON). Field names carry their units; the
// schema is documented in README.md. Everything is validated up front and
// failures name the offending field path.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "strobe/csrecon.hpp"
#include "strobe/experiments.hpp"
#include "strobe/io.hpp"
#include "strobe/sampler.hpp"
#include "strobe/scaling.hpp"
#include "strobe/serialization.hpp"

namespace strobe {

struct ScheduleSpec {
  double period_s = 0.0;
  std::size_t samples = 0;
  double start_time_s = 0.0;
  double jitter_s = 0.0;
  SimulationOptions simulation;

  SamplingSchedule schedule(const CpmgSequence& seq, const ReadoutModel& model) const {
    auto s = SamplingSchedule::with_period(seq, model, period_s, samples);
    s.start_time_s = start_time_s;
    s.jitter_s = jitter_s;
    return s;
  }
};

struct RecordsSpec {
  std::vector<double> rates_hz;
  double duration_s = 0.0;    // per record, T_i ~ T
  std::size_t averages = 1;   // consecutive records per rate whose spectra are averaged
};

struct WidebandSpec {
  WidebandGrid grid;
  std::vector<std::pair<double, double>> support_hz;
  double floor_sigmas = -1.0;
  double peak_threshold = 0.05;  // relative, for the reported peak list
};

struct FitSpec {
  std::vector<double> lines_hz;  // true frequencies of the lines to fit
  double reference_hz = 0.0;     // detunings are reported against this line
  double window_halfwidth_hz = 0.0;
  std::size_t padding = 1;
};

using SnrSweepSpec = SnrSweepSettings;

struct ScalingSpec {
  std::vector<double> durations_s;
  int repetitions = 8;
  double target_frequency_hz = 0.0;
  double linewidth_hz = 0.0;
  double window_bins = 0.0;
  double window_hz = 0.0;
  std::size_t padding = 1;
  double resolved_product = 5.0;
  double unresolved_product = 0.2;
};

struct ExperimentConfig {
  Json document;  // effective configuration (after overrides); hashed into every output
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  std::optional<CpmgSequence> cpmg;
  std::optional<ReadoutModel> readout;
  SignalSet signals;
  std::optional<ScheduleSpec> schedule;
  std::optional<RecordsSpec> records;
  std::optional<WidebandSpec> wideband;
  std::optional<FitSpec> fit;
  std::optional<SnrSweepSpec> snr_sweep;
  std::optional<ScalingSpec> scaling;
  std::optional<RateDesignOptions> rate_design;
  std::size_t spectrum_padding = 1;
  std::optional<double> spectrum_reference_hz;

  std::string hash() const { return fnv1a_hex(document.dump()); }
  OutputStamp stamp() const { return OutputStamp{hash()}; }
};

namespace detail {

inline std::vector<double> get_number_list(const Json& j, const std::string& key, const std::string& path) {
  const std::string p = join_path(path, key);
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).empty()) throw ConfigError(p + ": expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.at(key).size(); ++i) {
    const Json& v = j.at(key)[i];
    if (!v.is_number()) throw ConfigError(index_path(p, i) + ": expected a number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline ScheduleSpec parse_schedule(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"period_s", "samples", "duration_s", "start_time_s", "jitter_s", "phase_model", "block_size"});
  ScheduleSpec s;
  s.period_s = get_number(j, "period_s", path);
  if (s.period_s <= 0.0) throw ConfigError(join_path(path, "period_s") + ": must be > 0");
  const bool by_count = j.contains("samples");
  if (by_count == j.contains("duration_s")) throw ConfigError(path + ": give exactly one of samples, duration_s");
  if (by_count) {
    const long long n = get_integer(j, "samples", path);
    if (n < 1) throw ConfigError(join_path(path, "samples") + ": must be >= 1");
    s.samples = static_cast<std::size_t>(n);
  } else {
    const double d = get_number(j, "duration_s", path);
    if (d < 2.0 * s.period_s) throw ConfigError(join_path(path, "duration_s") + ": shorter than two sampling periods");
    s.samples = static_cast<std::size_t>(std::llround(d / s.period_s));
  }
  s.start_time_s = get_number_or(j, "start_time_s", path, 0.0);
  s.jitter_s = get_number_or(j, "jitter_s", path, 0.0);
  if (s.start_time_s < 0.0 || s.jitter_s < 0.0) throw ConfigError(path + ": start_time_s and jitter_s must be >= 0");
  const std::string model = get_string_or(j, "phase_model", path, "filter");
  if (model == "filter") s.simulation.phase_model = PhaseModel::kFilter;
  else if (model == "instantaneous") s.simulation.phase_model = PhaseModel::kInstantaneous;
  else throw ConfigError(join_path(path, "phase_model") + ": expected \"filter\" or \"instantaneous\"");
  const long long bs = get_integer_or(j, "block_size", path, 4096);
  if (bs < 1) throw ConfigError(join_path(path, "block_size") + ": must be >= 1");
  s.simulation.block_size = static_cast<std::size_t>(bs);
  return s;
}

inline RecordsSpec parse_records(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"rates_hz", "duration_s", "averages"});
  RecordsSpec r;
  r.rates_hz = get_number_list(j, "rates_hz", path);
  for (std::size_t i = 0; i < r.rates_hz.size(); ++i) {
    if (r.rates_hz[i] <= 0.0) throw ConfigError(index_path(join_path(path, "rates_hz"), i) + ": must be > 0");
  }
  r.duration_s = get_number(j, "duration_s", path);
  if (r.duration_s <= 0.0) throw ConfigError(join_path(path, "duration_s") + ": must be > 0");
  const long long a = get_integer_or(j, "averages", path, 1);
  if (a < 1) throw ConfigError(join_path(path, "averages") + ": must be >= 1");
  r.averages = static_cast<std::size_t>(a);
  return r;
}

inline WidebandSpec parse_wideband(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"duration_s", "max_frequency_hz", "support_hz", "floor_sigmas", "peak_threshold"});
  WidebandSpec w;
  w.grid = with_path(path, [&] {
    return WidebandGrid::covering(get_number(j, "duration_s", path), get_number(j, "max_frequency_hz", path));
  });
  const std::string sp = join_path(path, "support_hz");
  if (!j.contains("support_hz") || !j.at("support_hz").is_array() || j.at("support_hz").empty()) {
    throw ConfigError(sp + ": expected a non-empty array of [low_hz, high_hz] pairs");
  }
  for (std::size_t i = 0; i < j.at("support_hz").size(); ++i) {
    const Json& b = j.at("support_hz")[i];
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
      throw ConfigError(index_path(sp, i) + ": expected [low_hz, high_hz]");
    }
    w.support_hz.emplace_back(b[0].get<double>(), b[1].get<double>());
  }
  w.floor_sigmas = get_number_or(j, "floor_sigmas", path, -1.0);
  w.peak_threshold = get_number_or(j, "peak_threshold", path, 0.05);
  return w;
}

inline FitSpec parse_fit(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"lines_hz", "reference_hz", "window_halfwidth_hz", "padding"});
  FitSpec f;
  f.lines_hz = get_number_list(j, "lines_hz", path);
  f.reference_hz = get_number_or(j, "reference_hz", path, f.lines_hz.front());
  f.window_halfwidth_hz = get_number(j, "window_halfwidth_hz", path);
  if (f.window_halfwidth_hz <= 0.0) throw ConfigError(join_path(path, "window_halfwidth_hz") + ": must be > 0");
  f.padding = static_cast<std::size_t>(std::max<long long>(1, get_integer_or(j, "padding", path, 1)));
  return f;
}

inline SnrSweepSpec parse_snr_sweep(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"repetitions", "samples", "periods", "signal_hz", "guard_bins", "seeds", "snr_form"});
  SnrSweepSpec s;
  for (double v : get_number_list(j, "repetitions", path)) {
    if (v < 1 || v != std::floor(v)) throw ConfigError(join_path(path, "repetitions") + ": entries must be positive integers");
    s.repetitions.push_back(static_cast<int>(v));
  }
  const long long n = get_integer(j, "samples", path);
  if (n < 16) throw ConfigError(join_path(path, "samples") + ": must be >= 16");
  s.samples = static_cast<std::size_t>(n);
  const std::string pp = join_path(path, "periods");
  if (!j.contains("periods") || !j.at("periods").is_array() || j.at("periods").empty()) {
    throw ConfigError(pp + ": expected an array of {max_repetitions, period_s}");
  }
  for (std::size_t i = 0; i < j.at("periods").size(); ++i) {
    const Json& e = j.at("periods")[i];
    const std::string ep = index_path(pp, i);
    reject_unknown(e, ep, {"max_repetitions", "period_s"});
    s.periods.emplace_back(static_cast<int>(get_integer(e, "max_repetitions", ep)), get_number(e, "period_s", ep));
  }
  s.signal_hz = get_number(j, "signal_hz", path);
  s.guard_bins = static_cast<std::size_t>(std::max<long long>(1, get_integer_or(j, "guard_bins", path, 10)));
  s.seeds = static_cast<std::size_t>(std::max<long long>(1, get_integer_or(j, "seeds", path, 1)));
  const std::string form = get_string_or(j, "snr_form", path, "large_snr");
  if (form == "large_snr") s.form = SnrForm::kLargeSnr;
  else if (form == "exact") s.form = SnrForm::kExact;
  else throw ConfigError(join_path(path, "snr_form") + ": expected \"large_snr\" or \"exact\"");
  std::sort(s.periods.begin(), s.periods.end());
  return s;
}

inline ScalingSpec parse_scaling(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"durations_s", "repetitions", "target_frequency_hz", "linewidth_hz", "window_bins", "window_hz",
                           "padding", "resolved_product", "unresolved_product"});
  ScalingSpec s;
  s.durations_s = get_number_list(j, "durations_s", path);
  s.repetitions = static_cast<int>(get_integer_or(j, "repetitions", path, 8));
  s.target_frequency_hz = get_number(j, "target_frequency_hz", path);
  s.linewidth_hz = get_number_or(j, "linewidth_hz", path, 0.0);
  s.window_bins = get_number_or(j, "window_bins", path, 0.0);
  s.window_hz = get_number_or(j, "window_hz", path, 0.0);
  if (s.window_bins <= 0.0 && s.window_hz <= 0.0) throw ConfigError(path + ": set window_bins or window_hz");
  s.padding = static_cast<std::size_t>(std::max<long long>(1, get_integer_or(j, "padding", path, 1)));
  s.resolved_product = get_number_or(j, "resolved_product", path, 5.0);
  s.unresolved_product = get_number_or(j, "unresolved_product", path, 0.2);
  return s;
}

inline RateDesignOptions parse_rate_design(const Json& j, const std::string& path) {
  reject_unknown(j, path, {"base_period_s", "max_extra_delay_s", "records", "candidates"});
  RateDesignOptions o;
  o.base_period_s = get_number(j, "base_period_s", path);
  o.max_extra_delay_s = get_number(j, "max_extra_delay_s", path);
  o.records = static_cast<std::size_t>(std::max<long long>(1, get_integer(j, "records", path)));
  o.candidates = static_cast<std::size_t>(std::max<long long>(1, get_integer_or(j, "candidates", path, 1)));
  return o;
}

}  // namespace detail

inline ExperimentConfig parse_config(Json document, std::optional<std::uint64_t> seed_override = std::nullopt) {
  using namespace detail;
  expect_object(document, "(config)");
  reject_unknown(document, "", {"seed", "output_dir", "cpmg", "readout", "signals", "schedule", "records", "wideband", "analysis", "description"});
  if (seed_override) document["seed"] = *seed_override;
  ExperimentConfig c;
  c.seed = get_seed(document, "seed", "");
  c.output_dir = get_string_or(document, "output_dir", "", ".");
  if (document.contains("cpmg")) c.cpmg = parse_cpmg(document.at("cpmg"), "cpmg");
  if (document.contains("readout")) c.readout = parse_readout(document.at("readout"), "readout");
  if (document.contains("signals")) {
    const Json& s = document.at("signals");
    if (!s.is_array() || s.empty()) throw ConfigError("signals: expected a non-empty array of signal objects");
    for (std::size_t i = 0; i < s.size(); ++i) {
      c.signals.push_back(parse_signal(s[i], index_path("signals", i), c.cpmg ? &*c.cpmg : nullptr,
                                       splitmix64(c.seed + 0x51ULL * (i + 1))));
    }
  }
  if (document.contains("schedule")) c.schedule = parse_schedule(document.at("schedule"), "schedule");
  if (document.contains("records")) c.records = parse_records(document.at("records"), "records");
  if (document.contains("wideband")) c.wideband = parse_wideband(document.at("wideband"), "wideband");
  if (document.contains("analysis")) {
    const Json& a = document.at("analysis");
    reject_unknown(a, "analysis", {"spectrum", "fit", "snr_sweep", "scaling", "rate_design"});
    if (a.contains("spectrum")) {
      const Json& s = a.at("spectrum");
      reject_unknown(s, "analysis.spectrum", {"padding", "reference_hz"});
      c.spectrum_padding = static_cast<std::size_t>(std::max<long long>(1, get_integer_or(s, "padding", "analysis.spectrum", 1)));
      if (s.contains("reference_hz")) c.spectrum_reference_hz = get_number(s, "reference_hz", "analysis.spectrum");
    }
    if (a.contains("fit")) c.fit = parse_fit(a.at("fit"), "analysis.fit");
    if (a.contains("snr_sweep")) c.snr_sweep = parse_snr_sweep(a.at("snr_sweep"), "analysis.snr_sweep");
    if (a.contains("scaling")) c.scaling = parse_scaling(a.at("scaling"), "analysis.scaling");
    if (a.contains("rate_design")) c.rate_design = parse_rate_design(a.at("rate_design"), "analysis.rate_design");
  }
  c.document = std::move(document);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  const std::string text = read_text(path);
  Json doc = Json::parse(text, nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return parse_config(std::move(doc), seed_override);
}

// Sections a simulation needs; names the first missing one.
inline void require_sections(const ExperimentConfig& c, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    const std::string s = n;
    const bool present = (s == "cpmg" && c.cpmg) || (s == "readout" && c.readout) || (s == "signals" && !c.signals.empty()) ||
                         (s == "schedule" && c.schedule) || (s == "records" && c.records) || (s == "wideband" && c.wideband) ||
                         (s == "analysis.fit" && c.fit) || (s == "analysis.snr_sweep" && c.snr_sweep) ||
                         (s == "analysis.scaling" && c.scaling) || (s == "analysis.rate_design" && c.rate_design);
    if (!present) throw ConfigError(s + ": required section missing for this command");
  }
}

}  // namespace strobe
