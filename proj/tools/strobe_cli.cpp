// strobe: command-line front end. Every subcommand reads one experiment
// config and writes its results under the output directory; see README.md.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "strobe/strobe.hpp"

namespace fs = std::filesystem;
using namespace strobe;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
  std::string format = "csv";
  std::vector<std::string> traces;
};

struct Context {
  ExperimentConfig cfg;
  fs::path out_dir;
  SimulationOptions sim;
  bool json = false;
  OutputStamp stamp;
  std::vector<std::string> traces;
};

Context make_context(const CommonArgs& a) {
  Context c{load_config(a.config, a.seed), {}, {}, a.format == "json", {}, a.traces};
  c.out_dir = a.out.empty() ? fs::path(c.cfg.output_dir) : fs::path(a.out);
  fs::create_directories(c.out_dir);
  if (c.cfg.schedule) c.sim = c.cfg.schedule->simulation;
  c.sim.threads = a.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.threads;
  c.stamp = c.cfg.stamp();
  return c;
}

void emit(const Context& c, const std::string& name, const std::string& text) {
  const fs::path p = c.out_dir / name;
  write_text(p, text);
  std::cout << p.string() << '\n';
}

void emit_json(const Context& c, const std::string& name, Json j) {
  emit(c, name, j.dump(2) + "\n");
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string s;
  for (const auto& v : cells) s += (s.empty() ? "" : ",") + v;
  return s + '\n';
}

std::string num(double v) { return format_number(v); }

// Either the single trace given on the command line or a fresh simulation.
TimeTrace obtain_trace(const Context& c) {
  if (!c.traces.empty()) {
    if (c.traces.size() != 1) throw ConfigError("--trace: this command takes exactly one trace file");
    return read_trace(c.traces.front());
  }
  require_sections(c.cfg, {"cpmg", "readout", "signals", "schedule"});
  const auto sched = c.cfg.schedule->schedule(*c.cfg.cpmg, *c.cfg.readout);
  return run_sampling(c.cfg.signals, *c.cfg.cpmg, *c.cfg.readout, sched, c.cfg.seed, c.sim);
}

// +1 when a positive detuning of the true frequency moves the alias upward.
double fold_orientation(double f_true, double f_s) {
  const double r = std::fmod(f_true, f_s);
  return r <= f_s / 2 ? 1.0 : -1.0;
}

int cmd_simulate(const Context& c) {
  const auto& cfg = c.cfg;
  require_sections(cfg, {"cpmg", "readout", "signals"});
  if (cfg.records) {
    const auto& rec = *cfg.records;
    for (std::size_t i = 0; i < rec.rates_hz.size(); ++i) {
      const double r = rec.rates_hz[i];
      const auto sched = SamplingSchedule::with_period(*cfg.cpmg, *cfg.readout, 1.0 / r,
                                                       record_length(r, rec.duration_s) * rec.averages);
      const TimeTrace t = run_sampling(cfg.signals, *cfg.cpmg, *cfg.readout, sched, splitmix64(cfg.seed + 0x9e37ULL * (i + 1)), c.sim);
      const fs::path p = c.out_dir / ("record_" + std::to_string(i) + ".csv");
      write_trace(p, t, c.stamp);
      std::cout << p.string() << '\n';
    }
    return 0;
  }
  require_sections(cfg, {"schedule"});
  const TimeTrace t = obtain_trace(c);
  const fs::path p = c.out_dir / "trace.csv";
  write_trace(p, t, c.stamp);
  std::cout << p.string() << '\n';
  return 0;
}

int cmd_spectrum(const Context& c) {
  const TimeTrace t = obtain_trace(c);
  if (t.size() < 2) throw ConfigError("spectrum: trace has fewer than 2 samples");
  const PowerSpectrum spec = power_spectrum(t, c.cfg.spectrum_padding);
  if (c.json) {
    Json j = spectrum_json(spec, c.stamp);
    if (c.cfg.spectrum_reference_hz) j["reference_alias_hz"] = alias_frequency(*c.cfg.spectrum_reference_hz, t.rate());
    emit_json(c, "spectrum.json", j);
    return 0;
  }
  if (c.cfg.spectrum_reference_hz) {
    const double ref = alias_frequency(*c.cfg.spectrum_reference_hz, t.rate());
    emit(c, "spectrum.csv", spectrum_csv(spec, c.stamp, &ref, fold_orientation(*c.cfg.spectrum_reference_hz, t.rate())));
  } else {
    emit(c, "spectrum.csv", spectrum_csv(spec, c.stamp));
  }
  return 0;
}

int cmd_fit(const Context& c) {
  require_sections(c.cfg, {"analysis.fit"});
  const FitSpec& f = *c.cfg.fit;
  const TimeTrace t = obtain_trace(c);
  const PowerSpectrum spec = power_spectrum(t, f.padding);
  const double fs_hz = t.rate();
  const double ref_alias = alias_frequency(f.reference_hz, fs_hz);
  const double orient = fold_orientation(f.reference_hz, fs_hz);
  Json peaks = Json::array();
  std::string text = c.stamp.csv_header() +
                     "line_hz,alias_hz,center_hz,detuning_hz,width_hz,amplitude,offset,sigma_center_hz,sigma_width_hz,sigma_res,points,converged\n";
  for (double line : f.lines_hz) {
    const double alias = alias_frequency(line, fs_hz);
    const LorentzianFit fit = fit_lorentzian(spec, window_around(spec, alias, f.window_halfwidth_hz));
    const double detuning = orient * (fit.params.center_hz - ref_alias);
    text += csv_row({num(line), num(alias), num(fit.params.center_hz), num(detuning), num(fit.params.width_hz),
                     num(fit.params.amplitude), num(fit.params.offset), num(fit.sigma_center_hz), num(fit.sigma_width_hz),
                     num(fit.sigma_res), std::to_string(fit.points), fit.converged ? "1" : "0"});
    peaks.push_back({{"line_hz", line},
                     {"alias_hz", alias},
                     {"center_hz", fit.params.center_hz},
                     {"detuning_hz", detuning},
                     {"width_hz", fit.params.width_hz},
                     {"amplitude", fit.params.amplitude},
                     {"offset", fit.params.offset},
                     {"sigma_center_hz", fit.sigma_center_hz},
                     {"sigma_width_hz", fit.sigma_width_hz},
                     {"sigma_res", fit.sigma_res},
                     {"points", fit.points},
                     {"converged", fit.converged}});
  }
  if (c.json) {
    Json j = c.stamp.json();
    j["reference_hz"] = f.reference_hz;
    j["peaks"] = peaks;
    emit_json(c, "fit.json", j);
  } else {
    emit(c, "fit.csv", text);
  }
  return 0;
}

int cmd_snr_sweep(const Context& c) {
  require_sections(c.cfg, {"cpmg", "readout", "signals", "analysis.snr_sweep"});
  const auto rows = snr_sweep(c.cfg.signals, *c.cfg.cpmg, *c.cfg.readout, *c.cfg.snr_sweep, c.cfg.seed, c.sim);
  if (c.json) {
    Json j = c.stamp.json();
    j["rows"] = Json::array();
    for (const auto& r : rows) {
      j["rows"].push_back({{"repetitions", r.repetitions}, {"period_s", r.period_s}, {"gain_photons", r.gain_photons},
                           {"measured_snr", r.measured}, {"measured_spread", r.measured_spread},
                           {"predicted_ideal", r.predicted_ideal}, {"predicted_depolarized", r.predicted_depolarized}});
    }
    emit_json(c, "snr_sweep.json", j);
    return 0;
  }
  std::string text = c.stamp.csv_header() +
                     "repetitions,period_s,gain_photons,measured_snr,measured_spread,predicted_ideal,predicted_depolarized\n";
  for (const auto& r : rows) {
    text += csv_row({std::to_string(r.repetitions), num(r.period_s), num(r.gain_photons), num(r.measured),
                     num(r.measured_spread), num(r.predicted_ideal), num(r.predicted_depolarized)});
  }
  emit(c, "snr_sweep.csv", text);
  return 0;
}

int cmd_reconstruct(const Context& c) {
  const auto& cfg = c.cfg;
  require_sections(cfg, {"records", "wideband"});
  const auto& rec = *cfg.records;
  const auto& wb = *cfg.wideband;
  const auto support = support_from_bands(wb.grid, wb.support_hz);
  ReconstructionOptions opts;
  opts.floor_sigmas = wb.floor_sigmas;
  WidebandRun run;
  if (!c.traces.empty()) {
    if (c.traces.size() != rec.rates_hz.size()) throw ConfigError("--trace: give one record file per configured rate");
    for (std::size_t i = 0; i < c.traces.size(); ++i) {
      const TimeTrace t = read_trace(c.traces[i]);
      const double r = t.rate();
      const std::size_t n = record_length(r, rec.duration_s);
      const std::size_t avg = t.size() / n;
      if (avg == 0) throw ConfigError(c.traces[i] + ": shorter than one record of " + std::to_string(n) + " samples");
      const auto v = t.values();
      PowerSpectrum mean = power_spectrum(std::span<const double>(v).subspan(0, n), r);
      for (std::size_t a = 1; a < avg; ++a) {
        const auto s = power_spectrum(std::span<const double>(v).subspan(a * n, n), r);
        for (std::size_t j = 0; j < s.size(); ++j) mean.power[j] += s.power[j];
      }
      for (auto& p : mean.power) p /= static_cast<double>(avg);
      run.spectra.push_back(mean);
      run.matrices.push_back(build_sampling_matrix(r, static_cast<double>(n) / r, wb.grid, support));
    }
    run.result = reconstruct(run.spectra, run.matrices, opts);
  } else {
    require_sections(cfg, {"cpmg", "readout", "signals"});
    run = simulate_and_reconstruct(cfg.signals, *cfg.cpmg, *cfg.readout, rec.rates_hz, rec.duration_s, rec.averages, wb.grid,
                                   support, cfg.seed, opts, c.sim);
  }
  const auto peaks = wideband_peaks(run.result, wb.peak_threshold);
  const double mu = run.matrices.size() >= 2 ? coherence(run.matrices).mu : 1.0;
  if (c.json) {
    Json j = c.stamp.json();
    j["grid_resolution_hz"] = wb.grid.resolution();
    j["nyquist_rate_hz"] = wb.grid.nyquist_rate();
    j["coherence"] = mu;
    j["residual_norm"] = run.result.residual_norm;
    j["nnls_iterations"] = run.result.iterations;
    j["peaks"] = Json::array();
    for (std::size_t m : peaks) j["peaks"].push_back({{"bin", m}, {"f_hz", wb.grid.frequency(m)}, {"power", run.result.components[m]}});
    Json comps = Json::array();
    for (std::size_t m : support_columns(support, wb.grid.bins)) comps.push_back({m, run.result.components[m]});
    j["components"] = comps;
    emit_json(c, "reconstruct.json", j);
    return 0;
  }
  emit(c, "wideband.csv", wideband_csv(run.result, c.stamp));
  std::string text = c.stamp.csv_header() + "bin,f_hz,power\n";
  for (std::size_t m : peaks) text += csv_row({std::to_string(m), num(wb.grid.frequency(m)), num(run.result.components[m])});
  emit(c, "peaks.csv", text);
  for (std::size_t i = 0; i < run.matrices.size(); ++i) {
    emit(c, "matrix_" + std::to_string(i) + ".csv", matrix_coo_csv(run.matrices[i], c.stamp));
  }
  return 0;
}

int cmd_scaling(const Context& c) {
  const auto& cfg = c.cfg;
  require_sections(cfg, {"cpmg", "readout", "signals", "schedule", "analysis.scaling"});
  const ScalingSpec& s = *cfg.scaling;
  ScalingStudyConfig sc;
  sc.signals = cfg.signals;
  sc.cpmg = *cfg.cpmg;
  sc.readout = *cfg.readout;
  sc.period_s = cfg.schedule->period_s;
  sc.durations_s = s.durations_s;
  sc.repetitions = s.repetitions;
  sc.seed = cfg.seed;
  sc.target_frequency_hz = s.target_frequency_hz;
  sc.linewidth_hz = s.linewidth_hz;
  sc.window_bins = s.window_bins;
  sc.window_hz = s.window_hz;
  sc.padding = s.padding;
  sc.resolved_product = s.resolved_product;
  sc.unresolved_product = s.unresolved_product;
  sc.simulation = c.sim;
  const ScalingResult r = scaling_study(sc);
  auto opt = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  if (c.json) {
    Json j = c.stamp.json();
    j["points"] = Json::array();
    for (const auto& p : r.points) {
      j["points"].push_back({{"duration_s", p.duration_s}, {"samples", p.samples}, {"gamma_hz", p.gamma_hz},
                             {"sigma_center_hz", p.sigma_center_hz}, {"center_scatter_hz", p.center_scatter_hz},
                             {"regime", p.regime}, {"failed_fits", p.failed_fits}});
    }
    j["sigma_slope_unresolved"] = opt(r.sigma_slope_unresolved);
    j["sigma_slope_resolved"] = opt(r.sigma_slope_resolved);
    j["gamma_slope_unresolved"] = opt(r.gamma_slope_unresolved);
    j["gamma_plateau_hz"] = opt(r.gamma_plateau_hz);
    emit_json(c, "scaling.json", j);
    return 0;
  }
  std::string text = c.stamp.csv_header() + "duration_s,samples,gamma_hz,sigma_center_hz,center_scatter_hz,regime,failed_fits\n";
  for (const auto& p : r.points) {
    text += csv_row({num(p.duration_s), std::to_string(p.samples), num(p.gamma_hz), num(p.sigma_center_hz),
                     num(p.center_scatter_hz), p.regime, std::to_string(p.failed_fits)});
  }
  emit(c, "scaling.csv", text);
  std::string fits = c.stamp.csv_header() + "quantity,value\n";
  fits += csv_row({"sigma_slope_unresolved", num(r.sigma_slope_unresolved)});
  fits += csv_row({"sigma_slope_resolved", num(r.sigma_slope_resolved)});
  fits += csv_row({"gamma_slope_unresolved", num(r.gamma_slope_unresolved)});
  fits += csv_row({"gamma_plateau_hz", num(r.gamma_plateau_hz)});
  emit(c, "scaling_slopes.csv", fits);
  return 0;
}

int cmd_rate_design(const Context& c) {
  const auto& cfg = c.cfg;
  require_sections(cfg, {"wideband", "analysis.rate_design"});
  RateDesignOptions o = *cfg.rate_design;
  o.seed = cfg.seed;
  const auto support = support_from_bands(cfg.wideband->grid, cfg.wideband->support_hz);
  const RateDesign d = design_rates(o, cfg.wideband->grid, support);
  if (c.json) {
    Json j = c.stamp.json();
    j["rates_hz"] = d.rates_hz;
    j["coherence"] = d.coherence;
    emit_json(c, "rate_design.json", j);
    return 0;
  }
  std::string text = c.stamp.csv_header() + "# coherence=" + num(d.coherence) + "\nindex,rate_hz,period_s\n";
  for (std::size_t i = 0; i < d.rates_hz.size(); ++i) {
    text += csv_row({std::to_string(i), num(d.rates_hz[i]), num(1.0 / d.rates_hz[i])});
  }
  emit(c, "rate_design.csv", text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strobe: undersampled quantum lock-in simulation and analysis"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  CommonArgs args;

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Context&);
    bool takes_traces;
  };
  const Entry entries[] = {
      {"simulate", "Simulate a trace (or one record per rate) and write CSV plus JSON metadata", cmd_simulate, false},
      {"spectrum", "Power spectrum of a trace", cmd_spectrum, true},
      {"fit", "Lorentzian fits of the configured lines", cmd_fit, true},
      {"snr-sweep", "Measured and predicted SNR versus readout repetitions", cmd_snr_sweep, false},
      {"reconstruct", "Wideband spectrum from multi-rate records", cmd_reconstruct, true},
      {"scaling", "Centre-frequency uncertainty and linewidth versus measurement time", cmd_scaling, false},
      {"rate-design", "Random sampling-rate design with its coherence", cmd_rate_design, false},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "Override the config seed");
    sub->add_option("--out", args.out, "Output directory (default: config output_dir)");
    sub->add_option("--threads", args.threads, "Worker threads, 0 = all cores")->capture_default_str();
    sub->add_option("--format", args.format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    if (e.takes_traces) sub->add_option("--trace", args.traces, "Input trace CSV file(s) instead of simulating");
    subs.emplace_back(sub, &e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const auto& [sub, entry] : subs) {
      if (sub->parsed()) return entry->run(make_context(args));
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
