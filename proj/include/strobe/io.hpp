#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "strobe/csrecon.hpp"
#include "strobe/error.hpp"
#include "strobe/sampler.hpp"
#include "strobe/serialization.hpp"
#include "strobe/spectral.hpp"

namespace strobe {

inline constexpr const char* kToolName = "strobe";
inline constexpr const char* kToolVersion = "0.1.0";

// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Identifies the producing tool and the exact configuration of an output file.
struct OutputStamp {
  std::string config_hash;
  std::string tool_version = kToolVersion;

  std::string csv_header() const {
    return std::string("# tool=") + kToolName + " version=" + tool_version + " config_hash=" + config_hash + "\n";
  }
  Json json() const { return Json{{"tool", kToolName}, {"tool_version", tool_version}, {"config_hash", config_hash}}; }
};

// Shortest round-trip representation, independent of locale and stream state.
inline std::string format_number(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV with columns k, t_s, y plus a JSON sidecar holding the metadata.
inline void write_trace(const std::filesystem::path& csv, const TimeTrace& trace, const OutputStamp& stamp) {
  std::string text = stamp.csv_header() + "k,t_s,y\n";
  text.reserve(text.size() + trace.size() * 24);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    text += std::to_string(k);
    text += ',';
    text += format_number(trace.time_at(k));
    text += ',';
    text += std::to_string(trace.counts[k]);
    text += '\n';
  }
  write_text(csv, text);
  Json side = stamp.json();
  side["period_s"] = trace.period_s;
  side["start_time_s"] = trace.start_time_s;
  side["samples"] = trace.size();
  side["metadata"] = trace.metadata;
  write_text(sidecar_path(csv), side.dump(2) + "\n");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (*end != '\0' && *end != '\r')) throw ConfigError(where + ": not a number: '" + s + "'");
  return v;
}

}  // namespace detail

// Reads a trace CSV. The sampling period comes from the sidecar when present,
// otherwise from the first two time stamps.
inline TimeTrace read_trace(const std::filesystem::path& csv) {
  const std::string text = read_text(csv);
  std::istringstream in(text);
  std::string line;
  std::vector<double> times;
  TimeTrace trace;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("k,", 0) == 0) continue;
    }
    const auto cells = detail::split_csv_line(line);
    const std::string where = csv.string() + ":" + std::to_string(line_no);
    if (cells.size() != 3) throw ConfigError(where + ": expected 3 columns (k, t_s, y)");
    times.push_back(detail::parse_double(cells[1], where));
    const double y = detail::parse_double(cells[2], where);
    if (y < 0.0 || y != std::floor(y)) throw ConfigError(where + ": counts must be non-negative integers");
    trace.counts.push_back(static_cast<std::int64_t>(y));
  }
  if (trace.counts.empty()) throw ConfigError(csv.string() + ": trace file contains no samples");
  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    const Json j = Json::parse(read_text(side), nullptr, false);
    if (j.is_discarded() || !j.contains("period_s")) throw ConfigError(side.string() + ": malformed trace sidecar");
    trace.period_s = j.at("period_s").get<double>();
    trace.start_time_s = j.value("start_time_s", times.front());
    trace.metadata = j.value("metadata", Json::object());
  } else {
    if (times.size() < 2) throw ConfigError(csv.string() + ": need two samples or a sidecar to infer the period");
    trace.period_s = times[1] - times[0];
    trace.start_time_s = times.front();
  }
  if (!(trace.period_s > 0.0)) throw ConfigError(csv.string() + ": sampling period must be > 0");
  return trace;
}

// Columns: bin, f_hz (aliased frequency), [detuning_hz], power.
inline std::string spectrum_csv(const PowerSpectrum& spec, const OutputStamp& stamp, const double* reference_alias_hz = nullptr,
                                double orientation = 1.0) {
  std::string text = stamp.csv_header();
  text += reference_alias_hz ? "bin,f_hz,detuning_hz,power\n" : "bin,f_hz,power\n";
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double f = spec.frequency(static_cast<double>(j));
    text += std::to_string(j) + ',' + format_number(f) + ',';
    if (reference_alias_hz) text += format_number(orientation * (f - *reference_alias_hz)) + ',';
    text += format_number(spec.power[j]) + '\n';
  }
  return text;
}

inline Json spectrum_json(const PowerSpectrum& spec, const OutputStamp& stamp) {
  Json j = stamp.json();
  j["bin_width_hz"] = spec.bin_width_hz;
  j["sample_rate_hz"] = spec.sample_rate_hz;
  j["samples"] = spec.num_samples;
  j["padding"] = spec.padding;
  j["power"] = spec.power;
  return j;
}

// Coordinate list: row, col, value.
inline std::string matrix_coo_csv(const SamplingMatrix& m, const OutputStamp& stamp) {
  std::string text = stamp.csv_header() + "row,col,value\n";
  for (Eigen::Index c = 0; c < m.entries.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m.entries, c); it; ++it) {
      text += std::to_string(it.row()) + ',' + std::to_string(it.col()) + ',' + format_number(it.value()) + '\n';
    }
  }
  return text;
}

// Non-zero support bins only: bin, f_hz, power.
inline std::string wideband_csv(const WidebandSpectrum& w, const OutputStamp& stamp) {
  std::string text = stamp.csv_header() + "bin,f_hz,power\n";
  for (std::size_t c : support_columns(w.support, w.grid.bins)) {
    text += std::to_string(c) + ',' + format_number(w.frequency(c)) + ',' + format_number(w.components[c]) + '\n';
  }
  return text;
}

}  // namespace strobe
