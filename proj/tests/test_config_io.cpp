#include <gtest/gtest.h>

#include <filesystem>

#include "strobe/config.hpp"

using namespace strobe;
namespace fs = std::filesystem;

namespace {

Json minimal() {
  return Json::parse(R"({
    "seed": 5,
    "cpmg": {"pulses": 16, "duration_s": 6.654e-6},
    "readout": {"repetitions": 100, "gain_slope_photons": 0.105, "contrast": 0.35},
    "signals": [{"tones": [{"phase_amplitude_rad": 0.3, "frequency_hz": 1.2e6}]}],
    "schedule": {"period_s": 1e-3, "samples": 64}
  })");
}

std::string error_of(const Json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("strobe_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, MinimalDocumentParses) {
  const auto c = parse_config(minimal());
  EXPECT_EQ(c.seed, 5u);
  ASSERT_TRUE(c.cpmg && c.readout && c.schedule);
  EXPECT_EQ(c.signals.size(), 1u);
  EXPECT_EQ(c.schedule->samples, 64u);
  EXPECT_NO_THROW(require_sections(c, {"cpmg", "readout", "signals", "schedule"}));
  EXPECT_THROW(require_sections(c, {"records"}), ConfigError);
}

TEST(Config, SeedIsMandatory) {
  Json d = minimal();
  d.erase("seed");
  EXPECT_NE(error_of(d).find("seed"), std::string::npos);
  EXPECT_NO_THROW(parse_config(d, 11));
}

TEST(Config, ErrorsNameTheFieldPath) {
  Json d = minimal();
  d["cpmg"]["pulses"] = -4;
  EXPECT_NE(error_of(d).find("cpmg.pulses"), std::string::npos);

  d = minimal();
  d["schedule"]["bogus"] = 1;
  EXPECT_NE(error_of(d).find("schedule.bogus"), std::string::npos);

  d = minimal();
  d["signals"][0]["tones"][0].erase("phase_amplitude_rad");
  EXPECT_NE(error_of(d).find("signals[0]"), std::string::npos);

  d = minimal();
  d["schedule"]["duration_s"] = 1.0;
  EXPECT_FALSE(error_of(d).empty());
}

TEST(Config, HashTracksTheEffectiveDocument) {
  const auto a = parse_config(minimal());
  const auto b = parse_config(minimal());
  const auto c = parse_config(minimal(), 6);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(c.seed, 6u);
}

TEST(Config, LoadRejectsMalformedJson) {
  const auto dir = scratch("bad_json");
  write_text(dir / "bad.json", "{ \"seed\": 1, ");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  write_text(dir / "ok.json", "// comment\n" + minimal().dump());
  EXPECT_NO_THROW(load_config(dir / "ok.json"));
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"fig2ab.json", "fig2cd.json", "fig3.json", "fig4.json"}) {
    EXPECT_NO_THROW(load_config(fs::path(STROBE_SOURCE_DIR) / "configs" / name)) << name;
  }
}

TEST(TraceIo, RoundTripKeepsCountsAndTiming) {
  const auto dir = scratch("trace");
  TimeTrace t;
  t.counts = {3, 0, 17, 4, 9};
  t.period_s = 1.31524e-3;
  t.start_time_s = 0.25;
  t.metadata = Json{{"note", "x"}};
  write_trace(dir / "t.csv", t, OutputStamp{"abc"});
  const std::string text = read_text(dir / "t.csv");
  EXPECT_EQ(text.rfind("# tool=strobe version=0.1.0 config_hash=abc\n", 0), 0u);
  const TimeTrace r = read_trace(dir / "t.csv");
  EXPECT_EQ(r.counts, t.counts);
  EXPECT_DOUBLE_EQ(r.period_s, t.period_s);
  EXPECT_DOUBLE_EQ(r.start_time_s, t.start_time_s);
  EXPECT_EQ(r.metadata.at("note"), "x");

  fs::remove(sidecar_path(dir / "t.csv"));
  const TimeTrace inferred = read_trace(dir / "t.csv");
  EXPECT_NEAR(inferred.period_s, t.period_s, 1e-15);
}

TEST(TraceIo, EmptyOrMalformedTracesRejected) {
  const auto dir = scratch("bad_trace");
  write_text(dir / "empty.csv", "# tool=strobe\nk,t_s,y\n");
  EXPECT_THROW(read_trace(dir / "empty.csv"), ConfigError);
  write_text(dir / "neg.csv", "k,t_s,y\n0,0,-1\n1,0.001,2\n");
  EXPECT_THROW(read_trace(dir / "neg.csv"), ConfigError);
  write_text(dir / "cols.csv", "k,t_s,y\n0,0\n");
  EXPECT_THROW(read_trace(dir / "cols.csv"), ConfigError);
}

TEST(TraceIo, NumbersRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, 1.31524e-3, 601254.7, 1e-300, -2.5}) {
    EXPECT_EQ(std::strtod(format_number(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
}
