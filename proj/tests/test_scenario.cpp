#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "qlink/link_model.hpp"
#include "qlink/scenario.hpp"

using namespace qlink;
using Catch::Approx;

namespace {

Scenario parse(const std::string& content) {
  return parse_scenario_text(content, std::filesystem::temp_directory_path());
}

const char* kCalibration = R"(# calibration point
link.n_quantum=4000
link.t_meas=0.05
actors.eta_det_e=1
actors.alpha_e_sq=1
sampling.seed=42
)";

}  // namespace

TEST_CASE("paper calibration file yields the threshold of 100") {
  const auto s = parse(kCalibration);
  CHECK(s.link.n_quantum == 4000.0);
  CHECK(s.link.t_meas == 0.05);
  CHECK(s.seed == 42);
  CHECK(security_threshold(s.link, s.actors) == Approx(100.0));
}

TEST_CASE("defaults fill every unset key") {
  const auto s = parse("link.n_quantum=1000\nsampling.seed=1\n");
  CHECK(s.link.eta_det == 1.0);
  CHECK(s.link.t_meas == 0.05);
  CHECK(s.actors.alpha_sq == 0.0);
  CHECK(s.actors.n_class == 0.0);
  CHECK(s.kind == EncodingKind::amplitude);
  CHECK(s.bit_duration == 1.0);
  CHECK(s.bin_duration == 0.05);
  CHECK(s.pump_rate == 2e16);
  CHECK_FALSE(s.text.has_value());
  CHECK_FALSE(s.image_path.has_value());
  CHECK(s.out_dir == "qlink_out");
}

TEST_CASE("range errors name the offending key") {
  const auto bad = std::string(kCalibration) + "actors.alpha_sq=1.5\n";
  try {
    parse(bad);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("actors.alpha_sq") != std::string::npos);
  }
}

TEST_CASE("empty file lists the required keys") {
  try {
    parse("");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("link.n_quantum") != std::string::npos);
    CHECK(msg.find("sampling.seed") != std::string::npos);
  }
}

TEST_CASE("unknown and malformed keys are rejected") {
  CHECK_THROWS_AS(parse(std::string(kCalibration) + "link.bogus=1\n"),
                  config_error);
  CHECK_THROWS_AS(parse(std::string(kCalibration) + "no equals sign here\n"),
                  config_error);
  CHECK_THROWS_AS(parse(std::string(kCalibration) + "link.n_quantum=4000\n"),
                  config_error);  // duplicate
  CHECK_THROWS_AS(parse("link.n_quantum=abc\nsampling.seed=1\n"),
                  config_error);
  CHECK_THROWS_AS(parse("link.n_quantum=100\nsampling.seed=-3\n"),
                  config_error);
}

TEST_CASE("payload text and encoding kinds") {
  const auto s = parse(std::string(kCalibration) +
                       "payload.text=MPQ\nencoding.kind=phase\n");
  REQUIRE(s.text.has_value());
  CHECK(*s.text == "MPQ");
  CHECK(s.kind == EncodingKind::phase);
  CHECK_THROWS_AS(
      parse(std::string(kCalibration) + "encoding.kind=frequency\n"),
      config_error);
}

TEST_CASE("image paths must exist at parse time") {
  CHECK_THROWS_AS(
      parse(std::string(kCalibration) + "payload.image=missing.pgm\n"),
      config_error);

  const auto dir = std::filesystem::temp_directory_path() / "qlink_scn_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream pgm(dir / "mask.pgm");
    pgm << "P2\n1 1\n255\n128\n";
  }
  const auto s = parse_scenario_text(
      std::string(kCalibration) + "payload.image=mask.pgm\n", dir);
  REQUIRE(s.image_path.has_value());
  CHECK(std::filesystem::exists(*s.image_path));
}

TEST_CASE("emit/parse round trip preserves every field") {
  auto s = parse(std::string(kCalibration) +
                 "payload.text=hello world\n"
                 "encoding.kind=phase\n"
                 "encoding.bit_duration=0.8333333333333334\n"
                 "encoding.rise_time=0.025\n"
                 "actors.n_class=4.17753e8\n"
                 "sampling.dark_rate=153000.5\n"
                 "sweep.points=13\n"
                 "outputs.dir=some/dir\n");
  const auto text = emit_scenario(s);
  const auto back = parse_scenario_text(text, "/");
  CHECK(back.link.n_quantum == s.link.n_quantum);
  CHECK(back.link.t_meas == s.link.t_meas);
  CHECK(back.actors.alpha_e_sq == s.actors.alpha_e_sq);
  CHECK(back.actors.n_class == s.actors.n_class);
  CHECK(back.kind == s.kind);
  CHECK(back.bit_duration == s.bit_duration);
  CHECK(back.rise_time == s.rise_time);
  CHECK(back.text == s.text);
  CHECK(back.dark_rate == s.dark_rate);
  CHECK(back.sweep_points == s.sweep_points);
  CHECK(back.out_dir == s.out_dir);
  CHECK(back.seed == s.seed);
  // Emitting the reparsed scenario is a fixed point.
  CHECK(emit_scenario(back) == text);
}

TEST_CASE("scenario file parsing from disk") {
  const auto dir =
      std::filesystem::temp_directory_path() / "qlink_scn_disk_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "point.scn";
  {
    std::ofstream out(path);
    out << kCalibration;
  }
  const auto s = parse_scenario(path);
  CHECK(s.link.n_quantum == 4000.0);
  CHECK_THROWS_AS(parse_scenario(dir / "nope.scn"), config_error);
}
