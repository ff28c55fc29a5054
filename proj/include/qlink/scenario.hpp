#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlink/link_model.hpp"
#include "qlink/text.hpp"

namespace qlink {

/// Scenario files are flat key=value text with dotted section prefixes,
/// e.g. `link.n_quantum=4000`. Lines starting with '#' are comments.
/// Unknown keys are rejected so typos cannot silently change physics.

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Scenario {
  LinkParams link;
  ChannelActors actors;
  double pump_rate = 2e16;  ///< photons/s into the pair source

  EncodingKind kind = EncodingKind::amplitude;
  double bit_duration = 1.0;  ///< s
  double rise_time = 0.0;     ///< s, keying element switching ramp

  std::optional<std::string> text;        ///< ASCII payload
  std::optional<std::string> image_path;  ///< resolved path to a PGM mask
  int eye_bits = 60;

  double pixel_pitch = 0.5;  ///< mm
  double scan_speed = 1.0;   ///< mm/s
  double dwell = 0.05;       ///< s per scan event
  int calib_events = 20;     ///< reference events at each scan edge
  std::uint64_t null_trials = 100000;

  double bin_duration = 0.05;  ///< s
  std::uint64_t seed = 0;      ///< mandatory; no wall-clock fallback
  double dark_rate = 0.0;      ///< 1/s added to both detectors

  double sweep_min_ratio = 1.0;
  double sweep_max_ratio = 1e5;
  int sweep_points = 11;
  int sweep_blocks = 20;

  std::string out_dir = "qlink_out";
};

namespace detail {

inline void fail_key(const std::string& key, const std::string& why) {
  throw config_error(key + ": " + why);
}

struct KeyReader {
  std::map<std::string, std::string, std::less<>> pairs;

  bool take(const std::string& key, std::string& out) {
    auto it = pairs.find(key);
    if (it == pairs.end()) return false;
    out = it->second;
    pairs.erase(it);
    return true;
  }

  void read(const std::string& key, double& field) {
    std::string raw;
    if (!take(key, raw)) return;
    if (!text::parse_double(raw, field)) fail_key(key, "expected a number");
  }

  void read(const std::string& key, std::uint64_t& field) {
    std::string raw;
    if (!take(key, raw)) return;
    if (!text::parse_u64(raw, field))
      fail_key(key, "expected an unsigned integer");
  }

  void read(const std::string& key, int& field) {
    std::string raw;
    if (!take(key, raw)) return;
    if (!text::parse_int(raw, field)) fail_key(key, "expected an integer");
  }

  void read(const std::string& key, std::string& field) {
    std::string raw;
    if (take(key, raw)) field = raw;
  }
};

inline void check_range(const std::string& key, double v, double lo,
                        double hi) {
  if (!(v >= lo && v <= hi))
    fail_key(key, "must be in [" + text::format_double(lo) + ", " +
                      text::format_double(hi) + "]");
}

inline void check_positive(const std::string& key, double v) {
  if (!(v > 0.0)) fail_key(key, "must be > 0");
}

inline void check_non_negative(const std::string& key, double v) {
  if (!(v >= 0.0)) fail_key(key, "must be >= 0");
}

}  // namespace detail

/// Parse scenario text. `base_dir` anchors relative file references.
inline Scenario parse_scenario_text(const std::string& content,
                                    const std::filesystem::path& base_dir) {
  detail::KeyReader reader;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos)
      throw config_error("line " + std::to_string(line_no) +
                         ": expected key=value");
    const std::string key{text::trim(trimmed.substr(0, eq))};
    const std::string value{text::trim(trimmed.substr(eq + 1))};
    if (key.empty())
      throw config_error("line " + std::to_string(line_no) + ": empty key");
    if (!reader.pairs.emplace(key, value).second)
      throw config_error("duplicate key: " + key);
  }

  const bool has_n_quantum = reader.pairs.count("link.n_quantum") != 0;
  const bool has_seed = reader.pairs.count("sampling.seed") != 0;
  if (!has_n_quantum || !has_seed) {
    std::string missing;
    if (!has_n_quantum) missing += "link.n_quantum";
    if (!has_seed) missing += std::string(missing.empty() ? "" : ", ") +
                              "sampling.seed";
    throw config_error("missing required keys: " + missing);
  }

  Scenario s;
  reader.read("link.n_quantum", s.link.n_quantum);
  reader.read("link.phi", s.link.phi);
  reader.read("link.phi_a", s.link.phi_a);
  reader.read("link.phi_b", s.link.phi_b);
  reader.read("link.eta_det", s.link.eta_det);
  reader.read("link.t_meas", s.link.t_meas);
  reader.read("link.pump_rate", s.pump_rate);
  reader.read("actors.alpha_sq", s.actors.alpha_sq);
  reader.read("actors.alpha_e_sq", s.actors.alpha_e_sq);
  reader.read("actors.eta_det_e", s.actors.eta_det_e);
  reader.read("actors.n_class", s.actors.n_class);
  reader.read("actors.eta_losses_sq", s.actors.eta_losses_sq);

  std::string kind_raw;
  if (reader.take("encoding.kind", kind_raw)) {
    if (kind_raw == "amplitude")
      s.kind = EncodingKind::amplitude;
    else if (kind_raw == "phase")
      s.kind = EncodingKind::phase;
    else
      detail::fail_key("encoding.kind", "must be amplitude or phase");
  }
  reader.read("encoding.bit_duration", s.bit_duration);
  reader.read("encoding.rise_time", s.rise_time);

  std::string payload_raw;
  if (reader.take("payload.text", payload_raw)) s.text = payload_raw;
  if (reader.take("payload.image", payload_raw)) {
    std::filesystem::path img(payload_raw);
    if (img.is_relative()) img = base_dir / img;
    if (!std::filesystem::exists(img))
      detail::fail_key("payload.image", "file not found: " + img.string());
    s.image_path = img.string();
  }
  reader.read("payload.eye_bits", s.eye_bits);

  reader.read("image.pixel_pitch", s.pixel_pitch);
  reader.read("image.scan_speed", s.scan_speed);
  reader.read("image.dwell", s.dwell);
  reader.read("image.calib_events", s.calib_events);
  reader.read("image.null_trials", s.null_trials);

  reader.read("sampling.bin_duration", s.bin_duration);
  reader.read("sampling.seed", s.seed);
  reader.read("sampling.dark_rate", s.dark_rate);

  reader.read("sweep.min_ratio", s.sweep_min_ratio);
  reader.read("sweep.max_ratio", s.sweep_max_ratio);
  reader.read("sweep.points", s.sweep_points);
  reader.read("sweep.blocks", s.sweep_blocks);

  reader.read("outputs.dir", s.out_dir);

  if (!reader.pairs.empty())
    throw config_error("unknown key: " + reader.pairs.begin()->first);

  detail::check_non_negative("link.n_quantum", s.link.n_quantum);
  detail::check_range("link.eta_det", s.link.eta_det, 0.0, 1.0);
  detail::check_positive("link.t_meas", s.link.t_meas);
  detail::check_positive("link.pump_rate", s.pump_rate);
  detail::check_range("actors.alpha_sq", s.actors.alpha_sq, 0.0, 1.0);
  detail::check_range("actors.alpha_e_sq", s.actors.alpha_e_sq, 0.0, 1.0);
  detail::check_range("actors.eta_det_e", s.actors.eta_det_e, 0.0, 1.0);
  detail::check_non_negative("actors.n_class", s.actors.n_class);
  detail::check_range("actors.eta_losses_sq", s.actors.eta_losses_sq, 0.0,
                      1.0);
  detail::check_positive("encoding.bit_duration", s.bit_duration);
  detail::check_non_negative("encoding.rise_time", s.rise_time);
  if (s.rise_time > 0.0 && s.rise_time >= s.bit_duration)
    detail::fail_key("encoding.rise_time",
                     "must be shorter than encoding.bit_duration");
  if (s.eye_bits < 3) detail::fail_key("payload.eye_bits", "must be >= 3");
  detail::check_positive("image.pixel_pitch", s.pixel_pitch);
  detail::check_positive("image.scan_speed", s.scan_speed);
  detail::check_positive("image.dwell", s.dwell);
  if (s.calib_events < 1)
    detail::fail_key("image.calib_events", "must be >= 1");
  if (s.null_trials < 100)
    detail::fail_key("image.null_trials", "must be >= 100");
  detail::check_positive("sampling.bin_duration", s.bin_duration);
  detail::check_non_negative("sampling.dark_rate", s.dark_rate);
  detail::check_non_negative("sweep.min_ratio", s.sweep_min_ratio);
  if (!(s.sweep_max_ratio >= s.sweep_min_ratio))
    detail::fail_key("sweep.max_ratio", "must be >= sweep.min_ratio");
  if (s.sweep_points < 1) detail::fail_key("sweep.points", "must be >= 1");
  if (s.sweep_blocks < 2) detail::fail_key("sweep.blocks", "must be >= 2");
  if (s.out_dir.empty()) detail::fail_key("outputs.dir", "must be non-empty");
  return s;
}

inline Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open scenario file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path.parent_path());
}

/// Canonical text form with every value resolved; a valid scenario file,
/// used as the run manifest. Re-parsing it reproduces the Scenario.
inline std::string emit_scenario(const Scenario& s) {
  std::ostringstream os;
  const auto d = [&](const char* key, double v) {
    os << key << '=' << text::format_double(v) << "\n";
  };
  os << "# resolved scenario\n";
  d("link.n_quantum", s.link.n_quantum);
  d("link.phi", s.link.phi);
  d("link.phi_a", s.link.phi_a);
  d("link.phi_b", s.link.phi_b);
  d("link.eta_det", s.link.eta_det);
  d("link.t_meas", s.link.t_meas);
  d("link.pump_rate", s.pump_rate);
  d("actors.alpha_sq", s.actors.alpha_sq);
  d("actors.alpha_e_sq", s.actors.alpha_e_sq);
  d("actors.eta_det_e", s.actors.eta_det_e);
  d("actors.n_class", s.actors.n_class);
  d("actors.eta_losses_sq", s.actors.eta_losses_sq);
  os << "encoding.kind="
     << (s.kind == EncodingKind::amplitude ? "amplitude" : "phase") << "\n";
  d("encoding.bit_duration", s.bit_duration);
  d("encoding.rise_time", s.rise_time);
  if (s.text) os << "payload.text=" << *s.text << "\n";
  if (s.image_path) os << "payload.image=" << *s.image_path << "\n";
  os << "payload.eye_bits=" << s.eye_bits << "\n";
  d("image.pixel_pitch", s.pixel_pitch);
  d("image.scan_speed", s.scan_speed);
  d("image.dwell", s.dwell);
  os << "image.calib_events=" << s.calib_events << "\n";
  os << "image.null_trials=" << text::format_u64(s.null_trials) << "\n";
  d("sampling.bin_duration", s.bin_duration);
  os << "sampling.seed=" << text::format_u64(s.seed) << "\n";
  d("sampling.dark_rate", s.dark_rate);
  d("sweep.min_ratio", s.sweep_min_ratio);
  d("sweep.max_ratio", s.sweep_max_ratio);
  os << "sweep.points=" << s.sweep_points << "\n";
  os << "sweep.blocks=" << s.sweep_blocks << "\n";
  os << "outputs.dir=" << s.out_dir << "\n";
  return os.str();
}

}  // namespace qlink
