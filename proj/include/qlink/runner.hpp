#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qlink/analysis.hpp"
#include "qlink/count_engine.hpp"
#include "qlink/link_model.hpp"
#include "qlink/protocol_codec.hpp"
#include "qlink/scenario.hpp"
#include "qlink/symbols.hpp"
#include "qlink/text.hpp"

namespace qlink {
namespace runner {

/// Subcommand implementations behind the CLI. Every run writes a manifest
/// (the fully resolved scenario) next to its outputs, so any result can be
/// reproduced byte-for-byte from the manifest alone.

namespace detail {

inline std::size_t worker_count(std::size_t n_tasks) {
  std::size_t workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (const char* env = std::getenv("QLINK_WORKERS")) {
    std::uint64_t parsed = 0;
    if (text::parse_u64(text::trim(env), parsed) && parsed > 0)
      workers = static_cast<std::size_t>(parsed);
  }
  return std::max<std::size_t>(1, std::min(workers, n_tasks));
}

/// Index-parallel loop with a bounded pool; tasks must be independent.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
}

inline std::filesystem::path prepare_out_dir(const Scenario& s) {
  std::filesystem::path dir(s.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.scn", emit_scenario(s));
  return dir;
}

inline std::string bits_string(const std::vector<int>& bits) {
  std::string out;
  out.reserve(bits.size());
  for (const int b : bits) out.push_back(b ? '1' : '0');
  return out;
}

inline std::string scores_csv(const DecodeResult& r) {
  std::ostringstream os;
  os << "bit_index,hard_bit,soft_score\n";
  for (std::size_t i = 0; i < r.bits.size(); ++i)
    os << i << ',' << r.bits[i] << ',' << text::format_double(r.soft[i])
       << "\n";
  return os.str();
}

inline std::string decode_report(const DecodeResult& r,
                                 const std::vector<int>& reference) {
  std::ostringstream os;
  os << "status=ok\n";
  os << "bits=" << bits_string(r.bits) << "\n";
  if (r.bits.size() % 8 == 0) {
    const std::string msg = bits_to_text(r.bits);
    bool printable = true;
    for (const unsigned char c : msg)
      if (c < 0x20 || c > 0x7e) printable = false;
    if (printable) os << "message=" << msg << "\n";
  }
  os << "ber_vs_reference=" << text::format_double(bit_error_rate(
            r.bits, reference)) << "\n";
  os << "level1=" << text::format_double(r.level1) << "\n";
  os << "level0=" << text::format_double(r.level0) << "\n";
  os << "threshold=" << text::format_double(r.threshold) << "\n";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct MessageOutcome {
  bool alice_ok = false;
  double alice_ber = 1.0;
  bool eve_calibrated = false;  ///< false = calibration failure (blinded)
  double eve_ber = 0.5;
  std::vector<int> eve_bits;
};

/// Shared core of `simulate` and `send-message`.
inline MessageOutcome send_message(const Scenario& s,
                                   const std::filesystem::path& dir,
                                   bool write_traces) {
  if (!s.text) throw config_error("payload.text is required");
  const auto schedule = encode_text(*s.text, s.kind, s.bit_duration);
  const auto [rate_a, rate_e] = s.rise_time > 0.0
      ? apply_transition(s.link, s.actors, schedule, {s.rise_time})
      : symbol_rate_schedules(s.link, s.actors, schedule);
  const auto [alice, eve] =
      dual_sample(rate_a, rate_e, s.bin_duration, s.seed, s.dark_rate);

  if (write_traces) {
    std::ostringstream ta;
    write_trace_csv(alice, ta);
    detail::write_file(dir / "alice_trace.csv", ta.str());
    std::ostringstream te;
    write_trace_csv(eve, te);
    detail::write_file(dir / "eve_trace.csv", te.str());
  }

  const auto reference = text_to_bits(*s.text);
  detail::write_file(dir / "reference_bits.txt",
                     detail::bits_string(reference) + "\n");

  DecodeMeta meta;
  meta.bit_duration = s.bit_duration;
  meta.preamble_len = schedule.preamble_len;
  meta.payload_bits = reference.size();

  MessageOutcome out;
  const auto decoded_alice = decode_trace(alice, meta);
  out.alice_ber = bit_error_rate(decoded_alice.bits, reference);
  out.alice_ok = out.alice_ber == 0.0;
  detail::write_file(dir / "alice_decoded.txt",
                     detail::decode_report(decoded_alice, reference));
  detail::write_file(dir / "alice_scores.csv",
                     detail::scores_csv(decoded_alice));

  try {
    const auto decoded_eve = decode_trace(eve, meta);
    out.eve_calibrated = true;
    out.eve_ber = bit_error_rate(decoded_eve.bits, reference);
    out.eve_bits = decoded_eve.bits;
    detail::write_file(dir / "eve_decoded.txt",
                       detail::decode_report(decoded_eve, reference));
    detail::write_file(dir / "eve_scores.csv",
                       detail::scores_csv(decoded_eve));
  } catch (const calibration_error& e) {
    detail::write_file(dir / "eve_decoded.txt",
                       std::string("status=calibration_failed\nreason=") +
                           e.what() + "\n");
  }
  return out;
}

inline MessageOutcome run_send_message(const Scenario& s) {
  const auto dir = detail::prepare_out_dir(s);
  return send_message(s, dir, false);
}

inline MessageOutcome run_simulate(const Scenario& s) {
  const auto dir = detail::prepare_out_dir(s);
  return send_message(s, dir, true);
}

// ---------------------------------------------------------------------------

inline std::vector<double> sweep_ratios(const Scenario& s) {
  std::vector<double> ratios;
  if (s.sweep_points == 1 || s.sweep_max_ratio == s.sweep_min_ratio) {
    ratios.push_back(s.sweep_min_ratio);
    return ratios;
  }
  if (!(s.sweep_min_ratio > 0.0))
    throw config_error("sweep.min_ratio: must be > 0 for a log-spaced sweep");
  const double lo = std::log10(s.sweep_min_ratio);
  const double hi = std::log10(s.sweep_max_ratio);
  for (int i = 0; i < s.sweep_points; ++i)
    ratios.push_back(std::pow(
        10.0, lo + (hi - lo) * static_cast<double>(i) /
                       static_cast<double>(s.sweep_points - 1)));
  return ratios;
}

inline std::vector<SweepRow> run_sweep(const Scenario& s) {
  const auto dir = detail::prepare_out_dir(s);
  const auto ratios = sweep_ratios(s);
  std::vector<SweepRow> rows(ratios.size());
  detail::parallel_for(ratios.size(), [&](std::size_t i) {
    rows[i] = sweep_point(s.link, s.actors, ratios[i],
                          rng::substream_seed(s.seed, i),
                          static_cast<std::size_t>(s.sweep_blocks));
  });
  std::ostringstream os;
  write_sweep_csv(rows, os);
  detail::write_file(dir / "sweep.csv", os.str());
  return rows;
}

// ---------------------------------------------------------------------------

struct ImageOutcome {
  Matrix alice_recon;
  Matrix eve_recon;
  double alice_mae = 1.0;
  double alice_corr = 0.0;
  double eve_corr = 0.0;
  CorrelationBaseline baseline;
  bool eve_within_null = false;
};

inline ImageOutcome send_image(const Scenario& s,
                               const std::filesystem::path& dir) {
  if (!s.image_path) throw config_error("payload.image is required");
  std::ifstream in(*s.image_path, std::ios::binary);
  if (!in) throw config_error("cannot open image: " + *s.image_path);
  ImageRaster raster{read_pgm(in), s.pixel_pitch, s.scan_speed};

  const auto geometry = make_scan_geometry(
      raster, s.dwell, static_cast<std::size_t>(s.calib_events));
  const auto [rate_a, rate_e] =
      image_rate_schedules(s.link, s.actors, raster, geometry);
  const auto [alice, eve] =
      dual_sample(rate_a, rate_e, s.bin_duration, s.seed, s.dark_rate);

  ImageOutcome out;
  out.alice_recon = reconstruct_image(alice, geometry);
  out.eve_recon = reconstruct_image(eve, geometry);

  double mae = 0.0;
  for (std::size_t i = 0; i < raster.transmission.size(); ++i)
    mae += std::abs(out.alice_recon.data[i] - raster.transmission.data[i]);
  out.alice_mae = mae / static_cast<double>(raster.transmission.size());

  // A reconstruction with no variation carries no information at all;
  // treat its correlation with the mask as zero.
  const auto corr_or_zero = [&](const Matrix& m) {
    try {
      return correlation(m, raster.transmission);
    } catch (const std::domain_error&) {
      return 0.0;
    }
  };
  out.alice_corr = corr_or_zero(out.alice_recon);
  out.eve_corr = corr_or_zero(out.eve_recon);
  out.baseline = random_correlation_baseline(
      raster.transmission, s.null_trials, rng::substream_seed(s.seed, 0xba5e));
  out.eve_within_null =
      out.eve_corr >= out.baseline.lo && out.eve_corr <= out.baseline.hi;

  std::ostringstream pa;
  write_pgm(out.alice_recon, pa);
  detail::write_file(dir / "alice_recon.pgm", pa.str());
  std::ostringstream pe;
  write_pgm(out.eve_recon, pe);
  detail::write_file(dir / "eve_recon.pgm", pe.str());

  std::ostringstream audit;
  audit << "alice_mae=" << text::format_double(out.alice_mae) << "\n"
        << "alice_corr=" << text::format_double(out.alice_corr) << "\n"
        << "eve_corr=" << text::format_double(out.eve_corr) << "\n"
        << "null_trials=" << text::format_u64(out.baseline.n_trials) << "\n"
        << "null_mean=" << text::format_double(out.baseline.mean) << "\n"
        << "null_std=" << text::format_double(out.baseline.stddev) << "\n"
        << "null_lo=" << text::format_double(out.baseline.lo) << "\n"
        << "null_hi=" << text::format_double(out.baseline.hi) << "\n"
        << "eve_within_null=" << (out.eve_within_null ? "true" : "false")
        << "\n";
  detail::write_file(dir / "correlation_audit.txt", audit.str());
  return out;
}

inline ImageOutcome run_send_image(const Scenario& s) {
  const auto dir = detail::prepare_out_dir(s);
  return send_image(s, dir);
}

// ---------------------------------------------------------------------------

inline EyeDiagram run_eye(const Scenario& s) {
  const auto dir = detail::prepare_out_dir(s);
  const auto pattern = alternating_pattern(
      s.kind, static_cast<std::size_t>(s.eye_bits), s.bit_duration);
  const auto [rate_a, rate_e] = s.rise_time > 0.0
      ? apply_transition(s.link, s.actors, pattern, {s.rise_time})
      : symbol_rate_schedules(s.link, s.actors, pattern);
  const auto trace = sample_trace(rate_a, s.bin_duration, s.seed,
                                  StreamLabel::alice, s.dark_rate);
  const auto eye = build_eye(trace, 1.0 / s.bit_duration, 0.0);

  std::ostringstream os;
  write_eye_csv(eye, os);
  detail::write_file(dir / "eye.csv", os.str());
  std::ostringstream ms;
  write_eye_metrics_csv(eye, ms);
  detail::write_file(dir / "eye_metrics.csv", ms.str());
  return eye;
}

// ---------------------------------------------------------------------------

struct SecuritySummary {
  double threshold = 0.0;        ///< approximate form, C_comm / 2
  double threshold_exact = 0.0;  ///< (C_comm - 1) / 2
  double actual_ratio = 0.0;
  double snr_eve_value = 0.0;
  bool secure = false;
  DfgReport dfg;

  std::string to_text() const {
    std::ostringstream os;
    os << "secure: " << (secure ? "true" : "false") << "\n"
       << "threshold ratio: " << text::format_double(threshold) << "\n"
       << "threshold ratio exact: " << text::format_double(threshold_exact)
       << "\n"
       << "actual ratio: " << text::format_double(actual_ratio) << "\n"
       << "snr_eve: " << text::format_double(snr_eve_value) << "\n"
       << "dfg rate: " << text::format_double(dfg.c_dfg_rate) << " 1/s\n"
       << "dfg negligible: " << (dfg.negligible ? "true" : "false") << "\n";
    return os.str();
  }
};

/// Pure evaluation used by the CLI and by fuzz tests.
inline SecuritySummary security_summary(const Scenario& s) {
  SecuritySummary out;
  out.threshold = security_threshold(s.link, s.actors);
  out.threshold_exact = security_threshold_exact(s.link, s.actors);
  out.actual_ratio = s.actors.n_class / s.link.n_quantum;
  out.snr_eve_value = snr_eve(s.link, s.actors);
  out.secure = is_secure(s.link, s.actors);
  out.dfg = dfg_check(s.pump_rate, s.link, s.actors);
  return out;
}

inline SecuritySummary run_security_check(const Scenario& s) {
  const auto dir = detail::prepare_out_dir(s);
  const auto summary = security_summary(s);
  detail::write_file(dir / "security.txt", summary.to_text());
  return summary;
}

}  // namespace runner
}  // namespace qlink
