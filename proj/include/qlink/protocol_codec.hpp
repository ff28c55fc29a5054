#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlink/count_engine.hpp"
#include "qlink/link_model.hpp"
#include "qlink/matrix.hpp"
#include "qlink/symbols.hpp"

namespace qlink {

/// Messages and images in, symbol schedules out; count traces in, bits and
/// transmission estimates out.

/// Raised when the decoder cannot separate the preamble levels, i.e. the
/// trace carries no usable calibration (what a jammed interceptor sees).
struct calibration_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultPreambleLen = 8;

/// MSB-first 8-bit expansion; ASCII only.
inline std::vector<int> text_to_bits(const std::string& message) {
  if (message.empty())
    throw std::invalid_argument("message must be non-empty");
  std::vector<int> bits;
  bits.reserve(message.size() * 8);
  for (const unsigned char ch : message) {
    if (ch > 127)
      throw std::invalid_argument("message must be ASCII (byte > 127)");
    for (int b = 7; b >= 0; --b) bits.push_back((ch >> b) & 1);
  }
  return bits;
}

inline std::string bits_to_text(const std::vector<int>& bits) {
  if (bits.empty() || bits.size() % 8 != 0)
    throw std::invalid_argument("bit count must be a positive multiple of 8");
  std::string out;
  out.reserve(bits.size() / 8);
  for (std::size_t i = 0; i < bits.size(); i += 8) {
    unsigned ch = 0;
    for (std::size_t b = 0; b < 8; ++b) ch = (ch << 1) | (bits[i + b] & 1);
    out.push_back(static_cast<char>(ch));
  }
  return out;
}

/// Message -> symbol schedule. A 1 0 1 0 ... calibration preamble is
/// prepended so the decoder can learn the two levels and the threshold.
inline SymbolSchedule encode_text(const std::string& message,
                                  EncodingKind kind, double bit_duration,
                                  std::size_t preamble_len =
                                      kDefaultPreambleLen) {
  if (!(bit_duration > 0.0))
    throw std::invalid_argument("bit_duration must be > 0");
  const auto payload = text_to_bits(message);
  SymbolSchedule s;
  s.preamble_len = preamble_len;
  s.symbols.reserve(preamble_len + payload.size());
  for (std::size_t i = 0; i < preamble_len; ++i)
    s.symbols.push_back(
        symbol_for_bit(kind, i % 2 == 0 ? 1 : 0, bit_duration));
  for (const int bit : payload)
    s.symbols.push_back(symbol_for_bit(kind, bit, bit_duration));
  detail::validate(s);
  return s;
}

/// What the decoder needs to know about the schedule it is reading.
struct DecodeMeta {
  double bit_duration = 1.0;
  std::size_t preamble_len = kDefaultPreambleLen;
  std::size_t payload_bits = 0;
  double guard_fraction = 0.10;  ///< trimmed at each bit edge
};

struct DecodeResult {
  std::vector<int> bits;         ///< payload hard decisions
  std::vector<double> soft;      ///< (level - threshold) / (level1 - level0)
  double level1 = 0.0;           ///< preamble mean of the 1 bits
  double level0 = 0.0;
  double threshold = 0.0;
};

namespace detail {

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Average count level inside each bit window, threshold learned from the
/// preamble, hard bits plus normalized soft scores out.
inline DecodeResult decode_trace(const CountTrace& trace,
                                 const DecodeMeta& meta,
                                 double clock_offset = 0.0) {
  if (!(meta.bit_duration > 0.0))
    throw std::invalid_argument("bit_duration must be > 0");
  if (meta.preamble_len < 4)
    throw std::invalid_argument("preamble too short to calibrate (need >= 4)");
  if (meta.payload_bits == 0)
    throw std::invalid_argument("payload_bits must be > 0");
  if (!(meta.guard_fraction >= 0.0 && meta.guard_fraction < 0.5))
    throw std::invalid_argument("guard_fraction must be in [0, 0.5)");
  const std::size_t total_bits = meta.preamble_len + meta.payload_bits;
  const double needed =
      clock_offset + static_cast<double>(total_bits) * meta.bit_duration;
  if (needed > trace.duration() + 0.5 * trace.bin_duration)
    throw std::invalid_argument("trace does not span the full schedule");

  // Per-bit level = mean count of the bins whose centers fall inside the
  // guarded window.
  std::vector<double> level(total_bits, 0.0);
  const double guard = meta.guard_fraction * meta.bit_duration;
  for (std::size_t k = 0; k < total_bits; ++k) {
    const double w0 =
        clock_offset + static_cast<double>(k) * meta.bit_duration + guard;
    const double w1 = w0 + meta.bit_duration - 2.0 * guard;
    double sum = 0.0;
    std::size_t n = 0;
    auto first = static_cast<std::size_t>(
        std::max(0.0, std::floor((w0 - trace.start_time) /
                                 trace.bin_duration)));
    for (std::size_t i = first; i < trace.bins.size(); ++i) {
      const double center = trace.start_time +
                            (static_cast<double>(i) + 0.5) *
                                trace.bin_duration;
      if (center >= w1) break;
      if (center >= w0) {
        sum += static_cast<double>(trace.bins[i]);
        ++n;
      }
    }
    if (n == 0)
      throw std::invalid_argument(
          "bit window contains no full bins (bit_duration too small?)");
    level[k] = sum / static_cast<double>(n);
  }

  // Preamble is 1 0 1 0 ...: even positions carry 1.
  std::vector<double> ones;
  std::vector<double> zeros;
  for (std::size_t k = 0; k < meta.preamble_len; ++k)
    (k % 2 == 0 ? ones : zeros).push_back(level[k]);
  const double l1 = detail::mean(ones);
  const double l0 = detail::mean(zeros);
  const double spread = std::sqrt(detail::sample_std(ones) *
                                      detail::sample_std(ones) +
                                  detail::sample_std(zeros) *
                                      detail::sample_std(zeros));
  const double separation = l1 - l0;
  if (!(separation > 0.0) || separation < spread)
    throw calibration_error(
        "preamble levels not separated by one combined standard deviation");

  DecodeResult out;
  out.level1 = l1;
  out.level0 = l0;
  out.threshold = 0.5 * (l1 + l0);
  out.bits.reserve(meta.payload_bits);
  out.soft.reserve(meta.payload_bits);
  for (std::size_t k = meta.preamble_len; k < total_bits; ++k) {
    out.bits.push_back(level[k] >= out.threshold ? 1 : 0);
    out.soft.push_back((level[k] - out.threshold) / separation);
  }
  return out;
}

inline double bit_error_rate(const std::vector<int>& decoded,
                             const std::vector<int>& reference) {
  if (decoded.size() != reference.size() || decoded.empty())
    throw std::invalid_argument("bit sequences must have equal nonzero size");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < decoded.size(); ++i)
    if (decoded[i] != reference[i]) ++errors;
  return static_cast<double>(errors) / static_cast<double>(decoded.size());
}

// ---------------------------------------------------------------------------
// Image transfer

/// Object to image: a transmission function scanned across Bob's path.
struct ImageRaster {
  Matrix transmission;          ///< entries in [0, 1]
  double pixel_pitch = 0.5;     ///< mm
  double scan_speed = 1.0;      ///< mm/s
};

namespace detail {

inline void validate(const ImageRaster& r) {
  if (r.transmission.size() == 0)
    throw std::invalid_argument("raster must be non-empty");
  if (!(r.pixel_pitch > 0.0) || !(r.scan_speed > 0.0))
    throw std::invalid_argument("pixel_pitch and scan_speed must be > 0");
  for (const double t : r.transmission.data)
    if (!(t >= 0.0 && t <= 1.0))
      throw std::domain_error("transmission entries must be in [0, 1]");
}

}  // namespace detail

struct ScanEvent {
  std::size_t row = 0;
  std::size_t col = 0;
  double alpha_sq = 0.0;  ///< 1 - transmission at this dwell position
};

/// Row-major horizontal scan. The detector integrates for `dwell` seconds
/// per event, so each pixel column yields pitch / (speed * dwell) events.
inline std::vector<ScanEvent> image_schedule(const ImageRaster& raster,
                                             double dwell) {
  detail::validate(raster);
  if (!(dwell > 0.0)) throw std::invalid_argument("dwell must be > 0");
  const auto per_pixel = static_cast<std::size_t>(std::max(
      1.0, std::round(raster.pixel_pitch / (raster.scan_speed * dwell))));
  std::vector<ScanEvent> events;
  events.reserve(raster.transmission.size() * per_pixel);
  for (std::size_t r = 0; r < raster.transmission.rows; ++r)
    for (std::size_t c = 0; c < raster.transmission.cols; ++c)
      for (std::size_t k = 0; k < per_pixel; ++k)
        events.push_back({r, c, 1.0 - raster.transmission.at(r, c)});
  return events;
}

/// Geometry the reconstruction needs: scan shape plus the calibration
/// frames (all-open then, at the end, all-blocked) wrapped around the scan.
struct ScanGeometry {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t events_per_pixel = 1;
  double dwell = 0.05;
  std::size_t calib_events = 20;  ///< reference events at each schedule edge
};

inline ScanGeometry make_scan_geometry(const ImageRaster& raster, double dwell,
                                       std::size_t calib_events = 20) {
  detail::validate(raster);
  if (!(dwell > 0.0)) throw std::invalid_argument("dwell must be > 0");
  ScanGeometry g;
  g.rows = raster.transmission.rows;
  g.cols = raster.transmission.cols;
  g.events_per_pixel = static_cast<std::size_t>(std::max(
      1.0, std::round(raster.pixel_pitch / (raster.scan_speed * dwell))));
  g.dwell = dwell;
  g.calib_events = calib_events;
  return g;
}

/// Rate schedules for a full image transfer: open reference frames, the
/// raster scan, then blocked reference frames. Works for gray levels too;
/// each dwell is an amplitude setting alpha^2 = 1 - transmission.
inline std::pair<RateSchedule, RateSchedule> image_rate_schedules(
    const LinkParams& p, const ChannelActors& a, const ImageRaster& raster,
    const ScanGeometry& geometry) {
  const auto events = image_schedule(raster, geometry.dwell);
  RateSchedule ra;
  RateSchedule re;
  const auto push = [&](double alpha_sq) {
    ChannelActors a2 = a;
    a2.alpha_sq = alpha_sq;
    ra.segments.push_back({geometry.dwell, alice_rate(p, a2)});
    re.segments.push_back({geometry.dwell, eve_rate(p, a2)});
  };
  for (std::size_t i = 0; i < geometry.calib_events; ++i) push(0.0);
  for (const auto& e : events) push(e.alpha_sq);
  for (std::size_t i = 0; i < geometry.calib_events; ++i) push(1.0);
  return {ra, re};
}

/// Per-pixel mean counts normalized by the open/blocked reference levels,
/// clamped to [0, 1]. Exact for binary objects; gray levels are compressed
/// by the interferometric response on Alice's side.
inline Matrix reconstruct_image(const CountTrace& trace,
                                const ScanGeometry& g) {
  if (g.rows == 0 || g.cols == 0 || g.events_per_pixel == 0 ||
      g.calib_events == 0)
    throw std::invalid_argument("degenerate scan geometry");
  const double bpe_f = g.dwell / trace.bin_duration;
  const auto bins_per_event =
      static_cast<std::size_t>(std::llround(bpe_f));
  if (bins_per_event == 0 ||
      std::abs(bpe_f - static_cast<double>(bins_per_event)) > 1e-6)
    throw std::invalid_argument(
        "dwell must be a whole number of trace bins");
  const std::size_t n_events =
      2 * g.calib_events + g.rows * g.cols * g.events_per_pixel;
  if (trace.bins.size() < n_events * bins_per_event)
    throw std::invalid_argument("trace shorter than the scan geometry");

  std::vector<double> event_counts(n_events, 0.0);
  for (std::size_t e = 0; e < n_events; ++e) {
    double s = 0.0;
    for (std::size_t b = 0; b < bins_per_event; ++b)
      s += static_cast<double>(trace.bins[e * bins_per_event + b]);
    event_counts[e] = s;
  }

  const auto mean_range = [&](std::size_t from, std::size_t count) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += event_counts[from + i];
    return s / static_cast<double>(count);
  };
  const double open_ref = mean_range(0, g.calib_events);
  const double blocked_ref =
      mean_range(n_events - g.calib_events, g.calib_events);
  const double span = open_ref - blocked_ref;

  Matrix out(g.rows, g.cols, 0.5);
  if (span == 0.0) return out;  // references indistinguishable
  std::size_t e = g.calib_events;
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      const double m = mean_range(e, g.events_per_pixel);
      e += g.events_per_pixel;
      out.at(r, c) = std::clamp((m - blocked_ref) / span, 0.0, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite switching of the keying element

struct TransitionModel {
  double rise_time = 0.0;  ///< seconds; 0 = instantaneous; linear ramp
};

/// Rate schedules with symbol changes replaced by linear ramps of the
/// encoding parameter over rise_time. The ramp starts at the symbol
/// boundary and is discretized into short constant steps; the rate at each
/// step comes from the link model, so a phase ramp traces the cosine.
inline std::pair<RateSchedule, RateSchedule> apply_transition(
    const LinkParams& p, const ChannelActors& a, const SymbolSchedule& symbols,
    const TransitionModel& tm) {
  detail::validate(symbols);
  if (!(tm.rise_time >= 0.0))
    throw std::invalid_argument("rise_time must be >= 0");
  if (tm.rise_time == 0.0) return symbol_rate_schedules(p, a, symbols);
  for (const auto& s : symbols.symbols)
    if (!(tm.rise_time < s.duration))
      throw std::invalid_argument(
          "rise_time must be shorter than every symbol");

  constexpr std::size_t kRampSteps = 24;
  RateSchedule ra;
  RateSchedule re;
  // Unlike symbol_rates this accepts intermediate (gray) parameter values.
  const auto rates_for_value = [&](EncodingKind kind, double value) {
    LinkParams pp = p;
    ChannelActors aa = a;
    if (kind == EncodingKind::amplitude)
      aa.alpha_sq = value;
    else
      pp.phi_b = p.phi - p.phi_a - value;
    return std::make_pair(alice_rate(pp, aa), eve_rate(pp, aa));
  };
  const auto push = [&](double duration, std::pair<double, double> r) {
    ra.segments.push_back({duration, r.first});
    re.segments.push_back({duration, r.second});
  };

  double prev_value = symbols.symbols.front().value;
  for (const auto& sym : symbols.symbols) {
    if (sym.value != prev_value) {
      const double step = tm.rise_time / static_cast<double>(kRampSteps);
      for (std::size_t i = 0; i < kRampSteps; ++i) {
        const double frac =
            (static_cast<double>(i) + 0.5) / static_cast<double>(kRampSteps);
        push(step, rates_for_value(
                       sym.kind, prev_value + (sym.value - prev_value) * frac));
      }
      push(sym.duration - tm.rise_time, rates_for_value(sym.kind, sym.value));
    } else {
      push(sym.duration, rates_for_value(sym.kind, sym.value));
    }
    prev_value = sym.value;
  }
  return {ra, re};
}

// ---------------------------------------------------------------------------
// Portable graymap I/O (P2 and P5), normalized to [0, 1]

inline Matrix read_pgm(std::istream& is) {
  const auto next_token = [&is]() {
    std::string tok;
    for (;;) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
        continue;
      }
      if (std::isspace(c)) {
        is.get();
        continue;
      }
      break;
    }
    is >> tok;
    if (!is) throw std::invalid_argument("truncated PGM header");
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5")
    throw std::invalid_argument("not a P2/P5 portable graymap");
  const auto cols = static_cast<std::size_t>(std::stoul(next_token()));
  const auto rows = static_cast<std::size_t>(std::stoul(next_token()));
  const auto maxval = std::stoul(next_token());
  if (cols == 0 || rows == 0 || maxval == 0 || maxval > 65535)
    throw std::invalid_argument("bad PGM dimensions or maxval");

  Matrix m(rows, cols);
  if (magic == "P2") {
    for (auto& v : m.data) {
      unsigned long raw = 0;
      if (!(is >> raw)) throw std::invalid_argument("truncated PGM data");
      v = static_cast<double>(raw) / static_cast<double>(maxval);
    }
  } else {
    is.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    for (auto& v : m.data) {
      unsigned long raw = 0;
      for (int b = 0; b < bytes; ++b) {
        const int c = is.get();
        if (c == EOF) throw std::invalid_argument("truncated PGM data");
        raw = (raw << 8) | static_cast<unsigned>(c);
      }
      v = static_cast<double>(raw) / static_cast<double>(maxval);
    }
  }
  for (auto& v : m.data) v = std::clamp(v, 0.0, 1.0);
  return m;
}

/// ASCII P2, maxval 255 (byte-stable output for a given matrix).
inline void write_pgm(const Matrix& m, std::ostream& os) {
  if (m.size() == 0) throw std::invalid_argument("empty matrix");
  os << "P2\n" << m.cols << ' ' << m.rows << "\n255\n";
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) os << ' ';
      os << std::lround(std::clamp(m.at(r, c), 0.0, 1.0) * 255.0);
    }
    os << "\n";
  }
}

}  // namespace qlink
