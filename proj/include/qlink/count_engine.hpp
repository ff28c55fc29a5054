#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qlink/link_model.hpp"
#include "qlink/rng.hpp"
#include "qlink/symbols.hpp"
#include "qlink/text.hpp"

namespace qlink {

/// Stochastic side of the simulator: expected rates in, reproducible
/// Poisson count traces out.

/// Piecewise-constant expected rate over time.
struct RateSegment {
  double duration = 0.0;  ///< seconds
  double rate = 0.0;      ///< 1/s
};

struct RateSchedule {
  std::vector<RateSegment> segments;

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration;
    return t;
  }
};

enum class StreamLabel { alice, eve };

inline const char* to_string(StreamLabel l) {
  return l == StreamLabel::alice ? "alice" : "eve";
}

/// Time-binned detector counts with full RNG provenance. `seed` is the
/// master seed of the run; the per-detector sub-stream is derived from it
/// and `stream_label`.
struct CountTrace {
  std::vector<std::uint64_t> bins;
  double bin_duration = 0.05;
  double start_time = 0.0;
  std::uint64_t seed = 0;
  StreamLabel stream_label = StreamLabel::alice;

  double duration() const {
    return static_cast<double>(bins.size()) * bin_duration;
  }
};

/// Exact Poisson sample with mean `lambda`.
///
/// Below lambda = 10: inversion by sequential search on the CDF. From 10
/// up: Hormann's PTRS transformed rejection, which is exact (no normal
/// approximation) and O(1), good through lambda ~ 1e9 and beyond.
template <class Stream>
std::uint64_t poisson_draw(double lambda, Stream& stream) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::domain_error("poisson_draw: lambda must be finite and >= 0");
  if (lambda == 0.0) return 0;

  if (lambda < 10.0) {
    const double u = stream.uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cdf += p;
      if (k > 400) break;  // cdf saturated in floating point
    }
    return k;
  }

  const double log_lambda = std::log(lambda);
  const double b = 0.931 + 2.53 * std::sqrt(lambda);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = stream.uniform() - 0.5;
    const double v = stream.uniform();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (kf < 0.0) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
    if (us < 0.013 && v > us) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        kf * log_lambda - lambda - detail::log_gamma(kf + 1.0))
      return static_cast<std::uint64_t>(kf);
  }
}

/// Optional slow multiplicative drift applied to the optical rate, e.g. to
/// mimic source intensity wandering. Receives the bin-center time.
using DriftHook = std::function<double(double)>;

namespace detail {

inline void validate(const RateSchedule& s) {
  if (s.segments.empty())
    throw std::invalid_argument("rate schedule must be non-empty");
  for (const auto& seg : s.segments) {
    if (!(seg.duration > 0.0))
      throw std::invalid_argument("rate segment duration must be > 0");
    if (!(seg.rate >= 0.0) || !std::isfinite(seg.rate))
      throw std::domain_error("rate must be finite and >= 0");
  }
}

}  // namespace detail

/// Sample one detector's counts. Bin means are the exact integral of the
/// piecewise-constant rate across segment boundaries (symbols need not be
/// bin-aligned); only whole bins are emitted. `dark_rate` adds a constant
/// background; the drift hook rescales the scheduled (optical) part only.
inline CountTrace sample_trace(const RateSchedule& schedule,
                               double bin_duration, std::uint64_t seed,
                               StreamLabel label = StreamLabel::alice,
                               double dark_rate = 0.0,
                               const DriftHook& drift = {}) {
  detail::validate(schedule);
  if (!(bin_duration > 0.0))
    throw std::invalid_argument("bin_duration must be > 0");
  if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate))
    throw std::domain_error("dark_rate must be finite and >= 0");
  const double total = schedule.total_duration();
  if (bin_duration > total * (1.0 + 1e-12))
    throw std::invalid_argument(
        "bin_duration larger than the total schedule duration");

  const auto n_bins =
      static_cast<std::size_t>(std::floor(total / bin_duration + 1e-9));
  auto stream = rng::stream::substream(
      seed, label == StreamLabel::alice ? 0 : 1);

  CountTrace trace;
  trace.bins.reserve(n_bins);
  trace.bin_duration = bin_duration;
  trace.seed = seed;
  trace.stream_label = label;

  std::size_t seg = 0;
  double seg_start = 0.0;
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double t0 = static_cast<double>(i) * bin_duration;
    const double t1 = t0 + bin_duration;
    double integral = 0.0;
    // Walk segments overlapping [t0, t1).
    while (seg < schedule.segments.size()) {
      const double seg_end = seg_start + schedule.segments[seg].duration;
      const double lo = std::max(t0, seg_start);
      const double hi = std::min(t1, seg_end);
      if (hi > lo) integral += schedule.segments[seg].rate * (hi - lo);
      if (seg_end >= t1) break;
      seg_start = seg_end;
      ++seg;
    }
    if (drift) integral *= drift(t0 + 0.5 * bin_duration);
    trace.bins.push_back(poisson_draw(integral + dark_rate * bin_duration,
                                      stream));
  }
  return trace;
}

/// Sample Alice's and Eve's detectors from their own rate schedules with
/// statistically independent sub-streams of one master seed.
inline std::pair<CountTrace, CountTrace> dual_sample(
    const RateSchedule& alice, const RateSchedule& eve, double bin_duration,
    std::uint64_t seed, double dark_rate = 0.0, const DriftHook& drift = {}) {
  return {sample_trace(alice, bin_duration, seed, StreamLabel::alice,
                       dark_rate, drift),
          sample_trace(eve, bin_duration, seed, StreamLabel::eve, dark_rate,
                       drift)};
}

/// Rate schedules induced by a symbol schedule (instantaneous switching).
inline std::pair<RateSchedule, RateSchedule> symbol_rate_schedules(
    const LinkParams& p, const ChannelActors& a,
    const SymbolSchedule& symbols) {
  detail::validate(symbols);
  RateSchedule ra;
  RateSchedule re;
  ra.segments.reserve(symbols.symbols.size());
  re.segments.reserve(symbols.symbols.size());
  for (const auto& sym : symbols.symbols) {
    const auto [r_alice, r_eve] = symbol_rates(p, a, sym);
    ra.segments.push_back({sym.duration, r_alice});
    re.segments.push_back({sym.duration, r_eve});
  }
  return {ra, re};
}

/// Both detectors' traces while Bob keys `symbols` over the link.
inline std::pair<CountTrace, CountTrace> dual_trace(
    const LinkParams& p, const ChannelActors& a, const SymbolSchedule& symbols,
    double bin_duration, std::uint64_t seed, double dark_rate = 0.0) {
  const auto [ra, re] = symbol_rate_schedules(p, a, symbols);
  return dual_sample(ra, re, bin_duration, seed, dark_rate);
}

/// CSV form: one metadata comment line, then time_s,counts rows. Times are
/// bin start times.
inline void write_trace_csv(const CountTrace& t, std::ostream& os) {
  os << "# bin_duration_s=" << text::format_double(t.bin_duration)
     << " seed=" << text::format_u64(t.seed)
     << " stream_label=" << to_string(t.stream_label)
     << " start_time_s=" << text::format_double(t.start_time) << "\n";
  os << "time_s,counts\n";
  for (std::size_t i = 0; i < t.bins.size(); ++i) {
    os << text::format_double(t.start_time +
                              static_cast<double>(i) * t.bin_duration)
       << ',' << t.bins[i] << "\n";
  }
}

}  // namespace qlink
