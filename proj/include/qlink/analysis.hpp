#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "qlink/count_engine.hpp"
#include "qlink/link_model.hpp"
#include "qlink/matrix.hpp"
#include "qlink/rng.hpp"
#include "qlink/text.hpp"

namespace qlink {

/// Estimators and experiment reproductions on top of sampled traces:
/// count-level SNR, jamming-ratio sweeps, eye diagrams, correlation audit.

/// Measured SNR of the two communication levels.
struct SnrEstimate {
  double value = 0.0;     ///< (C1 - C0) / sigma(C1)
  double c1_mean = 0.0;   ///< mean block counts at level 1
  double c0_mean = 0.0;
  double sigma_c1 = 0.0;  ///< std of the level-1 block counts
  double sigma_c0 = 0.0;
  std::size_t n_blocks = 0;

  /// Error on the estimate from the level means alone (the error on the
  /// measured sigma itself is neglected).
  double uncertainty() const {
    return std::sqrt(sigma_c1 * sigma_c1 + sigma_c0 * sigma_c0) /
           (sigma_c1 * std::sqrt(static_cast<double>(n_blocks)));
  }
};

namespace detail {

struct BlockStats {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample std over blocks
};

inline BlockStats block_stats(const CountTrace& t, double block,
                              std::size_t n_blocks) {
  const double bpb_f = block / t.bin_duration;
  const auto bpb = static_cast<std::size_t>(std::llround(bpb_f));
  if (bpb == 0 || std::abs(bpb_f - static_cast<double>(bpb)) >
                      1e-9 * std::max(1.0, bpb_f))
    throw std::invalid_argument(
        "block must be a whole multiple of bin_duration");
  if (n_blocks < 2) throw std::invalid_argument("need at least 2 blocks");
  if (t.bins.size() < n_blocks * bpb)
    throw std::invalid_argument("trace shorter than n_blocks * block");
  std::vector<double> sums(n_blocks, 0.0);
  for (std::size_t b = 0; b < n_blocks; ++b)
    for (std::size_t i = 0; i < bpb; ++i)
      sums[b] += static_cast<double>(t.bins[b * bpb + i]);
  BlockStats s;
  for (const double x : sums) s.mean += x;
  s.mean /= static_cast<double>(n_blocks);
  double ss = 0.0;
  for (const double x : sums) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(n_blocks - 1));
  return s;
}

}  // namespace detail

/// Count-level SNR estimator: counts are aggregated into blocks of `block`
/// seconds, C1/C0 are the block means of the two traces and the noise is
/// the standard deviation of the level-1 blocks.
inline SnrEstimate estimate_snr(const CountTrace& trace_c1,
                                const CountTrace& trace_c0,
                                double block = 1.0,
                                std::size_t n_blocks = 20) {
  const auto s1 = detail::block_stats(trace_c1, block, n_blocks);
  const auto s0 = detail::block_stats(trace_c0, block, n_blocks);
  if (s1.stddev == 0.0)
    throw std::domain_error("sigma(C1) is zero; SNR undefined");
  SnrEstimate e;
  e.c1_mean = s1.mean;
  e.c0_mean = s0.mean;
  e.sigma_c1 = s1.stddev;
  e.sigma_c0 = s0.stddev;
  e.n_blocks = n_blocks;
  e.value = (s1.mean - s0.mean) / s1.stddev;
  return e;
}

/// One point of the jamming sweep.
struct SweepRow {
  double ratio = 0.0;  ///< N_class / N_quantum
  double snr_classical = 0.0;
  double snr_classical_err = 0.0;
  double snr_quantum = 0.0;
  double snr_quantum_err = 0.0;
  double analytic_classical = 0.0;
  double analytic_quantum = 0.0;
};

/// One simulated sweep point: C1/C0 traces for both detectors under
/// amplitude keying at N_class = ratio * N_quantum. Blocks span t_meas so
/// the measured values sit on the same scale as the analytic overlay; the
/// noise is the quadrature sum of the deviations of both levels, matching
/// the analytic definition.
inline SweepRow sweep_point(const LinkParams& p, const ChannelActors& a,
                            double ratio, std::uint64_t seed,
                            std::size_t n_blocks = 20) {
  detail::validate(p);
  detail::validate(a);
  if (p.n_quantum <= 0.0)
    throw std::domain_error("n_quantum must be > 0 for a sweep");
  if (!(ratio >= 0.0) || !std::isfinite(ratio))
    throw std::domain_error("ratio must be finite and >= 0");

  ChannelActors at = a;
  at.n_class = ratio * p.n_quantum;
  ChannelActors open = at;
  open.alpha_sq = 0.0;
  ChannelActors blocked = at;
  blocked.alpha_sq = 1.0;

  const double block = p.t_meas;
  RateSchedule sched;
  sched.segments = {{static_cast<double>(n_blocks) * block, 0.0}};
  const auto run = [&](double rate, std::uint64_t tag, StreamLabel label) {
    sched.segments[0].rate = rate;
    return detail::block_stats(
        sample_trace(sched, block, rng::substream_seed(seed, tag), label),
        block, n_blocks);
  };
  const auto e1 = run(eve_rate(p, open), 0, StreamLabel::eve);
  const auto e0 = run(eve_rate(p, blocked), 1, StreamLabel::eve);
  const auto a1 = run(alice_rate(p, open), 2, StreamLabel::alice);
  const auto a0 = run(alice_rate(p, blocked), 3, StreamLabel::alice);

  const auto quad = [](const detail::BlockStats& x,
                       const detail::BlockStats& y) {
    return std::sqrt(x.stddev * x.stddev + y.stddev * y.stddev);
  };
  const double noise_e = quad(e1, e0);
  const double noise_a = quad(a1, a0);
  if (noise_e == 0.0 || noise_a == 0.0)
    throw std::domain_error("zero count variance at a sweep point");

  // Error from the level means plus the spread of the sigma estimate.
  const auto err_of = [n_blocks](double value) {
    const double n = static_cast<double>(n_blocks);
    return std::sqrt(1.0 / n + value * value / (2.0 * (n - 1.0)));
  };

  SweepRow row;
  row.ratio = ratio;
  row.snr_classical = (e1.mean - e0.mean) / noise_e;
  row.snr_classical_err = err_of(row.snr_classical);
  row.snr_quantum = (a1.mean - a0.mean) / noise_a;
  row.snr_quantum_err = err_of(row.snr_quantum);
  row.analytic_classical = snr_eve(p, at);
  row.analytic_quantum = snr_alice_amplitude(p, at);
  return row;
}

inline std::vector<SweepRow> sweep_snr(const LinkParams& p,
                                       const ChannelActors& a,
                                       const std::vector<double>& ratios,
                                       std::uint64_t seed,
                                       std::size_t n_blocks = 20) {
  std::vector<SweepRow> rows(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i)
    rows[i] = sweep_point(p, a, ratios[i], rng::substream_seed(seed, i),
                          n_blocks);
  return rows;
}

// ---------------------------------------------------------------------------
// Eye diagrams

struct EyeMetrics {
  double vertical_opening = 0.0;    ///< fraction of the level swing
  double horizontal_opening = 0.0;  ///< fraction of the bit period
  double transition_fraction = 0.0; ///< 0->1 time over half a bit period
};

struct EyeDiagram {
  std::vector<std::vector<std::uint64_t>> segments;  ///< 3-bit windows
  double bin_duration = 0.05;
  double bit_rate = 1.0;
  EyeMetrics metrics;
};

namespace detail {

/// Linear interpolation of per-column values at bin-center times.
inline double interp_columns(const std::vector<double>& v, double bin,
                             double t) {
  const double x = t / bin - 0.5;
  if (x <= 0.0) return v.front();
  const auto n = v.size();
  if (x >= static_cast<double>(n - 1)) return v.back();
  const auto j = static_cast<std::size_t>(x);
  const double f = x - static_cast<double>(j);
  return v[j] * (1.0 - f) + v[j + 1] * f;
}

}  // namespace detail

/// Overlap a periodic 1 0 1 0 ... trace into 3-bit windows (each 1 0 1
/// window followed by its 0 1 0 successor) and measure the eye.
///
/// Definitions, since the metrics depend on them:
///  - segments are consecutive 3-bit windows starting at `clock`, snapped
///    to the bin grid; rails are classified by value at the eye center, so
///    the metrics do not depend on which window is called 1 0 1;
///  - vertical opening: (min upper rail - max lower rail) / (mean upper -
///    mean lower), rails interpolated at the center of the middle bit;
///  - horizontal opening: fraction of the middle bit period over which the
///    interpolated rails stay separated;
///  - transition: the upper-rail segments are aligned on their own 50%
///    crossings (so overlay timing jitter stays out of the number), their
///    mean waveform's 10-90% rise time is scaled to the full swing, and
///    one integration bin (what a clean step alone would measure) is
///    subtracted before normalizing by half a bit period.
inline EyeDiagram build_eye(const CountTrace& trace, double bit_rate,
                            double clock = 0.0,
                            std::size_t min_repetitions = 20) {
  if (!(bit_rate > 0.0)) throw std::invalid_argument("bit_rate must be > 0");
  if (!(clock >= 0.0) || clock >= trace.duration())
    throw std::invalid_argument("clock offset outside the trace");
  const double t_bit = 1.0 / bit_rate;
  const double t_group = 3.0 * t_bit;
  const double bin = trace.bin_duration;
  const auto cols =
      static_cast<std::size_t>(std::floor(t_group / bin + 1e-9));
  if (cols < 3)
    throw std::invalid_argument("need at least one bin per bit period");

  EyeDiagram eye;
  eye.bin_duration = bin;
  eye.bit_rate = bit_rate;
  for (std::size_t g = 0;; ++g) {
    const double t0 = clock + static_cast<double>(g) * t_group;
    const auto s = static_cast<std::size_t>(std::llround(t0 / bin));
    if (s + cols > trace.bins.size()) break;
    eye.segments.emplace_back(trace.bins.begin() + s,
                              trace.bins.begin() + s + cols);
  }
  if (eye.segments.size() < min_repetitions)
    throw std::invalid_argument("fewer than the required 3-bit repetitions");

  // Classify rails by value at the eye center.
  const double t_center = 1.5 * t_bit;
  std::vector<double> center_val(eye.segments.size());
  for (std::size_t i = 0; i < eye.segments.size(); ++i) {
    std::vector<double> v(eye.segments[i].begin(), eye.segments[i].end());
    center_val[i] = detail::interp_columns(v, bin, t_center);
  }
  const auto [lo_it, hi_it] =
      std::minmax_element(center_val.begin(), center_val.end());
  const double split = 0.5 * (*lo_it + *hi_it);
  std::vector<std::size_t> upper;
  std::vector<std::size_t> lower;
  for (std::size_t i = 0; i < center_val.size(); ++i)
    (center_val[i] >= split ? upper : lower).push_back(i);
  if (upper.empty() || lower.empty())
    throw std::invalid_argument("pattern/clock mismatch: one rail is empty");

  std::vector<double> min_upper(cols), mean_upper(cols), max_lower(cols),
      mean_lower(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double mn = 1e300, mu = 0.0, mx = -1e300, ml = 0.0;
    for (const auto i : upper) {
      const double x = static_cast<double>(eye.segments[i][j]);
      mn = std::min(mn, x);
      mu += x;
    }
    for (const auto i : lower) {
      const double x = static_cast<double>(eye.segments[i][j]);
      mx = std::max(mx, x);
      ml += x;
    }
    min_upper[j] = mn;
    mean_upper[j] = mu / static_cast<double>(upper.size());
    max_lower[j] = mx;
    mean_lower[j] = ml / static_cast<double>(lower.size());
  }

  const auto at = [&](const std::vector<double>& v, double t) {
    return detail::interp_columns(v, bin, t);
  };
  const double swing = at(mean_upper, t_center) - at(mean_lower, t_center);
  if (!(swing > 0.0))
    throw std::invalid_argument("pattern/clock mismatch: no level swing");

  eye.metrics.vertical_opening = std::clamp(
      (at(min_upper, t_center) - at(max_lower, t_center)) / swing, 0.0, 1.0);

  constexpr int kGrid = 2048;
  int open_points = 0;
  for (int i = 0; i < kGrid; ++i) {
    const double t = t_bit * (1.0 + (i + 0.5) / static_cast<double>(kGrid));
    if (at(min_upper, t) - at(max_lower, t) > 0.0) ++open_points;
  }
  eye.metrics.horizontal_opening =
      static_cast<double>(open_points) / static_cast<double>(kGrid);

  // Rising-edge width. Each upper segment is first located by its own 50%
  // crossing (the most noise-tolerant point of the edge); the segments are
  // then averaged in the aligned frame and the 10-90% width is read off
  // the clean mean.
  const double base = at(mean_lower, t_center);
  const double dt = t_center / 4096.0;
  // Crossings are accepted only when the waveform is still below the
  // threshold one bin earlier; an isolated noise dip does not count as
  // the edge.
  const auto backward_crossing = [&](const std::vector<double>& w,
                                     double cell, double threshold) {
    double prev_v = detail::interp_columns(w, cell, t_center);
    for (double t = t_center - dt; t >= 0.0; t -= dt) {
      const double v = detail::interp_columns(w, cell, t);
      if (v < threshold && prev_v >= threshold &&
          detail::interp_columns(w, cell, t - bin) < threshold)
        return t + dt * (threshold - v) / (prev_v - v);
      prev_v = v;
    }
    return -1.0;
  };

  std::vector<double> edges;
  std::vector<std::vector<double>> upper_waves;
  for (const auto i : upper) {
    std::vector<double> w(eye.segments[i].begin(), eye.segments[i].end());
    const double tau = backward_crossing(w, bin, base + 0.5 * swing);
    if (tau >= 0.0) {
      edges.push_back(tau);
      upper_waves.push_back(std::move(w));
    }
  }
  if (!edges.empty()) {
    std::vector<double> sorted_edges = edges;
    std::nth_element(sorted_edges.begin(),
                     sorted_edges.begin() + sorted_edges.size() / 2,
                     sorted_edges.end());
    const double reference = sorted_edges[sorted_edges.size() / 2];

    std::vector<double> aligned;  // mean waveform in the aligned frame
    const auto grid = static_cast<std::size_t>(cols * 8);
    aligned.assign(grid, 0.0);
    std::size_t used = 0;
    for (std::size_t k = 0; k < upper_waves.size(); ++k) {
      if (std::abs(edges[k] - reference) > 0.5 * t_bit) continue;  // outlier
      for (std::size_t j = 0; j < grid; ++j) {
        const double t = (static_cast<double>(j) + 0.5) /
                         static_cast<double>(grid) * (3.0 * t_bit);
        aligned[j] += detail::interp_columns(upper_waves[k], bin,
                                             t + (edges[k] - reference));
      }
      ++used;
    }
    if (used > 0) {
      for (auto& v : aligned) v /= static_cast<double>(used);
      const double cell = 3.0 * t_bit / static_cast<double>(grid);
      const double t90 = backward_crossing(aligned, cell,
                                           base + 0.90 * swing);
      const double t10 = backward_crossing(aligned, cell,
                                           base + 0.10 * swing);
      if (t90 >= 0.0 && t10 >= 0.0 && t90 > t10) {
        const double full_swing_time = (t90 - t10) / 0.8;
        // A step through one integrating bin measures exactly one bin
        // wide; remove that instrumental width.
        const double corrected = std::max(full_swing_time - bin, 0.0);
        eye.metrics.transition_fraction =
            std::clamp(corrected / (0.5 * t_bit), 0.0, 1.0);
      }
    }
  }
  return eye;
}

// ---------------------------------------------------------------------------
// Correlation audit

/// Pearson correlation over flattened entries.
inline double correlation(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("shape mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("need at least 2 elements");
  const auto is_flat = [](const Matrix& m) {
    const auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
    return *lo == *hi;
  };
  if (is_flat(a) || is_flat(b))
    throw std::domain_error("zero variance input");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.data[i] - ma;
    const double db = b.data[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw std::domain_error("zero variance input");
  return sab / std::sqrt(saa * sbb);
}

struct CorrelationBaseline {
  double mean = 0.0;
  double stddev = 0.0;
  double lo = 0.0;  ///< lower bound of the central coverage interval
  double hi = 0.0;
  std::size_t n_trials = 0;
};

/// Null distribution for the image-security audit: correlations of the
/// reference against uniform [0,1) matrices of the same shape.
inline CorrelationBaseline random_correlation_baseline(
    const Matrix& reference, std::size_t n_trials, std::uint64_t seed,
    double central_coverage = 0.99) {
  if (n_trials < 100)
    throw std::invalid_argument("n_trials must be >= 100");
  if (reference.size() < 2)
    throw std::invalid_argument("degenerate reference shape");
  if (!(central_coverage > 0.0 && central_coverage < 1.0))
    throw std::invalid_argument("central_coverage must be in (0, 1)");

  rng::stream stream(seed);
  Matrix trial(reference.rows, reference.cols);
  std::vector<double> corr(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) {
    for (auto& v : trial.data) v = stream.uniform();
    corr[t] = correlation(trial, reference);
  }

  CorrelationBaseline out;
  out.n_trials = n_trials;
  for (const double c : corr) out.mean += c;
  out.mean /= static_cast<double>(n_trials);
  double ss = 0.0;
  for (const double c : corr) ss += (c - out.mean) * (c - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(n_trials - 1));
  std::sort(corr.begin(), corr.end());
  const auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::clamp(
        std::floor(q * static_cast<double>(n_trials - 1) + 0.5), 0.0,
        static_cast<double>(n_trials - 1)));
    return corr[idx];
  };
  const double tail = (1.0 - central_coverage) / 2.0;
  out.lo = quantile(tail);
  out.hi = quantile(1.0 - tail);
  return out;
}

// ---------------------------------------------------------------------------
// CSV emission

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            std::ostream& os) {
  os << "ratio,snr_classical,snr_classical_err,snr_quantum,snr_quantum_err,"
        "snr_classical_analytic,snr_quantum_analytic\n";
  for (const auto& r : rows) {
    os << text::format_double(r.ratio) << ','
       << text::format_double(r.snr_classical) << ','
       << text::format_double(r.snr_classical_err) << ','
       << text::format_double(r.snr_quantum) << ','
       << text::format_double(r.snr_quantum_err) << ','
       << text::format_double(r.analytic_classical) << ','
       << text::format_double(r.analytic_quantum) << "\n";
  }
}

inline void write_eye_csv(const EyeDiagram& eye, std::ostream& os) {
  os << "time_s,segment_id,counts\n";
  for (std::size_t s = 0; s < eye.segments.size(); ++s)
    for (std::size_t j = 0; j < eye.segments[s].size(); ++j)
      os << text::format_double(static_cast<double>(j) * eye.bin_duration)
         << ',' << s << ',' << eye.segments[s][j] << "\n";
}

inline void write_eye_metrics_csv(const EyeDiagram& eye, std::ostream& os) {
  os << "bit_rate,vertical_opening,horizontal_opening,transition_fraction\n";
  os << text::format_double(eye.bit_rate) << ','
     << text::format_double(eye.metrics.vertical_opening) << ','
     << text::format_double(eye.metrics.horizontal_opening) << ','
     << text::format_double(eye.metrics.transition_fraction) << "\n";
}

}  // namespace qlink
