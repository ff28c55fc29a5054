#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace qlink {

/// Rate-equation model of the two-source induced-coherence link.
///
/// All functions here are pure: expected detection rates, count levels,
/// shot-noise SNRs and the jamming security condition, as functions of the
/// link parameters and of what Bob, Eve and the jamming source do. Counts
/// and randomness live in count_engine; this header is deterministic.

/// Physical parameters of the link itself.
struct LinkParams {
  double n_quantum = 0.0;  ///< pairs generated per second, per source (1/s)
  double phi = 0.0;        ///< pump phase accumulated at the second source (rad)
  double phi_a = 0.0;      ///< idler-path phase (rad)
  double phi_b = 0.0;      ///< signal-path phase, set by Bob (rad)
  double eta_det = 1.0;    ///< Alice-side detection efficiency incl. losses
  double t_meas = 0.05;    ///< integration time per measurement (s)

  /// Interferometric phase the rate formulas depend on.
  double delta_phi() const { return phi - phi_b - phi_a; }
};

/// What the other actors do to the signal mode.
struct ChannelActors {
  double alpha_sq = 0.0;       ///< Bob's deviation probability of s1 into s_B
  double alpha_e_sq = 0.0;     ///< Eve's tap probability into s_E
  double eta_det_e = 1.0;      ///< Eve-side detection efficiency
  double n_class = 0.0;        ///< jamming photons per second in mode s1 (1/s)
  double eta_losses_sq = 0.0;  ///< link leakage probability

  double alpha() const { return std::sqrt(alpha_sq); }
  double alpha_e() const { return std::sqrt(alpha_e_sq); }
};

/// Expected rates and SNRs at one operating point.
struct RateReport {
  double r_alice = 0.0;    ///< idler detections per second
  double r_eve = 0.0;      ///< signal detections per second
  double c_comm = 0.0;     ///< count difference between levels over t_meas
  double snr_eve = 0.0;
  double snr_alice = 0.0;
};

struct DfgReport {
  double c_dfg_rate = 0.0;  ///< detected difference-frequency photons (1/s)
  bool negligible = false;  ///< true when below the quantum detection rate
};

namespace detail {

inline void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw std::domain_error(std::string(name) + " must be in [0, 1]");
}

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::domain_error(msg);
}

inline void validate(const LinkParams& p) {
  require(p.n_quantum >= 0.0 && std::isfinite(p.n_quantum),
          "n_quantum must be >= 0");
  require_probability(p.eta_det, "eta_det");
  require(p.t_meas > 0.0, "t_meas must be > 0");
}

inline void validate(const ChannelActors& a) {
  require_probability(a.alpha_sq, "alpha_sq");
  require_probability(a.alpha_e_sq, "alpha_e_sq");
  require_probability(a.eta_det_e, "eta_det_e");
  require_probability(a.eta_losses_sq, "eta_losses_sq");
  require(a.n_class >= 0.0 && std::isfinite(a.n_class),
          "n_class must be >= 0");
}

}  // namespace detail

/// Alice's detection rate on the idler (1/s):
///   R_A = 2 eta_det N_q [1 + sqrt(1-alpha^2) sqrt(1-alpha_E^2) cos(dphi)].
/// Independent of the jamming rate: the idler never leaves her lab.
inline double alice_rate(const LinkParams& p, const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  const double visibility =
      std::sqrt(1.0 - a.alpha_sq) * std::sqrt(1.0 - a.alpha_e_sq);
  const double r =
      2.0 * p.eta_det * p.n_quantum *
      (1.0 + visibility * std::cos(p.delta_phi()));
  return std::max(r, 0.0);  // cos rounding can leave -1e-16 at the minimum
}

/// Eve's detection rate on the tapped signal mode (1/s):
///   R_E = eta_det_E alpha_E^2 [(1-alpha^2) N_q + N_class].
/// Phase-blind: intensity detection carries no interferometric information.
inline double eve_rate(const LinkParams& p, const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  return a.eta_det_e * a.alpha_e_sq *
         ((1.0 - a.alpha_sq) * p.n_quantum + a.n_class);
}

/// Counts Eve accumulates over t_meas at the two communication levels,
/// (open, blocked). Evaluates both levels regardless of a.alpha_sq.
inline std::pair<double, double> eve_level_counts(const LinkParams& p,
                                                  const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  const double c1 =
      a.eta_det_e * a.alpha_e_sq * p.t_meas * (p.n_quantum + a.n_class);
  const double c0 = a.eta_det_e * a.alpha_e_sq * p.t_meas * a.n_class;
  return {c1, c0};
}

/// Count difference between the two levels over t_meas (the quantity an
/// interceptor has to resolve against shot noise).
inline double comm_counts(const LinkParams& p, const ChannelActors& a) {
  const auto [c1, c0] = eve_level_counts(p, a);
  return c1 - c0;
}

/// Eve's shot-noise-limited SNR for amplitude keying:
///   sqrt(eta_det_E N_q alpha_E^2 T) / sqrt(1 + 2 N_class / N_q).
inline double snr_eve(const LinkParams& p, const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  detail::require(p.n_quantum > 0.0,
                  "n_quantum must be > 0 for SNR (ratio undefined)");
  return std::sqrt(a.eta_det_e * p.n_quantum * a.alpha_e_sq * p.t_meas) /
         std::sqrt(1.0 + 2.0 * a.n_class / p.n_quantum);
}

/// Alice's SNR for amplitude keying, noise of both levels in quadrature:
///   sqrt(2 eta_det N_q T) sqrt(1-alpha_E^2) / sqrt(2 + sqrt(1-alpha_E^2)).
inline double snr_alice_amplitude(const LinkParams& p,
                                  const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  const double v = std::sqrt(1.0 - a.alpha_e_sq);
  return std::sqrt(2.0 * p.eta_det * p.n_quantum * p.t_meas) * v /
         std::sqrt(2.0 + v);
}

/// Alice's SNR for phase keying:
///   2 sqrt(eta_det N_q T sqrt(1-alpha_E^2)).
/// Exceeds the amplitude-keyed SNR for every alpha_E^2 < 1: the swing
/// between the two phase levels is twice the amplitude-keyed one.
inline double snr_alice_phase(const LinkParams& p, const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  const double v = std::sqrt(1.0 - a.alpha_e_sq);
  return 2.0 * std::sqrt(p.eta_det * p.n_quantum * p.t_meas * v);
}

/// Minimum N_class/N_quantum for a hidden message, C_comm/2 form.
inline double security_threshold(const LinkParams& p,
                                 const ChannelActors& a) {
  return comm_counts(p, a) / 2.0;
}

/// Exact threshold (C_comm - 1)/2; snr_eve equals 1 exactly at this ratio.
/// Negative when C_comm < 1, i.e. the link is secure even without jamming.
inline double security_threshold_exact(const LinkParams& p,
                                       const ChannelActors& a) {
  return (comm_counts(p, a) - 1.0) / 2.0;
}

/// True iff the message is hidden from Eve: |SNR_Eve| <= 1 (boundary
/// inclusive), equivalently N_class/N_quantum >= (C_comm - 1)/2.
inline bool is_secure(const LinkParams& p, const ChannelActors& a) {
  return std::abs(snr_eve(p, a)) <= 1.0;
}

/// Difference-frequency generation seeded by the jamming laser in the
/// second source. The conversion efficiency is inferred from the measured
/// pair rate, eta_conv^2 = N_q / pump_rate, so
///   C_DFG  = eta_det eta_conv^2 sqrt(pump_rate N_class) (1-alpha_E)(1-alpha)
///   C_pair = eta_det N_q (1-alpha)
/// and the low-gain regime holds while C_DFG stays below C_pair
/// (for alpha_E = 0 this is exactly N_class < pump_rate).
inline DfgReport dfg_check(double pump_rate, const LinkParams& p,
                           const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  detail::require(pump_rate > 0.0 && std::isfinite(pump_rate),
                  "pump_rate must be > 0");
  const double eta_conv_sq = p.n_quantum / pump_rate;
  const double c_dfg = p.eta_det * eta_conv_sq *
                       std::sqrt(pump_rate * a.n_class) *
                       (1.0 - a.alpha_e()) * (1.0 - a.alpha());
  const double c_pair = p.eta_det * p.n_quantum * (1.0 - a.alpha());
  return {c_dfg, c_dfg == 0.0 || c_dfg < c_pair};
}

/// Alice's rate with link leakage modeled as a beam splitter of
/// probability eta_losses^2 on the returned signal path:
///   R_A = 2 eta_det N_q [1 + sqrt(1-eta_losses^2) cos(dphi)].
inline double lossy_alice_rate(const LinkParams& p, const ChannelActors& a) {
  detail::validate(p);
  detail::validate(a);
  const double visibility = std::sqrt(1.0 - a.eta_losses_sq);
  const double r = 2.0 * p.eta_det * p.n_quantum *
                   (1.0 + visibility * std::cos(p.delta_phi()));
  return std::max(r, 0.0);
}

enum class EncodingKind { amplitude, phase };

/// Full operating-point summary; snr_alice matches the requested encoding.
inline RateReport rate_report(const LinkParams& p, const ChannelActors& a,
                              EncodingKind kind = EncodingKind::amplitude) {
  RateReport r;
  r.r_alice = alice_rate(p, a);
  r.r_eve = eve_rate(p, a);
  r.c_comm = comm_counts(p, a);
  r.snr_eve = snr_eve(p, a);
  r.snr_alice = kind == EncodingKind::amplitude ? snr_alice_amplitude(p, a)
                                                : snr_alice_phase(p, a);
  return r;
}

}  // namespace qlink
