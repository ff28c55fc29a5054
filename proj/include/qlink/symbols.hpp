#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qlink/link_model.hpp"

namespace qlink {

/// One keyed symbol. For amplitude keying the value is Bob's deviation
/// probability alpha^2 (bit 1 = 0, path open; bit 0 = 1, path blocked).
/// For phase keying the value is the interferometric phase delta_phi
/// (bit 1 = 0; bit 0 = pi).
struct EncodingSymbol {
  EncodingKind kind = EncodingKind::amplitude;
  double value = 0.0;
  double duration = 0.0;  ///< seconds
};

struct SymbolSchedule {
  std::vector<EncodingSymbol> symbols;
  std::size_t preamble_len = 0;  ///< calibration symbols at the front

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : symbols) t += s.duration;
    return t;
  }
};

namespace detail {

inline void validate(const EncodingSymbol& s) {
  if (!(s.duration > 0.0))
    throw std::invalid_argument("symbol duration must be > 0");
  const bool ok = s.kind == EncodingKind::amplitude
                      ? (s.value == 0.0 || s.value == 1.0)
                      : (s.value == 0.0 || s.value == std::numbers::pi);
  if (!ok)
    throw std::invalid_argument(
        "symbol value outside the binary alphabet of its kind");
}

inline void validate(const SymbolSchedule& s) {
  if (s.symbols.empty())
    throw std::invalid_argument("symbol schedule must be non-empty");
  if (s.preamble_len > s.symbols.size())
    throw std::invalid_argument("preamble longer than schedule");
  for (const auto& sym : s.symbols) {
    validate(sym);
    if (sym.kind != s.symbols.front().kind)
      throw std::invalid_argument("schedule mixes encoding kinds");
  }
}

}  // namespace detail

inline EncodingSymbol symbol_for_bit(EncodingKind kind, int bit,
                                     double duration) {
  if (kind == EncodingKind::amplitude)
    return {kind, bit ? 0.0 : 1.0, duration};
  return {kind, bit ? 0.0 : std::numbers::pi, duration};
}

inline int bit_of(const EncodingSymbol& s) { return s.value == 0.0 ? 1 : 0; }

/// Link state while one symbol is on the air: amplitude symbols override
/// Bob's alpha^2, phase symbols pick phi_b so delta_phi equals the value.
inline std::pair<LinkParams, ChannelActors> apply_symbol(
    const LinkParams& p, const ChannelActors& a, const EncodingSymbol& s) {
  detail::validate(s);
  LinkParams p2 = p;
  ChannelActors a2 = a;
  if (s.kind == EncodingKind::amplitude) {
    a2.alpha_sq = s.value;
  } else {
    p2.phi_b = p.phi - p.phi_a - s.value;
  }
  return {p2, a2};
}

/// Expected (alice, eve) rates while the symbol is on the air.
inline std::pair<double, double> symbol_rates(const LinkParams& p,
                                              const ChannelActors& a,
                                              const EncodingSymbol& s) {
  const auto [p2, a2] = apply_symbol(p, a, s);
  return {alice_rate(p2, a2), eve_rate(p2, a2)};
}

/// Periodic 1 0 1 0 ... pattern, used for preambles and eye diagrams.
inline SymbolSchedule alternating_pattern(EncodingKind kind, std::size_t bits,
                                          double bit_duration) {
  SymbolSchedule s;
  for (std::size_t i = 0; i < bits; ++i)
    s.symbols.push_back(symbol_for_bit(kind, i % 2 == 0 ? 1 : 0, bit_duration));
  detail::validate(s);
  return s;
}

}  // namespace qlink
