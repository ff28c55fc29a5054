#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>

#include "qlink/count_engine.hpp"
#include "oracle.hpp"

using namespace qlink;
using Catch::Approx;

namespace {

RateSchedule constant(double rate, double duration) {
  RateSchedule s;
  s.segments = {{duration, rate}};
  return s;
}

std::vector<double> to_doubles(const std::vector<std::uint64_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("poisson_draw basics") {
  rng::stream s(1u);

  SECTION("zero mean always yields zero") {
    for (int i = 0; i < 1000; ++i) CHECK(poisson_draw(0.0, s) == 0);
  }
  SECTION("rejects negative and non-finite means") {
    CHECK_THROWS_AS(poisson_draw(-1.0, s), std::domain_error);
    CHECK_THROWS_AS(poisson_draw(std::nan(""), s), std::domain_error);
    CHECK_THROWS_AS(poisson_draw(1.0 / 0.0, s), std::domain_error);
  }
}

TEST_CASE("poisson pmf at lambda=50 against the log-gamma oracle") {
  // P(X = 50) from an independent pmf (C lgamma), then an empirical check
  // over 1e6 draws within 3 standard errors.
  const double lambda = 50.0;
  const double p50 = oracle::poisson_pmf(50, lambda);
  const std::size_t n = 1000000;
  rng::stream s(31337u);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (poisson_draw(lambda, s) == 50) ++hits;
  const double p_hat = static_cast<double>(hits) / static_cast<double>(n);
  const double se = std::sqrt(p50 * (1.0 - p50) / static_cast<double>(n));
  CHECK(std::abs(p_hat - p50) < 3.0 * se);
}

TEST_CASE("poisson mean at lambda=1e8") {
  const double lambda = 1e8;
  const std::size_t n = 10000;
  rng::stream s(98765u);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += static_cast<double>(poisson_draw(lambda, s));
  const double ratio = sum / static_cast<double>(n) / lambda;
  CHECK(ratio > 1.0 - 5e-4);
  CHECK(ratio < 1.0 + 5e-4);
}

TEST_CASE("poisson KS test across four decades of lambda") {
  // Critical value at significance 0.01; the discrete-CDF comparison is
  // conservative against it.
  const std::size_t n = 10000;
  const double d_crit = 1.628 / std::sqrt(static_cast<double>(n));
  std::uint64_t tag = 0;
  for (const double lambda : {0.1, 1.0, 50.0, 1e4}) {
    rng::stream s(rng::substream_seed(555u, tag++));
    std::vector<std::uint64_t> sample(n);
    for (auto& x : sample) x = poisson_draw(lambda, s);
    const double d = oracle::poisson_ks_distance(sample, lambda);
    INFO("lambda = " << lambda << ", D = " << d);
    CHECK(d < d_crit);
  }
}

TEST_CASE("sample_trace moments at constant rate") {
  SECTION("mean approaches lambda per bin") {
    const auto t = sample_trace(constant(1000.0, 2000.0), 0.05, 7u);
    REQUIRE(t.bins.size() == 40000);
    const double mean = oracle::mean(to_doubles(t.bins));
    CHECK(mean == Approx(50.0).epsilon(0.01));
  }
  SECTION("zero rate gives an all-zero trace") {
    const auto t = sample_trace(constant(0.0, 10.0), 0.05, 9u);
    for (const auto b : t.bins) CHECK(b == 0);
  }
  SECTION("Fano factor of one within the derived tolerance") {
    // 1e5 bins at lambda = 50; variance/mean for a Poisson process sits
    // within [0.97, 1.03] with large margin at this sample size.
    const auto t = sample_trace(constant(1000.0, 5000.0), 0.05, 11u);
    REQUIRE(t.bins.size() == 100000);
    const auto v = to_doubles(t.bins);
    const double fano = oracle::variance(v) / oracle::mean(v);
    CHECK(fano > 0.97);
    CHECK(fano < 1.03);
  }
}

TEST_CASE("sample_trace validation") {
  CHECK_THROWS_AS(sample_trace(constant(10.0, 1.0), 2.0, 1u),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_trace(RateSchedule{}, 0.05, 1u),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_trace(constant(-5.0, 1.0), 0.05, 1u),
                  std::domain_error);
  CHECK_THROWS_AS(sample_trace(constant(10.0, 1.0), 0.0, 1u),
                  std::invalid_argument);
}

TEST_CASE("piecewise integration across misaligned segment boundaries") {
  // 0.08 s at 1e6/s then 0.02 s of darkness: the second bin integrates
  // 0.03 s of light, the third and fourth bins none.
  RateSchedule s;
  s.segments = {{0.08, 1e6}, {0.12, 0.0}};
  const auto t = sample_trace(s, 0.05, 13u);
  REQUIRE(t.bins.size() == 4);
  CHECK(t.bins[0] == Approx(50000.0).epsilon(0.05));
  CHECK(t.bins[1] == Approx(30000.0).epsilon(0.05));
  CHECK(t.bins[2] == 0);
  CHECK(t.bins[3] == 0);
}

TEST_CASE("determinism: same inputs, bit-identical traces") {
  RateSchedule s;
  s.segments = {{1.0, 12355.0}, {1.0, 8355.0}, {0.5, 100.0}};
  const auto a = sample_trace(s, 0.05, 123456789u);
  const auto b = sample_trace(s, 0.05, 123456789u);
  CHECK(a.bins == b.bins);
  const auto c = sample_trace(s, 0.05, 123456790u);
  CHECK(a.bins != c.bins);
}

TEST_CASE("alice and eve sub-streams are independent") {
  const auto [alice, eve] =
      dual_sample(constant(2000.0, 500.0), constant(2000.0, 500.0), 0.05,
                  2024u);
  REQUIRE(alice.bins.size() == eve.bins.size());
  const auto a = to_doubles(alice.bins);
  const auto e = to_doubles(eve.bins);
  const double ma = oracle::mean(a);
  const double me = oracle::mean(e);
  double num = 0.0, va = 0.0, ve = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (e[i] - me);
    va += (a[i] - ma) * (a[i] - ma);
    ve += (e[i] - me) * (e[i] - me);
  }
  const double corr = num / std::sqrt(va * ve);
  CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(a.size())));
}

TEST_CASE("additivity: split schedule matches concatenated traces in moments") {
  RateSchedule joint;
  joint.segments = {{500.0, 4000.0}, {500.0, 9000.0}};
  const auto t = sample_trace(joint, 0.05, 31u);
  const auto first = sample_trace(constant(4000.0, 500.0), 0.05, 32u);
  const auto second = sample_trace(constant(9000.0, 500.0), 0.05, 33u);

  const auto half = t.bins.size() / 2;
  const std::vector<double> j1(t.bins.begin(), t.bins.begin() + half);
  const std::vector<double> j2(t.bins.begin() + half, t.bins.end());
  const auto f = to_doubles(first.bins);
  const auto s = to_doubles(second.bins);

  CHECK(oracle::mean(j1) == Approx(oracle::mean(f)).epsilon(0.02));
  CHECK(oracle::mean(j2) == Approx(oracle::mean(s)).epsilon(0.02));
  CHECK(oracle::variance(j1) == Approx(oracle::variance(f)).epsilon(0.10));
  CHECK(oracle::variance(j2) == Approx(oracle::variance(s)).epsilon(0.10));
}

TEST_CASE("dual_trace through the link model") {
  LinkParams p;
  p.n_quantum = 4177.5;
  p.eta_det = 1.0;
  ChannelActors a;
  a.eta_det_e = 1.0;

  SECTION("fully blocked symbols: Eve dark, Alice at the baseline") {
    a.alpha_e_sq = 1.0;
    SymbolSchedule blocked;
    for (int i = 0; i < 10; ++i)
      blocked.symbols.push_back({EncodingKind::amplitude, 1.0, 1.0});
    const auto [alice, eve] = dual_trace(p, a, blocked, 0.05, 99u);
    const double eve_mean = oracle::mean(to_doubles(eve.bins));
    const double alice_mean = oracle::mean(to_doubles(alice.bins));
    CHECK(eve_mean == 0.0);
    CHECK(alice_mean == Approx(2.0 * p.n_quantum * 0.05).epsilon(0.03));
  }

  SECTION("calibration levels: 12355 and 8355 1/s, separation 4000 1/s") {
    // Visibility chosen so the open/blocked levels sit at the measured
    // scale; the separation is their difference.
    const double vis = 4000.0 / 8355.0;
    a.alpha_e_sq = 1.0 - vis * vis;
    SymbolSchedule alt;
    for (int i = 0; i < 40; ++i)
      alt.symbols.push_back(
          {EncodingKind::amplitude, i % 2 == 0 ? 0.0 : 1.0, 1.0});
    const auto [alice, eve] = dual_trace(p, a, alt, 0.05, 4242u);
    std::vector<double> open_bins;
    std::vector<double> blocked_bins;
    for (std::size_t i = 0; i < alice.bins.size(); ++i) {
      const auto symbol = static_cast<std::size_t>(
          (static_cast<double>(i) + 0.5) * 0.05 / 1.0);
      (symbol % 2 == 0 ? open_bins : blocked_bins)
          .push_back(static_cast<double>(alice.bins[i]));
    }
    const double r1 = oracle::mean(open_bins) / 0.05;
    const double r0 = oracle::mean(blocked_bins) / 0.05;
    CHECK(r1 == Approx(12355.0).epsilon(0.02));
    CHECK(r0 == Approx(8355.0).epsilon(0.02));
    CHECK(r1 - r0 == Approx(4000.0).epsilon(0.06));
  }

  SECTION("same seed twice gives the identical pair") {
    SymbolSchedule alt;
    for (int i = 0; i < 6; ++i)
      alt.symbols.push_back(
          {EncodingKind::amplitude, i % 2 == 0 ? 0.0 : 1.0, 0.4});
    const auto [a1, e1] = dual_trace(p, a, alt, 0.05, 321u);
    const auto [a2, e2] = dual_trace(p, a, alt, 0.05, 321u);
    CHECK(a1.bins == a2.bins);
    CHECK(e1.bins == e2.bins);
  }
}

TEST_CASE("dark counts lift both detectors") {
  const auto dark_only = sample_trace(constant(0.0, 500.0), 0.05, 77u,
                                      StreamLabel::alice, 2000.0);
  const double mean = oracle::mean(to_doubles(dark_only.bins));
  CHECK(mean == Approx(100.0).epsilon(0.03));
}

TEST_CASE("drift hook rescales the optical rate only") {
  const DriftHook unity = [](double) { return 1.0; };
  const auto base = sample_trace(constant(5000.0, 100.0), 0.05, 88u);
  const auto same = sample_trace(constant(5000.0, 100.0), 0.05, 88u,
                                 StreamLabel::alice, 0.0, unity);
  CHECK(base.bins == same.bins);

  const DriftHook doubled = [](double) { return 2.0; };
  const auto up = sample_trace(constant(5000.0, 100.0), 0.05, 88u,
                               StreamLabel::alice, 0.0, doubled);
  CHECK(oracle::mean(to_doubles(up.bins)) ==
        Approx(2.0 * oracle::mean(to_doubles(base.bins))).epsilon(0.03));
}

TEST_CASE("trace CSV carries provenance and one row per bin") {
  auto t = sample_trace(constant(100.0, 1.0), 0.05, 5u, StreamLabel::eve);
  std::ostringstream os;
  write_trace_csv(t, os);
  const std::string csv = os.str();
  CHECK(csv.find("# bin_duration_s=0.05 seed=5 stream_label=eve") !=
        std::string::npos);
  CHECK(csv.find("time_s,counts\n") != std::string::npos);
  std::size_t rows = 0;
  for (const char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 2 + t.bins.size());
}
