// Test-only oracles, kept independent of the implementation paths they
// check: plain bisection, a linear cosine fit, Poisson pmf/cdf via the C
// library lgamma, a Kolmogorov-Smirnov distance and an exact binomial test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double bisect(const std::function<double(double)>& f, double lo,
                     double hi, double tol) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::runtime_error("bisect: no sign change over the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct CosineFit {
  double offset = 0.0;
  double contrast = 0.0;
};

/// Least squares of y = offset + contrast * cos(x) (cos basis is enough
/// for fringes sampled over full periods).
inline CosineFit fit_cosine(const std::vector<double>& x,
                            const std::vector<double>& y) {
  double s1 = 0.0, sc = 0.0, scc = 0.0, sy = 0.0, scy = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = std::cos(x[i]);
    s1 += 1.0;
    sc += c;
    scc += c * c;
    sy += y[i];
    scy += c * y[i];
  }
  const double det = s1 * scc - sc * sc;
  if (det == 0.0 || n < 2) throw std::runtime_error("degenerate cosine fit");
  CosineFit fit;
  fit.offset = (scc * sy - sc * scy) / det;
  fit.contrast = (s1 * scy - sc * sy) / det;
  return fit;
}

inline double poisson_log_pmf(std::uint64_t k, double lambda) {
  return static_cast<double>(k) * std::log(lambda) - lambda -
         std::lgamma(static_cast<double>(k) + 1.0);
}

inline double poisson_pmf(std::uint64_t k, double lambda) {
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(poisson_log_pmf(k, lambda));
}

/// Kolmogorov-Smirnov distance between an integer sample and the exact
/// Poisson CDF (evaluated at the jump points; conservative for discrete
/// distributions).
inline double poisson_ks_distance(std::vector<std::uint64_t> sample,
                                  double lambda) {
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  std::uint64_t k = 0;
  double cdf = poisson_pmf(0, lambda);
  std::size_t i = 0;
  while (i < sample.size()) {
    while (k < sample[i]) {
      ++k;
      cdf += poisson_pmf(k, lambda);
    }
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    const double emp_hi = static_cast<double>(j) / n;
    const double emp_lo = static_cast<double>(i) / n;
    d = std::max(d, std::abs(emp_hi - cdf));
    d = std::max(d, std::abs(emp_lo - (cdf - poisson_pmf(k, lambda))));
    i = j;
  }
  return d;
}

/// Two-sided exact binomial test of p = 0.5; returns the p-value (sum of
/// outcomes no more likely than the observed one).
inline double binomial_two_sided_p(std::uint64_t successes,
                                   std::uint64_t trials) {
  if (trials == 0) throw std::runtime_error("binomial test needs trials");
  const auto log_pmf = [&](std::uint64_t k) {
    return std::lgamma(static_cast<double>(trials) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(trials - k) + 1.0) +
           static_cast<double>(trials) * std::log(0.5);
  };
  const double observed = log_pmf(successes);
  double p = 0.0;
  for (std::uint64_t k = 0; k <= trials; ++k)
    if (log_pmf(k) <= observed + 1e-12) p += std::exp(log_pmf(k));
  return std::min(p, 1.0);
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

/// Slope and its standard error for unweighted least squares y ~ a + b x.
struct SlopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
};

inline SlopeFit fit_slope(const std::vector<double>& x,
                          const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() != y.size() || x.size() < 3)
    throw std::runtime_error("fit_slope needs >= 3 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = my + fit.slope * (x[i] - mx);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  fit.stderr_slope = std::sqrt(ss_res / (n - 2.0) / sxx);
  return fit;
}

}  // namespace oracle
