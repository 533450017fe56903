#pragma once

// Straightforward reference implementations used to cross-check the library.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace peem::testing {

inline long double ref_mean(const std::vector<double>& xs) {
  long double s = 0;
  for (double x : xs) s += x;
  return s / xs.size();
}

inline long double ref_sample_sd(const std::vector<double>& xs) {
  const long double m = ref_mean(xs);
  long double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / (xs.size() - 1));
}

inline long double ref_pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  const long double mx = ref_mean(xs), my = ref_mean(ys);
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline long double ref_mape(const std::vector<double>& errors_pct) {
  long double s = 0;
  for (double r : errors_pct) s += std::fabs(r);
  return s / errors_pct.size();
}

// (low, high) of mean ± z·sd/√n
inline std::pair<long double, long double> ref_ci(const std::vector<double>& xs, double z) {
  const long double m = ref_mean(xs);
  const long double h = z * ref_sample_sd(xs) / std::sqrt(static_cast<long double>(xs.size()));
  return {m - h, m + h};
}

// Energy between two raw readings of a counter that wraps at `range`.
inline std::uint64_t ref_delta_uj(std::uint64_t before, std::uint64_t after, std::uint64_t range) {
  before %= range;
  after %= range;
  if (after >= before) return after - before;
  return (range - before) + after;
}

inline bool close_rel(long double a, long double b, long double tol) {
  const long double scale = std::max<long double>(1.0L, std::max(std::fabs(a), std::fabs(b)));
  return std::fabs(a - b) <= tol * scale;
}

}  // namespace peem::testing
