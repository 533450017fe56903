#pragma once

#include <cmath>
#include <span>
#include <string>

#include "peem/errors.hpp"

namespace peem {

// Two-sided z-scores for the supported confidence levels.
inline double z_score(double confidence) {
  struct Entry {
    double level;
    double z;
  };
  static constexpr Entry kTable[] = {{0.90, 1.645}, {0.95, 1.96}, {0.99, 2.576}};
  for (const auto& entry : kTable)
    if (std::abs(entry.level - confidence) < 1e-9) return entry.z;
  throw PreconditionError("unsupported confidence level " + std::to_string(confidence) +
                          " (supported: 0.90, 0.95, 0.99)");
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw EmptyInput("mean of an empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1 denominator).
inline double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) throw InsufficientSamples("standard deviation needs at least 2 samples");
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double half_width = 0.0;
  double z = 0.0;
  std::size_t n = 0;
};

// mean ± z · s / √n about the sample mean.
inline ConfidenceInterval mean_confidence_interval(std::span<const double> xs, double confidence) {
  if (xs.size() < 2) throw InsufficientSamples("confidence interval needs at least 2 samples");
  ConfidenceInterval ci;
  ci.z = z_score(confidence);
  ci.n = xs.size();
  ci.mean = mean_of(xs);
  ci.stddev = sample_stddev(xs);
  ci.half_width = ci.z * ci.stddev / std::sqrt(static_cast<double>(ci.n));
  ci.low = ci.mean - ci.half_width;
  ci.high = ci.mean + ci.half_width;
  return ci;
}

}  // namespace peem
