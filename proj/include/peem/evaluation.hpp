#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "peem/errors.hpp"
#include "peem/model.hpp"
#include "peem/statistics.hpp"

namespace peem {

// Signed percentage error of an estimate relative to the measurement.
inline double percentage_error(double estimated, double measured) {
  if (!(measured > 0.0)) throw ZeroMeasured("percentage error needs a positive measured energy");
  return (estimated - measured) / measured * 100.0;
}

struct ErrorSample {
  Preset preset = Preset::ultrafast;
  std::string bitstream_id;
  double r = 0.0;  // signed percent
};

inline std::vector<double> error_values(std::span<const ErrorSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.r);
  return out;
}

inline double mape(std::span<const double> errors_pct) {
  if (errors_pct.empty()) throw EmptyInput("MAPE of an empty sample");
  double sum = 0.0;
  for (double r : errors_pct) sum += std::abs(r);
  return sum / static_cast<double>(errors_pct.size());
}

inline double mape(std::span<const ErrorSample> samples) {
  auto values = error_values(samples);
  return mape(std::span<const double>(values));
}

// Interval about the mean signed error, sample standard deviation.
inline ConfidenceInterval confidence_interval(std::span<const ErrorSample> samples, double confidence) {
  auto values = error_values(samples);
  return mean_confidence_interval(values, confidence);
}

struct EvaluationResult {
  Preset preset = Preset::ultrafast;
  double mape = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double mean_err = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
  double z = 0.0;
};

inline EvaluationResult evaluate_samples(Preset preset, std::span<const ErrorSample> samples, double confidence) {
  const auto ci = confidence_interval(samples, confidence);
  EvaluationResult res;
  res.preset = preset;
  res.mape = mape(samples);
  res.ci_low = ci.low;
  res.ci_high = ci.high;
  res.mean_err = ci.mean;
  res.std_err = ci.stddev;
  res.n = ci.n;
  res.z = ci.z;
  return res;
}

// Record indices per fold.
using Fold = std::vector<std::size_t>;

namespace detail {

// Unbiased index in [0, bound) from a 64-bit engine; rejection keeps it
// identical across standard library implementations.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

}  // namespace detail

// Partitions whole sequences into k folds whose sizes (in sequences) differ by
// at most one. Deterministic for a given seed.
inline std::vector<Fold> kfold_split(std::span<const EncodeRecord> records, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw PreconditionError("k-fold split needs k >= 2");
  std::set<std::string> distinct;
  for (const auto& r : records) distinct.insert(r.sequence_id);
  if (distinct.size() < k) {
    throw TooFewGroups(std::to_string(distinct.size()) + " sequence(s) cannot fill " + std::to_string(k) + " folds");
  }
  std::vector<std::string> groups(distinct.begin(), distinct.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = groups.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(detail::bounded_draw(rng, i + 1));
    std::swap(groups[i], groups[j]);
  }
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t g = 0; g < groups.size(); ++g) fold_of[groups[g]] = g % k;

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < records.size(); ++i) folds[fold_of[records[i].sequence_id]].push_back(i);
  return folds;
}

struct CrossValidationOptions {
  std::size_t k = 10;
  ModelMode mode = ModelMode::posterior;
  EventMask feature_mask = EventMask::all();
  double confidence = 0.95;
  std::uint64_t seed = 0;
  FitOptions fit;
};

// Which records trained and which were scored, per fold and preset.
struct FoldTrace {
  std::size_t fold = 0;
  Preset preset = Preset::ultrafast;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct CrossValidationReport {
  std::vector<EvaluationResult> rows;  // canonical preset order
  double average_mape = 0.0;           // unweighted mean of per-preset MAPEs
  std::vector<ErrorSample> samples;
  std::vector<FoldTrace> traces;
  std::vector<std::string> warnings;
};

inline bool usable_for_validation(const EncodeRecord& r, ModelMode mode) {
  if (!r.has_usable_energy()) return false;
  if (mode == ModelMode::prior_uf && !r.events_uf) return false;
  if (mode == ModelMode::time_baseline && !(r.time_s > 0.0)) return false;
  return true;
}

// Per fold: fit one model per preset on out-of-fold records, score the
// in-fold records. Errors are pooled across folds before the per-preset MAPE
// and interval are computed. prior_uf mode has no ultrafast row.
inline CrossValidationReport cross_validate(std::span<const EncodeRecord> records,
                                            const CrossValidationOptions& options) {
  CrossValidationReport report;
  const auto folds = kfold_split(records, options.k, options.seed);

  std::set<Preset> presets;
  for (const auto& r : records) presets.insert(r.preset);
  if (options.mode == ModelMode::prior_uf) presets.erase(Preset::ultrafast);

  std::vector<std::size_t> fold_of(records.size());
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (auto i : folds[f]) fold_of[i] = f;

  std::map<Preset, std::vector<ErrorSample>> pooled;
  std::size_t skipped = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (auto preset : presets) {
      FoldTrace trace;
      trace.fold = f;
      trace.preset = preset;
      std::vector<EncodeRecord> train;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].preset != preset) continue;
        if (fold_of[i] == f) {
          if (usable_for_validation(records[i], options.mode)) {
            trace.validation.push_back(i);
          } else {
            ++skipped;
          }
        } else {
          trace.train.push_back(i);
          train.push_back(records[i]);
        }
      }
      if (trace.validation.empty()) {
        report.traces.push_back(std::move(trace));
        continue;
      }
      const auto model = fit(train, options.mode, preset, options.feature_mask, options.fit);
      for (auto i : trace.validation) {
        const auto& r = records[i];
        pooled[preset].push_back({preset, r.bitstream_id(), percentage_error(estimate(model, r), *r.energy_j)});
      }
      report.traces.push_back(std::move(trace));
    }
  }
  if (skipped) report.warnings.push_back(std::to_string(skipped) + " record(s) not scored (no usable energy/features)");

  double sum = 0.0;
  for (auto preset : presets) {
    auto it = pooled.find(preset);
    if (it == pooled.end() || it->second.size() < 2) {
      report.warnings.push_back("preset " + std::string(preset_name(preset)) + ": fewer than 2 scored records");
      continue;
    }
    report.rows.push_back(evaluate_samples(preset, it->second, options.confidence));
    sum += report.rows.back().mape;
    report.samples.insert(report.samples.end(), it->second.begin(), it->second.end());
  }
  if (report.rows.empty()) throw InsufficientData("cross-validation produced no scored preset");
  report.average_mape = sum / static_cast<double>(report.rows.size());
  return report;
}

enum class OutputFormat { csv, table };

inline OutputFormat parse_output_format(std::string_view s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "table") return OutputFormat::table;
  throw ParseError(0, "unknown output format '" + std::string(s) + "'");
}

inline void write_evaluation(std::ostream& os, const CrossValidationReport& report, OutputFormat format) {
  std::size_t total = 0;
  for (const auto& row : report.rows) total += row.n;
  if (format == OutputFormat::csv) {
    os << "preset,mape_pct,ci_low_pct,ci_high_pct,n\n";
    os << std::setprecision(17);
    for (const auto& row : report.rows)
      os << preset_name(row.preset) << ',' << row.mape << ',' << row.ci_low << ',' << row.ci_high << ',' << row.n
         << '\n';
    os << "average," << report.average_mape << ",,," << total << '\n';
    return;
  }
  os << std::left << std::setw(10) << "preset" << std::right << std::setw(10) << "mape_pct" << std::setw(12)
     << "ci_low_pct" << std::setw(12) << "ci_high_pct" << std::setw(7) << "n" << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& row : report.rows)
    os << std::left << std::setw(10) << preset_name(row.preset) << std::right << std::setw(10) << row.mape
       << std::setw(12) << row.ci_low << std::setw(12) << row.ci_high << std::setw(7) << row.n << '\n';
  os << std::left << std::setw(10) << "average" << std::right << std::setw(10) << report.average_mape << std::setw(12)
     << "-" << std::setw(12) << "-" << std::setw(7) << total << '\n';
  os.unsetf(std::ios::floatfield);
}

}  // namespace peem
