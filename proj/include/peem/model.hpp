#pragma once

// Linear energy models over processor-event counts.
//
//   posterior:     E = sum_i n_i * e_i        (events of the encode itself)
//   prior_uf:      E = sum_i n_i,UF * e_i     (events of the ultrafast encode of
//                                              the same content, coefficients
//                                              trained per target preset)
//   time_baseline: E = t * p                  (encoding time only)
//
// All three are fitted by the same routine, which minimises the sum of
// squared relative residuals ((x_b . e - y_b) / y_b)^2 subject to e >= 0.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peem/bounded_lsq.hpp"
#include "peem/errors.hpp"
#include "peem/events.hpp"

namespace peem {

enum class Preset : std::uint8_t { ultrafast, superfast, veryfast, faster, fast, medium, slow, slower, veryslow };

inline constexpr std::array<Preset, 9> kAllPresets = {Preset::ultrafast, Preset::superfast, Preset::veryfast,
                                                      Preset::faster,    Preset::fast,      Preset::medium,
                                                      Preset::slow,      Preset::slower,    Preset::veryslow};

inline constexpr std::array<std::string_view, 9> kPresetNames = {
    "ultrafast", "superfast", "veryfast", "faster", "fast", "medium", "slow", "slower", "veryslow"};

constexpr std::string_view preset_name(Preset p) noexcept { return kPresetNames[static_cast<std::size_t>(p)]; }

inline std::optional<Preset> preset_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kPresetNames.size(); ++i)
    if (kPresetNames[i] == name) return kAllPresets[i];
  return std::nullopt;
}

inline Preset parse_preset(std::string_view name) {
  auto p = preset_from_name(name);
  if (!p) throw ParseError(0, "unknown preset '" + std::string(name) + "'");
  return *p;
}

enum class ModelMode : std::uint8_t { posterior, prior_uf, time_baseline };

constexpr std::string_view mode_name(ModelMode m) noexcept {
  switch (m) {
    case ModelMode::posterior: return "posterior";
    case ModelMode::prior_uf: return "prior_uf";
    case ModelMode::time_baseline: return "time_baseline";
  }
  return "?";
}

inline ModelMode parse_mode(std::string_view name) {
  if (name == "posterior") return ModelMode::posterior;
  if (name == "prior_uf") return ModelMode::prior_uf;
  if (name == "time_baseline") return ModelMode::time_baseline;
  throw ParseError(0, "unknown model mode '" + std::string(name) + "'");
}

// One (sequence, preset, CRF) encode.
struct EncodeRecord {
  std::string sequence_id;
  Preset preset = Preset::ultrafast;
  int crf = 0;
  EventVector events;
  std::optional<EventVector> events_uf;  // ultrafast run of the same sequence and CRF
  std::optional<double> energy_j;        // measured E_enc; absent for profile-only collection
  double time_s = 0.0;
  std::uint64_t pixels = 0;
  bool significant = true;
  std::string flags;  // ';'-separated collection notes

  std::string bitstream_id() const { return sequence_id + "@crf" + std::to_string(crf); }
  bool has_usable_energy() const { return energy_j && *energy_j > 0.0 && std::isfinite(*energy_j); }
};

inline constexpr int kModelSchemaVersion = 1;

struct FitMeta {
  std::size_t training_record_count = 0;
  std::size_t excluded_record_count = 0;
  double objective_value = 0.0;
  std::size_t solver_iterations = 0;
  bool converged = true;
  int schema_version = kModelSchemaVersion;
  std::vector<std::string> warnings;
};

struct EnergyModel {
  Preset preset = Preset::ultrafast;
  ModelMode mode = ModelMode::posterior;
  EventMask feature_mask;                     // empty for time_baseline
  std::array<double, kEventCount> coefficients{};  // joules per event; zero outside the mask
  double joules_per_second = 0.0;            // time_baseline only
  FitMeta fit_meta;

  double coefficient(EventId e) const { return coefficients[index_of(e)]; }
  void set_coefficient(EventId e, double joules) {
    feature_mask.insert(e);
    coefficients[index_of(e)] = joules;
  }
};

namespace detail {

inline double linear_estimate(const EnergyModel& model, const EventVector& events) {
  if (auto missing = events.missing_from(model.feature_mask); !missing.empty()) throw MissingEvents(std::move(missing));
  double sum = 0.0;
  for (auto e : model.feature_mask.events())
    sum += static_cast<double>(events.at(e)) * model.coefficients[index_of(e)];
  return sum;
}

}  // namespace detail

inline double estimate_posterior(const EnergyModel& model, const EventVector& events) {
  if (model.mode != ModelMode::posterior) throw PreconditionError("estimate_posterior needs a posterior model");
  return detail::linear_estimate(model, events);
}

inline double estimate_prior(const EnergyModel& model, const EventVector& events_uf) {
  if (model.mode != ModelMode::prior_uf) throw PreconditionError("estimate_prior needs a prior_uf model");
  return detail::linear_estimate(model, events_uf);
}

inline double estimate_time(const EnergyModel& model, double time_s) {
  if (model.mode != ModelMode::time_baseline) throw PreconditionError("estimate_time needs a time_baseline model");
  return model.joules_per_second * time_s;
}

// Estimate for a record using whichever features the model's mode consumes.
inline double estimate(const EnergyModel& model, const EncodeRecord& record) {
  switch (model.mode) {
    case ModelMode::posterior: return estimate_posterior(model, record.events);
    case ModelMode::prior_uf:
      if (!record.events_uf) throw PreconditionError("record " + record.bitstream_id() + " has no ultrafast events");
      return estimate_prior(model, *record.events_uf);
    case ModelMode::time_baseline: return estimate_time(model, record.time_s);
  }
  return 0.0;
}

struct FitOptions {
  BoundedLsqOptions solver;
};

struct RelativeFit {
  Eigen::VectorXd coefficients;
  double objective = 0.0;  // sum of squared relative residuals
  std::size_t iterations = 0;
  bool converged = true;
  std::vector<Eigen::Index> zero_columns;
};

// Non-negative fit of energies ≈ features · coefficients minimising squared
// relative residuals. Rows are scaled by 1/energy so the problem stays linear.
inline RelativeFit fit_relative(const Eigen::MatrixXd& features, const Eigen::VectorXd& energies,
                                const FitOptions& options = {}) {
  if (features.rows() != energies.size()) throw PreconditionError("feature and energy counts differ");
  Eigen::MatrixXd scaled = features;
  for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
    if (!(energies(r) > 0.0)) throw PreconditionError("relative fit needs strictly positive energies");
    scaled.row(r) /= energies(r);
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(features.rows());
  auto sol = solve_nonnegative_lsq(scaled, ones, options.solver);
  return {sol.x, sol.objective, sol.iterations, sol.converged, sol.zero_columns};
}

// Fits the model for `preset` from the records of that preset. Records
// without a positive measured energy are excluded and counted.
inline EnergyModel fit(std::span<const EncodeRecord> records, ModelMode mode, Preset preset,
                       const EventMask& feature_mask, const FitOptions& options = {}) {
  EnergyModel model;
  model.preset = preset;
  model.mode = mode;

  std::vector<const EncodeRecord*> usable;
  std::size_t excluded_energy = 0;
  std::size_t excluded_uf = 0;
  for (const auto& r : records) {
    if (r.preset != preset) continue;
    if (!r.has_usable_energy()) {
      ++excluded_energy;
      continue;
    }
    if (mode == ModelMode::prior_uf && !r.events_uf) {
      ++excluded_uf;
      continue;
    }
    if (mode == ModelMode::time_baseline && !(r.time_s > 0.0)) {
      ++excluded_energy;
      continue;
    }
    usable.push_back(&r);
  }
  model.fit_meta.excluded_record_count = excluded_energy + excluded_uf;
  if (excluded_energy)
    model.fit_meta.warnings.push_back(std::to_string(excluded_energy) +
                                      " record(s) without positive measured energy excluded");
  if (excluded_uf)
    model.fit_meta.warnings.push_back(std::to_string(excluded_uf) + " record(s) without ultrafast events excluded");

  const std::vector<EventId> features = mode == ModelMode::time_baseline ? std::vector<EventId>{}
                                                                          : feature_mask.events();
  const Eigen::Index cols = mode == ModelMode::time_baseline ? 1 : static_cast<Eigen::Index>(features.size());
  if (cols == 0) throw PreconditionError("empty feature mask");
  if (usable.size() < static_cast<std::size_t>(cols)) {
    throw InsufficientData("preset " + std::string(preset_name(preset)) + ": " + std::to_string(usable.size()) +
                           " usable record(s) for " + std::to_string(cols) + " coefficient(s)");
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(usable.size()), cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(usable.size()));
  for (std::size_t b = 0; b < usable.size(); ++b) {
    const auto& r = *usable[b];
    const auto row = static_cast<Eigen::Index>(b);
    y(row) = *r.energy_j;
    if (mode == ModelMode::time_baseline) {
      x(row, 0) = r.time_s;
      continue;
    }
    const EventVector& ev = mode == ModelMode::prior_uf ? *r.events_uf : r.events;
    if (auto missing = ev.missing_from(feature_mask); !missing.empty()) throw MissingEvents(std::move(missing));
    for (std::size_t c = 0; c < features.size(); ++c)
      x(row, static_cast<Eigen::Index>(c)) = static_cast<double>(ev.at(features[c]));
  }

  const auto sol = fit_relative(x, y, options);
  for (auto col : sol.zero_columns) {
    const std::string what = mode == ModelMode::time_baseline ? std::string("time")
                                                              : std::string(event_name(features[static_cast<std::size_t>(col)]));
    model.fit_meta.warnings.push_back("degenerate design: column " + what + " is all zero, coefficient fixed to 0");
  }
  if (!sol.converged) model.fit_meta.warnings.push_back("solver hit the iteration limit");

  if (mode == ModelMode::time_baseline) {
    model.joules_per_second = sol.coefficients(0);
  } else {
    for (std::size_t c = 0; c < features.size(); ++c)
      model.set_coefficient(features[c], sol.coefficients(static_cast<Eigen::Index>(c)));
  }
  model.fit_meta.training_record_count = usable.size();
  model.fit_meta.objective_value = sol.objective;
  model.fit_meta.solver_iterations = sol.iterations;
  model.fit_meta.converged = sol.converged;
  return model;
}

// Product-moment correlation coefficient.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw PreconditionError("pearson: length mismatch");
  if (xs.size() < 2) throw InsufficientSamples("pearson needs at least 2 pairs");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ZeroVariance("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct CorrelationTable {
  std::map<EventId, double> pcc;
  std::size_t record_count = 0;
  std::vector<std::string> warnings;
};

// PCC between each event count and measured energy across records.
inline CorrelationTable correlation_table(std::span<const EncodeRecord> records) {
  CorrelationTable table;
  for (auto e : kAllEvents) {
    std::vector<double> xs, ys;
    for (const auto& r : records) {
      if (!r.has_usable_energy() || !r.events.has(e)) continue;
      xs.push_back(static_cast<double>(r.events.at(e)));
      ys.push_back(*r.energy_j);
    }
    if (xs.empty()) continue;
    table.record_count = std::max(table.record_count, xs.size());
    if (xs.size() < 2) throw InsufficientData("correlation needs at least 2 records with energy");
    try {
      table.pcc[e] = pearson(xs, ys);
    } catch (const ZeroVariance&) {
      table.warnings.push_back(std::string(event_name(e)) + ": zero variance, no coefficient");
    }
  }
  if (table.record_count == 0) throw InsufficientData("correlation needs at least 2 records with energy");
  return table;
}

}  // namespace peem
