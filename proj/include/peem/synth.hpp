#pragma once

// Synthetic datasets with known ground truth, for testing the fitter and the
// evaluation pipeline.
//
// Each (sequence, CRF) pair draws a latent workload size (pixels x content
// complexity x CRF factor). Ultrafast event counts are that workload times
// per-event rates, each perturbed by independent log-normal jitter, so events
// are strongly but not perfectly correlated. Other presets scale each
// ultrafast count by a fixed per-(preset, event) factor. Energy is
//   y = (x . e*) * (1 + eta),   eta = noise_rel * N(0, 1), clamped at -0.9.
// Because preset counts are scaled ultrafast counts, the ultrafast-feature
// model of preset X is also linear, with coefficients factor_X,i * e*_X,i.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "peem/dataset.hpp"
#include "peem/events.hpp"
#include "peem/model.hpp"

namespace peem {

using CoefficientArray = std::array<double, kEventCount>;

struct SynthSpec {
  std::vector<Preset> presets{kAllPresets.begin(), kAllPresets.end()};
  std::size_t n_sequences = 22;
  std::vector<int> crfs{18, 23, 28, 33};
  std::size_t frames = 8;
  // Optional per-preset overrides; presets without one get generated coefficients.
  std::map<Preset, CoefficientArray> true_coefficients;
  double noise_rel = 0.0;
  std::uint64_t seed = 1;
};

struct GroundTruth {
  std::map<Preset, CoefficientArray> posterior;    // e*_X
  std::map<Preset, CoefficientArray> prior_uf;     // factor_X,i * e*_X,i
  std::map<Preset, CoefficientArray> scale;        // factor_X,i (1 for ultrafast)
  std::vector<double> noise;                       // eta per record, in record order
};

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
};

namespace detail {

// Portable draws from a 64-bit engine (the standard distributions are
// implementation-defined).
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    cached_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  double lognormal(double sigma) { return std::exp(sigma * normal()); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool cached_ = false;
};

struct EventRecipe {
  std::optional<EventId> parent;  // nullopt: scales with the workload directly
  double rate;                    // mean count per parent occurrence (per pixel for Ir)
  double jitter;                  // log-normal sigma
  double energy_share;            // target share of ultrafast energy
};

inline const std::array<EventRecipe, kEventCount>& event_recipes() {
  static const std::array<EventRecipe, kEventCount> recipes = {{
      {std::nullopt, 400.0, 0.10, 0.30},   // Ir
      {EventId::Ir, 0.35, 0.12, 0.12},     // Dr
      {EventId::Ir, 0.15, 0.12, 0.08},     // Dw
      {EventId::Ir, 0.002, 0.25, 0.05},    // I1mr
      {EventId::Dr, 0.02, 0.20, 0.08},     // D1mr
      {EventId::Dw, 0.01, 0.20, 0.04},     // D1mw
      {EventId::I1mr, 0.05, 0.50, 0.02},   // ILmr
      {EventId::D1mr, 0.10, 0.50, 0.05},   // DLmr
      {EventId::D1mw, 0.20, 0.50, 0.03},   // DLmw
      {EventId::Ir, 0.12, 0.10, 0.10},     // Bc
      {EventId::Bc, 0.05, 0.20, 0.06},     // Bcm
      {EventId::Ir, 0.005, 0.20, 0.03},    // Bi
      {EventId::Bi, 0.20, 0.25, 0.04},     // Bim
  }};
  return recipes;
}

// Mean count per pixel of each event, following the parent chain.
inline double per_pixel_rate(EventId e) {
  const auto& r = event_recipes()[index_of(e)];
  return r.parent ? r.rate * per_pixel_rate(*r.parent) : r.rate;
}

// Relative energy of the presets, ultrafast = 1.
inline constexpr std::array<double, 9> kPresetComplexity = {1.0, 1.75, 2.22, 2.22, 2.38, 2.74, 5.53, 17.3, 26.3};

inline constexpr double kJoulesPerPixelUltrafast = 3e-6;

inline constexpr std::array<std::uint64_t, 6 * 2> kResolutions = {416,  240,  832,  480,  1280, 720,
                                                                   1920, 1080, 2560, 1600, 3840, 2160};

}  // namespace detail

inline SynthResult synth_dataset(const SynthSpec& spec) {
  detail::SynthRng rng(spec.seed);
  const auto& recipes = detail::event_recipes();
  SynthResult out;
  out.dataset.provenance.host = "synthetic";
  out.dataset.provenance.cpu_model = "synthetic";
  out.dataset.provenance.encoder_version = "synthetic";
  out.dataset.provenance.profiler_version = "synthetic";
  out.dataset.provenance.created_at = "seed " + std::to_string(spec.seed);

  for (auto preset : spec.presets) {
    CoefficientArray scale{};
    CoefficientArray coeff{};
    const double complexity = detail::kPresetComplexity[static_cast<std::size_t>(preset)];
    for (auto e : kAllEvents) {
      const auto i = index_of(e);
      scale[i] = preset == Preset::ultrafast ? 1.0 : complexity * (0.85 + 0.3 * rng.uniform());
      const double base = recipes[i].energy_share * detail::kJoulesPerPixelUltrafast / detail::per_pixel_rate(e);
      coeff[i] = base * (0.85 + 0.3 * rng.uniform());
    }
    if (auto it = spec.true_coefficients.find(preset); it != spec.true_coefficients.end()) coeff = it->second;
    CoefficientArray prior{};
    for (std::size_t i = 0; i < kEventCount; ++i) prior[i] = scale[i] * coeff[i];
    out.truth.posterior[preset] = coeff;
    out.truth.prior_uf[preset] = prior;
    out.truth.scale[preset] = scale;
  }

  for (std::size_t s = 0; s < spec.n_sequences; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "seq%03zu", s);
    const std::size_t res = static_cast<std::size_t>(rng.uniform() * 6.0) % 6;
    const std::uint64_t pixels = detail::kResolutions[2 * res] * detail::kResolutions[2 * res + 1] * spec.frames;
    const double content = rng.lognormal(0.4);

    for (int crf : spec.crfs) {
      const double workload = static_cast<double>(pixels) * content * std::exp(-0.03 * (crf - 23));
      std::array<double, kEventCount> uf_real{};
      EventVector uf;
      for (auto e : kAllEvents) {
        const auto i = index_of(e);
        const auto& rec = recipes[i];
        const double parent = rec.parent ? uf_real[index_of(*rec.parent)] : workload;
        uf_real[i] = std::min(parent, parent * rec.rate * rng.lognormal(rec.jitter));
      }
      for (auto e : kAllEvents) uf.set(e, static_cast<std::uint64_t>(std::llround(uf_real[index_of(e)])));

      for (auto preset : spec.presets) {
        const auto& scale = out.truth.scale[preset];
        const auto& coeff = out.truth.posterior[preset];
        EncodeRecord r;
        r.sequence_id = id;
        r.preset = preset;
        r.crf = crf;
        r.pixels = pixels;
        double truth_energy = 0.0;
        std::array<double, kEventCount> counts{};
        for (auto e : kAllEvents) {
          const auto i = index_of(e);
          counts[i] = preset == Preset::ultrafast ? static_cast<double>(uf.at(e))
                                                  : std::round(uf_real[i] * scale[i]);
        }
        // Rounding and scaling can push a child count past its parent.
        for (auto [child, parent] : kMissHierarchy)
          counts[index_of(child)] = std::min(counts[index_of(child)], counts[index_of(parent)]);
        for (auto e : kAllEvents) {
          r.events.set(e, static_cast<std::uint64_t>(counts[index_of(e)]));
          truth_energy += counts[index_of(e)] * coeff[index_of(e)];
        }
        const double eta = std::max(-0.9, spec.noise_rel * rng.normal());
        r.energy_j = truth_energy * (1.0 + eta);
        r.time_s = *r.energy_j / (40.0 * (1.0 + 0.03 * rng.normal()));
        r.significant = true;
        r.events_uf = uf;
        out.truth.noise.push_back(eta);
        out.dataset.records.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace peem
