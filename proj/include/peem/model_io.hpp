#pragma once

// Model files are JSON:
//
//   {"schema_version": 1,
//    "models": [{"preset": "medium", "mode": "posterior",
//                "feature_mask": ["Ir", "Dr"],
//                "coefficients": {"Ir": 7.5e-09, "Dr": 8.6e-09},
//                "fit_meta": {...}}]}
//
// Coefficients are written as shortest round-trip decimals, so a
// save/load cycle reproduces every double bit for bit.

#include <json.hpp>

#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "peem/errors.hpp"
#include "peem/model.hpp"

namespace peem {

struct ModelSet {
  int schema_version = kModelSchemaVersion;
  std::vector<EnergyModel> models;

  const EnergyModel* find(Preset preset, ModelMode mode) const {
    for (const auto& m : models)
      if (m.preset == preset && m.mode == mode) return &m;
    return nullptr;
  }

  // Replaces any existing model for the same (preset, mode).
  void put(EnergyModel model) {
    for (auto& m : models) {
      if (m.preset == model.preset && m.mode == model.mode) {
        m = std::move(model);
        return;
      }
    }
    models.push_back(std::move(model));
  }
};

inline nlohmann::json model_to_json(const EnergyModel& m) {
  nlohmann::json j;
  j["preset"] = std::string(preset_name(m.preset));
  j["mode"] = std::string(mode_name(m.mode));
  auto mask = nlohmann::json::array();
  auto coeffs = nlohmann::json::object();
  for (auto e : m.feature_mask.events()) {
    mask.push_back(std::string(event_name(e)));
    coeffs[std::string(event_name(e))] = m.coefficient(e);
  }
  j["feature_mask"] = mask;
  if (m.mode == ModelMode::time_baseline) {
    j["joules_per_second"] = m.joules_per_second;
  } else {
    j["coefficients"] = coeffs;
  }
  j["fit_meta"] = {
      {"training_record_count", m.fit_meta.training_record_count},
      {"excluded_record_count", m.fit_meta.excluded_record_count},
      {"objective_value", m.fit_meta.objective_value},
      {"solver_iterations", m.fit_meta.solver_iterations},
      {"converged", m.fit_meta.converged},
      {"schema_version", m.fit_meta.schema_version},
      {"warnings", m.fit_meta.warnings},
  };
  return j;
}

inline EnergyModel model_from_json(const nlohmann::json& j) {
  try {
    EnergyModel m;
    m.preset = parse_preset(j.at("preset").get<std::string>());
    m.mode = parse_mode(j.at("mode").get<std::string>());
    EventMask mask;
    for (const auto& name : j.at("feature_mask")) {
      auto e = event_from_name(name.get<std::string>());
      if (!e) throw ParseError(0, "unknown event '" + name.get<std::string>() + "' in model file");
      mask.insert(*e);
    }
    if (m.mode == ModelMode::time_baseline) {
      if (!mask.empty()) throw ParseError(0, "time_baseline model must have an empty feature_mask");
      m.joules_per_second = j.at("joules_per_second").get<double>();
      if (!(m.joules_per_second >= 0.0)) throw ParseError(0, "negative coefficient in model file");
    } else {
      const auto& coeffs = j.at("coefficients");
      if (coeffs.size() != mask.size()) throw ParseError(0, "coefficient keys differ from feature_mask");
      for (auto e : mask.events()) {
        const double c = coeffs.at(std::string(event_name(e))).get<double>();
        if (!(c >= 0.0)) throw ParseError(0, "negative coefficient in model file");
        m.set_coefficient(e, c);
      }
    }
    if (j.contains("fit_meta")) {
      const auto& meta = j.at("fit_meta");
      m.fit_meta.training_record_count = meta.value("training_record_count", std::size_t{0});
      m.fit_meta.excluded_record_count = meta.value("excluded_record_count", std::size_t{0});
      m.fit_meta.objective_value = meta.value("objective_value", 0.0);
      m.fit_meta.solver_iterations = meta.value("solver_iterations", std::size_t{0});
      m.fit_meta.converged = meta.value("converged", true);
      m.fit_meta.schema_version = meta.value("schema_version", kModelSchemaVersion);
      m.fit_meta.warnings = meta.value("warnings", std::vector<std::string>{});
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, std::string("model file: ") + ex.what());
  }
}

inline std::string models_to_string(const ModelSet& set) {
  nlohmann::json j;
  j["schema_version"] = set.schema_version;
  j["models"] = nlohmann::json::array();
  for (const auto& m : set.models) j["models"].push_back(model_to_json(m));
  return j.dump(2) + "\n";
}

inline ModelSet models_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, std::string("model file: ") + ex.what());
  }
  ModelSet set;
  set.schema_version = j.value("schema_version", 0);
  if (set.schema_version != kModelSchemaVersion)
    throw ParseError(0, "unsupported model schema_version " + std::to_string(set.schema_version));
  if (!j.contains("models") || !j["models"].is_array()) throw ParseError(0, "model file lacks a models array");
  for (const auto& m : j["models"]) set.models.push_back(model_from_json(m));
  return set;
}

inline void save_models(const std::string& path, const ModelSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  out << models_to_string(set);
}

inline ModelSet load_models(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return models_from_string(text);
}

}  // namespace peem
