#pragma once

// End-to-end collection: for every (sequence, preset, CRF) cell, one or more
// unprofiled encodes under the energy meter and one separate profiled encode.
// Energy never comes from a profiled run.

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "peem/dataset.hpp"
#include "peem/errors.hpp"
#include "peem/evaluation.hpp"
#include "peem/model.hpp"
#include "peem/model_io.hpp"
#include "peem/power_meter.hpp"
#include "peem/profile.hpp"
#include "peem/subprocess.hpp"

namespace peem {

struct SequenceSpec {
  std::string path;
  std::string sequence_id;
  std::uint64_t pixels = 0;  // luma pixels per frame
  std::size_t frames = 8;
  std::map<std::string, std::string> vars;  // extra template placeholders (width, height, fps, ...)
};

struct RunPlan {
  std::vector<SequenceSpec> sequences;
  std::vector<Preset> presets;
  std::vector<int> crfs{18, 23, 28, 33};
  std::size_t repeats = 3;
  std::size_t max_repeats = 20;
  double confidence = 0.95;
  double threshold = 0.02;
  // argv templates. Placeholders: {input} {preset} {crf} {frames} {output}
  // {sequence_id}, plus {profile} in the profiler template and any per-sequence var.
  std::vector<std::string> encoder;
  std::vector<std::string> profiler{"valgrind",          "--tool=cachegrind", "--cache-sim=yes",
                                    "--branch-sim=yes", "--cachegrind-out-file={profile}"};
  std::string domain = "package-0";
  std::optional<double> idle_power_w;
  double idle_window_s = 60.0;
  std::string work_dir = ".";
  std::string encoder_version;
};

inline void validate_run_plan(const RunPlan& plan) {
  if (plan.sequences.empty()) throw DataError("run plan has no sequences");
  if (plan.presets.empty()) throw DataError("run plan has no presets");
  if (plan.crfs.empty()) throw DataError("run plan has no CRF values");
  if (plan.encoder.empty()) throw DataError("run plan has no encoder command");
  if (plan.repeats < 2) throw DataError("run plan needs repeats >= 2");
  for (const auto& s : plan.sequences) {
    if (s.sequence_id.empty()) throw DataError("sequence without sequence_id");
    if (s.frames < 1) throw DataError("sequence " + s.sequence_id + ": frames must be >= 1");
    if (s.pixels == 0) throw DataError("sequence " + s.sequence_id + ": pixels must be > 0");
  }
}

inline RunPlan run_plan_from_json(const nlohmann::json& j) {
  try {
    RunPlan plan;
    for (const auto& s : j.at("sequences")) {
      SequenceSpec seq;
      seq.path = s.at("path").get<std::string>();
      seq.sequence_id = s.at("sequence_id").get<std::string>();
      seq.pixels = s.at("pixels").get<std::uint64_t>();
      seq.frames = s.value("frames", std::size_t{8});
      if (s.contains("vars"))
        for (const auto& [k, v] : s["vars"].items()) seq.vars[k] = v.is_string() ? v.get<std::string>() : v.dump();
      plan.sequences.push_back(std::move(seq));
    }
    for (const auto& p : j.at("presets")) plan.presets.push_back(parse_preset(p.get<std::string>()));
    if (j.contains("crfs")) plan.crfs = j["crfs"].get<std::vector<int>>();
    plan.repeats = j.value("repeats", plan.repeats);
    plan.max_repeats = j.value("max_repeats", plan.max_repeats);
    plan.confidence = j.value("confidence", plan.confidence);
    plan.threshold = j.value("threshold", plan.threshold);
    plan.encoder = j.at("encoder").get<std::vector<std::string>>();
    if (j.contains("profiler")) plan.profiler = j["profiler"].get<std::vector<std::string>>();
    plan.domain = j.value("domain", plan.domain);
    if (j.contains("idle_power_w")) plan.idle_power_w = j["idle_power_w"].get<double>();
    plan.idle_window_s = j.value("idle_window_s", plan.idle_window_s);
    plan.work_dir = j.value("work_dir", plan.work_dir);
    plan.encoder_version = j.value("encoder_version", std::string{});
    validate_run_plan(plan);
    return plan;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, std::string("run plan: ") + ex.what());
  }
}

inline RunPlan load_run_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open run plan '" + path + "'");
  try {
    return run_plan_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(0, std::string("run plan: ") + ex.what());
  }
}

// Substitutes `{name}` placeholders in every argument.
inline std::vector<std::string> expand_template(const std::vector<std::string>& tmpl,
                                                const std::map<std::string, std::string>& vars) {
  std::vector<std::string> out;
  out.reserve(tmpl.size());
  for (const auto& arg : tmpl) {
    std::string s;
    std::size_t i = 0;
    while (i < arg.size()) {
      if (arg[i] == '{') {
        auto close = arg.find('}', i);
        if (close == std::string::npos) throw DataError("unterminated placeholder in '" + arg + "'");
        const auto name = arg.substr(i + 1, close - i - 1);
        auto it = vars.find(name);
        if (it == vars.end()) throw DataError("unknown placeholder {" + name + "} in '" + arg + "'");
        s += it->second;
        i = close + 1;
      } else {
        s += arg[i++];
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct Cell {
  const SequenceSpec* sequence = nullptr;
  Preset preset = Preset::ultrafast;
  int crf = 0;

  std::string label() const {
    return sequence->sequence_id + "/" + std::string(preset_name(preset)) + "/crf" + std::to_string(crf);
  }
};

struct CellMeasurement {
  double time_s = 0.0;
  std::optional<EnergyMeasurement> energy;  // absent when no meter is available
};

// Tool access for run_collect; swapped for fakes in tests.
class CollectBackend {
 public:
  virtual ~CollectBackend() = default;
  virtual void check_tools() = 0;
  virtual CellMeasurement measure(const Cell& cell) = 0;
  virtual Profile profile(const Cell& cell) = 0;
  virtual Provenance provenance() = 0;
};

inline std::string read_cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      auto colon = line.find(':');
      if (colon != std::string::npos) return std::string(detail::trim(line.substr(colon + 1)));
    }
  }
  return "unknown";
}

inline std::string read_hostname() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

// Runs the real encoder and profiler as child processes.
class ProcessBackend final : public CollectBackend {
 public:
  explicit ProcessBackend(RunPlan plan) : plan_(std::move(plan)) {}

  void check_tools() override {
    if (!find_executable(plan_.encoder.front())) throw ToolMissing("encoder not found: " + plan_.encoder.front());
    if (plan_.profiler.empty() || !find_executable(plan_.profiler.front()))
      throw ToolMissing("profiler not found: " + (plan_.profiler.empty() ? std::string("<none>") : plan_.profiler.front()));
    std::filesystem::create_directories(plan_.work_dir);
    try {
      meter_ = std::make_unique<PowercapMeter>(plan_.domain);
    } catch (const DomainUnavailable&) {
      meter_.reset();
    }
    if (meter_) {
      if (plan_.idle_power_w) {
        p_idle_ = *plan_.idle_power_w;
      } else {
        MeasurementLock lock;
        p_idle_ = calibrate_idle(*meter_, plan_.idle_window_s);
      }
    }
  }

  bool has_meter() const { return meter_ != nullptr; }

  CellMeasurement measure(const Cell& cell) override {
    const auto argv = expand_template(plan_.encoder, vars_for(cell));
    auto run = [&] { return run_command(argv, {.quiet = true}); };
    CellMeasurement out;
    if (meter_) {
      MeasurementLock lock;
      MeasureOptions opts;
      opts.repeats = plan_.repeats;
      opts.max_repeats = plan_.max_repeats;
      opts.confidence = plan_.confidence;
      opts.threshold = plan_.threshold;
      out.energy = measure_workload(*meter_, run, p_idle_, opts);
      out.time_s = out.energy->duration_t;
      return out;
    }
    const auto start = std::chrono::steady_clock::now();
    const int status = run();
    out.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (status != 0) throw CommandFailed(status);
    return out;
  }

  Profile profile(const Cell& cell) override {
    auto vars = vars_for(cell);
    const auto out_path = (std::filesystem::path(plan_.work_dir) / (stem(cell) + ".cg.out")).string();
    vars["profile"] = out_path;
    auto argv = expand_template(plan_.profiler, vars);
    auto enc = expand_template(plan_.encoder, vars);
    argv.insert(argv.end(), enc.begin(), enc.end());
    const int status = run_command(argv, {.quiet = true});
    if (status != 0) throw CommandFailed(status);
    return parse_profile_file(out_path);
  }

  Provenance provenance() override {
    Provenance p;
    p.host = read_hostname();
    p.cpu_model = read_cpu_model();
    p.encoder_version = plan_.encoder_version.empty() ? plan_.encoder.front() : plan_.encoder_version;
    p.profiler_version = plan_.profiler.empty() ? "" : plan_.profiler.front();
    return p;
  }

 private:
  static std::string stem(const Cell& cell) {
    return cell.sequence->sequence_id + "_" + std::string(preset_name(cell.preset)) + "_crf" + std::to_string(cell.crf);
  }

  std::map<std::string, std::string> vars_for(const Cell& cell) const {
    std::map<std::string, std::string> vars = cell.sequence->vars;
    vars["input"] = cell.sequence->path;
    vars["preset"] = std::string(preset_name(cell.preset));
    vars["crf"] = std::to_string(cell.crf);
    vars["frames"] = std::to_string(cell.sequence->frames);
    vars["sequence_id"] = cell.sequence->sequence_id;
    vars["output"] = (std::filesystem::path(plan_.work_dir) / (stem(cell) + ".hevc")).string();
    return vars;
  }

  RunPlan plan_;
  std::unique_ptr<EnergyMeter> meter_;
  double p_idle_ = 0.0;
};

struct CollectResult {
  Dataset dataset;
  std::vector<std::string> warnings;
};

inline CollectResult run_collect(const RunPlan& plan, CollectBackend& backend) {
  validate_run_plan(plan);
  backend.check_tools();

  CollectResult result;
  auto& ds = result.dataset;
  ds.provenance = backend.provenance();
  ds.provenance.created_at = utc_timestamp();

  for (const auto& seq : plan.sequences) {
    for (int crf : plan.crfs) {
      for (auto preset : plan.presets) {
        const Cell cell{&seq, preset, crf};
        EncodeRecord r;
        r.sequence_id = seq.sequence_id;
        r.preset = preset;
        r.crf = crf;
        r.pixels = seq.pixels * seq.frames;
        std::vector<std::string> flags;

        try {
          auto m = backend.measure(cell);
          r.time_s = m.time_s;
          if (m.energy) {
            r.energy_j = m.energy->e_enc;
            r.significant = m.energy->significant;
            if (!m.energy->significant) flags.push_back("insignificant");
            if (m.energy->e_enc <= 0.0) flags.push_back("non_positive_energy");
          } else {
            r.significant = false;
            flags.push_back("energy_unavailable");
          }
        } catch (const Error& ex) {
          r.significant = false;
          flags.push_back("measure_failed");
          ds.gaps.push_back(cell.label() + ": measurement failed: " + ex.what());
        }

        try {
          r.events = backend.profile(cell).totals;
        } catch (const Error& ex) {
          ds.gaps.push_back(cell.label() + ": profiling failed: " + ex.what());
          continue;
        }
        if (r.events.present().size() < kEventCount) flags.push_back("missing_events");

        for (std::size_t i = 0; i < flags.size(); ++i) r.flags += (i ? ";" : "") + flags[i];
        ds.records.push_back(std::move(r));
      }
    }
  }
  propagate_ultrafast_events(ds.records);
  if (!ds.gaps.empty()) result.warnings.push_back(std::to_string(ds.gaps.size()) + " cell(s) incomplete");
  return result;
}

struct EnergyPerPixelRow {
  Preset preset = Preset::ultrafast;
  std::size_t n = 0;
  double measured = 0.0;
  std::optional<double> posterior;
  std::optional<double> prior;
  std::optional<double> time_baseline;
  // Measured energy relative to the previous listed preset, in percent.
  std::optional<double> increase_vs_previous_pct;
};

// Per preset: mean over records of energy / pixels * normalizer for the
// measurement and for every model available for that preset.
inline std::vector<EnergyPerPixelRow> report_energy_per_pixels(const Dataset& ds, const ModelSet& models,
                                                               double normalizer, std::optional<int> crf = {}) {
  if (!(normalizer > 0.0)) throw PreconditionError("normalizer must be positive");
  std::map<Preset, std::vector<const EncodeRecord*>> by_preset;
  for (const auto& r : ds.records) {
    if (crf && r.crf != *crf) continue;
    if (!r.has_usable_energy() || r.pixels == 0) continue;
    by_preset[r.preset].push_back(&r);
  }
  if (by_preset.empty()) throw EmptyFilter("no records with measured energy match the filter");

  std::vector<EnergyPerPixelRow> rows;
  for (const auto& [preset, recs] : by_preset) {
    EnergyPerPixelRow row;
    row.preset = preset;
    row.n = recs.size();
    const auto* post = models.find(preset, ModelMode::posterior);
    const auto* prior = models.find(preset, ModelMode::prior_uf);
    const auto* timeb = models.find(preset, ModelMode::time_baseline);
    double m = 0.0, po = 0.0, pr = 0.0, tb = 0.0;
    for (const auto* r : recs) {
      const double per = normalizer / static_cast<double>(r->pixels);
      m += *r->energy_j * per;
      if (post) po += estimate(*post, *r) * per;
      if (prior) pr += estimate(*prior, *r) * per;
      if (timeb) tb += estimate(*timeb, *r) * per;
    }
    const double n = static_cast<double>(recs.size());
    row.measured = m / n;
    if (post) row.posterior = po / n;
    if (prior) row.prior = pr / n;
    if (timeb) row.time_baseline = tb / n;
    if (!rows.empty() && rows.back().measured > 0.0)
      row.increase_vs_previous_pct = (row.measured / rows.back().measured - 1.0) * 100.0;
    rows.push_back(row);
  }
  return rows;
}

inline void write_energy_per_pixels(std::ostream& os, const std::vector<EnergyPerPixelRow>& rows, double normalizer,
                                    OutputFormat format) {
  auto opt = [](const std::optional<double>& v, int precision) {
    if (!v) return std::string();
    std::ostringstream s;
    s << std::setprecision(precision) << *v;
    return s.str();
  };
  if (format == OutputFormat::csv) {
    os << "preset,n,measured_j,posterior_j,prior_uf_j,time_baseline_j,increase_vs_previous_pct,normalizer_pixels\n";
    for (const auto& r : rows) {
      os << preset_name(r.preset) << ',' << r.n << ',' << opt(r.measured, 17) << ',' << opt(r.posterior, 17) << ','
         << opt(r.prior, 17) << ',' << opt(r.time_baseline, 17) << ',' << opt(r.increase_vs_previous_pct, 17) << ','
         << normalizer << '\n';
    }
    return;
  }
  os << "energy per " << normalizer << " pixels (J)\n";
  os << std::left << std::setw(10) << "preset" << std::right << std::setw(6) << "n" << std::setw(13) << "measured"
     << std::setw(13) << "posterior" << std::setw(13) << "prior_uf" << std::setw(13) << "time" << std::setw(12)
     << "vs_prev" << '\n';
  for (const auto& r : rows) {
    auto cell = [&](const std::optional<double>& v) {
      std::ostringstream s;
      if (v) s << std::fixed << std::setprecision(4) << *v;
      else s << "-";
      return s.str();
    };
    std::ostringstream inc;
    if (r.increase_vs_previous_pct) inc << std::showpos << std::fixed << std::setprecision(1) << *r.increase_vs_previous_pct << '%';
    else inc << "-";
    os << std::left << std::setw(10) << preset_name(r.preset) << std::right << std::setw(6) << r.n << std::setw(13)
       << cell(r.measured) << std::setw(13) << cell(r.posterior) << std::setw(13) << cell(r.prior) << std::setw(13)
       << cell(r.time_baseline) << std::setw(12) << inc.str() << '\n';
  }
}

}  // namespace peem
