// peem command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 tool or meter unavailable.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "peem/peem.hpp"

namespace {

using namespace peem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTool = 3;

struct Globals {
  std::string dataset;
  std::string model;
  std::uint64_t seed = 0;
  double confidence = 0.95;
  std::string output_format = "table";

  OutputFormat format() const { return parse_output_format(output_format); }
};

void warn(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
  return value;
}

std::vector<Preset> parse_preset_list(const std::vector<std::string>& names) {
  std::vector<Preset> out;
  for (const auto& n : names) out.push_back(parse_preset(n));
  return out;
}

std::vector<Preset> presets_in(const Dataset& ds) {
  std::vector<Preset> out;
  for (auto p : kAllPresets)
    for (const auto& r : ds.records)
      if (r.preset == p) {
        out.push_back(p);
        break;
      }
  return out;
}

// "Ir=10,Dr=4" -> event vector
EventVector parse_event_assignments(const std::string& text) {
  EventVector ev;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError(0, "expected EVENT=COUNT, got '" + item + "'");
    auto e = event_from_name(detail::trim(std::string_view(item).substr(0, eq)));
    if (!e) throw ParseError(0, "unknown event '" + item.substr(0, eq) + "'");
    auto v = detail::parse_u64(detail::trim(std::string_view(item).substr(eq + 1)));
    if (!v) throw ParseError(0, "bad count in '" + item + "'");
    ev.set(*e, *v);
  }
  return ev;
}

std::unique_ptr<EnergyMeter> open_meter(const std::string& domain) { return std::make_unique<PowercapMeter>(domain); }

void print_measurement(const EnergyMeasurement& m, OutputFormat fmt) {
  if (fmt == OutputFormat::csv) {
    std::cout << std::setprecision(17) << "e_total_j,e_idle_j,duration_s,e_enc_j,repeats,significant,ci_halfwidth_rel\n"
              << m.e_total << ',' << m.e_idle << ',' << m.duration_t << ',' << m.e_enc << ',' << m.repeats << ','
              << (m.significant ? 1 : 0) << ',' << m.ci_halfwidth_rel << '\n';
    return;
  }
  std::cout << std::fixed << std::setprecision(4) << "E_total   " << m.e_total << " J\n"
            << "E_idle    " << m.e_idle << " J\n"
            << "T         " << m.duration_t << " s\n"
            << "E_enc     " << m.e_enc << " J\n"
            << "repeats   " << m.repeats << '\n'
            << "CI/mean   " << std::setprecision(2) << m.ci_halfwidth_rel * 100.0 << " %\n"
            << "significant " << (m.significant ? "yes" : "no") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profile-driven energy models for video encoding"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--dataset", g.dataset, "Dataset CSV path");
  app.add_option("--model", g.model, "Model file path (JSON)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--confidence", g.confidence, "Confidence level")->check(CLI::IsMember({0.90, 0.95, 0.99}));
  app.add_option("--output-format", g.output_format, "Output format")->check(CLI::IsMember({"csv", "table"}));

  // measure
  auto* measure = app.add_subcommand("measure", "Measure the energy of a command");
  measure->fallthrough();
  std::string domain = "package-0";
  std::size_t repeats = 3, max_repeats = 20;
  double threshold = 0.02;
  std::optional<double> idle_power;
  double idle_window = 10.0;
  bool show_output = false;
  std::vector<std::string> command;
  measure->add_option("--domain", domain, "Powercap domain");
  measure->add_option("--repeats", repeats, "Minimum runs")->check(CLI::Range(2, 1000));
  measure->add_option("--max-repeats", max_repeats, "Maximum runs");
  measure->add_option("--threshold", threshold, "CI half-width threshold (fraction of mean)");
  measure->add_option("--idle-power", idle_power, "Idle power in W (skips calibration)");
  measure->add_option("--idle-window", idle_window, "Idle calibration window in s");
  measure->add_flag("--show-output", show_output, "Do not silence the command");
  measure->add_option("command", command, "Command to run")->required()->expected(-1);

  // calibrate-idle
  auto* calibrate = app.add_subcommand("calibrate-idle", "Measure idle power");
  calibrate->fallthrough();
  double window = 60.0;
  calibrate->add_option("--domain", domain, "Powercap domain");
  calibrate->add_option("--window", window, "Window in seconds");

  // collect
  auto* collect = app.add_subcommand("collect", "Measure and profile a run plan");
  collect->fallthrough();
  std::string plan_path;
  bool force = false;
  collect->add_option("--plan", plan_path, "Run plan (JSON)")->required();
  collect->add_flag("--force", force, "Overwrite an existing dataset");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->fallthrough();
  SynthSpec spec;
  std::vector<std::string> synth_presets;
  std::string truth_path;
  synth->add_option("--sequences", spec.n_sequences, "Number of sequences");
  synth->add_option("--presets", synth_presets, "Presets (default all)")->delimiter(',');
  synth->add_option("--crfs", spec.crfs, "CRF values")->delimiter(',');
  synth->add_option("--frames", spec.frames, "Frames per sequence");
  synth->add_option("--noise", spec.noise_rel, "Relative noise sigma");
  synth->add_option("--truth", truth_path, "Write ground-truth models here");
  synth->add_flag("--force", force, "Overwrite an existing dataset");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit per-preset models");
  fit_cmd->fallthrough();
  std::string mode_name = "posterior";
  std::string events = "all";
  std::vector<std::string> fit_presets;
  fit_cmd->add_option("--mode", mode_name, "posterior, prior_uf, time_baseline or all");
  fit_cmd->add_option("--events", events, "Feature events (comma list or 'all')");
  fit_cmd->add_option("--presets", fit_presets, "Presets (default: all in dataset)")->delimiter(',');

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "K-fold cross-validation");
  evaluate->fallthrough();
  std::size_t k = 10;
  evaluate->add_option("--mode", mode_name, "posterior, prior_uf or time_baseline");
  evaluate->add_option("--events", events, "Feature events");
  evaluate->add_option("--k", k, "Folds")->check(CLI::Range(2, 1000));

  // estimate
  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate energy with a fitted model");
  estimate_cmd->fallthrough();
  std::string preset_name_opt;
  std::string profile_path;
  std::string event_text;
  std::optional<double> time_s;
  estimate_cmd->add_option("--preset", preset_name_opt, "Preset")->required();
  estimate_cmd->add_option("--mode", mode_name, "posterior, prior_uf or time_baseline");
  estimate_cmd->add_option("--profile", profile_path, "Profile of the run (ultrafast run for prior_uf)");
  estimate_cmd->add_option("--events", event_text, "Counts as EVENT=N,...");
  estimate_cmd->add_option("--time", time_s, "Encoding time in s (time_baseline)");

  // correlate
  auto* correlate = app.add_subcommand("correlate", "Event/energy correlation");
  correlate->fallthrough();
  std::vector<std::string> corr_presets;
  correlate->add_option("--presets", corr_presets, "Restrict to presets")->delimiter(',');

  // attribute
  auto* attribute_cmd = app.add_subcommand("attribute", "Attribute energy to code categories");
  attribute_cmd->fallthrough();
  std::string categories_path;
  attribute_cmd->add_option("--profile", profile_path, "Profile")->required();
  attribute_cmd->add_option("--preset", preset_name_opt, "Preset")->required();
  attribute_cmd->add_option("--categories", categories_path, "Category map (default: built-in x265 map)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Energy per pixels by preset");
  report_cmd->fallthrough();
  double normalizer = 100000.0;
  std::optional<int> crf;
  report_cmd->add_option("--normalizer", normalizer, "Pixels per reported unit");
  report_cmd->add_option("--crf", crf, "Only this CRF");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const auto fmt = g.format();

    if (*measure) {
      auto meter = open_meter(domain);
      MeasurementLock lock;
      const double p_idle = idle_power ? *idle_power : calibrate_idle(*meter, idle_window);
      MeasureOptions opts;
      opts.repeats = repeats;
      opts.max_repeats = max_repeats;
      opts.confidence = g.confidence;
      opts.threshold = threshold;
      auto m = measure_workload(*meter, [&] { return run_command(command, {.quiet = !show_output}); }, p_idle, opts);
      warn(m.warnings);
      print_measurement(m, fmt);
    } else if (*calibrate) {
      auto meter = open_meter(domain);
      MeasurementLock lock;
      std::cout << std::setprecision(6) << calibrate_idle(*meter, window) << '\n';
    } else if (*collect) {
      require(g.dataset, "--dataset");
      if (!force && std::filesystem::exists(g.dataset))
        throw OverwriteRefused("dataset '" + g.dataset + "' exists (use --force to overwrite)");
      auto plan = load_run_plan(plan_path);
      ProcessBackend backend(plan);
      auto result = run_collect(plan, backend);
      warn(result.warnings);
      for (const auto& gap : result.dataset.gaps) std::cerr << "gap: " << gap << '\n';
      if (!backend.has_meter()) std::cerr << "warning: no energy meter, energy columns left empty\n";
      save_dataset(g.dataset, result.dataset, force);
      std::cout << result.dataset.records.size() << " record(s) written to " << g.dataset << '\n';
    } else if (*synth) {
      require(g.dataset, "--dataset");
      if (!synth_presets.empty()) spec.presets = parse_preset_list(synth_presets);
      spec.seed = g.seed;
      auto res = synth_dataset(spec);
      save_dataset(g.dataset, res.dataset, force);
      if (!truth_path.empty()) {
        ModelSet truth;
        for (auto p : spec.presets) {
          for (auto mode : {ModelMode::posterior, ModelMode::prior_uf}) {
            EnergyModel m;
            m.preset = p;
            m.mode = mode;
            const auto& c = mode == ModelMode::posterior ? res.truth.posterior[p] : res.truth.prior_uf[p];
            for (auto e : kAllEvents) m.set_coefficient(e, c[index_of(e)]);
            truth.put(m);
          }
        }
        save_models(truth_path, truth);
      }
      std::cout << res.dataset.records.size() << " record(s) written to " << g.dataset << '\n';
    } else if (*fit_cmd) {
      auto ds = load_dataset(require(g.dataset, "--dataset"));
      require(g.model, "--model");
      ModelSet set;
      if (std::filesystem::exists(g.model)) set = load_models(g.model);
      std::vector<ModelMode> modes;
      if (mode_name == "all") modes = {ModelMode::posterior, ModelMode::prior_uf, ModelMode::time_baseline};
      else modes = {parse_mode(mode_name)};
      const auto mask = parse_event_mask(events);
      const auto presets = fit_presets.empty() ? presets_in(ds) : parse_preset_list(fit_presets);
      for (auto mode : modes) {
        for (auto p : presets) {
          auto m = fit(ds.records, mode, p, mask);
          for (const auto& w : m.fit_meta.warnings)
            std::cerr << "warning: " << preset_name(p) << '/' << peem::mode_name(mode) << ": " << w << '\n';
          std::cout << preset_name(p) << '/' << peem::mode_name(mode) << ": " << m.fit_meta.training_record_count
                    << " record(s), objective " << m.fit_meta.objective_value << '\n';
          set.put(std::move(m));
        }
      }
      save_models(g.model, set);
    } else if (*evaluate) {
      auto ds = load_dataset(require(g.dataset, "--dataset"));
      CrossValidationOptions opts;
      opts.k = k;
      opts.mode = parse_mode(mode_name);
      opts.feature_mask = parse_event_mask(events);
      opts.confidence = g.confidence;
      opts.seed = g.seed;
      auto report = cross_validate(ds.records, opts);
      warn(report.warnings);
      write_evaluation(std::cout, report, fmt);
    } else if (*estimate_cmd) {
      auto set = load_models(require(g.model, "--model"));
      const auto preset = parse_preset(preset_name_opt);
      const auto mode = parse_mode(mode_name);
      const auto* model = set.find(preset, mode);
      if (!model)
        throw DataError("no " + std::string(peem::mode_name(mode)) + " model for preset " + std::string(preset_name(preset)));
      double joules = 0.0;
      if (mode == ModelMode::time_baseline) {
        if (!time_s) throw CLI::RequiredError("--time");
        joules = estimate_time(*model, *time_s);
      } else {
        EventVector ev;
        if (!profile_path.empty()) ev = parse_profile_file(profile_path).totals;
        else if (!event_text.empty()) ev = parse_event_assignments(event_text);
        else throw CLI::RequiredError("--profile or --events");
        joules = mode == ModelMode::posterior ? estimate_posterior(*model, ev) : estimate_prior(*model, ev);
      }
      std::cout << std::setprecision(17) << joules << '\n';
    } else if (*correlate) {
      auto ds = load_dataset(require(g.dataset, "--dataset"));
      std::vector<EncodeRecord> subset;
      const auto wanted = parse_preset_list(corr_presets);
      for (const auto& r : ds.records)
        if (wanted.empty() || std::find(wanted.begin(), wanted.end(), r.preset) != wanted.end()) subset.push_back(r);
      auto table = correlation_table(subset);
      warn(table.warnings);
      if (fmt == OutputFormat::csv) {
        std::cout << "event,pcc\n" << std::setprecision(17);
        for (const auto& [e, v] : table.pcc) std::cout << event_name(e) << ',' << v << '\n';
      } else {
        std::cout << "event     pcc   (" << table.record_count << " records)\n" << std::fixed << std::setprecision(4);
        for (const auto& [e, v] : table.pcc) std::cout << std::left << std::setw(6) << event_name(e) << std::right
                                                        << std::setw(9) << v << '\n';
      }
    } else if (*attribute_cmd) {
      auto set = load_models(require(g.model, "--model"));
      const auto preset = parse_preset(preset_name_opt);
      const auto* model = set.find(preset, ModelMode::posterior);
      if (!model) throw DataError("no posterior model for preset " + std::string(preset_name(preset)));
      CategoryMap map = default_x265_category_map();
      if (!categories_path.empty()) {
        std::ifstream in(categories_path);
        if (!in) throw DataError("cannot open category map '" + categories_path + "'");
        std::stringstream text;
        text << in.rdbuf();
        map = load_category_map(text.str());
      }
      const auto profile = parse_profile_file(profile_path);
      auto report = attribute(profile.functions, *model, map);
      warn(report.warnings);
      if (fmt == OutputFormat::csv) write_attribution_csv(std::cout, report);
      else write_attribution_table(std::cout, report);
    } else if (*report_cmd) {
      auto ds = load_dataset(require(g.dataset, "--dataset"));
      ModelSet set;
      if (!g.model.empty()) set = load_models(g.model);
      auto rows = report_energy_per_pixels(ds, set, normalizer, crf);
      write_energy_per_pixels(std::cout, rows, normalizer, fmt);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ToolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitTool;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
