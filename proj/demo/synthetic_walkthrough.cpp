// Walk through the offline workflow on synthetic data:
// generate a dataset, fit both model kinds, cross-validate, report
// energy per pixel and attribute a profile to encoder modules.
//
//   synthetic_walkthrough [profile.out]

#include <iostream>

#include "peem/peem.hpp"

int main(int argc, char** argv) {
  using namespace peem;

  SynthSpec spec;
  spec.noise_rel = 0.03;
  spec.seed = 11;
  const auto synth = synth_dataset(spec);
  const auto& records = synth.dataset.records;
  std::cout << "dataset: " << records.size() << " records\n\n";

  ModelSet models;
  for (auto p : kAllPresets) {
    models.put(fit(records, ModelMode::posterior, p, EventMask::all()));
    if (p != Preset::ultrafast) models.put(fit(records, ModelMode::prior_uf, p, EventMask::all()));
  }
  const auto& medium = *models.find(Preset::medium, ModelMode::posterior);
  std::cout << "medium posterior coefficients (nJ/event), fitted vs true:\n";
  for (auto e : kAllEvents)
    std::cout << "  " << event_name(e) << "  " << medium.coefficient(e) * 1e9 << "  "
              << synth.truth.posterior.at(Preset::medium)[index_of(e)] * 1e9 << "\n";

  CrossValidationOptions cv_opts;
  cv_opts.k = 10;
  cv_opts.seed = 3;
  std::cout << "\n10-fold cross-validation, posterior:\n";
  write_evaluation(std::cout, cross_validate(records, cv_opts), OutputFormat::table);

  std::cout << "\nenergy per 100000 pixels at CRF 23:\n";
  write_energy_per_pixels(std::cout, report_energy_per_pixels(synth.dataset, models, 1e5, 23), 1e5,
                          OutputFormat::table);

  if (argc > 1) {
    const auto profile = parse_profile_file(argv[1]);
    const auto result = attribute(profile.functions, medium, default_x265_category_map());
    std::cout << "\nattribution of " << argv[1] << " with the medium model:\n";
    write_attribution_table(std::cout, result);
  }
  return 0;
}
