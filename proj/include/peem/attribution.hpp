#pragma once

// Splits the estimated energy of a profiled encode across encoder stages.
// Each function's self cost is priced with the posterior model's per-event
// energies; functions are bucketed by the first matching glob rule.

#include <fnmatch.h>

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "peem/errors.hpp"
#include "peem/model.hpp"
#include "peem/profile.hpp"

namespace peem {

struct CategoryRule {
  std::string pattern;
  std::string category;
};

struct CategoryMap {
  std::vector<CategoryRule> rules;
  std::string default_category = "uncategorized";

  // First rule whose glob matches the function name or its source file.
  const std::string& classify(std::string_view function_name, std::string_view source_file) const {
    const std::string name(function_name);
    const std::string file(source_file);
    for (const auto& rule : rules) {
      if (::fnmatch(rule.pattern.c_str(), name.c_str(), 0) == 0) return rule.category;
      if (!file.empty() && ::fnmatch(rule.pattern.c_str(), file.c_str(), 0) == 0) return rule.category;
    }
    return default_category;
  }
};

// Line format: `glob => category`, `#` starts a comment.
inline CategoryMap load_category_map(std::string_view text) {
  CategoryMap map;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto arrow = line.find("=>");
    if (arrow == std::string_view::npos) throw ParseError(line_no, "expected 'pattern => category'");
    auto pattern = detail::trim(line.substr(0, arrow));
    auto category = detail::trim(line.substr(arrow + 2));
    if (pattern.empty()) throw ParseError(line_no, "empty pattern");
    if (category.empty()) throw ParseError(line_no, "empty category");
    map.rules.push_back({std::string(pattern), std::string(category)});
  }
  return map;
}

// Best-effort curation of x265 symbols (demangled) into encoder stages.
// Version 1; intra-coding stages only, no motion estimation/compensation.
inline constexpr std::string_view kDefaultX265CategoryMap = R"(# x265 stage map v1
# intra mode decision
x265::Search::checkIntra*            => intra-mode-search
x265::Search::estIntraPred*          => intra-mode-search
x265::Search::codeIntraLuma*         => intra-mode-search
x265::Search::codeIntraChroma*       => intra-mode-search
x265::Search::getBestIntra*          => intra-mode-search
x265::Analysis::checkIntra*          => intra-mode-search
x265::Analysis::compressIntraCU*     => intra-mode-search
*sa8d*                               => intra-mode-search
*satd*                               => intra-mode-search
# intra prediction
x265::Predict::*ntra*                => intra-prediction
x265::Predict::initAdiPattern*       => intra-prediction
*intra_pred*                         => intra-prediction
*intra_filter*                       => intra-prediction
*all_angs_pred*                      => intra-prediction
# entropy coding
x265::Entropy::*                     => entropy
x265::Bitstream::*                   => entropy
x265::BitCounter::*                  => entropy
x265::SyntaxElementWriter::*         => entropy
*findPosFirstLast*                   => entropy
*costCoeffNxN*                       => entropy
*costC1C2Flag*                       => entropy
# transform and quantisation
x265::Quant::*                       => quant-and-transform
x265::RDOQ*                          => quant-and-transform
*dct*                                => quant-and-transform
*dst4*                               => quant-and-transform
*quant*                              => quant-and-transform
*transpose*                          => quant-and-transform
*count_nonzero*                      => quant-and-transform
*copy_cnt*                           => quant-and-transform
*cpy2Dto1D*                          => quant-and-transform
*cpy1Dto2D*                          => quant-and-transform
x265::Search::residualTransformQuant* => quant-and-transform
# in-loop filtering
x265::Deblock::*                     => in-loop
x265::SAO::*                         => in-loop
x265::FrameFilter::*                 => in-loop
*saoCu*                              => in-loop
*sao_*                               => in-loop
*deblock*                            => in-loop
# CTU / CU level preprocessing
x265::CUData::*                      => ctu-cu-preproc
x265::CUGeom::*                      => ctu-cu-preproc
x265::Analysis::compressCTU*         => ctu-cu-preproc
x265::Mode::*                        => ctu-cu-preproc
x265::Yuv::*                         => ctu-cu-preproc
x265::ShortYuv::*                    => ctu-cu-preproc
*blockcopy*                          => ctu-cu-preproc
*pixel_sub_ps*                       => ctu-cu-preproc
*pixel_add_ps*                       => ctu-cu-preproc
# frame level initialisation
x265::FrameEncoder::*                => frame-level-init
x265::Frame::*                       => frame-level-init
x265::FrameData::*                   => frame-level-init
x265::PicYuv::*                      => frame-level-init
x265::Lookahead::*                   => frame-level-init
x265::RateControl::*                 => frame-level-init
x265::Slice::*                       => frame-level-init
x265::DPB::*                         => frame-level-init
# global initialisation
x265::Encoder::*                     => global-init
x265::ThreadPool::*                  => global-init
x265::Setup*Primitives*              => global-init
x265::setupCPrimitives*              => global-init
x265::setupAssemblyPrimitives*       => global-init
x265::initROM*                       => global-init
x265::initZscanToRaster*             => global-init
x265_encoder_open*                   => global-init
x265_param_*                         => global-init
main                                 => global-init
)";

inline CategoryMap default_x265_category_map() { return load_category_map(kDefaultX265CategoryMap); }

struct CategoryEnergy {
  std::string category;
  double energy_j = 0.0;
  double fraction = 0.0;
};

struct AttributionReport {
  std::vector<CategoryEnergy> categories;  // descending energy
  double total_j = 0.0;
  // Share of the estimated energy that landed in a rule-matched category.
  double coverage = 0.0;
  std::vector<std::string> warnings;

  const CategoryEnergy* find(std::string_view category) const {
    for (const auto& c : categories)
      if (c.category == category) return &c;
    return nullptr;
  }
};

inline constexpr double kCoverageWarningThreshold = 0.9;

inline AttributionReport attribute(std::span<const FunctionProfile> functions, const EnergyModel& model,
                                   const CategoryMap& map) {
  if (model.mode != ModelMode::posterior) throw PreconditionError("attribution needs a posterior model");
  if (functions.empty()) throw EmptyProfile("profile has no function records");

  struct Priced {
    const FunctionProfile* fn;
    double energy;
  };
  std::vector<Priced> priced;
  priced.reserve(functions.size());
  for (const auto& f : functions) priced.push_back({&f, estimate_posterior(model, f.counts)});
  // Summation order fixed by (name, file) so the report does not depend on input order.
  std::sort(priced.begin(), priced.end(), [](const Priced& a, const Priced& b) {
    if (a.fn->function_name != b.fn->function_name) return a.fn->function_name < b.fn->function_name;
    return a.fn->source_file < b.fn->source_file;
  });

  std::map<std::string, double> per_category;
  double total = 0.0;
  for (const auto& p : priced) {
    per_category[map.classify(p.fn->function_name, p.fn->source_file)] += p.energy;
    total += p.energy;
  }
  if (!(total > 0.0)) throw EmptyProfile("profile has zero estimated energy");

  AttributionReport report;
  report.total_j = total;
  double uncategorized = 0.0;
  for (const auto& [category, energy] : per_category) {
    report.categories.push_back({category, energy, energy / total});
    if (category == map.default_category) uncategorized = energy;
  }
  std::sort(report.categories.begin(), report.categories.end(), [](const CategoryEnergy& a, const CategoryEnergy& b) {
    if (a.energy_j != b.energy_j) return a.energy_j > b.energy_j;
    return a.category < b.category;
  });
  report.coverage = 1.0 - uncategorized / total;
  if (report.coverage < kCoverageWarningThreshold) {
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(1) << "category map covers only " << report.coverage * 100.0
        << "% of the estimated energy";
    report.warnings.push_back(msg.str());
  }
  return report;
}

inline void write_attribution_csv(std::ostream& os, const AttributionReport& report) {
  os << "category,energy_j,fraction_pct\n";
  for (const auto& c : report.categories) {
    os << c.category << ',' << std::setprecision(17) << c.energy_j << ',' << std::fixed << std::setprecision(1)
       << c.fraction * 100.0 << '\n';
    os.unsetf(std::ios::floatfield);
  }
}

inline void write_attribution_table(std::ostream& os, const AttributionReport& report) {
  os << std::left << std::setw(22) << "category" << std::right << std::setw(14) << "energy_j" << std::setw(9) << "share"
     << '\n';
  for (const auto& c : report.categories) {
    os << std::left << std::setw(22) << c.category << std::right << std::scientific << std::setprecision(4)
       << std::setw(14) << c.energy_j << std::fixed << std::setprecision(1) << std::setw(8) << c.fraction * 100.0
       << "%\n";
  }
  os << std::left << std::setw(22) << "total" << std::right << std::scientific << std::setprecision(4) << std::setw(14)
     << report.total_j << std::fixed << std::setprecision(1) << std::setw(8) << report.coverage * 100.0
     << "% covered\n";
  os.unsetf(std::ios::floatfield);
}

}  // namespace peem
