#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "peem/bounded_lsq.hpp"
#include "peem/evaluation.hpp"
#include "peem/model.hpp"
#include "peem/model_io.hpp"
#include "peem/statistics.hpp"
#include "peem/synth.hpp"

using namespace peem;
using peem::testing::close_rel;

namespace {

// Exhaustive NNLS: best feasible least-squares solution over every passive set.
Eigen::VectorXd brute_force_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto n = a.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_obj = b.squaredNorm();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
    Eigen::VectorXd z = sub.householderQr().solve(b);
    if ((z.array() < 0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) x(cols[c]) = z(static_cast<Eigen::Index>(c));
    const double obj = (a * x - b).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

EncodeRecord make_record(const std::string& seq, Preset preset, int crf, const EventVector& ev, double energy) {
  EncodeRecord r;
  r.sequence_id = seq;
  r.preset = preset;
  r.crf = crf;
  r.events = ev;
  r.energy_j = energy;
  r.pixels = 1000;
  r.time_s = energy / 40.0;
  return r;
}

EnergyModel random_model(std::mt19937_64& rng, ModelMode mode = ModelMode::posterior) {
  std::uniform_real_distribution<double> u(0.0, 1e-6);
  EnergyModel m;
  m.mode = mode;
  for (auto e : kAllEvents) m.set_coefficient(e, u(rng));
  return m;
}

EventVector random_events(std::mt19937_64& rng, std::uint64_t max = 1'000'000) {
  std::uniform_int_distribution<std::uint64_t> u(0, max);
  EventVector v;
  for (auto e : kAllEvents) v.set(e, u(rng));
  return v;
}

}  // namespace

// ---- statistics -----------------------------------------------------------

TEST(Statistics, ZScoreTable) {
  EXPECT_EQ(z_score(0.90), 1.645);
  EXPECT_EQ(z_score(0.95), 1.96);
  EXPECT_EQ(z_score(0.99), 2.576);
  EXPECT_THROW(z_score(0.8), PreconditionError);
}

TEST(Statistics, MeanAndSampleDeviation) {
  std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean_of(xs), 5.0);
  EXPECT_DOUBLE_EQ(sample_stddev(xs), std::sqrt(32.0 / 7.0));
  EXPECT_THROW(mean_of(std::vector<double>{}), EmptyInput);
  EXPECT_THROW(sample_stddev(std::vector<double>{1.0}), InsufficientSamples);
}

TEST(Evaluation, PercentageError) {
  EXPECT_DOUBLE_EQ(percentage_error(110.0, 100.0), 10.0);
  EXPECT_DOUBLE_EQ(percentage_error(93.0, 100.0), -7.0);
  EXPECT_THROW(percentage_error(1.0, 0.0), ZeroMeasured);
  EXPECT_THROW(percentage_error(1.0, -2.0), ZeroMeasured);
}

TEST(Evaluation, MapeExample) {
  std::vector<double> r{3, -7, 2, -8};
  EXPECT_DOUBLE_EQ(mape(r), 5.0);
  EXPECT_THROW(mape(std::vector<double>{}), EmptyInput);
}

TEST(Evaluation, StatisticsMatchBruteForce) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.5, 4.0);
  std::uniform_int_distribution<int> len(2, 60);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(static_cast<std::size_t>(len(rng)));
    for (auto& x : xs) x = nd(rng);
    EXPECT_TRUE(close_rel(mape(xs), peem::testing::ref_mape(xs), 1e-12));
    for (double conf : {0.90, 0.95, 0.99}) {
      const auto ci = mean_confidence_interval(xs, conf);
      const auto [lo, hi] = peem::testing::ref_ci(xs, z_score(conf));
      EXPECT_TRUE(close_rel(ci.low, lo, 1e-12));
      EXPECT_TRUE(close_rel(ci.high, hi, 1e-12));
      EXPECT_LE(ci.low, ci.mean);
      EXPECT_GE(ci.high, ci.mean);
    }
  }
}

TEST(Evaluation, HalfWidthShrinksWithSampleSize) {
  std::vector<double> xs{1.0, -2.0, 0.5, 3.0, -1.5};
  std::vector<double> doubled = xs;
  doubled.insert(doubled.end(), xs.begin(), xs.end());
  const auto a = mean_confidence_interval(xs, 0.95);
  const auto b = mean_confidence_interval(doubled, 0.95);
  // Same values twice: sample sd changes by sqrt((n-1)/(2n-1) * 2), mean is unchanged.
  const double n = static_cast<double>(xs.size());
  const double expected = a.half_width / std::sqrt(2.0) * std::sqrt(2.0 * (n - 1.0) / (2.0 * n - 1.0));
  EXPECT_NEAR(b.half_width, expected, 1e-9);
  EXPECT_NEAR(a.half_width, 1.96 * a.stddev / std::sqrt(n), 1e-12);
}

// ---- pearson ----------------------------------------------------------------

TEST(Pearson, WorkedExample) {
  std::vector<double> xs{1, 2, 3, 5}, ys{2, 1, 4, 6};
  EXPECT_NEAR(pearson(xs, ys), 10.25 / std::sqrt(8.75 * 14.75), 1e-15);
}

TEST(Pearson, Extremes) {
  std::vector<double> xs{1, 2, 3, 4}, up{3, 5, 7, 9}, down{-1, -2, -3, -4}, flat{2, 2, 2, 2};
  EXPECT_DOUBLE_EQ(pearson(xs, up), 1.0);
  EXPECT_DOUBLE_EQ(pearson(xs, down), -1.0);
  EXPECT_THROW(pearson(xs, flat), ZeroVariance);
  EXPECT_THROW(pearson(flat, xs), ZeroVariance);
}

TEST(Pearson, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(40), ys(40);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] = 1e6 + 1e3 * nd(rng);
      ys[i] = 0.3 * xs[i] + 500.0 * nd(rng);
    }
    const double r = pearson(xs, ys);
    EXPECT_NEAR(r, static_cast<double>(peem::testing::ref_pearson(xs, ys)), 1e-12);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
}

// ---- bounded least squares -------------------------------------------------

TEST(BoundedLsq, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index m = 12, n = 4;
    Eigen::MatrixXd a(m, n);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(rng);
      b(i) = nd(rng);
    }
    const auto sol = solve_nonnegative_lsq(a, b);
    const auto ref = brute_force_nnls(a, b);
    ASSERT_TRUE(sol.converged);
    EXPECT_TRUE((sol.x.array() >= 0.0).all());
    EXPECT_LT((sol.x - ref).norm(), 1e-9 * std::max(1.0, ref.norm())) << "trial " << trial;
    EXPECT_NEAR(sol.objective, (a * ref - b).squaredNorm(), 1e-9);
  }
}

TEST(BoundedLsq, ClampsNegativeUnconstrainedSolution) {
  // Unconstrained optimum is (1, -1); the constrained one puts x1 on the boundary.
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3);
  b << 1, -1, 0;
  const auto sol = solve_nonnegative_lsq(a, b);
  EXPECT_EQ(sol.x(1), 0.0);
  EXPECT_NEAR(sol.x(0), 0.5, 1e-14);
}

TEST(BoundedLsq, ZeroColumnPinnedToZero) {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 2, 0, 3, 0;
  Eigen::VectorXd b(3);
  b << 2, 4, 6;
  const auto sol = solve_nonnegative_lsq(a, b);
  EXPECT_NEAR(sol.x(0), 2.0, 1e-14);
  EXPECT_EQ(sol.x(1), 0.0);
  EXPECT_EQ(sol.zero_columns, std::vector<Eigen::Index>{1});
}

// ---- fit and estimate ------------------------------------------------------

TEST(Fit, RecoversExactCoefficients) {
  SynthSpec spec;
  spec.presets = {Preset::ultrafast, Preset::medium};
  spec.n_sequences = 12;
  auto res = synth_dataset(spec);
  for (auto p : spec.presets) {
    auto m = fit(res.dataset.records, ModelMode::posterior, p, EventMask::all());
    EXPECT_TRUE(m.fit_meta.converged);
    EXPECT_EQ(m.fit_meta.training_record_count, 48u);
    for (auto e : kAllEvents) {
      const double truth = res.truth.posterior[p][index_of(e)];
      EXPECT_NEAR(m.coefficient(e), truth, 1e-9 * truth) << event_name(e);
    }
    // Preset counts are rounded separately from the ultrafast ones, so the
    // prior relation is linear only up to rounding.
    auto prior = fit(res.dataset.records, ModelMode::prior_uf, p, EventMask::all());
    for (auto e : kAllEvents) {
      const double truth = res.truth.prior_uf[p][index_of(e)];
      EXPECT_NEAR(prior.coefficient(e), truth, 1e-3 * truth) << event_name(e);
    }
  }
}

TEST(Fit, OrderInvariant) {
  SynthSpec spec;
  spec.presets = {Preset::slow};
  spec.n_sequences = 10;
  spec.noise_rel = 0.05;
  auto records = synth_dataset(spec).dataset.records;
  const auto base = fit(records, ModelMode::posterior, Preset::slow, EventMask::all());
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(records.begin(), records.end(), rng);
    const auto m = fit(records, ModelMode::posterior, Preset::slow, EventMask::all());
    for (auto e : kAllEvents) {
      if (base.coefficient(e) == 0.0) {
        EXPECT_NEAR(m.coefficient(e), 0.0, 1e-12 * base.coefficient(EventId::Ir));
      } else {
        EXPECT_TRUE(close_rel(m.coefficient(e) / base.coefficient(e), 1.0, 1e-12)) << event_name(e);
      }
    }
  }
}

TEST(Fit, ExcludesRecordsWithoutPositiveEnergy) {
  EventVector ev;
  ev.set(EventId::Ir, 100);
  std::vector<EncodeRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(make_record("s" + std::to_string(i), Preset::fast, 23, ev.scaled(i + 1), 2.0 * (i + 1)));
  recs.push_back(make_record("z", Preset::fast, 23, ev, 0.0));
  recs.push_back(make_record("n", Preset::fast, 23, ev, -1.0));
  auto none = make_record("m", Preset::fast, 23, ev, 1.0);
  none.energy_j.reset();
  recs.push_back(none);
  const auto m = fit(recs, ModelMode::posterior, Preset::fast, EventMask{EventId::Ir});
  EXPECT_EQ(m.fit_meta.training_record_count, 4u);
  EXPECT_EQ(m.fit_meta.excluded_record_count, 3u);
  EXPECT_FALSE(m.fit_meta.warnings.empty());
  EXPECT_NEAR(m.coefficient(EventId::Ir), 0.02, 1e-15);
}

TEST(Fit, DegenerateColumnGetsZeroAndWarning) {
  std::vector<EncodeRecord> recs;
  for (int i = 1; i <= 5; ++i) {
    EventVector ev;
    ev.set(EventId::Ir, 100 * i + 7 * (i % 2));
    ev.set(EventId::Bim, 0);
    recs.push_back(make_record("s" + std::to_string(i), Preset::fast, 23, ev, 1e-3 * (100 * i + 7 * (i % 2))));
  }
  const auto m = fit(recs, ModelMode::posterior, Preset::fast, EventMask{EventId::Ir, EventId::Bim});
  EXPECT_EQ(m.coefficient(EventId::Bim), 0.0);
  EXPECT_NEAR(m.coefficient(EventId::Ir), 1e-3, 1e-15);
  bool warned = false;
  for (const auto& w : m.fit_meta.warnings) warned |= w.find("Bim") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(Fit, InsufficientData) {
  EventVector ev = EventVector::zeros(EventMask::all());
  ev.set(EventId::Ir, 5);
  std::vector<EncodeRecord> recs{make_record("a", Preset::fast, 23, ev, 1.0)};
  EXPECT_THROW(fit(recs, ModelMode::posterior, Preset::fast, EventMask::all()), InsufficientData);
  EXPECT_THROW(fit(recs, ModelMode::posterior, Preset::slow, EventMask{EventId::Ir}), InsufficientData);
}

TEST(Fit, MissingFeatureEventThrows) {
  EventVector ev;
  ev.set(EventId::Ir, 5);
  std::vector<EncodeRecord> recs{make_record("a", Preset::fast, 23, ev, 1.0), make_record("b", Preset::fast, 23, ev, 2.0)};
  EXPECT_THROW(fit(recs, ModelMode::posterior, Preset::fast, EventMask{EventId::Dr}), MissingEvents);
}

TEST(Fit, TimeBaselineClosedForm) {
  std::vector<EncodeRecord> recs;
  std::vector<double> t{1.0, 2.0, 3.5, 5.0}, y{41.0, 79.0, 142.0, 205.0};
  EventVector ev;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto r = make_record("s" + std::to_string(i), Preset::medium, 23, ev, y[i]);
    r.time_s = t[i];
    recs.push_back(r);
  }
  // argmin_c sum (c t/y - 1)^2 = sum(t/y) / sum((t/y)^2)
  double s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    s1 += t[i] / y[i];
    s2 += (t[i] / y[i]) * (t[i] / y[i]);
  }
  const auto m = fit(recs, ModelMode::time_baseline, Preset::medium, EventMask::all());
  EXPECT_NEAR(m.joules_per_second, s1 / s2, 1e-12 * s1 / s2);
  EXPECT_NEAR(estimate_time(m, 2.0), 2.0 * m.joules_per_second, 1e-12);

  Eigen::MatrixXd x(4, 1);
  Eigen::VectorXd yy(4);
  for (int i = 0; i < 4; ++i) {
    x(i, 0) = t[static_cast<std::size_t>(i)];
    yy(i) = y[static_cast<std::size_t>(i)];
  }
  EXPECT_EQ(fit_relative(x, yy).coefficients(0), m.joules_per_second);
}

TEST(Estimate, LinearAndModeChecked) {
  EnergyModel m;
  m.set_coefficient(EventId::Ir, 2.0);
  m.set_coefficient(EventId::Dr, 0.5);
  EventVector ev;
  ev.set(EventId::Ir, 10);
  ev.set(EventId::Dr, 4);
  ev.set(EventId::Bim, 1000);
  EXPECT_EQ(estimate_posterior(m, ev), 22.0);
  EXPECT_THROW(estimate_prior(m, ev), PreconditionError);
  EventVector partial;
  partial.set(EventId::Ir, 1);
  EXPECT_THROW(estimate_posterior(m, partial), MissingEvents);

  m.mode = ModelMode::prior_uf;
  EncodeRecord r;
  r.events = partial;
  r.events_uf = ev;
  EXPECT_EQ(estimate(m, r), 22.0);
  r.events_uf.reset();
  EXPECT_THROW(estimate(m, r), PreconditionError);
}

TEST(Estimate, AlgebraicLaws) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::uint64_t> k(0, 1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = random_model(rng);
    const auto x = random_events(rng);
    const auto y = random_events(rng);
    const auto kk = k(rng);
    const double ex = estimate_posterior(m, x);
    EXPECT_GE(ex, 0.0);
    EXPECT_TRUE(close_rel(estimate_posterior(m, x.scaled(kk)), static_cast<double>(kk) * ex, 1e-12));
    EXPECT_TRUE(close_rel(estimate_posterior(m, x + y), ex + estimate_posterior(m, y), 1e-12));
  }
  EXPECT_EQ(estimate_posterior(random_model(rng), EventVector::zeros(EventMask::all())), 0.0);
}

// ---- correlation -----------------------------------------------------------

TEST(Correlation, TablePerEvent) {
  SynthSpec spec;
  spec.presets = {Preset::medium};
  spec.n_sequences = 15;
  spec.noise_rel = 0.02;
  const auto res = synth_dataset(spec);
  const auto table = correlation_table(res.dataset.records);
  EXPECT_EQ(table.pcc.size(), kEventCount);
  EXPECT_EQ(table.record_count, 60u);
  for (const auto& [e, r] : table.pcc) {
    EXPECT_GT(r, 0.5) << event_name(e);
    EXPECT_LE(r, 1.0);
  }
  EXPECT_GT(table.pcc.at(EventId::Ir), 0.95);
}

// ---- model file --------------------------------------------------------------

TEST(ModelFile, ExactRoundTrip) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelSet set;
  for (auto p : kAllPresets) {
    EnergyModel m;
    m.preset = p;
    m.mode = ModelMode::posterior;
    for (auto e : kAllEvents) m.set_coefficient(e, std::ldexp(u(rng), -static_cast<int>(u(rng) * 60)));
    m.fit_meta.objective_value = u(rng);
    m.fit_meta.warnings = {"w1"};
    set.put(m);
    EnergyModel t;
    t.preset = p;
    t.mode = ModelMode::time_baseline;
    t.joules_per_second = u(rng) * 100;
    set.put(t);
  }
  EnergyModel partial;
  partial.mode = ModelMode::prior_uf;
  partial.set_coefficient(EventId::Dr, 1.0 / 3.0);
  set.put(partial);

  const auto text = models_to_string(set);
  const auto back = models_from_string(text);
  ASSERT_EQ(back.models.size(), set.models.size());
  for (std::size_t i = 0; i < set.models.size(); ++i) {
    const auto& a = set.models[i];
    const auto& b = back.models[i];
    EXPECT_EQ(a.preset, b.preset);
    EXPECT_EQ(a.mode, b.mode);
    EXPECT_EQ(a.feature_mask, b.feature_mask);
    EXPECT_EQ(a.coefficients, b.coefficients);
    EXPECT_EQ(a.joules_per_second, b.joules_per_second);
    EXPECT_EQ(a.fit_meta.objective_value, b.fit_meta.objective_value);
    EXPECT_EQ(a.fit_meta.warnings, b.fit_meta.warnings);
  }
  EXPECT_EQ(models_to_string(back), text);
  EXPECT_EQ(back.find(Preset::ultrafast, ModelMode::prior_uf)->feature_mask.size(), 1u);
}

TEST(ModelFile, RejectsBadInput) {
  EXPECT_THROW(models_from_string("{"), ParseError);
  EXPECT_THROW(models_from_string(R"({"schema_version": 99, "models": []})"), ParseError);
  EXPECT_THROW(models_from_string(
                   R"({"schema_version": 1, "models": [{"preset": "fast", "mode": "posterior", "feature_mask": ["Ir"], "coefficients": {"Ir": -1}}]})"),
               ParseError);
  EXPECT_THROW(models_from_string(
                   R"({"schema_version": 1, "models": [{"preset": "fast", "mode": "posterior", "feature_mask": ["Ir", "Dr"], "coefficients": {"Ir": 1}}]})"),
               ParseError);
  EXPECT_THROW(models_from_string(
                   R"({"schema_version": 1, "models": [{"preset": "warp", "mode": "posterior", "feature_mask": [], "coefficients": {}}]})"),
               ParseError);
}

// ---- k-fold ----------------------------------------------------------------

namespace {

std::vector<EncodeRecord> grouped_records(std::size_t sequences, std::size_t per_sequence) {
  std::vector<EncodeRecord> recs;
  EventVector ev;
  for (std::size_t s = 0; s < sequences; ++s)
    for (std::size_t j = 0; j < per_sequence; ++j)
      recs.push_back(make_record("seq" + std::to_string(s), kAllPresets[j % 9], static_cast<int>(j / 9), ev, 1.0));
  return recs;
}

}  // namespace

TEST(KFold, TwentyTwoSequencesTenFolds) {
  const auto recs = grouped_records(22, 3);
  const auto folds = kfold_split(recs, 10, 0);
  ASSERT_EQ(folds.size(), 10u);
  std::vector<std::size_t> groups;
  for (const auto& f : folds) {
    std::set<std::string> ids;
    for (auto i : f) ids.insert(recs[i].sequence_id);
    groups.push_back(ids.size());
  }
  std::sort(groups.rbegin(), groups.rend());
  EXPECT_EQ(groups, (std::vector<std::size_t>{3, 3, 2, 2, 2, 2, 2, 2, 2, 2}));
}

TEST(KFold, Laws) {
  for (std::size_t k : {2u, 5u, 10u}) {
    for (std::size_t n = 10; n <= 40; n += 3) {
      if (n < k) continue;
      const auto recs = grouped_records(n, 4);
      const auto folds = kfold_split(recs, k, 17);
      std::vector<int> seen(recs.size(), 0);
      std::map<std::string, std::size_t> fold_of_group;
      std::size_t min_groups = SIZE_MAX, max_groups = 0;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        std::set<std::string> ids;
        for (auto i : folds[f]) {
          ++seen[i];
          ids.insert(recs[i].sequence_id);
          auto [it, inserted] = fold_of_group.emplace(recs[i].sequence_id, f);
          EXPECT_EQ(it->second, f) << "group split across folds";
        }
        min_groups = std::min(min_groups, ids.size());
        max_groups = std::max(max_groups, ids.size());
      }
      for (int s : seen) EXPECT_EQ(s, 1);
      EXPECT_LE(max_groups - min_groups, 1u);
      EXPECT_EQ(kfold_split(recs, k, 17), folds);
    }
  }
}

TEST(KFold, SeedChangesAssignment) {
  const auto recs = grouped_records(30, 1);
  EXPECT_NE(kfold_split(recs, 5, 1), kfold_split(recs, 5, 2));
}

TEST(KFold, TooFewGroups) {
  const auto recs = grouped_records(4, 9);
  EXPECT_THROW(kfold_split(recs, 5, 0), TooFewGroups);
  EXPECT_NO_THROW(kfold_split(recs, 4, 0));
}

// ---- cross-validation --------------------------------------------------------

TEST(CrossValidation, NoLeakageAndPooledRows) {
  SynthSpec spec;
  spec.presets = {Preset::ultrafast, Preset::fast, Preset::veryslow};
  spec.n_sequences = 14;
  spec.noise_rel = 0.03;
  const auto ds = synth_dataset(spec).dataset;
  CrossValidationOptions opts;
  opts.k = 7;
  opts.seed = 4;
  const auto report = cross_validate(ds.records, opts);
  ASSERT_EQ(report.rows.size(), 3u);
  double sum = 0.0;
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.n, 56u);
    EXPECT_LE(row.ci_low, row.mean_err);
    EXPECT_GE(row.ci_high, row.mean_err);
    EXPECT_EQ(row.z, 1.96);
    sum += row.mape;
  }
  EXPECT_NEAR(report.average_mape, sum / 3.0, 1e-15);
  EXPECT_EQ(report.samples.size(), 168u);
  for (const auto& t : report.traces) {
    std::set<std::string> train_ids, val_ids;
    for (auto i : t.train) train_ids.insert(ds.records[i].sequence_id);
    for (auto i : t.validation) val_ids.insert(ds.records[i].sequence_id);
    for (const auto& id : val_ids) EXPECT_EQ(train_ids.count(id), 0u) << id;
  }
}

TEST(CrossValidation, PriorModeHasNoUltrafastRow) {
  SynthSpec spec;
  spec.presets = {Preset::ultrafast, Preset::medium};
  spec.n_sequences = 10;
  const auto ds = synth_dataset(spec).dataset;
  CrossValidationOptions opts;
  opts.mode = ModelMode::prior_uf;
  opts.k = 5;
  const auto report = cross_validate(ds.records, opts);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].preset, Preset::medium);
  EXPECT_LT(report.rows[0].mape, 1e-2);
}

TEST(CrossValidation, CsvColumns) {
  CrossValidationReport report;
  report.rows.push_back({Preset::fast, 5.0, -1.0, 1.0, 0.0, 2.0, 10, 1.96});
  report.average_mape = 5.0;
  std::ostringstream os;
  write_evaluation(os, report, OutputFormat::csv);
  EXPECT_EQ(os.str(), "preset,mape_pct,ci_low_pct,ci_high_pct,n\nfast,5,-1,1,10\naverage,5,,,10\n");
}
