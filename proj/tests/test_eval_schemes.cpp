#include <cmath>
#include <random>
#include <sstream>

#include "gliorank/eval_schemes.hpp"
#include "gliorank/phantom.hpp"
#include "gtest/gtest.h"

using namespace gliorank;

namespace {

PhantomSpec slab_spec() {
  PhantomSpec s = planar({});
  s.id = "slab";
  s.layout = TissueLayout::TwoLayerSlab;
  s.params.kappa_w = 0.1;
  s.params.kappa_g = 0.01;
  s.seed = std::array<double, 3>{60.3, 64.2, 0};
  s.t0 = 700;
  s.t1 = 900;
  s.t2 = 1100;
  return s;
}

const CaseData& slab_case() {
  static const CaseData c = generate_case(slab_spec()).data;
  return c;
}

EvalSettings quick_settings() {
  EvalSettings s;
  s.sim.t_max = 8000;
  s.fit.n_restarts = 2;
  return s;
}

SweepRow row(const std::string& case_id, const std::string& param_id, double fit, double pred) {
  SweepRow r;
  r.case_id = case_id;
  r.param_id = param_id;
  r.ap_fit = fit;
  r.ap_pred = pred;
  return r;
}

}  // namespace

TEST(EvalSchemes, DefaultParameterSets) {
  const auto sets = default_param_sets();
  ASSERT_EQ(sets.size(), 7u);
  EXPECT_EQ(sets[0].id, "p1");
  EXPECT_EQ(sets[6].id, "p7");
  EXPECT_EQ(sets[1].params.tau, 0.05);
  EXPECT_EQ(sets[5].params.kappa_g, 0.02);
  for (const auto& s : sets) EXPECT_EQ(s.params.rho, 0.01);
  EXPECT_EQ(default_param_sets(0.02)[3].params.rho, 0.02);
  EXPECT_EQ(parse_scheme("bidirectional"), Scheme::Bidirectional);
  EXPECT_THROW(parse_scheme("sideways"), error);
}

TEST(EvalSchemes, RegionsOfInterest) {
  auto c = slab_case();
  EXPECT_EQ(bidirectional_roi(c), brain_roi(c));  // empty cavity
  EXPECT_EQ(count(mask_and(forward_roi(c), c.s1)), 0u);
  c.cavity = morph_ball(c.s0, 0.0, brain_roi(c));
  EXPECT_EQ(count(bidirectional_roi(c)), count(brain_roi(c)) - count(c.s0));
}

TEST(EvalSchemes, NoGrowthIsAnEmptyRegion) {
  auto c = slab_case();
  c.s2 = c.s1;
  try {
    forward_prediction(c, slab_spec().params, quick_settings().sim);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::empty_region);
    EXPECT_STREQ(e.what(), "empty evaluation region");
  }
}

TEST(EvalSchemes, ForwardSelfConsistency) {
  const auto& c = slab_case();
  InvasionMap t;
  Segmentation roi;
  const auto rep = forward_prediction(c, slab_spec().params, quick_settings().sim, &t, &roi);
  EXPECT_GE(rep.ap, 0.9);
  EXPECT_EQ(roi, forward_roi(c));
  for (std::size_t i = 0; i < t.size(); ++i)
    if (c.s1[i]) {
      ASSERT_EQ(t[i], 0.0);
    }
}

TEST(EvalSchemes, VoxelsInsideS1AreNeverScored) {
  const auto& c = slab_case();
  InvasionMap t;
  Segmentation roi;
  const double ap = forward_prediction(c, slab_spec().params, quick_settings().sim, &t, &roi).ap;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 5000.0);
  for (int trial = 0; trial < 5; ++trial) {
    InvasionMap scrambled = t;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (c.s1[i]) scrambled[i] = trial == 4 ? never_invaded : u(rng);
    EXPECT_EQ(average_precision(scrambled, c.s2, roi), ap);
  }
}

TEST(EvalSchemes, ForwardPredictionIgnoresFitConfig) {
  const auto& c = slab_case();
  auto a = quick_settings();
  auto b = quick_settings();
  b.fit.rng_seed = 77;
  b.fit.n_restarts = 1;
  b.fit.max_iters = 2;
  const auto ra = evaluate_forward(c, slab_spec().params, a);
  const auto rb = evaluate_forward(c, slab_spec().params, b);
  EXPECT_EQ(ra.ap_pred, rb.ap_pred);
  EXPECT_GE(ra.ap_fit, 0.0);
  EXPECT_LE(ra.ap_fit, 1.0);
}

TEST(EvalSchemes, BidirectionalSelfConsistencyAndMismatch) {
  const auto& c = slab_case();
  const auto s = quick_settings();
  const auto matched = evaluate_bidirectional(c, slab_spec().params, s);
  EXPECT_GE(matched.ap_pred, 0.9);
  EXPECT_GE(matched.ap_fit, 0.9);
  ModelParams inverted = slab_spec().params;
  std::swap(inverted.kappa_w, inverted.kappa_g);
  const auto mismatched = evaluate_bidirectional(c, inverted, s);
  EXPECT_LT(mismatched.ap_fit, matched.ap_fit);
}

TEST(Sweep, SingleRowAndOrdering) {
  auto c2 = slab_case();
  c2.id = "second";
  const std::vector<CaseData> cases{slab_case(), c2};
  auto sets = default_param_sets();
  sets.resize(2);
  const auto one = parameter_sweep({slab_case()}, {sets[0]}, {Scheme::Forward}, quick_settings(), 1);
  ASSERT_EQ(one.rows.size(), 1u);
  EXPECT_TRUE(one.rows[0].ok());

  const auto r = parameter_sweep(cases, sets, {Scheme::Forward, Scheme::Bidirectional}, quick_settings(), 3);
  ASSERT_EQ(r.rows.size(), 8u);
  std::size_t k = 0;
  for (const auto* id : {"slab", "second"})
    for (const auto& ps : sets)
      for (auto sc : {Scheme::Forward, Scheme::Bidirectional}) {
        EXPECT_EQ(r.rows[k].case_id, id);
        EXPECT_EQ(r.rows[k].param_id, ps.id);
        EXPECT_EQ(r.rows[k].scheme, sc);
        EXPECT_TRUE(r.rows[k].ok()) << r.rows[k].status;
        ++k;
      }
  // both schemes share one baseline fit
  EXPECT_EQ(r.rows[0].ap_fit, r.rows[1].ap_fit);
}

TEST(Sweep, IndependentOfJobCount) {
  auto sets = default_param_sets();
  sets.resize(3);
  const auto s = quick_settings();
  std::ostringstream a, b;
  write_sweep_csv(parameter_sweep({slab_case()}, sets, {Scheme::Forward, Scheme::Bidirectional}, s, 1), a);
  write_sweep_csv(parameter_sweep({slab_case()}, sets, {Scheme::Forward, Scheme::Bidirectional}, s, 4), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Sweep, FailuresAreContainedPerRow) {
  auto stalled = slab_case();
  stalled.id = "stalled";
  stalled.s2 = stalled.s1;
  auto sets = default_param_sets();
  sets.resize(2);
  ParamSet unstable{"unstable", sets[0].params};
  unstable.params.kappa_w = 10.0;  // explicit step far beyond the stability bound
  sets.push_back(unstable);
  const auto r =
      parameter_sweep({slab_case(), stalled}, sets, {Scheme::Forward, Scheme::Bidirectional}, quick_settings(), 4);
  ASSERT_EQ(r.rows.size(), 12u);
  for (const auto& row : r.rows) {
    const bool bad_params = row.param_id == "unstable";
    const bool bad_case = row.case_id == "stalled" && row.scheme == Scheme::Forward;
    if (bad_params) {
      const std::string expected = bad_case ? "empty_region" : "unstable_time_step";
      EXPECT_NE(row.status.find(expected), std::string::npos) << row.status;
      EXPECT_TRUE(std::isnan(row.ap_pred));
    } else if (bad_case) {
      EXPECT_EQ(row.status, "error: empty_region: empty evaluation region");
      EXPECT_TRUE(std::isnan(row.ap_pred));
      EXPECT_TRUE(std::isfinite(row.ap_fit));
    } else {
      EXPECT_TRUE(row.ok()) << row.case_id << " " << row.param_id << " " << row.status;
    }
  }
}

TEST(Sweep, CsvFormat) {
  SweepResult r;
  r.rows.push_back(row("a", "p1", 0.5, 0.25));
  r.rows.push_back(row("b,c", "p2", 0.125, std::nan("")));
  r.rows.back().status = "error: empty_region: empty evaluation region";
  r.rows.back().scheme = Scheme::Bidirectional;
  std::ostringstream os;
  write_sweep_csv(r, os);
  EXPECT_EQ(os.str(),
            "case_id,param_id,kappa_w,kappa_g,tau,rho,scheme,ap_fit,ap_pred,status\n"
            "a,p1,0.1,0.01,0,0.01,forward,0.5,0.25,ok\n"
            "\"b,c\",p2,0.1,0.01,0,0.01,bidirectional,0.125,nan,error: empty_region: empty evaluation region\n");
}

TEST(CorrelationReport, HandComputedTable) {
  // 3 cases x 4 settings; per-case rank correlations are -0.8, 0 and 0.6
  const double fit[3][4] = {{0.9, 0.8, 0.7, 0.6}, {0.1, 0.2, 0.3, 0.4}, {0.5, 0.6, 0.7, 0.8}};
  const double pred[3][4] = {{0.5, 0.7, 0.6, 0.8}, {0.3, 0.1, 0.4, 0.2}, {0.2, 0.1, 0.4, 0.3}};
  SweepResult sweep;
  const char* ids[3] = {"A", "B", "C"};
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 4; ++k) sweep.rows.push_back(row(ids[c], "p" + std::to_string(k + 1), fit[c][k], pred[c][k]));
  const auto rep = fit_vs_prediction_report(sweep, Scheme::Forward);
  ASSERT_EQ(rep.per_case.size(), 3u);
  EXPECT_NEAR(*rep.per_case[0].rho, -0.8, 1e-15);
  EXPECT_NEAR(*rep.per_case[1].rho, 0.0, 1e-15);
  EXPECT_NEAR(*rep.per_case[2].rho, 0.6, 1e-15);
  EXPECT_EQ(rep.n, 3u);
  EXPECT_EQ(rep.excluded, 0u);
  // mean -1/15, sd sqrt(111)/15, so t = -1/sqrt(37); with 2 degrees of freedom p = 1 - 1/sqrt(75)
  EXPECT_NEAR(rep.mean_rho, -1.0 / 15.0, 1e-15);
  ASSERT_TRUE(rep.t_test.has_value());
  EXPECT_NEAR(rep.t_test->t, -1.0 / std::sqrt(37.0), 1e-12);
  EXPECT_NEAR(rep.t_test->p, 1.0 - 1.0 / std::sqrt(75.0), 1e-12);
  EXPECT_EQ(rep.t_test->df, 2u);

  const auto kv = to_key_values(rep);
  EXPECT_EQ(kv.find("forward.n_cases"), std::optional<std::string>("3"));
  EXPECT_TRUE(kv.find("forward.rho.B").has_value());
  EXPECT_TRUE(kv.find("forward.p").has_value());
}

TEST(CorrelationReport, IdenticalScoresGiveUnitRho) {
  SweepResult sweep;
  for (const char* id : {"A", "B"})
    for (int k = 0; k < 5; ++k) sweep.rows.push_back(row(id, "p" + std::to_string(k), 0.1 * k + 0.05, 0.1 * k + 0.05));
  const auto rep = fit_vs_prediction_report(sweep, Scheme::Forward);
  for (const auto& c : rep.per_case) EXPECT_EQ(*c.rho, 1.0);
  EXPECT_EQ(rep.mean_rho, 1.0);
  EXPECT_FALSE(rep.t_test.has_value());  // zero variance
  EXPECT_FALSE(rep.note.empty());
}

TEST(CorrelationReport, ExcludesUndefinedCases) {
  SweepResult sweep;
  for (int k = 0; k < 3; ++k) {
    sweep.rows.push_back(row("A", "p" + std::to_string(k), 0.1 * k, 0.2 * k));
    sweep.rows.push_back(row("B", "p" + std::to_string(k), 0.1 * k, 0.3 - 0.1 * k));
    sweep.rows.push_back(row("flat", "p" + std::to_string(k), 0.1 * k, 0.5));
    sweep.rows.push_back(row("broken", "p" + std::to_string(k), 0.1 * k, 0.5));
    if (k > 0) sweep.rows.back().status = "error: instability: boom";
  }
  const auto rep = fit_vs_prediction_report(sweep, Scheme::Forward);
  EXPECT_EQ(rep.n, 2u);
  EXPECT_EQ(rep.excluded, 2u);
  EXPECT_EQ(rep.mean_rho, 0.0);
  EXPECT_EQ(to_key_values(rep).find("forward.rho.flat"), std::optional<std::string>("undefined"));
}

TEST(CorrelationReport, SingleSettingIsUndefined) {
  SweepResult sweep;
  sweep.rows.push_back(row("A", "p1", 0.5, 0.5));
  sweep.rows.push_back(row("B", "p1", 0.6, 0.4));
  try {
    fit_vs_prediction_report(sweep, Scheme::Forward);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::undefined_correlation);
  }
  EXPECT_THROW(fit_vs_prediction_report(sweep, Scheme::Bidirectional), error);
}
