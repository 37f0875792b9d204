#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "gliorank/case_data.hpp"
#include "gliorank/config.hpp"
#include "gliorank/eikonal.hpp"
#include "gliorank/fitting.hpp"
#include "gliorank/growth_model.hpp"
#include "gliorank/ranking_eval.hpp"
#include "gliorank/statistics.hpp"

namespace gliorank {

enum class Scheme { Forward, Bidirectional };

inline std::string to_string(Scheme s) { return s == Scheme::Forward ? "forward" : "bidirectional"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "forward") return Scheme::Forward;
  if (s == "bidirectional") return Scheme::Bidirectional;
  fail(errc::invalid_config, "unknown scheme '" + s + "' (expected forward or bidirectional)");
}

struct ParamSet {
  std::string id;
  ModelParams params;
};

/// The seven default sweep settings (kappa_w, kappa_g, tau) at a shared rho.
inline std::vector<ParamSet> default_param_sets(double rho = 0.01) {
  const double table[7][3] = {{0.01, 0.01, 0.0}, {0.01, 0.01, 0.05}, {0.02, 0.01, 0.0}, {0.05, 0.01, 0.0},
                              {0.1, 0.01, 0.0},  {0.1, 0.02, 0.0},   {0.1, 0.1, 0.0}};
  std::vector<ParamSet> out;
  for (int k = 0; k < 7; ++k) {
    ModelParams p;
    p.rho = rho;
    p.kappa_w = table[k][0];
    p.kappa_g = table[k][1];
    p.tau = table[k][2];
    out.push_back({"p" + std::to_string(k + 1), p});
  }
  return out;
}

struct EvalSettings {
  SimulationSettings sim = [] {
    SimulationSettings s;
    s.t_max = 5000.0;
    return s;
  }();
  FitConfig fit;
  double seed_sigma_mm = 1.0;
};

/// Onset fit on S0 followed by the reaction-diffusion run from the fitted seed.
struct BaselineFit {
  FitResult fit;
  InvasionMap t;
  EvalReport report;  // against S0 over the brain
};

struct SchemeResult {
  double ap_fit = 0.0;
  double ap_pred = 0.0;
  BaselineFit baseline;
  InvasionMap t_pred;
  Segmentation roi_pred;
  EvalReport pred_report;
};

inline Segmentation brain_roi(const CaseData& c) {
  Segmentation roi(c.geometry(), 0);
  for (std::size_t i = 0; i < roi.size(); ++i) roi[i] = c.tissue.grid().in_brain(i) ? 1 : 0;
  return roi;
}

inline Segmentation bidirectional_roi(const CaseData& c) { return mask_minus(brain_roi(c), c.cavity); }

inline Segmentation forward_roi(const CaseData& c) { return mask_minus(bidirectional_roi(c), c.s1); }

/// Fits x_s to S0 with the eikonal objective, then simulates from GaussianSeed(x_s) until every
/// voxel of S0 and of `also_cover` has been invaded (or t_max).
inline BaselineFit fit_baseline(const CaseData& c, const ModelParams& params, const EvalSettings& settings,
                                const Segmentation* also_cover = nullptr) {
  validate(c);
  const auto& grid = c.tissue.grid();
  const auto speed = speed_from_params(c.tissue, params);
  BaselineFit out;
  out.fit = fit_seed(c.s0, speed, grid, settings.fit);
  SimulationSettings sim = settings.sim;
  Mask cover = c.s0;
  if (also_cover) cover = mask_or(cover, *also_cover);
  sim.stop_when_covered = cover;
  out.t = simulate(GaussianSeed{out.fit.x_s_best, settings.seed_sigma_mm}, c.tissue, params, sim).invasion;
  out.report = evaluate_ranking(out.t, sanitize(c.s0, grid).inside, brain_roi(c));
  return out;
}

inline SchemeResult evaluate_bidirectional(const CaseData& c, const ModelParams& params,
                                           const EvalSettings& settings) {
  SchemeResult r;
  r.roi_pred = bidirectional_roi(c);
  const Segmentation target = mask_and(c.s2, r.roi_pred);
  r.baseline = fit_baseline(c, params, settings, &target);
  r.ap_fit = r.baseline.report.ap;
  r.t_pred = r.baseline.t;
  r.pred_report = evaluate_ranking(r.t_pred, c.s2, r.roi_pred);
  r.ap_pred = r.pred_report.ap;
  return r;
}

/// Forward prediction only: S1-seeded run scored against S2 outside S1 and the cavity.
inline EvalReport forward_prediction(const CaseData& c, const ModelParams& params, const SimulationSettings& sim_in,
                                     InvasionMap* t_out = nullptr, Segmentation* roi_out = nullptr) {
  validate(c);
  const Segmentation roi = forward_roi(c);
  const Segmentation target = mask_and(c.s2, roi);
  require(count(target) > 0, errc::empty_region, "empty evaluation region");
  SimulationSettings sim = sim_in;
  sim.stop_when_covered = target;
  InvasionMap t = simulate(SegmentationSeed{c.s1}, c.tissue, params, sim).invasion;
  EvalReport rep = evaluate_ranking(t, c.s2, roi);
  if (t_out) *t_out = std::move(t);
  if (roi_out) *roi_out = roi;
  return rep;
}

inline SchemeResult evaluate_forward(const CaseData& c, const ModelParams& params, const EvalSettings& settings) {
  SchemeResult r;
  r.pred_report = forward_prediction(c, params, settings.sim, &r.t_pred, &r.roi_pred);
  r.ap_pred = r.pred_report.ap;
  r.baseline = fit_baseline(c, params, settings);
  r.ap_fit = r.baseline.report.ap;
  return r;
}

// ---- sweep

struct SweepRow {
  std::string case_id;
  std::string param_id;
  ModelParams params;
  Scheme scheme = Scheme::Forward;
  double ap_fit = std::nan("");
  double ap_pred = std::nan("");
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written by index, which keeps
/// the output independent of scheduling.
template <class Fn>
void parallel_for_indexed(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

inline std::string failure_status(const std::exception& e) {
  std::string msg = e.what();
  if (const auto* ge = dynamic_cast<const error*>(&e)) msg = std::string(to_string(ge->code())) + ": " + msg;
  return "error: " + msg;
}

/// Cartesian (case x param set x scheme) evaluation. Rows are ordered case-major, then param set,
/// then scheme in the order given; a failing row records its reason and the sweep carries on.
inline SweepResult parameter_sweep(const std::vector<CaseData>& cases, const std::vector<ParamSet>& param_sets,
                                   const std::vector<Scheme>& schemes, const EvalSettings& settings,
                                   std::size_t jobs = default_jobs()) {
  require(!schemes.empty(), errc::invalid_argument, "no schemes requested");
  const std::size_t n_jobs = cases.size() * param_sets.size();
  SweepResult out;
  out.rows.resize(n_jobs * schemes.size());
  parallel_for_indexed(n_jobs, jobs, [&](std::size_t j) {
    const auto& c = cases[j / param_sets.size()];
    const auto& ps = param_sets[j % param_sets.size()];
    SweepRow* rows = &out.rows[j * schemes.size()];
    for (std::size_t k = 0; k < schemes.size(); ++k) rows[k] = {c.id, ps.id, ps.params, schemes[k]};

    const bool want_bi = std::find(schemes.begin(), schemes.end(), Scheme::Bidirectional) != schemes.end();
    std::optional<BaselineFit> base;
    std::string base_error;
    Segmentation bi_roi;
    try {
      bi_roi = bidirectional_roi(c);
      const Segmentation target = mask_and(c.s2, bi_roi);
      base = fit_baseline(c, ps.params, settings, want_bi ? &target : nullptr);
    } catch (const std::exception& e) {
      base_error = failure_status(e);
    }
    for (std::size_t k = 0; k < schemes.size(); ++k) {
      SweepRow& row = rows[k];
      if (base) row.ap_fit = base->report.ap;
      try {
        if (schemes[k] == Scheme::Forward)
          row.ap_pred = forward_prediction(c, ps.params, settings.sim).ap;
        else if (base)
          row.ap_pred = average_precision(base->t, c.s2, bi_roi);
      } catch (const std::exception& e) {
        row.status = failure_status(e);
        row.ap_pred = std::nan("");
        continue;
      }
      if (!base) row.status = base_error;
    }
  });
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

}  // namespace detail

inline void write_sweep_csv(const SweepResult& r, std::ostream& os) {
  os << "case_id,param_id,kappa_w,kappa_g,tau,rho,scheme,ap_fit,ap_pred,status\n";
  for (const auto& row : r.rows) {
    os << detail::csv_field(row.case_id) << ',' << detail::csv_field(row.param_id) << ','
       << format_double(row.params.kappa_w) << ',' << format_double(row.params.kappa_g) << ','
       << format_double(row.params.tau) << ',' << format_double(row.params.rho) << ',' << to_string(row.scheme)
       << ',' << format_double(row.ap_fit) << ',' << format_double(row.ap_pred) << ','
       << detail::csv_field(row.status) << '\n';
  }
}

inline void write_sweep_csv(const SweepResult& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), errc::io_failure, "cannot open for writing: " + path.string());
  write_sweep_csv(r, os);
}

// ---- fit vs prediction statistics

struct CaseCorrelation {
  std::string case_id;
  std::size_t n_settings = 0;
  std::optional<double> rho;
};

struct CorrelationReport {
  Scheme scheme = Scheme::Forward;
  std::vector<CaseCorrelation> per_case;
  /// Cases with a defined rho.
  std::size_t n = 0;
  std::size_t excluded = 0;
  double mean_rho = std::nan("");
  std::optional<TTestResult> t_test;
  std::string note;
};

/// Per-case Spearman rho between ap_fit and ap_pred across parameter settings, and a one-sample
/// t-test of those rhos against zero. Failed rows are ignored; cases without a defined rho
/// (fewer than two settings or constant scores) are excluded and counted.
inline CorrelationReport fit_vs_prediction_report(const SweepResult& sweep, Scheme scheme) {
  CorrelationReport rep;
  rep.scheme = scheme;
  std::vector<std::string> order;
  for (const auto& row : sweep.rows)
    if (row.scheme == scheme && std::find(order.begin(), order.end(), row.case_id) == order.end())
      order.push_back(row.case_id);
  require(!order.empty(), errc::invalid_argument, "no sweep rows for scheme " + to_string(scheme));

  std::size_t max_settings = 0;
  std::vector<double> rhos;
  for (const auto& id : order) {
    std::vector<double> fit, pred;
    std::size_t settings = 0;
    for (const auto& row : sweep.rows) {
      if (row.scheme != scheme || row.case_id != id) continue;
      ++settings;
      if (!row.ok() || !std::isfinite(row.ap_fit) || !std::isfinite(row.ap_pred)) continue;
      fit.push_back(row.ap_fit);
      pred.push_back(row.ap_pred);
    }
    max_settings = std::max(max_settings, settings);
    CaseCorrelation cc{id, fit.size(), std::nullopt};
    if (fit.size() >= 2) cc.rho = spearman_rho(fit, pred);
    if (cc.rho) {
      rhos.push_back(*cc.rho);
    } else {
      ++rep.excluded;
    }
    rep.per_case.push_back(cc);
  }
  require(max_settings >= 2, errc::undefined_correlation,
          "correlation undefined: fewer than two parameter settings per case");
  rep.n = rhos.size();
  if (rep.n == 0) {
    rep.note = "no case has a defined correlation";
    return rep;
  }
  double sum = 0.0;
  for (double v : rhos) sum += v;
  rep.mean_rho = sum / static_cast<double>(rep.n);
  if (rep.n < 2) {
    rep.note = "t-test needs at least two cases";
    return rep;
  }
  try {
    rep.t_test = one_sample_t_test(rhos, 0.0);
  } catch (const error& e) {
    rep.note = e.what();
  }
  return rep;
}

inline KeyValueReport to_key_values(const CorrelationReport& r) {
  KeyValueReport kv;
  const std::string s = to_string(r.scheme);
  kv.add(s + ".n_cases", r.n);
  kv.add(s + ".excluded_cases", r.excluded);
  for (const auto& c : r.per_case)
    kv.add(s + ".rho." + c.case_id, c.rho ? format_double(*c.rho) : std::string("undefined"));
  kv.add(s + ".mean_rho", r.mean_rho);
  if (r.t_test) {
    kv.add(s + ".t", r.t_test->t);
    kv.add(s + ".p", r.t_test->p);
    kv.add(s + ".df", r.t_test->df);
  }
  if (!r.note.empty()) kv.add(s + ".note", r.note);
  return kv;
}

}  // namespace gliorank
