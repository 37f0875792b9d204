// Acceptance suite: one PASS/FAIL line per criterion.
//
// usage: acceptance <path-to-gliorank-cli> <work-dir>
// Exit status is 0 only when every criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "gliorank/gliorank.hpp"

namespace fs = std::filesystem;
using namespace gliorank;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string cli_path;
fs::path work;

int run_cli(const std::string& args) {
  const std::string cmd = "'" + cli_path + "' " + args + " > /dev/null 2>> '" + (work / "cli_stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

// ---- random ranking instances

struct Instance {
  InvasionMap t;
  Segmentation s;
  Segmentation roi;
};

/// Up to 12 roi voxels (plus a few outside the roi), ties and never-invaded voxels included.
Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 12), extra(0, 4), level(0, 6), coin(0, 3);
  const int n_roi = size(rng);
  const int n = n_roi + extra(rng);
  const Geometry g{{static_cast<std::uint32_t>(n), 1, 1}, 1.0};
  Instance in{InvasionMap(g, 0.0), Segmentation(g, 0), Segmentation(g, 0)};
  bool any_positive = false;
  for (int i = 0; i < n; ++i) {
    const int l = level(rng);
    in.t[i] = l == 6 ? never_invaded : 0.5 * l;
    in.s[i] = coin(rng) == 0 ? 1 : 0;
    in.roi[i] = i < n_roi ? 1 : 0;
    any_positive = any_positive || (in.s[i] && in.roi[i]);
  }
  if (!any_positive) in.s[0] = 1;
  return in;
}

std::vector<oracle::RankedVoxel> oracle_view(const Instance& in) {
  std::vector<oracle::RankedVoxel> v;
  for (std::size_t i = 0; i < in.t.size(); ++i)
    if (in.roi[i]) v.push_back({in.t[i], in.s[i] != 0});
  return v;
}

Verdict ap_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240101);
  const int n = 5000;
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto in = random_instance(rng);
    worst = std::max(worst, std::abs(average_precision(in.t, in.s, in.roi) - oracle::brute_force_ap(oracle_view(in))));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0,
          std::to_string(n) + " instances, max |diff| " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Verdict hand_worked_ap() {
  const Geometry g{{4, 1, 1}, 1.0};
  InvasionMap t(g, 0.0);
  Segmentation s(g, 0), roi(g, 1);
  for (int i = 0; i < 4; ++i) t[i] = i + 1.0;
  s[0] = s[2] = 1;
  const double ap = average_precision(t, s, roi);
  return {ap == 5.0 / 6.0, "AP = " + fmt("%.17g", ap)};
}

Verdict rank_invariance() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coef(0.1, 5.0);
  int changed = 0;
  const int n = 100;
  for (int k = 0; k < n; ++k) {
    const auto in = random_instance(rng);
    const double a = coef(rng), b = coef(rng) - 2.5, e = coef(rng);
    // strictly increasing on [0, inf): a*x^e + b, or exp for odd trials
    InvasionMap u = in.t;
    for (auto& v : u)
      if (std::isfinite(v)) v = (k % 2 == 0) ? a * std::pow(v, e) + b : std::exp(a * v) + b;
    if (average_precision(u, in.s, in.roi) != average_precision(in.t, in.s, in.roi)) ++changed;
  }
  return {changed == 0, std::to_string(n) + " transforms, " + std::to_string(changed) + " changed AP"};
}

Verdict mass_conservation() {
  const auto t0 = Clock::now();
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  spec.fa_pattern = FaPattern::RadialFiber;
  const TissueModel tissue = phantom_tissue(spec);
  ModelParams p;
  p.tau = 0.1;
  p.rho = 0.0;
  const auto d = assemble_diffusion(tissue, p);
  const auto& grid = tissue.grid();
  const DiffusionStencil op(grid, d);
  auto c = initialize_density(GaussianSeed{{13.2, 16.8, 15.1}, 3.0}, grid, p);
  const double m0 = total_density(c, grid);
  const double dt = explicit_dt_limit(d, grid);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    c = step_density(c, op, p, dt);
    worst = std::max(worst, std::abs(total_density(c, grid) / m0 - 1.0));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 60.0,
          "1000 steps on 32^3 with fibres, max relative drift " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Verdict logistic_oracle() {
  const VoxelGrid grid(Mask(Geometry{{9, 9, 1}, 1.0}, 1));
  const DiffusionField d(grid.geometry());  // zero diffusion
  const ModelParams p;
  const GaussianSeed seed{{4.0, 4.0, 0.0}, 2.5};
  auto max_error = [&](double dt) {
    SimulationSettings s;
    s.dt = dt;
    s.t_max = 100.0;
    const auto c0 = initialize_density(seed, grid, p);
    const auto r = simulate(seed, grid, d, p, s);
    double err = 0.0;
    for (std::size_t i = 0; i < c0.size(); ++i)
      err = std::max(err, std::abs(r.final_density[i] - oracle::logistic(c0[i], p.rho, 100.0)));
    return err;
  };
  const double e1 = max_error(0.1);
  const double e4 = max_error(0.025);
  const double ratio = e1 / e4;
  return {e1 <= 1e-4 && ratio >= 4.0,
          "error " + fmt("%.3g", e1) + " at dt=0.1, ratio " + fmt("%.4f", ratio) + " after two halvings"};
}

Verdict eikonal_distance() {
  const Mask brain(Geometry{{64, 64, 64}, 1.0}, 1);
  const VoxelGrid grid(brain);
  SpeedMap one(brain.geometry(), 1.0), two(brain.geometry(), 2.0);
  const std::array<double, 3> c{32, 32, 32};
  const auto t1 = fast_march(one, grid, sources_from_point(c, one, grid));
  const auto t2 = fast_march(two, grid, sources_from_point(c, two, grid));
  double worst = 0.0;
  bool halves = true;
  for (std::size_t i = 0; i < t1.size(); ++i) {
    const auto p = brain.geometry().coords(i);
    const double r = std::hypot(p[0] - c[0], p[1] - c[1], p[2] - c[2]);
    if (r <= 20.0) worst = std::max(worst, std::abs(t1[i] - r));
    halves = halves && t2[i] == 0.5 * t1[i];
  }
  return {worst <= 1.0 && halves, "max |T - r| " + fmt("%.3f", worst) + " within r <= 20, speed doubling halves T " +
                                      (halves ? "exactly" : "NOT exactly")};
}

Verdict speed_formula() {
  const Mask brain(Geometry{{2, 1, 1}, 1.0}, 1);
  const auto tissue = uniform_tissue(brain);
  ModelParams p;
  p.kappa_w = 0.01;
  const double slow = speed_from_params(tissue, p)[0];
  p.kappa_w = 0.1;
  const double fast = speed_from_params(tissue, p)[0];
  return {std::abs(slow - 0.06928) <= 1e-5 && std::abs(fast - 0.21909) <= 1e-5 &&
              std::abs(slow - 4.0 * std::sqrt(0.01 * 0.03)) <= 1e-6 && std::abs(fast - 4.0 * std::sqrt(0.01 * 0.3)) <= 1e-6,
          "v = " + fmt("%.6f", slow) + " (kappa 0.01), " + fmt("%.6f", fast) + " (kappa 0.1)"};
}

Verdict seed_recovery() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> pos(34.0, 94.0);
  int recovered = 0;
  const int n = 10;
  std::string errors;
  for (int k = 0; k < n; ++k) {
    PhantomSpec s = planar({});
    s.layout = TissueLayout::ConcentricShells;
    s.generator = PhantomGenerator::Eikonal;
    s.seed = std::array<double, 3>{pos(rng), pos(rng), 0.0};
    s.t0 = 100;
    s.t1 = 140;
    s.t2 = 180;
    const auto pc = generate_case(s);
    const auto speed = speed_from_params(pc.data.tissue, s.params);
    FitConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(k);
    const auto fit = fit_seed(pc.data.s0, speed, pc.data.tissue.grid(), cfg);
    const auto& p = *s.seed;
    const double err = std::hypot(fit.x_s_best[0] - p[0], fit.x_s_best[1] - p[1], fit.x_s_best[2] - p[2]);
    if (err <= 2.0) ++recovered;
    errors += (errors.empty() ? "" : " ") + fmt("%.2f", err);
  }
  const double secs = seconds_since(t0);
  return {recovered >= 9 && secs < 300.0, std::to_string(recovered) + "/" + std::to_string(n) +
                                               " within 2 voxels (errors " + errors + "), " + fmt("%.1f", secs) + " s"};
}

// ---- CLI-driven criteria

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) header.push_back(f);
  }
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::map<std::string, std::string> row;
    std::size_t k = 0;
    for (std::string f; std::getline(ss, f, ',') && k < header.size(); ++k) row[header[k]] = f;
    rows.push_back(row);
  }
  return rows;
}

struct SelfConsistencyPhantom {
  std::string id, layout, fa, generator_set;
  double kw, kg, tau, t0, t1, t2;
};

Verdict scheme_self_consistency() {
  const std::vector<SelfConsistencyPhantom> phantoms = {
      {"slab_band", "TwoLayerSlab", "ConstantBand", "p2", 0.01, 0.01, 0.05, 900, 1200, 1500},
      {"shells", "ConcentricShells", "Zero", "p3", 0.02, 0.01, 0.0, 900, 1200, 1500},
      {"checker", "CheckerboardPatch", "Zero", "p5", 0.1, 0.01, 0.0, 700, 900, 1100},
  };
  const fs::path dir = work / "self_consistency";
  fs::remove_all(dir);
  fs::create_directories(dir / "cases");
  for (const auto& p : phantoms) {
    std::ostringstream ini;
    ini << "[run]\nmode = 2d\n\n[model]\nkappa_w = " << p.kw << "\nkappa_g = " << p.kg << "\ntau = " << p.tau
        << "\n\n[phantom]\nid = " << p.id << "\nlayout = " << p.layout << "\nfa_pattern = " << p.fa
        << "\nseed_x = 60.3\nseed_y = 64.2\nt0 = " << p.t0 << "\nt1 = " << p.t1 << "\nt2 = " << p.t2 << "\n";
    write_text(dir / (p.id + ".ini"), ini.str());
    const int rc = run_cli("phantom --config '" + (dir / (p.id + ".ini")).string() + "' --out '" +
                           (dir / "cases" / p.id).string() + "'");
    if (rc != 0) return {false, "phantom " + p.id + " exited with " + std::to_string(rc)};
  }
  write_text(dir / "sweep.ini", "[run]\nmode = 2d\n\n[simulation]\nt_max = 8000\n\n[sweep]\nschemes = forward\n");
  const int rc = run_cli("sweep --config '" + (dir / "sweep.ini").string() + "' --case '" + (dir / "cases").string() +
                         "' --out '" + (dir / "sweep").string() + "'");
  if (rc != 0) return {false, "sweep exited with " + std::to_string(rc)};
  const auto rows = read_csv(dir / "sweep" / "sweep.csv");
  if (rows.size() != 21) return {false, "expected 21 rows, got " + std::to_string(rows.size())};
  bool pass = true;
  std::string detail;
  for (const auto& p : phantoms) {
    double own = -1.0, best_other = -1.0;
    std::string best_other_id;
    for (const auto& r : rows) {
      if (r.at("case_id") != p.id) continue;
      if (r.at("status") != "ok") return {false, p.id + "/" + r.at("param_id") + ": " + r.at("status")};
      const double ap = std::stod(r.at("ap_pred"));
      if (r.at("param_id") == p.generator_set) {
        own = ap;
      } else if (ap > best_other) {
        best_other = ap;
        best_other_id = r.at("param_id");
      }
    }
    const bool rank1 = own > best_other;
    pass = pass && rank1;
    detail += (detail.empty() ? "" : "; ") + p.id + " " + p.generator_set + "=" + fmt("%.4f", own) + " vs " +
              best_other_id + "=" + fmt("%.4f", best_other) + (rank1 ? "" : " (not rank 1)");
  }
  return {pass, detail};
}

Verdict statistics_oracles() {
  bool pass = true;
  std::string detail;
  const std::vector<double> a{1, 2, 2, 4}, b{2, 1, 3, 4};
  const auto rho = spearman_rho(a, b);
  const bool rho_ok = rho && *rho == 0.8;
  pass = pass && rho_ok;
  detail += "tie case rho = " + (rho ? fmt("%.15g", *rho) : std::string("undefined")) + (rho_ok ? "" : " (expected 0.8)");

  const std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5};
  const auto tt = one_sample_t_test(v, 0.0);
  const bool t_ok = std::abs(tt.t - 4.2426) <= 1e-3 && std::abs(tt.p - 0.0132) <= 1e-3;
  pass = pass && t_ok;
  detail += "; t-test t = " + fmt("%.6f", tt.t) + " p = " + fmt("%.6f", tt.p) + (t_ok ? "" : " (mismatch)");

  // 3 cases x 4 settings: rhos -0.8, 0, 0.6; mean -1/15; t = -1/sqrt(37); p = 1 - 1/sqrt(75) at df 2
  const double fit[3][4] = {{0.9, 0.8, 0.7, 0.6}, {0.1, 0.2, 0.3, 0.4}, {0.5, 0.6, 0.7, 0.8}};
  const double pred[3][4] = {{0.5, 0.7, 0.6, 0.8}, {0.3, 0.1, 0.4, 0.2}, {0.2, 0.1, 0.4, 0.3}};
  SweepResult sweep;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 4; ++k) {
      SweepRow r;
      r.case_id = std::string(1, static_cast<char>('A' + c));
      r.param_id = "p" + std::to_string(k + 1);
      r.ap_fit = fit[c][k];
      r.ap_pred = pred[c][k];
      sweep.rows.push_back(r);
    }
  const auto rep = fit_vs_prediction_report(sweep, Scheme::Forward);
  const double expect_rho[3] = {-0.8, 0.0, 0.6};
  bool table_ok = rep.n == 3 && rep.t_test.has_value();
  for (int c = 0; c < 3 && table_ok; ++c) table_ok = std::abs(*rep.per_case[c].rho - expect_rho[c]) <= 1e-12;
  table_ok = table_ok && std::abs(rep.mean_rho + 1.0 / 15.0) <= 1e-12 &&
             std::abs(rep.t_test->t + 1.0 / std::sqrt(37.0)) <= 1e-12 &&
             std::abs(rep.t_test->p - (1.0 - 1.0 / std::sqrt(75.0))) <= 1e-12;
  pass = pass && table_ok;
  detail += "; 3x4 table mean rho = " + fmt("%.12f", rep.mean_rho) +
            (rep.t_test ? " t = " + fmt("%.12f", rep.t_test->t) + " p = " + fmt("%.12f", rep.t_test->p) : "") +
            (table_ok ? "" : " (mismatch)");
  return {pass, detail};
}

Verdict pipeline_determinism() {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text(dir / "phantom.ini",
             "[run]\nmode = 2d\n\n[model]\nkappa_w = 0.05\n\n[phantom]\nid = det\nlayout = CheckerboardPatch\n"
             "seed_x = 57.1\nseed_y = 69.4\nt0 = 700\nt1 = 900\nt2 = 1100\ncavity_x = 57\ncavity_y = 69\n"
             "cavity_radius = 3\nnoise = random_flip\nnoise_p = 0.002\n");
  write_text(dir / "sweep.ini", "[run]\nmode = 2d\n\n[fit]\nn_restarts = 3\n\n[sweep]\nparam_sets = p1,p3,p5,p7\n");
  std::vector<std::string> csv;
  const std::vector<std::pair<std::string, std::string>> runs = {{"a", "1"}, {"b", "6"}};
  for (const auto& [tag, jobs] : runs) {
    const fs::path c = dir / ("case_" + tag), s = dir / ("sweep_" + tag);
    if (int rc = run_cli("phantom --config '" + (dir / "phantom.ini").string() + "' --seed 99 --out '" + c.string() + "'"))
      return {false, "phantom exited with " + std::to_string(rc)};
    if (int rc = run_cli("sweep --config '" + (dir / "sweep.ini").string() + "' --seed 99 --jobs " + jobs + " --case '" +
                         c.string() + "' --out '" + s.string() + "'"))
      return {false, "sweep exited with " + std::to_string(rc)};
    csv.push_back(slurp(s / "sweep.csv"));
  }
  const bool cases_same = slurp(dir / "case_a" / "s0.grv") == slurp(dir / "case_b" / "s0.grv") &&
                          slurp(dir / "case_a" / "s2.grv") == slurp(dir / "case_b" / "s2.grv");
  const bool same = !csv[0].empty() && csv[0] == csv[1];
  const auto rows = std::count(csv[0].begin(), csv[0].end(), '\n') - 1;
  return {same && cases_same, std::to_string(rows) + " rows; --jobs 1 vs --jobs 6 CSVs " +
                                  (same ? "byte-identical" : "DIFFER") + ", phantoms " +
                                  (cases_same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <gliorank-cli> <work-dir>\n");
    return 2;
  }
  cli_path = fs::absolute(argv[1]).string();
  work = fs::absolute(argv[2]);
  fs::create_directories(work);
  fs::remove(work / "cli_stderr.txt");

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"ap-oracle-equivalence", ap_oracle_equivalence},
      {"hand-worked-ap", hand_worked_ap},
      {"rank-invariance", rank_invariance},
      {"mass-conservation", mass_conservation},
      {"logistic-oracle", logistic_oracle},
      {"eikonal-distance-oracle", eikonal_distance},
      {"speed-formula", speed_formula},
      {"seed-recovery", seed_recovery},
      {"scheme-self-consistency", scheme_self_consistency},
      {"statistics-oracles", statistics_oracles},
      {"pipeline-determinism", pipeline_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
