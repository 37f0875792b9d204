// gliorank command-line front end.
//
// Every subcommand reads an INI config (--config), applies command-line overrides, writes its
// outputs into --out and finishes with resolved_config.ini (every value used, defaults included)
// and run_manifest.txt. Exit codes: 0 success, 1 computational failure, 2 usage or input error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gliorank/gliorank.hpp"
#include "gliorank/log.hpp"
#include "gliorank/run_config.hpp"

namespace fs = std::filesystem;
using namespace gliorank;

namespace {

constexpr const char* version = "1.0.0";

struct Options {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> jobs;
  std::optional<std::string> scheme;
  std::optional<std::string> mode;
  std::vector<std::string> sets;
  std::vector<std::string> cases;
};

/// A subcommand's run: config in, output directory, manifest entries.
struct Run {
  std::string command;
  Config cfg;
  fs::path out;
  KeyValueReport manifest;
};

Config load_config(const Options& o, const std::string& command) {
  Config cfg = o.config_path.empty() ? Config{} : Config::load(o.config_path);
  if (o.out) cfg.set("run", "out", *o.out);
  if (o.seed) cfg.set("run", "rng_seed", std::to_string(*o.seed));
  if (o.jobs) cfg.set("run", "jobs", std::to_string(*o.jobs));
  if (o.mode) cfg.set("run", "mode", *o.mode);
  if (o.scheme) cfg.set(command == "sweep" ? "sweep" : "evaluate", command == "sweep" ? "schemes" : "scheme", *o.scheme);
  if (!o.cases.empty()) {
    std::string joined;
    for (const auto& c : o.cases) joined += (joined.empty() ? "" : ",") + c;
    cfg.set("input", command == "sweep" ? "cases" : "case", joined);
  }
  for (const auto& kv : o.sets) {
    const auto dot = kv.find('.');
    const auto eq = kv.find('=');
    require(dot != std::string::npos && eq != std::string::npos && dot < eq, errc::invalid_argument,
            "--set expects section.key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, dot), kv.substr(dot + 1, eq - dot - 1), kv.substr(eq + 1));
  }
  return cfg;
}

fs::path input_path(Config& cfg, const std::string& key) {
  const fs::path p = cfg.get<std::string>("input", key);
  require(fs::exists(p), errc::input_not_found, "input not found: " + p.string());
  return p;
}

/// In 2d mode the data must be planar (nz = 1).
void check_mode(Config& cfg, const Geometry& g) {
  if (read_mode(cfg) == RunMode::Planar)
    require(g.dims.nz == 1, errc::invalid_argument, "mode 2d requires nz = 1, input has nz = " + std::to_string(g.dims.nz));
}

SeedInit read_seed(Config& cfg, const TissueModel& tissue) {
  const auto kind = cfg.get<std::string>("seed", "kind", "gaussian");
  if (kind == "segmentation") {
    const fs::path p = cfg.get<std::string>("seed", "segmentation");
    require(fs::exists(p), errc::input_not_found, "input not found: " + p.string());
    Segmentation m = read_segmentation(p);
    require_same_grid(m, tissue.labels(), "seed segmentation and tissue");
    return SegmentationSeed{std::move(m)};
  }
  require(kind == "gaussian", errc::invalid_config, "[seed] kind must be gaussian or segmentation");
  return GaussianSeed{read_point(cfg, "seed"), cfg.get<double>("seed", "sigma_mm", 1.0)};
}

void cmd_simulate(Run& r) {
  const TissueModel tissue = read_tissue(input_path(r.cfg, "tissue"));
  check_mode(r.cfg, tissue.geometry());
  const ModelParams params = read_model_params(r.cfg);
  SimulationSettings sim = read_simulation(r.cfg);
  const SeedInit seed = read_seed(r.cfg, tissue);
  r.cfg.reject_unused();
  const auto res = simulate(seed, tissue, params, sim);
  write_invasion_map(res.invasion, r.out / "T.grv");
  write_volume(res.final_density, r.out / "density_final.grv");
  if (!res.snapshots.empty()) {
    fs::create_directories(r.out / "snapshots");
    for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "c_%05zu.grv", k);
      write_volume(res.snapshots[k].density, r.out / "snapshots" / name);
    }
  }
  r.manifest.add("steps", res.steps);
  r.manifest.add("final_time", res.final_time);
  r.manifest.add("invaded_voxels", count(res.invasion.threshold(res.final_time)));
  r.manifest.add("snapshots", res.snapshots.size());
}

void cmd_eikonal(Run& r) {
  const TissueModel tissue = read_tissue(input_path(r.cfg, "tissue"));
  check_mode(r.cfg, tissue.geometry());
  const ModelParams params = read_model_params(r.cfg);
  const auto speed = speed_from_params(tissue, params);
  const auto& grid = tissue.grid();
  const auto kind = r.cfg.get<std::string>("seed", "kind", "point");
  InvasionMap t;
  if (kind == "point") {
    const auto x = read_point(r.cfg, "seed");
    r.cfg.reject_unused();
    const auto sources = sources_from_point(x, speed, grid);
    require(!sources.empty(), errc::seed_outside_brain, "seed outside brain");
    t = fast_march(speed, grid, sources);
  } else if (kind == "gaussian") {
    const GaussianSeed g{read_point(r.cfg, "seed"), r.cfg.get<double>("seed", "sigma_mm", 1.0)};
    r.cfg.reject_unused();
    t = fast_march(speed, grid, g, params.c_v);
  } else {
    require(kind == "segmentation", errc::invalid_config, "[seed] kind must be point, gaussian or segmentation");
    const fs::path p = r.cfg.get<std::string>("seed", "segmentation");
    r.cfg.reject_unused();
    require(fs::exists(p), errc::input_not_found, "input not found: " + p.string());
    t = fast_march(speed, grid, read_segmentation(p));
  }
  write_invasion_map(t, r.out / "T.grv");
  write_volume(speed, r.out / "speed.grv");
  std::size_t reached = 0;
  for (double v : t) reached += std::isfinite(v);
  r.manifest.add("reached_voxels", reached);
}

void write_restarts_csv(const FitResult& fit, const fs::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), errc::io_failure, "cannot open for writing: " + path.string());
  os << "restart,start_x,start_y,start_z,end_x,end_y,end_z,objective,iterations,converged\n";
  for (std::size_t k = 0; k < fit.per_restart.size(); ++k) {
    const auto& rec = fit.per_restart[k];
    os << k;
    for (double v : rec.start) os << ',' << format_double(v);
    for (double v : rec.end) os << ',' << format_double(v);
    os << ',' << format_double(rec.objective) << ',' << rec.iterations << ',' << (rec.converged ? "true" : "false")
       << '\n';
  }
}

void add_fit(KeyValueReport& kv, const FitResult& fit) {
  kv.add("x_s_x", fit.x_s_best[0]);
  kv.add("x_s_y", fit.x_s_best[1]);
  kv.add("x_s_z", fit.x_s_best[2]);
  kv.add("objective_best", fit.objective_best);
  kv.add("best_restart", fit.best_restart);
  kv.add("n_restarts", fit.per_restart.size());
}

void cmd_fit_seed(Run& r) {
  const TissueModel tissue = read_tissue(input_path(r.cfg, "tissue"));
  check_mode(r.cfg, tissue.geometry());
  const Segmentation s0 = read_segmentation(input_path(r.cfg, "s0"));
  require_same_grid(s0, tissue.labels(), "S0 and tissue");
  const ModelParams params = read_model_params(r.cfg);
  const FitConfig fit_cfg = read_fit(r.cfg);
  r.cfg.reject_unused();
  const auto speed = speed_from_params(tissue, params);
  const auto fit = fit_seed(s0, speed, tissue.grid(), fit_cfg);
  KeyValueReport rep;
  add_fit(rep, fit);
  rep.add("ap_s0", 1.0 - fit.objective_best);
  rep.write(r.out / "fit_report.txt");
  write_restarts_csv(fit, r.out / "restarts.csv");
  write_invasion_map(fast_march(speed, tissue.grid(), sources_from_point(fit.x_s_best, speed, tissue.grid())),
                     r.out / "T_fit.grv");
  r.manifest.add("objective_best", fit.objective_best);
}

void cmd_phantom(Run& r) {
  const PhantomSpec spec = read_phantom_spec(r.cfg);
  const auto noise = read_phantom_noise(r.cfg);
  r.cfg.reject_unused();
  auto pc = generate_case(spec);
  if (noise) pc.data = perturb_case(std::move(pc.data), *noise);
  write_phantom(spec, pc, r.out);
  r.manifest.add("case_id", spec.id);
  r.manifest.add("volume_s0", count(pc.data.s0));
  r.manifest.add("volume_s2", count(pc.data.s2));
}

void add_eval(KeyValueReport& kv, const std::string& prefix, const EvalReport& e) {
  kv.add(prefix + "ap", e.ap);
  kv.add(prefix + "volume_matched_t", e.volume_matched_t);
  kv.add(prefix + "positives", e.pr.positives);
  kv.add(prefix + "roi_voxels", e.pr.roi_size);
  kv.add(prefix + "excluded_reference_voxels", e.excluded_voxel_count);
}

void cmd_evaluate(Run& r) {
  const CaseData c = read_case(input_path(r.cfg, "case"));
  check_mode(r.cfg, c.geometry());
  const Scheme scheme = parse_scheme(r.cfg.get<std::string>("evaluate", "scheme", "forward"));
  const ModelParams params = read_model_params(r.cfg);
  const EvalSettings settings = read_eval_settings(r.cfg);
  r.cfg.reject_unused();
  const auto res =
      scheme == Scheme::Forward ? evaluate_forward(c, params, settings) : evaluate_bidirectional(c, params, settings);
  KeyValueReport rep;
  rep.add("case_id", c.id);
  rep.add("scheme", to_string(scheme));
  rep.add("ap_fit", res.ap_fit);
  rep.add("ap_pred", res.ap_pred);
  add_fit(rep, res.baseline.fit);
  add_eval(rep, "fit.", res.baseline.report);
  add_eval(rep, "pred.", res.pred_report);
  rep.write(r.out / "report.txt");
  write_pr_csv(res.baseline.report.pr, r.out / "pr_fit.csv");
  write_pr_csv(res.pred_report.pr, r.out / "pr_pred.csv");
  write_volume(res.baseline.report.agreement, r.out / "agreement_fit.grv");
  write_volume(res.pred_report.agreement, r.out / "agreement_pred.grv");
  write_invasion_map(res.baseline.t, r.out / "T_fit.grv");
  write_invasion_map(res.t_pred, r.out / "T_pred.grv");
  r.manifest.add("ap_fit", res.ap_fit);
  r.manifest.add("ap_pred", res.ap_pred);
}

/// A listed path is a case directory, or a directory whose subdirectories (sorted) are cases.
std::vector<fs::path> expand_cases(const std::vector<std::string>& listed) {
  std::vector<fs::path> out;
  for (const auto& s : listed) {
    const fs::path p = s;
    require(fs::is_directory(p), errc::input_not_found, "input not found: " + p.string());
    if (fs::exists(p / "labels.grv")) {
      out.push_back(p);
      continue;
    }
    std::vector<fs::path> sub;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_directory() && fs::exists(e.path() / "labels.grv")) sub.push_back(e.path());
    require(!sub.empty(), errc::input_not_found, "no case directories under " + p.string());
    std::sort(sub.begin(), sub.end());
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

/// Returns false when a correlation report could not be formed (the sweep table is still written).
bool cmd_sweep(Run& r) {
  const auto listed = r.cfg.get_list("input", "cases");
  require(!listed.empty(), errc::invalid_config, "missing required key [input] cases");
  const auto schemes = read_schemes(r.cfg);
  const auto sets = read_param_sets(r.cfg);
  const EvalSettings settings = read_eval_settings(r.cfg);
  const std::size_t jobs = read_jobs(r.cfg);
  r.cfg.reject_unused();
  std::vector<CaseData> cases;
  for (const auto& p : expand_cases(listed)) {
    cases.push_back(read_case(p));
    check_mode(r.cfg, cases.back().geometry());
  }
  for (std::size_t i = 0; i < cases.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      require(cases[i].id != cases[j].id, errc::invalid_argument, "duplicate case id '" + cases[i].id + "'");
  log::info("sweep: " + std::to_string(cases.size()) + " cases x " + std::to_string(sets.size()) +
            " parameter sets on " + std::to_string(jobs) + " threads");
  const auto result = parameter_sweep(cases, sets, schemes, settings, jobs);
  write_sweep_csv(result, r.out / "sweep.csv");

  std::size_t failed = 0;
  for (const auto& row : result.rows) failed += !row.ok();
  r.manifest.add("rows", result.rows.size());
  r.manifest.add("failed_rows", failed);

  KeyValueReport corr;
  bool ok = true;
  for (const auto scheme : schemes) {
    try {
      const auto kv = to_key_values(fit_vs_prediction_report(result, scheme));
      for (const auto& e : kv.entries()) corr.add(e.first, e.second);
    } catch (const error& e) {
      corr.add(to_string(scheme) + ".error", std::string(to_string(e.code())) + ": " + e.what());
      std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
      ok = false;
    }
  }
  corr.write(r.out / "correlation.txt");
  return ok;
}

int report_failure(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << "error: " << code << ": " << message << '\n';
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-to-invasion ranking: growth simulation, onset fitting and evaluation", "gliorank"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed (overrides [run] rng_seed)");
    sub->add_option("--mode", o.mode, "2d or 3d")->check(CLI::IsMember({"2d", "3d"}));
    sub->add_option("--set", o.sets, "override a config value: section.key=value");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "run the reaction-diffusion model from a seed"},
      {"eikonal", "fast-march arrival times from a seed"},
      {"fit-seed", "fit the onset location to a baseline segmentation"},
      {"phantom", "generate a synthetic case directory"},
      {"evaluate", "fit and score one case with one evaluation scheme"},
      {"sweep", "evaluate cases across parameter sets and correlate fit with prediction"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "evaluate" || name == "sweep") {
      sub->add_option("--scheme", o.scheme, "forward or bidirectional")
          ->check(CLI::IsMember({"forward", "bidirectional"}));
      sub->add_option("--case", o.cases, name == "sweep" ? "case directory (repeatable)" : "case directory");
    }
    if (name == "sweep") sub->add_option("--jobs", o.jobs, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_failure("usage", e.what(), 2);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  const auto started = std::chrono::steady_clock::now();
  Run r;
  r.command = command;
  try {
    r.cfg = load_config(o, command);
    r.out = r.cfg.get<std::string>("run", "out", "out");
    read_mode(r.cfg);
    fs::create_directories(r.out);
    bool ok = true;
    if (command == "simulate") cmd_simulate(r);
    else if (command == "eikonal") cmd_eikonal(r);
    else if (command == "fit-seed") cmd_fit_seed(r);
    else if (command == "phantom") cmd_phantom(r);
    else if (command == "evaluate") cmd_evaluate(r);
    else ok = cmd_sweep(r);
    r.cfg.write_resolved(r.out / "resolved_config.ini");
    KeyValueReport m;
    m.add("command", command);
    m.add("version", version);
    m.add("status", ok ? "ok" : "partial");
    for (const auto& e : r.manifest.entries()) m.add(e.first, e.second);
    m.add("elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    m.write(r.out / "run_manifest.txt");
    return ok ? 0 : 1;
  } catch (const error& e) {
    return report_failure(std::string(to_string(e.code())), e.what(), is_input_error(e.code()) ? 2 : 1);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_failure("io_failure", e.what(), 2);
  } catch (const std::exception& e) {
    return report_failure("internal", e.what(), 1);
  }
}
