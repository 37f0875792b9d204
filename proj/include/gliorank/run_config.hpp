#pragma once

#include <array>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gliorank/config.hpp"
#include "gliorank/eval_schemes.hpp"
#include "gliorank/fitting.hpp"
#include "gliorank/growth_model.hpp"
#include "gliorank/phantom.hpp"

// Readers from INI sections into the library's settings structs. Every key consulted is recorded in
// the Config, so the resolved snapshot lists defaults alongside the values that were given.

namespace gliorank {

enum class RunMode { Planar, Volumetric };

inline RunMode parse_mode(const std::string& s) {
  if (s == "2d") return RunMode::Planar;
  if (s == "3d") return RunMode::Volumetric;
  fail(errc::invalid_config, "unknown mode '" + s + "' (expected 2d or 3d)");
}

inline TimeScheme parse_time_scheme(const std::string& s) {
  if (s == "explicit") return TimeScheme::Explicit;
  if (s == "semi-implicit") return TimeScheme::SemiImplicit;
  fail(errc::invalid_config, "unknown time scheme '" + s + "' (expected explicit or semi-implicit)");
}

inline std::string to_string(TimeScheme s) { return s == TimeScheme::Explicit ? "explicit" : "semi-implicit"; }

inline std::uint64_t read_rng_seed(Config& cfg) { return cfg.get<std::uint64_t>("run", "rng_seed", 0); }

inline RunMode read_mode(Config& cfg) { return parse_mode(cfg.get<std::string>("run", "mode", "3d")); }

inline std::size_t read_jobs(Config& cfg) {
  const auto jobs = cfg.get<std::uint64_t>("run", "jobs", default_jobs());
  require(jobs >= 1, errc::invalid_config, "[run] jobs must be >= 1");
  return static_cast<std::size_t>(jobs);
}

inline ModelParams read_model_params(Config& cfg, const std::string& section = "model") {
  const ModelParams d;
  ModelParams p;
  p.rho = cfg.get<double>(section, "rho", d.rho);
  p.tau = cfg.get<double>(section, "tau", d.tau);
  p.kappa_w = cfg.get<double>(section, "kappa_w", d.kappa_w);
  p.kappa_g = cfg.get<double>(section, "kappa_g", d.kappa_g);
  p.c_v = cfg.get<double>(section, "c_v", d.c_v);
  try {
    validate(p);
  } catch (const error& e) {
    fail(errc::invalid_config, "[" + section + "] " + e.what());
  }
  return p;
}

inline SimulationSettings read_simulation(Config& cfg, double default_t_max = SimulationSettings{}.t_max) {
  const SimulationSettings d;
  SimulationSettings s;
  s.dt = cfg.get<double>("simulation", "dt", d.dt);
  s.t_max = cfg.get<double>("simulation", "t_max", default_t_max);
  s.scheme = parse_time_scheme(cfg.get<std::string>("simulation", "scheme", to_string(d.scheme)));
  s.record_interval = cfg.get<std::uint64_t>("simulation", "record_interval", d.record_interval);
  s.interpolate_crossing = cfg.get<bool>("simulation", "interpolate_crossing", d.interpolate_crossing);
  s.overshoot_tolerance = cfg.get<double>("simulation", "overshoot_tolerance", d.overshoot_tolerance);
  s.cg_tolerance = cfg.get<double>("simulation", "cg_tolerance", d.cg_tolerance);
  try {
    validate(s);
  } catch (const error& e) {
    fail(errc::invalid_config, std::string("[simulation] ") + e.what());
  }
  return s;
}

inline FitConfig read_fit(Config& cfg) {
  const FitConfig d;
  FitConfig f;
  f.n_restarts = cfg.get<std::uint64_t>("fit", "n_restarts", d.n_restarts);
  f.rng_seed = cfg.get<std::uint64_t>("fit", "rng_seed", read_rng_seed(cfg));
  f.max_iters = cfg.get<std::uint64_t>("fit", "max_iters", d.max_iters);
  f.xtol = cfg.get<double>("fit", "xtol", d.xtol);
  f.ftol = cfg.get<double>("fit", "ftol", d.ftol);
  f.initial_step = cfg.get<double>("fit", "initial_step", d.initial_step);
  f.margin_voxels = cfg.get<double>("fit", "margin_voxels", d.margin_voxels);
  static constexpr const char* lo[3] = {"lo_x", "lo_y", "lo_z"};
  static constexpr const char* hi[3] = {"hi_x", "hi_y", "hi_z"};
  bool any = false;
  for (int a = 0; a < 3; ++a) any = any || cfg.has("fit", lo[a]) || cfg.has("fit", hi[a]);
  if (any) {
    SearchBox box;
    for (int a = 0; a < 3; ++a) {
      box.lo[a] = cfg.get<double>("fit", lo[a]);
      box.hi[a] = cfg.get<double>("fit", hi[a]);
      require(box.lo[a] <= box.hi[a], errc::invalid_config, "[fit] search box has lo > hi");
    }
    f.search_bounds = box;
  }
  return f;
}

inline std::array<double, 3> read_point(Config& cfg, const std::string& section, const std::string& prefix = "") {
  return {cfg.get<double>(section, prefix + "x"), cfg.get<double>(section, prefix + "y"),
          cfg.get<double>(section, prefix + "z", 0.0)};
}

inline EvalSettings read_eval_settings(Config& cfg) {
  EvalSettings s;
  s.sim = read_simulation(cfg, EvalSettings{}.sim.t_max);
  s.fit = read_fit(cfg);
  s.seed_sigma_mm = cfg.get<double>("seed", "sigma_mm", s.seed_sigma_mm);
  return s;
}

/// Phantom description; generator parameters come from [model], the rng seed from [run].
inline PhantomSpec read_phantom_spec(Config& cfg) {
  PhantomSpec d;
  if (read_mode(cfg) == RunMode::Planar) d = planar(d);
  PhantomSpec s = d;
  const std::string sec = "phantom";
  s.id = cfg.get<std::string>(sec, "id", d.id);
  s.dims.nx = static_cast<std::uint32_t>(cfg.get<std::uint64_t>(sec, "nx", d.dims.nx));
  s.dims.ny = static_cast<std::uint32_t>(cfg.get<std::uint64_t>(sec, "ny", d.dims.ny));
  s.dims.nz = static_cast<std::uint32_t>(cfg.get<std::uint64_t>(sec, "nz", d.dims.nz));
  s.spacing_mm = cfg.get<double>(sec, "spacing_mm", d.spacing_mm);
  s.layout = parse_layout(cfg.get<std::string>(sec, "layout", to_string(d.layout)));
  s.fa_pattern = parse_fa_pattern(cfg.get<std::string>(sec, "fa_pattern", to_string(d.fa_pattern)));
  s.generator = parse_generator(cfg.get<std::string>(sec, "generator", to_string(d.generator)));
  if (cfg.has(sec, "seed_x") || cfg.has(sec, "seed_y") || cfg.has(sec, "seed_z")) {
    s.seed = read_point(cfg, sec, "seed_");
  } else {
    const auto c = grid_centre(s.dims);
    for (int a = 0; a < 3; ++a) cfg.record(sec, std::string("seed_") + "xyz"[a], format_double(c[a]));
  }
  s.seed_sigma_mm = cfg.get<double>(sec, "seed_sigma_mm", d.seed_sigma_mm);
  s.params = read_model_params(cfg);
  s.t0 = cfg.get<double>(sec, "t0", d.t0);
  s.t1 = cfg.get<double>(sec, "t1", d.t1);
  s.t2 = cfg.get<double>(sec, "t2", d.t2);
  const double radius = cfg.get<double>(sec, "cavity_radius", 0.0);
  if (radius > 0.0) s.cavity = CavitySpec{read_point(cfg, sec, "cavity_"), radius};
  s.rng_seed = read_rng_seed(cfg);
  s.dt = cfg.get<double>(sec, "dt", d.dt);
  s.scheme = parse_time_scheme(cfg.get<std::string>(sec, "scheme", to_string(d.scheme)));
  s.slab_half_width = cfg.get<double>(sec, "slab_half_width", d.slab_half_width);
  s.shell_width = cfg.get<double>(sec, "shell_width", d.shell_width);
  s.patch_size = static_cast<std::uint32_t>(cfg.get<std::uint64_t>(sec, "patch_size", d.patch_size));
  s.fa_value = cfg.get<double>(sec, "fa_value", d.fa_value);
  try {
    validate(s);
  } catch (const error& e) {
    fail(e.code() == errc::invalid_dims ? errc::invalid_dims : errc::invalid_config, "[phantom] " + std::string(e.what()));
  }
  return s;
}

/// Optional segmentation noise for generated phantoms: none, erosion_dilation or random_flip.
inline std::optional<Perturbation> read_phantom_noise(Config& cfg) {
  const auto kind = cfg.get<std::string>("phantom", "noise", "none");
  if (kind == "none") return std::nullopt;
  if (kind == "erosion_dilation") return BoundaryErosionDilation{cfg.get<double>("phantom", "noise_radius", 1.0)};
  if (kind == "random_flip")
    return RandomFlip{cfg.get<double>("phantom", "noise_p", 0.01), read_rng_seed(cfg)};
  fail(errc::invalid_config, "[phantom] unknown noise '" + kind + "'");
}

/// Parameter sets for a sweep: ids from the default table (p1..p7) or custom [param:<id>] sections.
inline std::vector<ParamSet> read_param_sets(Config& cfg) {
  const double rho = cfg.get<double>("sweep", "rho", ModelParams{}.rho);
  const auto defaults = default_param_sets(rho);
  std::vector<std::string> all;
  for (const auto& p : defaults) all.push_back(p.id);
  const auto ids = cfg.get_list("sweep", "param_sets", all);
  require(!ids.empty(), errc::invalid_config, "[sweep] param_sets is empty");
  std::vector<ParamSet> out;
  for (const auto& id : ids) {
    const std::string section = "param:" + id;
    auto it = std::find_if(defaults.begin(), defaults.end(), [&](const ParamSet& p) { return p.id == id; });
    if (it != defaults.end() && !cfg.has(section, "kappa_w")) {
      out.push_back(*it);
      continue;
    }
    require(cfg.has(section, "kappa_w") || cfg.has(section, "kappa_g") || cfg.has(section, "tau"),
            errc::invalid_config, "[sweep] unknown parameter set '" + id + "' (no [" + section + "] section)");
    ModelParams base = it != defaults.end() ? it->params : ModelParams{};
    ModelParams p;
    p.rho = cfg.get<double>(section, "rho", rho);
    p.kappa_w = cfg.get<double>(section, "kappa_w", base.kappa_w);
    p.kappa_g = cfg.get<double>(section, "kappa_g", base.kappa_g);
    p.tau = cfg.get<double>(section, "tau", base.tau);
    p.c_v = cfg.get<double>(section, "c_v", base.c_v);
    try {
      validate(p);
    } catch (const error& e) {
      fail(errc::invalid_config, "[" + section + "] " + e.what());
    }
    out.push_back({id, p});
  }
  return out;
}

inline std::vector<Scheme> read_schemes(Config& cfg) {
  std::vector<Scheme> out;
  for (const auto& s : cfg.get_list("sweep", "schemes", {"forward", "bidirectional"})) out.push_back(parse_scheme(s));
  require(!out.empty(), errc::invalid_config, "[sweep] schemes is empty");
  return out;
}

}  // namespace gliorank
