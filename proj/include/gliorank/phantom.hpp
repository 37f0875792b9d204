#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "gliorank/case_data.hpp"
#include "gliorank/eikonal.hpp"
#include "gliorank/fitting.hpp"
#include "gliorank/growth_model.hpp"

namespace gliorank {

enum class TissueLayout { TwoLayerSlab, ConcentricShells, CheckerboardPatch };
enum class FaPattern { Zero, ConstantBand, RadialFiber };
/// How the snapshots are produced: the reaction-diffusion model, or level sets of the eikonal
/// arrival time from a point source ("eikonal balls").
enum class PhantomGenerator { ReactionDiffusion, Eikonal };

inline std::string to_string(TissueLayout v) {
  switch (v) {
    case TissueLayout::TwoLayerSlab: return "TwoLayerSlab";
    case TissueLayout::ConcentricShells: return "ConcentricShells";
    case TissueLayout::CheckerboardPatch: return "CheckerboardPatch";
  }
  return "?";
}

inline std::string to_string(FaPattern v) {
  switch (v) {
    case FaPattern::Zero: return "Zero";
    case FaPattern::ConstantBand: return "ConstantBand";
    case FaPattern::RadialFiber: return "RadialFiber";
  }
  return "?";
}

inline std::string to_string(PhantomGenerator v) {
  return v == PhantomGenerator::Eikonal ? "Eikonal" : "ReactionDiffusion";
}

inline TissueLayout parse_layout(const std::string& s) {
  for (auto v : {TissueLayout::TwoLayerSlab, TissueLayout::ConcentricShells, TissueLayout::CheckerboardPatch})
    if (s == to_string(v)) return v;
  fail(errc::invalid_config, "unknown tissue layout '" + s + "'");
}

inline FaPattern parse_fa_pattern(const std::string& s) {
  for (auto v : {FaPattern::Zero, FaPattern::ConstantBand, FaPattern::RadialFiber})
    if (s == to_string(v)) return v;
  fail(errc::invalid_config, "unknown fa pattern '" + s + "'");
}

inline PhantomGenerator parse_generator(const std::string& s) {
  for (auto v : {PhantomGenerator::ReactionDiffusion, PhantomGenerator::Eikonal})
    if (s == to_string(v)) return v;
  fail(errc::invalid_config, "unknown phantom generator '" + s + "'");
}

struct CavitySpec {
  std::array<double, 3> center{};  // voxel coordinates
  double radius = 0.0;             // voxels
};

struct PhantomSpec {
  std::string id = "phantom";
  Dims dims{64, 64, 64};
  double spacing_mm = 1.0;
  TissueLayout layout = TissueLayout::ConcentricShells;
  FaPattern fa_pattern = FaPattern::Zero;
  PhantomGenerator generator = PhantomGenerator::ReactionDiffusion;
  /// Voxel coordinates; defaults to the grid centre.
  std::optional<std::array<double, 3>> seed;
  double seed_sigma_mm = 1.0;
  ModelParams params;
  double t0 = 600.0, t1 = 700.0, t2 = 800.0;
  std::optional<CavitySpec> cavity;
  std::uint64_t rng_seed = 0;
  double dt = 0.5;
  TimeScheme scheme = TimeScheme::Explicit;
  // layout geometry (voxels)
  double slab_half_width = 4.0;
  double shell_width = 6.0;
  std::uint32_t patch_size = 8;
  double fa_value = 0.6;
};

/// 2D variant used for fast runs: 128 x 128 x 1.
inline PhantomSpec planar(PhantomSpec s) {
  s.dims = {128, 128, 1};
  return s;
}

inline std::array<double, 3> grid_centre(const Dims& d) {
  return {(d.nx - 1) / 2.0, (d.ny - 1) / 2.0, (d.nz - 1) / 2.0};
}

inline std::array<double, 3> seed_location(const PhantomSpec& s) { return s.seed.value_or(grid_centre(s.dims)); }

inline void validate(const PhantomSpec& s) {
  validate(Geometry{s.dims, s.spacing_mm});
  validate(s.params);
  require(s.t0 > 0.0 && s.t0 <= s.t1 && s.t1 <= s.t2, errc::invalid_argument,
          "snapshot times must satisfy 0 < t0 <= t1 <= t2");
  require(s.seed_sigma_mm > 0.0, errc::invalid_argument, "seed sigma must be > 0");
  require(s.dt > 0.0, errc::invalid_argument, "dt must be > 0");
  require(s.shell_width > 0.0 && s.slab_half_width >= 0.0 && s.patch_size > 0, errc::invalid_argument,
          "layout sizes must be positive");
  require(s.fa_value >= 0.0 && s.fa_value <= 1.0, errc::invalid_argument, "fa_value must lie in [0,1]");
}

/// Ellipsoidal brain spanning 90% of each active axis (0.9, 0.85, 0.8 of the half extents).
inline Mask phantom_brain(const Geometry& g) {
  Mask m(g, 0);
  const auto c = grid_centre(g.dims);
  const std::array<double, 3> frac{0.9, 0.85, 0.8};
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto p = g.coords(i);
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (g.dims.extent(a) == 1) continue;
      const double semi = frac[a] * g.dims.extent(a) / 2.0;
      const double d = (static_cast<double>(p[a]) - c[a]) / semi;
      r2 += d * d;
    }
    m[i] = r2 <= 1.0 ? 1 : 0;
  }
  return m;
}

inline TissueModel phantom_tissue(const PhantomSpec& s) {
  const Geometry g{s.dims, s.spacing_mm};
  const Mask brain = phantom_brain(g);
  const auto c = grid_centre(s.dims);
  Mask labels(g, 0);
  ScalarField fa(g, 0.0);
  TensorField tensor(g, Tensor6f::diagonal(1.0f / 3.0f, 1.0f / 3.0f, 1.0f / 3.0f));
  for (std::size_t i = 0; i < brain.size(); ++i) {
    if (!brain[i]) continue;
    const auto p = g.coords(i);
    std::array<double, 3> d{};
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      d[a] = static_cast<double>(p[a]) - c[a];
      r2 += d[a] * d[a];
    }
    bool white = false;
    switch (s.layout) {
      case TissueLayout::TwoLayerSlab:
        white = std::abs(d[1]) <= s.slab_half_width;
        break;
      case TissueLayout::ConcentricShells:
        white = static_cast<std::int64_t>(std::floor(std::sqrt(r2) / s.shell_width)) % 2 == 0;
        break;
      case TissueLayout::CheckerboardPatch:
        white = (p[0] / s.patch_size + p[1] / s.patch_size + p[2] / s.patch_size) % 2 == 0;
        break;
    }
    labels[i] = static_cast<std::uint8_t>(white ? TissueLabel::WhiteMatter : TissueLabel::GreyMatter);
    if (!white || s.fa_pattern == FaPattern::Zero) continue;
    if (s.fa_pattern == FaPattern::ConstantBand) {
      fa[i] = s.fa_value;
      tensor[i] = Tensor6f::diagonal(1.0f, 0.0f, 0.0f);
    } else if (r2 > 0.0) {
      const double r = std::sqrt(r2);
      fa[i] = s.fa_value;
      tensor[i] = Tensor3d::outer({d[0] / r, d[1] / r, d[2] / r}).cast<float>();
    }
  }
  return TissueModel(std::move(labels), std::move(fa), std::move(tensor));
}

/// Hidden truth behind a generated case.
struct GroundTruth {
  std::array<double, 3> seed{};
  ModelParams params;
  InvasionMap invasion;
  double t0 = 0.0, t1 = 0.0, t2 = 0.0;
};

struct PhantomCase {
  CaseData data;
  GroundTruth truth;
};

inline PhantomCase generate_case(const PhantomSpec& s) {
  validate(s);
  PhantomCase out;
  out.data.id = s.id;
  out.data.tissue = phantom_tissue(s);
  const auto& tissue = out.data.tissue;
  const auto& grid = tissue.grid();
  const auto seed = seed_location(s);
  require(grid.in_brain(nearest_voxel(seed)), errc::seed_outside_brain, "phantom seed outside brain");

  InvasionMap t;
  if (s.generator == PhantomGenerator::ReactionDiffusion) {
    SimulationSettings sim;
    sim.dt = s.dt;
    sim.scheme = s.scheme;
    sim.t_max = s.t2;
    t = simulate(GaussianSeed{seed, s.seed_sigma_mm}, tissue, s.params, sim).invasion;
  } else {
    const auto speed = speed_from_params(tissue, s.params);
    t = fast_march(speed, grid, sources_from_point(seed, speed, grid));
  }
  out.data.s0 = t.threshold(s.t0);
  out.data.s1 = t.threshold(s.t1);
  out.data.s2 = t.threshold(s.t2);
  require(count(out.data.s0) > 0, errc::degenerate_phantom, "degenerate phantom: S0 is empty at t0");
  require(count(out.data.s2) > count(out.data.s1), errc::degenerate_phantom,
          "degenerate phantom: tumour does not grow between t1 and t2");

  out.data.cavity = Segmentation(tissue.geometry(), 0);
  if (s.cavity) {
    const auto& g = tissue.geometry();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!grid.in_brain(i)) continue;
      const auto p = g.coords(i);
      double r2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double d = static_cast<double>(p[a]) - s.cavity->center[a];
        r2 += d * d;
      }
      if (r2 <= s.cavity->radius * s.cavity->radius) out.data.cavity[i] = 1;
    }
    out.data.s1 = mask_minus(out.data.s1, out.data.cavity);
    out.data.s2 = mask_minus(out.data.s2, out.data.cavity);
  }
  out.truth = {seed, s.params, std::move(t), s.t0, s.t1, s.t2};
  return out;
}

/// Key-value description of a generated case (spec, truth, volumes).
inline KeyValueReport phantom_manifest(const PhantomSpec& s, const PhantomCase& c) {
  KeyValueReport m;
  m.add("case_id", s.id);
  m.add("nx", s.dims.nx);
  m.add("ny", s.dims.ny);
  m.add("nz", s.dims.nz);
  m.add("spacing_mm", s.spacing_mm);
  m.add("layout", to_string(s.layout));
  m.add("fa_pattern", to_string(s.fa_pattern));
  m.add("generator", to_string(s.generator));
  m.add("seed_x", c.truth.seed[0]);
  m.add("seed_y", c.truth.seed[1]);
  m.add("seed_z", c.truth.seed[2]);
  m.add("seed_sigma_mm", s.seed_sigma_mm);
  m.add("rho", s.params.rho);
  m.add("kappa_w", s.params.kappa_w);
  m.add("kappa_g", s.params.kappa_g);
  m.add("tau", s.params.tau);
  m.add("c_v", s.params.c_v);
  m.add("t0", s.t0);
  m.add("t1", s.t1);
  m.add("t2", s.t2);
  m.add("dt", s.dt);
  m.add("scheme", std::string(s.scheme == TimeScheme::Explicit ? "explicit" : "semi-implicit"));
  m.add("cavity", s.cavity.has_value());
  if (s.cavity) {
    m.add("cavity_x", s.cavity->center[0]);
    m.add("cavity_y", s.cavity->center[1]);
    m.add("cavity_z", s.cavity->center[2]);
    m.add("cavity_radius", s.cavity->radius);
  }
  m.add("rng_seed", s.rng_seed);
  m.add("volume_s0", count(c.data.s0));
  m.add("volume_s1", count(c.data.s1));
  m.add("volume_s2", count(c.data.s2));
  m.add("volume_cavity", count(c.data.cavity));
  for (std::size_t k = 0; k < c.data.history.size(); ++k) m.add("perturbation_" + std::to_string(k), c.data.history[k]);
  return m;
}

/// Writes the case directory plus the ground-truth arrival map (truth_T.grv).
inline void write_phantom(const PhantomSpec& s, const PhantomCase& c, const std::filesystem::path& dir) {
  write_case(c.data, dir, phantom_manifest(s, c));
  write_invasion_map(c.truth.invasion, dir / "truth_T.grv");
}

// ---- perturbations

struct BoundaryErosionDilation {
  double radius = 1.0;  // > 0 dilates, < 0 erodes (voxels)
};

struct RandomFlip {
  double p = 0.0;
  std::uint64_t rng_seed = 0;
};

using Perturbation = std::variant<BoundaryErosionDilation, RandomFlip>;

/// Perturbs S0, S1 and S2 (within the brain); tissue and cavity are left alone.
inline CaseData perturb_case(CaseData c, const Perturbation& noise) {
  const Mask& brain = c.tissue.labels();
  Mask in_brain(brain.geometry(), 0);
  for (std::size_t i = 0; i < brain.size(); ++i) in_brain[i] = brain[i] != 0;
  std::array<Segmentation*, 3> segs{&c.s0, &c.s1, &c.s2};
  if (const auto* m = std::get_if<BoundaryErosionDilation>(&noise)) {
    for (auto* s : segs) *s = morph_ball(*s, m->radius, in_brain);
    c.history.push_back("BoundaryErosionDilation(r=" + format_double(m->radius) + ")");
  } else {
    const auto& f = std::get<RandomFlip>(noise);
    require(f.p >= 0.0 && f.p <= 1.0, errc::invalid_argument, "flip probability must lie in [0,1]");
    for (std::size_t k = 0; k < segs.size(); ++k) {
      detail::UniformStream rng(f.rng_seed ^ (0x9E3779B97F4A7C15ULL * (k + 1)));
      auto& s = *segs[k];
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!in_brain[i]) continue;
        if (rng.next() < f.p) s[i] = s[i] ? 0 : 1;
      }
    }
    c.history.push_back("RandomFlip(p=" + format_double(f.p) + ",seed=" + std::to_string(f.rng_seed) + ")");
  }
  return c;
}

// ---- shape measures

/// Ratio of smallest to largest eigenvalue of the voxel-position covariance over the active axes;
/// 1 for a ball (disc in 2D), smaller for elongated shapes.
inline double sphericity(const Mask& m) {
  const auto& g = m.geometry();
  double n = 0.0;
  std::array<double, 3> mean{};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const auto p = g.coords(i);
    n += 1.0;
    for (int a = 0; a < 3; ++a) mean[a] += static_cast<double>(p[a]);
  }
  require(n > 0.0, errc::invalid_argument, "sphericity of an empty mask");
  for (auto& v : mean) v /= n;
  Tensor3d cov{0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const auto p = g.coords(i);
    const std::array<double, 3> d{p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]};
    cov = cov + Tensor3d::outer(d);
  }
  std::array<double, 3> ev = cov.eigenvalues();
  // inactive axes contribute an exact zero eigenvalue; drop them
  const int inactive = 3 - g.active_axes();
  const double lo = ev[inactive];
  const double hi = ev[2];
  return hi > 0.0 ? lo / hi : 1.0;
}

/// Largest over smallest bounding-box extent across the active axes.
inline double bounding_box_aspect(const Mask& m) {
  const auto& g = m.geometry();
  std::array<std::int64_t, 3> lo{INT64_MAX, INT64_MAX, INT64_MAX}, hi{INT64_MIN, INT64_MIN, INT64_MIN};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const auto p = g.coords(i);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  require(lo[0] != INT64_MAX, errc::invalid_argument, "aspect of an empty mask");
  double emin = 1e300, emax = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (g.dims.extent(a) == 1) continue;
    const auto e = static_cast<double>(hi[a] - lo[a] + 1);
    emin = std::min(emin, e);
    emax = std::max(emax, e);
  }
  return emax / emin;
}

}  // namespace gliorank
