#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gliorank/core_fields.hpp"

namespace gliorank {

struct ModelParams {
  double rho = 0.01;
  double tau = 0.0;
  double kappa_w = 0.1;
  double kappa_g = 0.01;
  double c_v = 0.5;

  bool operator==(const ModelParams&) const = default;
};

inline void validate(const ModelParams& p) {
  require(std::isfinite(p.rho) && p.rho > 0.0, errc::invalid_argument, "rho must be > 0");
  require(std::isfinite(p.tau) && p.tau >= 0.0, errc::invalid_argument, "tau must be >= 0");
  require(std::isfinite(p.kappa_w) && p.kappa_w > 0.0, errc::invalid_argument, "kappa_w must be > 0");
  require(std::isfinite(p.kappa_g) && p.kappa_g > 0.0, errc::invalid_argument, "kappa_g must be > 0");
  require(p.c_v > 0.0 && p.c_v < 1.0, errc::invalid_argument, "c_v must lie in (0,1)");
}

enum class TimeScheme { Explicit, SemiImplicit };

struct SimulationSettings {
  double dt = 0.5;
  double t_max = 1000.0;
  TimeScheme scheme = TimeScheme::Explicit;
  /// Steps between stored density snapshots; 0 disables snapshots.
  std::size_t record_interval = 0;
  bool interpolate_crossing = true;
  /// Stop as soon as every in-brain voxel of this mask has been invaded.
  std::optional<Mask> stop_when_covered;
  double overshoot_tolerance = 1e-12;
  double cg_tolerance = 1e-12;
};

inline void validate(const SimulationSettings& s) {
  require(std::isfinite(s.dt) && s.dt > 0.0, errc::invalid_argument, "dt must be > 0");
  require(std::isfinite(s.t_max) && s.t_max > 0.0, errc::invalid_argument, "t_max must be > 0");
}

struct GaussianSeed {
  std::array<double, 3> center{};  // voxel coordinates
  double sigma_mm = 1.0;
};

struct SegmentationSeed {
  Segmentation mask;
};

using SeedInit = std::variant<GaussianSeed, SegmentationSeed>;
using CellDensityField = ScalarField;

/// Voxel nearest to a continuous voxel-space position.
inline Index3 nearest_voxel(const std::array<double, 3>& x) {
  return {static_cast<std::int64_t>(std::llround(x[0])), static_cast<std::int64_t>(std::llround(x[1])),
          static_cast<std::int64_t>(std::llround(x[2]))};
}

/// D(x) = kappa(x) I + tau F(x) T(x) in the brain, zero outside.
inline DiffusionField assemble_diffusion(const TissueModel& tissue, const ModelParams& params) {
  DiffusionField d(tissue.geometry());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto label = tissue.label(i);
    if (label == TissueLabel::Outside) continue;
    const double kappa = label == TissueLabel::WhiteMatter ? params.kappa_w : params.kappa_g;
    d[i] = kappa * Tensor3d::identity() + (params.tau * tissue.fa()[i]) * tissue.tensor()[i].cast<double>();
  }
  return d;
}

inline double max_eigenvalue(const DiffusionField& d, const VoxelGrid& grid) {
  double lmax = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (grid.in_brain(i)) lmax = std::max(lmax, d[i].eigenvalues()[2]);
  return lmax;
}

/// Forward-Euler stability bound h^2 / (2 d lambda_max).
inline double explicit_dt_limit(const DiffusionField& d, const VoxelGrid& grid) {
  const double lmax = max_eigenvalue(d, grid);
  const int axes = std::max(1, grid.geometry().active_axes());
  if (lmax <= 0.0) return std::numeric_limits<double>::infinity();
  return grid.spacing() * grid.spacing() / (2.0 * axes * lmax);
}

inline CellDensityField initialize_density(const SeedInit& seed, const VoxelGrid& grid, const ModelParams& params) {
  CellDensityField c(grid.geometry(), 0.0);
  if (const auto* g = std::get_if<GaussianSeed>(&seed)) {
    require(g->sigma_mm > 0.0, errc::invalid_argument, "sigma must be > 0");
    require(grid.in_brain(nearest_voxel(g->center)), errc::seed_outside_brain, "seed outside brain");
    const double h = grid.spacing();
    const double two_s2 = 2.0 * g->sigma_mm * g->sigma_mm;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!grid.in_brain(i)) continue;
      const auto p = grid.geometry().coords(i);
      double r2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double dx = (static_cast<double>(p[a]) - g->center[a]) * h;
        r2 += dx * dx;
      }
      c[i] = std::exp(-r2 / two_s2);
    }
  } else {
    const auto& seg = std::get<SegmentationSeed>(seed).mask;
    require_same_grid(seg, grid.brain_mask(), "seed segmentation and grid");
    bool any = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (seg[i] && grid.in_brain(i)) {
        c[i] = params.c_v;
        any = true;
      }
    }
    require(any, errc::invalid_argument, "segmentation seed is empty");
  }
  return c;
}

/// Cell-centred finite-difference form of div(D grad c) with zero flux across the mask boundary.
///
/// Each interior face carries the average of its two voxel tensors. The normal derivative is the
/// two-point difference across the face. Tangential derivatives are slope-limited: each adjacent
/// voxel takes a monotonized-central difference of its one-sided differences, and the face takes the
/// same limiter of the two. In smooth monotone data this is the mean of the central differences; at
/// a local extremum it is zero, so cross terms cannot push a minimum below itself. Out-of-mask
/// neighbours are mirrored onto the centre.
/// Every face flux is added to one voxel and subtracted from the other, so the discrete operator
/// conserves the in-mask sum exactly up to rounding.
class DiffusionStencil {
 public:
  DiffusionStencil(const VoxelGrid& grid, const DiffusionField& d) : size_(grid.size()), h_(grid.spacing()) {
    require_same_grid(d, grid.brain_mask(), "diffusion field and grid");
    const auto& g = grid.geometry();
    const std::size_t n = grid.size();
    for (int a = 0; a < 3; ++a) {
      if (g.dims.extent(a) > 1) axes_.push_back(a);
    }
    neighbours_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = g.coords(i);
      for (int k = 0; k < 6; ++k) {
        const auto& o = detail::face_offsets[k];
        const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
        neighbours_[i][k] = (grid.in_brain(i) && grid.in_brain(q)) ? g.index(q) : i;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!grid.in_brain(i)) continue;
      for (int a : axes_) {
        const std::size_t j = neighbours_[i][2 * a + 1];
        if (j == i) continue;
        Face f;
        f.lo = i;
        f.hi = j;
        f.axis = a;
        const Tensor3d avg = 0.5 * (d[i] + d[j]);
        f.normal = avg(a, a);
        int m = 0;
        for (int b : axes_) {
          if (b == a) continue;
          f.cross_axis[m] = b;
          f.cross[m] = avg(a, b);
          ++m;
        }
        f.n_cross = m;
        faces_.push_back(f);
      }
    }
    in_mask_.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      if (grid.in_brain(i)) in_mask_.push_back(i);
  }

  const std::vector<std::size_t>& in_mask() const noexcept { return in_mask_; }

  /// out = L c, restricted to the normal (axis-aligned) and/or cross-derivative terms.
  void apply(std::span<const double> c, std::span<double> out, bool normal_terms = true,
             bool cross_terms = true) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double inv_h = 1.0 / h_;
    for (const auto& f : faces_) {
      double flux = 0.0;
      if (normal_terms) flux += f.normal * (c[f.hi] - c[f.lo]) * inv_h;
      if (cross_terms) {
        for (int m = 0; m < f.n_cross; ++m) {
          if (f.cross[m] == 0.0) continue;
          const int b = f.cross_axis[m];
          const double glo = transverse_gradient(c, f.lo, b);
          const double ghi = transverse_gradient(c, f.hi, b);
          flux += f.cross[m] * mc_limit(glo, ghi) * inv_h;
        }
      }
      out[f.lo] += flux * inv_h;
      out[f.hi] -= flux * inv_h;
    }
  }

  /// Diagonal of -L restricted to the normal terms (Jacobi preconditioner).
  std::vector<double> normal_diagonal() const {
    std::vector<double> diag(size_, 0.0);
    const double inv_h2 = 1.0 / (h_ * h_);
    for (const auto& f : faces_) {
      diag[f.lo] += f.normal * inv_h2;
      diag[f.hi] += f.normal * inv_h2;
    }
    return diag;
  }

  bool has_cross_terms() const {
    return std::any_of(faces_.begin(), faces_.end(), [](const Face& f) {
      for (int m = 0; m < f.n_cross; ++m)
        if (f.cross[m] != 0.0) return true;
      return false;
    });
  }

 private:
  /// Monotonized-central limiter: the mean of x and y in smooth monotone data, zero at extrema.
  static double mc_limit(double x, double y) {
    if (x * y <= 0.0) return 0.0;
    const double m = std::min({2.0 * std::abs(x), 2.0 * std::abs(y), 0.5 * std::abs(x + y)});
    return x > 0.0 ? m : -m;
  }

  /// Limited one-voxel difference along axis b (per unit spacing).
  double transverse_gradient(std::span<const double> c, std::size_t i, int b) const {
    return mc_limit(c[neighbours_[i][2 * b + 1]] - c[i], c[i] - c[neighbours_[i][2 * b]]);
  }

  struct Face {
    std::size_t lo = 0, hi = 0;
    int axis = 0;
    double normal = 0.0;
    std::array<double, 2> cross{};
    std::array<int, 2> cross_axis{};
    int n_cross = 0;
  };

  std::size_t size_;
  double h_;
  std::vector<int> axes_;
  std::vector<std::array<std::size_t, 6>> neighbours_;
  std::vector<Face> faces_;
  std::vector<std::size_t> in_mask_;
};

namespace detail {

/// Solves (I - dt L_normal) x = rhs on the mask by Jacobi-preconditioned conjugate gradients.
inline void solve_implicit_diffusion(const DiffusionStencil& op, double dt, std::span<const double> rhs,
                                     std::span<double> x, double tol) {
  const auto& idx = op.in_mask();
  const std::size_t n = x.size();
  const auto diag_l = op.normal_diagonal();
  std::vector<double> r(n, 0.0), z(n, 0.0), p(n, 0.0), ap(n, 0.0), lx(n, 0.0);
  auto apply_a = [&](std::span<const double> v, std::span<double> out) {
    op.apply(v, lx, true, false);
    for (auto i : idx) out[i] = v[i] - dt * lx[i];
  };
  apply_a(x, ap);
  double rhs_norm2 = 0.0;
  for (auto i : idx) {
    r[i] = rhs[i] - ap[i];
    rhs_norm2 += rhs[i] * rhs[i];
  }
  const double stop2 = tol * tol * std::max(rhs_norm2, 1e-300);
  double rz = 0.0, rr = 0.0;
  for (auto i : idx) {
    z[i] = r[i] / (1.0 + dt * diag_l[i]);
    p[i] = z[i];
    rz += r[i] * z[i];
    rr += r[i] * r[i];
  }
  for (std::size_t it = 0; it < 10 * idx.size() + 100 && rr > stop2; ++it) {
    apply_a(p, ap);
    double pap = 0.0;
    for (auto i : idx) pap += p[i] * ap[i];
    if (pap <= 0.0) break;
    const double alpha = rz / pap;
    double rz_new = 0.0;
    rr = 0.0;
    for (auto i : idx) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      z[i] = r[i] / (1.0 + dt * diag_l[i]);
      rz_new += r[i] * z[i];
      rr += r[i] * r[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (auto i : idx) p[i] = z[i] + beta * p[i];
  }
}

inline void enforce_bounds(CellDensityField& c, const DiffusionStencil& op, double tolerance) {
  for (auto i : op.in_mask()) {
    double& v = c[i];
    if (std::isnan(v)) fail(errc::instability, "density became NaN");
    if (v < 0.0) {
      if (v < -tolerance) fail(errc::instability, "density undershoot " + std::to_string(v));
      v = 0.0;
    } else if (v > 1.0) {
      if (v > 1.0 + tolerance) fail(errc::instability, "density overshoot " + std::to_string(v));
      v = 1.0;
    }
  }
}

inline void check_explicit_dt(const DiffusionField& d, const VoxelGrid& grid, double dt) {
  const double limit = explicit_dt_limit(d, grid);
  require(dt <= limit * (1.0 + 1e-12), errc::unstable_time_step,
          "dt " + std::to_string(dt) + " exceeds explicit stability limit " + std::to_string(limit));
}

}  // namespace detail

/// One step of dc/dt = div(D grad c) + rho c (1 - c) using a prebuilt stencil.
inline CellDensityField step_density(const CellDensityField& c, const DiffusionStencil& op, const ModelParams& params,
                                     double dt, TimeScheme scheme = TimeScheme::Explicit,
                                     double overshoot_tolerance = 1e-12, double cg_tolerance = 1e-12) {
  const std::size_t n = c.size();
  CellDensityField next(c.geometry(), 0.0);
  std::vector<double> lc(n, 0.0);
  if (scheme == TimeScheme::Explicit) {
    op.apply(c.values(), lc);
    for (auto i : op.in_mask()) next[i] = c[i] + dt * (lc[i] + params.rho * c[i] * (1.0 - c[i]));
  } else {
    std::vector<double> rhs(n, 0.0);
    if (op.has_cross_terms()) op.apply(c.values(), lc, false, true);
    for (auto i : op.in_mask()) {
      rhs[i] = c[i] + dt * (lc[i] + params.rho * c[i] * (1.0 - c[i]));
      next[i] = rhs[i];
    }
    detail::solve_implicit_diffusion(op, dt, rhs, next.values(), cg_tolerance);
  }
  detail::enforce_bounds(next, op, overshoot_tolerance);
  return next;
}

inline CellDensityField step_density(const CellDensityField& c, const DiffusionField& d, const VoxelGrid& grid,
                                     const ModelParams& params, double dt,
                                     TimeScheme scheme = TimeScheme::Explicit) {
  require_same_grid(c, grid.brain_mask(), "density and grid");
  require(std::isfinite(dt) && dt > 0.0, errc::invalid_argument, "dt must be > 0");
  if (scheme == TimeScheme::Explicit) detail::check_explicit_dt(d, grid, dt);
  const DiffusionStencil op(grid, d);
  return step_density(c, op, params, dt, scheme);
}

/// Sum over the mask in index order.
inline double total_density(const CellDensityField& c, const VoxelGrid& grid) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (grid.in_brain(i)) s += c[i];
  return s;
}

struct DensitySnapshot {
  double time = 0.0;
  CellDensityField density;
};

struct SimulationResult {
  InvasionMap invasion;
  std::vector<DensitySnapshot> snapshots;
  CellDensityField final_density;
  double final_time = 0.0;
  std::size_t steps = 0;
};

/// Runs the model from `seed` and records the first time each voxel exceeds c_v.
/// Voxels that start at or above c_v are assigned time 0.
inline SimulationResult simulate(const SeedInit& seed, const VoxelGrid& grid, const DiffusionField& d,
                                 const ModelParams& params, const SimulationSettings& settings) {
  validate(params);
  validate(settings);
  require_same_grid(d, grid.brain_mask(), "diffusion field and grid");
  if (settings.scheme == TimeScheme::Explicit) detail::check_explicit_dt(d, grid, settings.dt);

  const DiffusionStencil op(grid, d);
  CellDensityField c = initialize_density(seed, grid, params);
  InvasionMap t_inv(grid.geometry(), never_invaded);

  std::vector<std::size_t> pending_targets;
  if (settings.stop_when_covered) {
    require_same_grid(*settings.stop_when_covered, grid.brain_mask(), "stop mask and grid");
    for (auto i : op.in_mask())
      if ((*settings.stop_when_covered)[i]) pending_targets.push_back(i);
  }
  auto targets_covered = [&] {
    std::erase_if(pending_targets, [&](std::size_t i) { return t_inv.invaded(i); });
    return pending_targets.empty();
  };

  for (auto i : op.in_mask())
    if (c[i] >= params.c_v) t_inv[i] = 0.0;

  SimulationResult result;
  const auto n_steps = static_cast<std::size_t>(std::ceil(settings.t_max / settings.dt - 1e-9));
  std::size_t step = 0;
  bool covered = settings.stop_when_covered && targets_covered();
  while (step < n_steps && !covered) {
    CellDensityField next = step_density(c, op, params, settings.dt, settings.scheme, settings.overshoot_tolerance,
                                         settings.cg_tolerance);
    ++step;
    const double t_new = static_cast<double>(step) * settings.dt;
    const double t_old = static_cast<double>(step - 1) * settings.dt;
    for (auto i : op.in_mask()) {
      if (t_inv.invaded(i) || !(next[i] > params.c_v)) continue;
      if (settings.interpolate_crossing && next[i] > c[i]) {
        const double frac = std::clamp((params.c_v - c[i]) / (next[i] - c[i]), 0.0, 1.0);
        t_inv[i] = t_old + frac * (t_new - t_old);
      } else {
        t_inv[i] = t_new;
      }
    }
    c = std::move(next);
    if (settings.record_interval > 0 && step % settings.record_interval == 0)
      result.snapshots.push_back({t_new, c});
    if (settings.stop_when_covered) covered = targets_covered();
  }
  result.invasion = std::move(t_inv);
  result.final_density = std::move(c);
  result.final_time = static_cast<double>(step) * settings.dt;
  result.steps = step;
  return result;
}

inline SimulationResult simulate(const SeedInit& seed, const TissueModel& tissue, const ModelParams& params,
                                 const SimulationSettings& settings) {
  validate(params);
  return simulate(seed, tissue.grid(), assemble_diffusion(tissue, params), params, settings);
}

}  // namespace gliorank
