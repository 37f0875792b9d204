#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "gliorank/core_fields.hpp"
#include "gliorank/growth_model.hpp"

namespace gliorank {

/// Front speed in mm per model-time unit; zero outside the brain.
using SpeedMap = ScalarField;

/// v(x) = 4 sqrt(rho trace(D(x))).
inline SpeedMap speed_from_params(const TissueModel& tissue, const ModelParams& params) {
  validate(params);
  const auto d = assemble_diffusion(tissue, params);
  SpeedMap v(tissue.geometry(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (tissue.grid().in_brain(i)) v[i] = 4.0 * std::sqrt(params.rho * d[i].trace());
  return v;
}

struct EikonalSource {
  std::size_t voxel = 0;
  double time = 0.0;
};

/// Voxels whose Gaussian initial density reaches c_v, all starting at time 0.
inline std::vector<EikonalSource> sources_from_gaussian(const GaussianSeed& seed, const VoxelGrid& grid, double c_v) {
  require(grid.in_brain(nearest_voxel(seed.center)), errc::seed_outside_brain, "seed outside brain");
  const double r2_max = 2.0 * seed.sigma_mm * seed.sigma_mm * std::log(1.0 / c_v);
  const double h = grid.spacing();
  std::vector<EikonalSource> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.in_brain(i)) continue;
    const auto p = grid.geometry().coords(i);
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double dx = (static_cast<double>(p[a]) - seed.center[a]) * h;
      r2 += dx * dx;
    }
    if (r2 <= r2_max) out.push_back({i, 0.0});
  }
  return out;
}

inline std::vector<EikonalSource> sources_from_mask(const Segmentation& mask, const VoxelGrid& grid) {
  require_same_grid(mask, grid.brain_mask(), "source mask and grid");
  std::vector<EikonalSource> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && grid.in_brain(i)) out.push_back({i, 0.0});
  return out;
}

/// Radius (voxels) of the ball around a point source that is initialised with straight-line travel
/// times. Near a point source first-order marching accumulates most of its error; seeding a small
/// ball keeps the arrival error under one voxel out to a radius of 20.
inline constexpr double point_source_radius = 5.0;

namespace detail {

/// Travel time along the segment x -> voxel p, integrating 1/v with the midpoint rule on the
/// nearest-voxel speed. NaN when the segment leaves the brain or crosses zero speed.
inline double straight_travel_time(const std::array<double, 3>& x, const Index3& p, const SpeedMap& speed,
                                   const VoxelGrid& grid) {
  const auto& g = grid.geometry();
  std::array<double, 3> d{};
  double len2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    d[a] = static_cast<double>(p[a]) - x[a];
    len2 += d[a] * d[a];
  }
  const double len = std::sqrt(len2) * g.spacing_mm;
  if (len == 0.0) return 0.0;
  const int k = static_cast<int>(std::ceil(4.0 * std::sqrt(len2))) + 1;
  double slowness = 0.0;
  for (int s = 0; s < k; ++s) {
    const double f = (s + 0.5) / k;
    const Index3 q = nearest_voxel({x[0] + f * d[0], x[1] + f * d[1], x[2] + f * d[2]});
    if (!grid.in_brain(q)) return std::nan("");
    const double v = speed[g.index(q)];
    if (!(v > 0.0)) return std::nan("");
    slowness += 1.0 / v;
  }
  return len * slowness / k;
}

}  // namespace detail

/// Sub-voxel point source: brain voxels within `radius` voxels of `x` start at their straight-line
/// travel time from `x` (the lattice corners around `x` are always included when reachable).
/// Empty when the voxel nearest to `x` is outside the brain.
inline std::vector<EikonalSource> sources_from_point(const std::array<double, 3>& x, const SpeedMap& speed,
                                                     const VoxelGrid& grid, double radius = point_source_radius) {
  std::vector<EikonalSource> out;
  if (!grid.in_brain(nearest_voxel(x))) return out;
  const auto& g = grid.geometry();
  const double reach = std::max(radius, std::sqrt(3.0));
  std::array<std::int64_t, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    const auto last = static_cast<std::int64_t>(g.dims.extent(a)) - 1;
    lo[a] = std::clamp(static_cast<std::int64_t>(std::floor(x[a] - reach)), std::int64_t{0}, last);
    hi[a] = std::clamp(static_cast<std::int64_t>(std::ceil(x[a] + reach)), std::int64_t{0}, last);
  }
  for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t xi = lo[0]; xi <= hi[0]; ++xi) {
        const Index3 p{xi, y, z};
        if (!grid.in_brain(p) || !(speed[g.index(p)] > 0.0)) continue;
        bool corner = true;
        double r2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double d = static_cast<double>(p[a]) - x[a];
          corner = corner && std::abs(d) < 1.0;
          r2 += d * d;
        }
        if (!corner && std::sqrt(r2) > radius) continue;
        const double t = detail::straight_travel_time(x, p, speed, grid);
        if (std::isnan(t)) continue;
        out.push_back({g.index(p), t});
      }
  return out;
}

struct FastMarchOptions {
  /// When set, marching stops once every reachable voxel of this mask is accepted and the next
  /// candidate is strictly later. Voxels left unaccepted are reported as never invaded.
  const Mask* stop_after_covering = nullptr;
  /// Record the acceptance order (for diagnostics and tests).
  bool record_order = false;
};

struct FastMarchResult {
  InvasionMap arrival;
  std::vector<std::size_t> accept_order;
};

namespace detail {

/// First-order Godunov upwind update for |grad T| = 1/v with sorted neighbour values.
inline double godunov_update(std::array<double, 3> a, int m, double s) {
  std::sort(a.begin(), a.begin() + m);
  double t = a[0] + s;
  if (m >= 2 && t > a[1]) {
    const double sum = a[0] + a[1];
    const double sumsq = a[0] * a[0] + a[1] * a[1];
    t = (sum + std::sqrt(std::max(0.0, sum * sum - 2.0 * (sumsq - s * s)))) / 2.0;
    if (m >= 3 && t > a[2]) {
      const double sum3 = sum + a[2];
      const double sumsq3 = sumsq + a[2] * a[2];
      t = (sum3 + std::sqrt(std::max(0.0, sum3 * sum3 - 3.0 * (sumsq3 - s * s)))) / 3.0;
    }
  }
  return t;
}

}  // namespace detail

/// Fast marching for |grad T| v = 1 on the 6-neighbour grid.
inline FastMarchResult fast_march_detailed(const SpeedMap& speed, const VoxelGrid& grid,
                                           const std::vector<EikonalSource>& sources,
                                           const FastMarchOptions& options = {}) {
  require_same_grid(speed, grid.brain_mask(), "speed map and grid");
  require(!sources.empty(), errc::empty_sources, "no eikonal sources");
  bool any_speed = false;
  for (std::size_t i = 0; i < speed.size(); ++i)
    if (grid.in_brain(i) && speed[i] > 0.0) any_speed = true;
  require(any_speed, errc::zero_speed, "speed is zero everywhere");

  const auto& g = grid.geometry();
  const double h = g.spacing_mm;
  const std::size_t n = grid.size();
  enum : std::uint8_t { Far = 0, Trial = 1, Known = 2 };
  std::vector<std::uint8_t> state(n, Far);
  FastMarchResult result{InvasionMap(g, never_invaded), {}};
  auto& t = result.arrival;

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (const auto& s : sources) {
    require(s.voxel < n && grid.in_brain(s.voxel), errc::invalid_argument, "eikonal source outside brain");
    require(speed[s.voxel] > 0.0, errc::invalid_argument, "eikonal source has zero speed");
    require(s.time >= 0.0, errc::invalid_argument, "negative source time");
    if (s.time < t[s.voxel]) {
      t[s.voxel] = s.time;
      state[s.voxel] = Trial;
      heap.push({s.time, s.voxel});
    }
  }

  std::size_t remaining_targets = 0;
  if (options.stop_after_covering) {
    require_same_grid(*options.stop_after_covering, grid.brain_mask(), "stop mask and grid");
    for (std::size_t i = 0; i < n; ++i)
      if ((*options.stop_after_covering)[i] && grid.in_brain(i)) ++remaining_targets;
  }
  double covered_at = never_invaded;

  const std::int64_t stride[3] = {1, static_cast<std::int64_t>(g.dims.nx),
                                  static_cast<std::int64_t>(g.dims.nx) * g.dims.ny};
  auto neighbour = [&](const Index3& p, std::size_t i, int axis, int dir, std::size_t& out) {
    const std::int64_t c = p[axis] + dir;
    if (c < 0 || c >= static_cast<std::int64_t>(g.dims.extent(axis))) return false;
    out = static_cast<std::size_t>(static_cast<std::int64_t>(i) + dir * stride[axis]);
    return grid.in_brain(out);
  };

  while (!heap.empty()) {
    const auto [ti, i] = heap.top();
    heap.pop();
    if (state[i] == Known || ti > t[i]) continue;
    if (options.stop_after_covering && remaining_targets == 0 && ti > covered_at) break;
    state[i] = Known;
    if (options.record_order) result.accept_order.push_back(i);
    if (options.stop_after_covering && (*options.stop_after_covering)[i] && remaining_targets > 0) {
      if (--remaining_targets == 0) covered_at = ti;
    }

    const auto p = g.coords(i);
    for (int axis = 0; axis < 3; ++axis) {
      for (int dir : {-1, 1}) {
        std::size_t j;
        if (!neighbour(p, i, axis, dir, j) || state[j] == Known || !(speed[j] > 0.0)) continue;
        const auto q = g.coords(j);
        std::array<double, 3> a{};
        int m = 0;
        for (int b = 0; b < 3; ++b) {
          double best = never_invaded;
          for (int e : {-1, 1}) {
            std::size_t k;
            if (neighbour(q, j, b, e, k) && state[k] == Known) best = std::min(best, t[k]);
          }
          if (std::isfinite(best)) a[m++] = best;
        }
        const double cand = detail::godunov_update(a, m, h / speed[j]);
        if (cand < t[j]) {
          t[j] = cand;
          state[j] = Trial;
          heap.push({cand, j});
        }
      }
    }
  }
  if (options.stop_after_covering) {
    for (std::size_t i = 0; i < n; ++i)
      if (state[i] != Known) t[i] = never_invaded;
  }
  return result;
}

inline InvasionMap fast_march(const SpeedMap& speed, const VoxelGrid& grid, const std::vector<EikonalSource>& sources,
                              const FastMarchOptions& options = {}) {
  return fast_march_detailed(speed, grid, sources, options).arrival;
}

inline InvasionMap fast_march(const SpeedMap& speed, const VoxelGrid& grid, const Segmentation& sources) {
  return fast_march(speed, grid, sources_from_mask(sources, grid));
}

inline InvasionMap fast_march(const SpeedMap& speed, const VoxelGrid& grid, const GaussianSeed& seed, double c_v) {
  return fast_march(speed, grid, sources_from_gaussian(seed, grid, c_v));
}

}  // namespace gliorank
