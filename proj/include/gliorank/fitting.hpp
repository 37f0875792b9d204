#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gliorank/core_fields.hpp"
#include "gliorank/eikonal.hpp"
#include "gliorank/powell.hpp"
#include "gliorank/ranking_eval.hpp"

namespace gliorank {

/// Axis-aligned box in voxel coordinates (inclusive).
struct SearchBox {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

struct FitConfig {
  std::size_t n_restarts = 8;
  std::uint64_t rng_seed = 0;
  std::size_t max_iters = 50;
  double xtol = 1e-3;
  double ftol = 1e-6;
  double initial_step = 2.0;  // voxels
  double margin_voxels = 10.0;
  std::optional<SearchBox> search_bounds;
};

struct RestartRecord {
  std::array<double, 3> start{};
  std::array<double, 3> end{};
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Objective after each Powell cycle.
  std::vector<double> trace;
};

struct FitResult {
  std::array<double, 3> x_s_best{};
  double objective_best = 0.0;
  std::size_t best_restart = 0;
  std::vector<RestartRecord> per_restart;
};

inline constexpr double seed_objective_barrier = 2.0;

/// 1 - AP of the eikonal ranking from point source `x_s` against S0 over the brain.
/// Positions whose nearest voxel is outside the brain score the barrier value 2.
inline double seed_objective(const std::array<double, 3>& x_s, const Segmentation& s0, const SpeedMap& speed,
                             const VoxelGrid& grid) {
  for (double c : x_s)
    if (!std::isfinite(c)) return seed_objective_barrier;
  const auto sources = sources_from_point(x_s, speed, grid);
  if (sources.empty()) return seed_objective_barrier;
  FastMarchOptions opts;
  opts.stop_after_covering = &s0;
  const auto t = fast_march(speed, grid, sources, opts);
  return 1.0 - average_precision(t, s0, grid.brain_mask());
}

/// Bounding box of the mask dilated by `margin`, clipped to the grid.
inline SearchBox default_search_bounds(const Segmentation& s0, double margin) {
  const auto& g = s0.geometry();
  SearchBox box;
  box.lo = {1e300, 1e300, 1e300};
  box.hi = {-1e300, -1e300, -1e300};
  bool any = false;
  for (std::size_t i = 0; i < s0.size(); ++i) {
    if (!s0[i]) continue;
    any = true;
    const auto p = g.coords(i);
    for (int a = 0; a < 3; ++a) {
      box.lo[a] = std::min(box.lo[a], static_cast<double>(p[a]));
      box.hi[a] = std::max(box.hi[a], static_cast<double>(p[a]));
    }
  }
  require(any, errc::invalid_argument, "segmentation S0 is empty");
  for (int a = 0; a < 3; ++a) {
    const double extent = static_cast<double>(g.dims.extent(a) - 1);
    box.lo[a] = std::clamp(box.lo[a] - margin, 0.0, extent);
    box.hi[a] = std::clamp(box.hi[a] + margin, 0.0, extent);
  }
  return box;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform [0,1) stream with a fixed, platform-independent definition.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : state_(seed) {}
  double next() { return static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace detail

/// Multi-start Powell fit of the onset location. Restart i draws its start from its own stream
/// derived from (rng_seed, i); the best objective wins, ties going to the lowest index.
inline FitResult fit_seed(const Segmentation& s0_in, const SpeedMap& speed, const VoxelGrid& grid,
                          const FitConfig& config) {
  require(config.n_restarts >= 1, errc::invalid_argument, "n_restarts must be >= 1");
  require(config.max_iters >= 1, errc::invalid_argument, "max_iters must be >= 1");
  require(config.xtol > 0.0 && config.ftol > 0.0, errc::invalid_argument, "tolerances must be > 0");
  const Segmentation s0 = sanitize(s0_in, grid).inside;
  require(count(s0) > 0, errc::empty_region, "S0 has no voxels inside the brain");
  const SearchBox box = config.search_bounds.value_or(default_search_bounds(s0, config.margin_voxels));

  const auto& g = grid.geometry();
  std::vector<int> axes;
  for (int a = 0; a < 3; ++a)
    if (g.dims.extent(a) > 1) axes.push_back(a);
  if (axes.empty()) axes.push_back(0);

  auto to_point = [&](const std::vector<double>& v) {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < axes.size(); ++k) x[axes[k]] = v[k];
    return x;
  };
  auto objective = [&](const std::vector<double>& v) { return seed_objective(to_point(v), s0, speed, grid); };

  PowellOptions popts;
  popts.max_iters = config.max_iters;
  popts.xtol = config.xtol;
  popts.ftol = config.ftol;
  popts.initial_step = config.initial_step;

  FitResult result;
  for (std::size_t r = 0; r < config.n_restarts; ++r) {
    detail::UniformStream rng(config.rng_seed ^ (0xA24BAED4963EE407ULL * (r + 1)));
    std::vector<double> start(axes.size());
    bool found = false;
    for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
      for (std::size_t k = 0; k < axes.size(); ++k) {
        const int a = axes[k];
        start[k] = box.lo[a] + rng.next() * (box.hi[a] - box.lo[a]);
      }
      found = grid.in_brain(nearest_voxel(to_point(start)));
    }
    require(found, errc::no_start_found, "no in-brain start point found after 1000 samples");

    const auto pr = powell_minimize(objective, start, popts);
    RestartRecord rec;
    rec.start = to_point(start);
    rec.end = to_point(pr.x);
    rec.objective = pr.f;
    rec.iterations = pr.iterations;
    rec.converged = pr.converged;
    rec.trace = pr.trace;
    if (r == 0 || rec.objective < result.objective_best) {
      result.objective_best = rec.objective;
      result.x_s_best = rec.end;
      result.best_restart = r;
    }
    result.per_restart.push_back(std::move(rec));
  }
  return result;
}

}  // namespace gliorank
