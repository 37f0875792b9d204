#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gliorank/config.hpp"
#include "gliorank/core_fields.hpp"
#include "gliorank/grv_io.hpp"

namespace gliorank {

/// One longitudinal case: tissue plus the baseline (S0), pre-treatment (S1) and follow-up (S2)
/// segmentations and an optional resection cavity (all zero when absent).
struct CaseData {
  std::string id;
  TissueModel tissue;
  Segmentation s0, s1, s2;
  Segmentation cavity;
  /// Human-readable record of perturbations applied to the segmentations.
  std::vector<std::string> history;

  const Geometry& geometry() const { return tissue.geometry(); }
};

inline void validate(const CaseData& c) {
  const auto& brain = c.tissue.labels();
  require_same_grid(c.s0, brain, "S0 and tissue");
  require_same_grid(c.s1, brain, "S1 and tissue");
  require_same_grid(c.s2, brain, "S2 and tissue");
  require_same_grid(c.cavity, brain, "cavity and tissue");
}

/// Voxels within Euclidean distance `radius` (voxels, active axes only) of the mask; negative
/// radius erodes instead. The result is clipped to `within`.
inline Mask morph_ball(const Mask& m, double radius, const Mask& within) {
  require_same_grid(m, within, "mask and clip region");
  if (radius == 0.0) return mask_and(m, within);
  const auto& g = m.geometry();
  const bool dilate = radius > 0.0;
  const double r = std::abs(radius);
  const auto reach = static_cast<std::int64_t>(std::floor(r));
  std::array<std::int64_t, 3> span{};
  for (int a = 0; a < 3; ++a) span[a] = g.dims.extent(a) > 1 ? reach : 0;
  Mask out(g, 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!within[i]) continue;
    // dilation: any set voxel nearby; erosion: every voxel nearby set (outside grid counts as unset)
    bool hit = !dilate;
    const auto p = g.coords(i);
    for (std::int64_t dz = -span[2]; dz <= span[2] && hit != dilate; ++dz)
      for (std::int64_t dy = -span[1]; dy <= span[1] && hit != dilate; ++dy)
        for (std::int64_t dx = -span[0]; dx <= span[0] && hit != dilate; ++dx) {
          if (static_cast<double>(dx * dx + dy * dy + dz * dz) > r * r) continue;
          const Index3 q{p[0] + dx, p[1] + dy, p[2] + dz};
          const bool set = g.contains(q) && m[g.index(q)];
          if (dilate && set) hit = true;
          if (!dilate && !set) hit = false;
        }
    out[i] = hit ? 1 : 0;
  }
  return out;
}

/// Case directory: tissue volumes, s0/s1/s2/cavity.grv and manifest.txt.
inline void write_case(const CaseData& c, const std::filesystem::path& dir, const KeyValueReport& manifest) {
  std::filesystem::create_directories(dir);
  write_tissue(c.tissue, dir);
  write_volume(c.s0, dir / "s0.grv");
  write_volume(c.s1, dir / "s1.grv");
  write_volume(c.s2, dir / "s2.grv");
  write_volume(c.cavity, dir / "cavity.grv");
  manifest.write(dir / "manifest.txt");
}

inline CaseData read_case(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), errc::input_not_found, "input not found: " + dir.string());
  CaseData c;
  c.tissue = read_tissue(dir);
  c.s0 = read_segmentation(dir / "s0.grv");
  c.s1 = read_segmentation(dir / "s1.grv");
  c.s2 = read_segmentation(dir / "s2.grv");
  c.cavity = std::filesystem::exists(dir / "cavity.grv") ? read_segmentation(dir / "cavity.grv")
                                                         : Segmentation(c.tissue.geometry(), 0);
  c.id = dir.filename().string();
  if (c.id.empty()) c.id = dir.parent_path().filename().string();
  if (std::filesystem::exists(dir / "manifest.txt")) {
    const auto m = KeyValueReport::read(dir / "manifest.txt");
    if (auto id = m.find("case_id")) c.id = *id;
  }
  validate(c);
  return c;
}

}  // namespace gliorank
