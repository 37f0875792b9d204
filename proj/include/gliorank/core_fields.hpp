#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gliorank/error.hpp"

namespace gliorank {

struct Dims {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::uint32_t nz = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  std::uint32_t extent(int axis) const noexcept { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  bool operator==(const Dims&) const = default;
};

using Index3 = std::array<std::int64_t, 3>;

/// Grid geometry: dimensions and isotropic spacing. Linear order is x-fastest.
struct Geometry {
  Dims dims;
  double spacing_mm = 1.0;

  bool operator==(const Geometry&) const = default;

  std::size_t size() const noexcept { return dims.count(); }

  bool valid() const noexcept {
    return dims.count() > 0 && std::isfinite(spacing_mm) && spacing_mm > 0.0;
  }

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return static_cast<std::size_t>(x + static_cast<std::int64_t>(dims.nx) *
                                            (y + static_cast<std::int64_t>(dims.ny) * z));
  }
  std::size_t index(const Index3& p) const noexcept { return index(p[0], p[1], p[2]); }

  Index3 coords(std::size_t i) const noexcept {
    const auto nx = static_cast<std::size_t>(dims.nx);
    const auto ny = static_cast<std::size_t>(dims.ny);
    return {static_cast<std::int64_t>(i % nx), static_cast<std::int64_t>((i / nx) % ny),
            static_cast<std::int64_t>(i / (nx * ny))};
  }

  bool contains(const Index3& p) const noexcept {
    return p[0] >= 0 && p[1] >= 0 && p[2] >= 0 && p[0] < dims.nx && p[1] < dims.ny &&
           p[2] < dims.nz;
  }

  /// Axes with more than one voxel; stencils only act along these.
  int active_axes() const noexcept {
    return (dims.nx > 1 ? 1 : 0) + (dims.ny > 1 ? 1 : 0) + (dims.nz > 1 ? 1 : 0);
  }
};

inline void validate(const Geometry& g) {
  require(g.dims.count() > 0, errc::invalid_dims, "invalid dims");
  require(std::isfinite(g.spacing_mm) && g.spacing_mm > 0.0, errc::invalid_dims,
          "invalid spacing");
}

template <class T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Geometry geometry, T fill = T{})
      : geometry_(geometry), values_((validate(geometry), geometry.size()), fill) {}
  Volume(Geometry geometry, std::vector<T> values) : geometry_(geometry), values_(std::move(values)) {
    validate(geometry);
    require(values_.size() == geometry_.size(), errc::invalid_argument,
            "value count does not match dims");
  }

  const Geometry& geometry() const noexcept { return geometry_; }
  const Dims& dims() const noexcept { return geometry_.dims; }
  double spacing() const noexcept { return geometry_.spacing_mm; }
  std::size_t size() const noexcept { return values_.size(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::int64_t x, std::int64_t y, std::int64_t z) { return values_[geometry_.index(x, y, z)]; }
  const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return values_[geometry_.index(x, y, z)];
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  const std::vector<T>& data() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool operator==(const Volume&) const = default;

 private:
  Geometry geometry_;
  std::vector<T> values_;
};

using Mask = Volume<std::uint8_t>;
using Segmentation = Mask;
using ScalarField = Volume<double>;

template <class A, class B>
void require_same_grid(const Volume<A>& a, const Volume<B>& b, const char* what = "fields") {
  require(a.geometry() == b.geometry(), errc::grid_mismatch,
          std::string("grid mismatch between ") + what);
}

inline std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  require_same_grid(a, b, "masks");
  Mask out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

inline Mask mask_or(const Mask& a, const Mask& b) {
  require_same_grid(a, b, "masks");
  Mask out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

/// a \ b
inline Mask mask_minus(const Mask& a, const Mask& b) {
  require_same_grid(a, b, "masks");
  Mask out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && !b[i]) ? 1 : 0;
  return out;
}

inline bool is_subset(const Mask& a, const Mask& b) {
  require_same_grid(a, b, "masks");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

/// Symmetric 3x3 tensor stored as its upper triangle (xx, xy, xz, yy, yz, zz).
template <class T>
struct SymTensor3 {
  T xx{}, xy{}, xz{}, yy{}, yz{}, zz{};

  bool operator==(const SymTensor3&) const = default;

  static SymTensor3 identity() { return {T(1), T(0), T(0), T(1), T(0), T(1)}; }
  static SymTensor3 diagonal(T a, T b, T c) { return {a, T(0), T(0), b, T(0), c}; }
  /// u u^T
  static SymTensor3 outer(const std::array<T, 3>& u) {
    return {u[0] * u[0], u[0] * u[1], u[0] * u[2], u[1] * u[1], u[1] * u[2], u[2] * u[2]};
  }

  T trace() const { return xx + yy + zz; }

  T operator()(int r, int c) const {
    if (r > c) std::swap(r, c);
    if (r == 0) return c == 0 ? xx : (c == 1 ? xy : xz);
    if (r == 1) return c == 1 ? yy : yz;
    return zz;
  }

  template <class U>
  SymTensor3<U> cast() const {
    return {static_cast<U>(xx), static_cast<U>(xy), static_cast<U>(xz),
            static_cast<U>(yy), static_cast<U>(yz), static_cast<U>(zz)};
  }

  friend SymTensor3 operator+(const SymTensor3& a, const SymTensor3& b) {
    return {a.xx + b.xx, a.xy + b.xy, a.xz + b.xz, a.yy + b.yy, a.yz + b.yz, a.zz + b.zz};
  }
  friend SymTensor3 operator*(T s, const SymTensor3& a) {
    return {s * a.xx, s * a.xy, s * a.xz, s * a.yy, s * a.yz, s * a.zz};
  }

  bool finite() const {
    return std::isfinite(xx) && std::isfinite(xy) && std::isfinite(xz) && std::isfinite(yy) &&
           std::isfinite(yz) && std::isfinite(zz);
  }

  /// Eigenvalues in ascending order (closed-form trigonometric solution).
  std::array<double, 3> eigenvalues() const {
    const double a = xx, b = yy, c = zz, d = xy, e = yz, f = xz;
    const double p1 = d * d + e * e + f * f;
    if (p1 == 0.0) {
      std::array<double, 3> ev{a, b, c};
      std::sort(ev.begin(), ev.end());
      return ev;
    }
    const double q = (a + b + c) / 3.0;
    const double p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const double b11 = (a - q) / p, b22 = (b - q) / p, b33 = (c - q) / p;
    const double b12 = d / p, b23 = e / p, b13 = f / p;
    const double det = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) +
                       b13 * (b12 * b23 - b22 * b13);
    const double r = std::clamp(det / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double hi = q + 2.0 * p * std::cos(phi);
    const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    const double mid = 3.0 * q - hi - lo;
    return {lo, mid, hi};
  }
};

using Tensor6f = SymTensor3<float>;
using Tensor3d = SymTensor3<double>;
using TensorField = Volume<Tensor6f>;
using DiffusionField = Volume<Tensor3d>;

/// Brain geometry: grid plus the mask of in-brain voxels.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(Mask brain_mask) : mask_(std::move(brain_mask)) {
    validate(mask_.geometry());
    for (auto& v : mask_) v = v ? 1 : 0;
  }

  const Geometry& geometry() const noexcept { return mask_.geometry(); }
  const Dims& dims() const noexcept { return mask_.dims(); }
  double spacing() const noexcept { return mask_.spacing(); }
  std::size_t size() const noexcept { return mask_.size(); }
  const Mask& brain_mask() const noexcept { return mask_; }
  bool in_brain(std::size_t i) const { return mask_[i] != 0; }
  bool in_brain(const Index3& p) const { return geometry().contains(p) && mask_[geometry().index(p)] != 0; }

 private:
  Mask mask_;
};

namespace detail {
inline constexpr std::array<Index3, 6> face_offsets{
    {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
}

/// In-mask voxels with at least one 6-neighbour outside the mask (grid edges count as outside).
inline std::vector<std::size_t> boundary_voxels(const VoxelGrid& grid) {
  const auto& g = grid.geometry();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.in_brain(i)) continue;
    const auto p = g.coords(i);
    for (const auto& o : detail::face_offsets) {
      if (!grid.in_brain(Index3{p[0] + o[0], p[1] + o[1], p[2] + o[2]})) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

enum class TissueLabel : std::uint8_t { Outside = 0, WhiteMatter = 1, GreyMatter = 2 };

/// Per-voxel tissue labels, fractional anisotropy and unit-trace diffusion tensors.
class TissueModel {
 public:
  static constexpr double trace_tolerance = 1e-4;

  TissueModel() = default;
  TissueModel(Mask labels, ScalarField fa, TensorField tensor)
      : labels_(std::move(labels)), fa_(std::move(fa)), tensor_(std::move(tensor)) {
    require_same_grid(labels_, fa_, "labels and fa");
    require_same_grid(labels_, tensor_, "labels and tensor");
    Mask brain(labels_.geometry());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const auto l = labels_[i];
      require(l <= 2, errc::invalid_tissue, "tissue label out of range");
      brain[i] = l != 0 ? 1 : 0;
      const double f = fa_[i];
      require(std::isfinite(f) && f >= 0.0 && f <= 1.0, errc::invalid_tissue, "fa outside [0,1]");
      require(l != 0 || f == 0.0, errc::invalid_tissue, "fa must be zero outside the brain");
      const auto& t = tensor_[i];
      require(t.finite(), errc::invalid_tissue, "non-finite tensor");
      if (l != 0) {
        const auto td = t.template cast<double>();
        require(std::abs(td.trace() - 1.0) <= trace_tolerance, errc::invalid_tissue,
                "tensor trace must be 1 inside the brain");
        require(td.eigenvalues()[0] >= -trace_tolerance, errc::invalid_tissue,
                "tensor must be positive semi-definite");
      }
    }
    grid_ = VoxelGrid(std::move(brain));
  }

  const VoxelGrid& grid() const noexcept { return grid_; }
  const Geometry& geometry() const noexcept { return labels_.geometry(); }
  const Mask& labels() const noexcept { return labels_; }
  TissueLabel label(std::size_t i) const { return static_cast<TissueLabel>(labels_[i]); }
  const ScalarField& fa() const noexcept { return fa_; }
  const TensorField& tensor() const noexcept { return tensor_; }

 private:
  Mask labels_;
  ScalarField fa_;
  TensorField tensor_;
  VoxelGrid grid_;
};

/// Homogeneous tissue of one label inside `brain`, zero anisotropy, isotropic unit-trace tensor.
inline TissueModel uniform_tissue(const Mask& brain, TissueLabel label = TissueLabel::WhiteMatter) {
  Mask labels(brain.geometry());
  TensorField tensor(brain.geometry());
  const auto iso = Tensor6f::diagonal(1.0f / 3.0f, 1.0f / 3.0f, 1.0f / 3.0f);
  for (std::size_t i = 0; i < brain.size(); ++i) {
    labels[i] = brain[i] ? static_cast<std::uint8_t>(label) : 0;
    // float(1/3)*3 is within float rounding of 1
    tensor[i] = brain[i] ? iso : Tensor6f{};
  }
  return TissueModel(std::move(labels), ScalarField(brain.geometry(), 0.0), std::move(tensor));
}

inline constexpr double never_invaded = std::numeric_limits<double>::infinity();

/// Per-voxel time of first invasion; +inf marks voxels that are never invaded.
class InvasionMap : public Volume<double> {
 public:
  using Volume<double>::Volume;
  InvasionMap() = default;
  explicit InvasionMap(Volume<double> v) : Volume<double>(std::move(v)) {}

  bool invaded(std::size_t i) const { return std::isfinite((*this)[i]); }

  /// {x : T(x) <= t}
  Mask threshold(double t) const {
    Mask out(geometry());
    for (std::size_t i = 0; i < size(); ++i) out[i] = (*this)[i] <= t ? 1 : 0;
    return out;
  }
};

/// Splits a segmentation into its in-brain part and the number of voxels that fell outside.
struct SanitizedSegmentation {
  Segmentation inside;
  std::size_t outside_count = 0;
};

inline SanitizedSegmentation sanitize(const Segmentation& seg, const VoxelGrid& grid) {
  require_same_grid(seg, grid.brain_mask(), "segmentation and brain mask");
  SanitizedSegmentation out{Segmentation(seg.geometry()), 0};
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (!seg[i]) continue;
    if (grid.in_brain(i))
      out.inside[i] = 1;
    else
      ++out.outside_count;
  }
  return out;
}

}  // namespace gliorank
