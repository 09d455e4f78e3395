#pragma once

// Axis-aligned voxel volumes and their sampling operators.
//
// Voxel (0,0,0) is centered on `origin`; voxel (i,j,k) is centered on
// origin + (i,j,k) * spacing. Data are stored x-fastest with channels
// interleaved per voxel.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tractfilter/errors.hpp"
#include "tractfilter/streamline.hpp"

namespace tractfilter {

using Index3 = std::array<int, 3>;

struct VolumeGrid {
  Index3 dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 1) throw InvalidInput("volume dims must be >= 1");
      if (!(spacing[a] > 0.0)) throw InvalidInput("volume spacing must be positive");
    }
    if (!origin.allFinite()) throw InvalidInput("volume origin must be finite");
  }

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t linear(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }

  Vec3 voxel_center(int i, int j, int k) const {
    return origin + Vec3(i, j, k).cwiseProduct(spacing);
  }

  /// World-space extent including the half-voxel rim.
  Box bounds() const {
    const Vec3 d(dims[0], dims[1], dims[2]);
    return Box{origin - 0.5 * spacing, origin + (d.array() - 0.5).matrix().cwiseProduct(spacing)};
  }

  bool operator==(const VolumeGrid& o) const {
    return dims == o.dims && spacing == o.spacing && origin == o.origin;
  }
};

inline Vec3 world_to_voxel(const VolumeGrid& g, const Vec3& p) {
  return (p - g.origin).cwiseQuotient(g.spacing);
}

inline Vec3 voxel_to_world(const VolumeGrid& g, const Vec3& v) {
  return g.origin + v.cwiseProduct(g.spacing);
}

/// True when `p` maps into the half-open voxel range [-0.5, dims - 0.5).
inline bool in_range(const VolumeGrid& g, const Vec3& p) {
  const Vec3 v = world_to_voxel(g, p);
  for (int a = 0; a < 3; ++a)
    if (!(v[a] >= -0.5 && v[a] < g.dims[a] - 0.5)) return false;
  return true;
}

template <typename T>
struct Volume {
  VolumeGrid grid;
  int channels = 1;
  std::vector<T> data;

  Volume() = default;
  Volume(const VolumeGrid& g, int ch, T fill = T{}) : grid(g), channels(ch) {
    grid.validate();
    if (ch < 1) throw InvalidInput("volume needs at least one channel");
    data.assign(grid.voxel_count() * static_cast<std::size_t>(ch), fill);
  }

  T& at(int i, int j, int k, int c = 0) {
    return data[grid.linear(i, j, k) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  }
  const T& at(int i, int j, int k, int c = 0) const {
    return data[grid.linear(i, j, k) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  }
  std::span<const T> voxel(std::size_t linear) const {
    return std::span<const T>(data).subspan(linear * static_cast<std::size_t>(channels),
                                            static_cast<std::size_t>(channels));
  }
};

using ScalarVolume = Volume<float>;
using MultiChannelVolume = Volume<float>;
using LabelVolume = Volume<std::uint32_t>;

namespace detail {

inline void check_range(const VolumeGrid& g, const Vec3& p) {
  if (!in_range(g, p)) throw OutOfBounds("point lies outside the volume");
}

}  // namespace detail

/// Trilinear interpolation of every channel at world point `p`. Within the
/// half-voxel rim the border voxel value is used (clamped).
template <typename T>
Eigen::VectorXd trilinear_sample(const Volume<T>& v, const Vec3& p) {
  detail::check_range(v.grid, p);
  const Vec3 x = world_to_voxel(v.grid, p);
  int lo[3], hi[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(x[a], 0.0, static_cast<double>(v.grid.dims[a] - 1));
    lo[a] = std::min(static_cast<int>(std::floor(c)), v.grid.dims[a] - 1);
    hi[a] = std::min(lo[a] + 1, v.grid.dims[a] - 1);
    f[a] = c - lo[a];
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.channels);
  for (int corner = 0; corner < 8; ++corner) {
    const int i = (corner & 1) ? hi[0] : lo[0];
    const int j = (corner & 2) ? hi[1] : lo[1];
    const int k = (corner & 4) ? hi[2] : lo[2];
    const double w = ((corner & 1) ? f[0] : 1.0 - f[0]) * ((corner & 2) ? f[1] : 1.0 - f[1]) *
                     ((corner & 4) ? f[2] : 1.0 - f[2]);
    if (w == 0.0) continue;
    const auto vals = v.voxel(v.grid.linear(i, j, k));
    for (int c = 0; c < v.channels; ++c) out[c] += w * static_cast<double>(vals[static_cast<std::size_t>(c)]);
  }
  return out;
}

template <typename T>
double trilinear_sample_scalar(const Volume<T>& v, const Vec3& p) {
  return trilinear_sample(v, p)[0];
}

/// Nearest voxel index, ties toward the lower index. Empty when out of range.
inline std::optional<Index3> nearest_voxel(const VolumeGrid& g, const Vec3& p) {
  if (!in_range(g, p)) return std::nullopt;
  const Vec3 x = world_to_voxel(g, p);
  Index3 idx;
  for (int a = 0; a < 3; ++a)
    idx[a] = std::clamp(static_cast<int>(std::ceil(x[a] - 0.5)), 0, g.dims[a] - 1);
  return idx;
}

inline std::uint32_t nearest_label(const LabelVolume& v, const Vec3& p) {
  const auto idx = nearest_voxel(v.grid, p);
  if (!idx) throw OutOfBounds("point lies outside the label volume");
  return v.at((*idx)[0], (*idx)[1], (*idx)[2]);
}

/// Nearest-voxel membership in a binary mask; points outside the grid are
/// not members.
template <typename T>
bool mask_contains(const Volume<T>& mask, const Vec3& p) {
  const auto idx = nearest_voxel(mask.grid, p);
  return idx && mask.at((*idx)[0], (*idx)[1], (*idx)[2]) != T{};
}

/// Affine rescale of all values so the global minimum maps to 0 and the
/// maximum to 1.
template <typename T>
Volume<T> normalize_t1w(const Volume<T>& v) {
  if (v.data.empty()) throw DegenerateInput("empty volume");
  const auto [mn, mx] = std::minmax_element(v.data.begin(), v.data.end());
  const double lo = static_cast<double>(*mn);
  const double hi = static_cast<double>(*mx);
  if (!(hi > lo)) throw DegenerateInput("constant volume cannot be min-max normalized");
  Volume<T> out = v;
  for (auto& x : out.data) x = static_cast<T>((static_cast<double>(x) - lo) / (hi - lo));
  return out;
}

/// Binary dilation with a ball of `radius_mm` (voxel-center distances).
template <typename T>
Volume<T> dilate_ball(const Volume<T>& mask, double radius_mm) {
  if (radius_mm < 0.0) throw InvalidInput("dilation radius must be >= 0");
  const auto& g = mask.grid;
  Volume<T> out(g, 1, T{});
  int reach[3];
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::floor(radius_mm / g.spacing[a]));
  const double r2 = radius_mm * radius_mm * (1.0 + 1e-12);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        if (mask.at(i, j, k) == T{}) continue;
        for (int dk = -reach[2]; dk <= reach[2]; ++dk)
          for (int dj = -reach[1]; dj <= reach[1]; ++dj)
            for (int di = -reach[0]; di <= reach[0]; ++di) {
              const int x = i + di, y = j + dj, z = k + dk;
              if (x < 0 || y < 0 || z < 0 || x >= g.dims[0] || y >= g.dims[1] || z >= g.dims[2]) continue;
              const double d2 = Vec3(di, dj, dk).cwiseProduct(g.spacing).squaredNorm();
              if (d2 <= r2) out.at(x, y, z) = T{1};
            }
      }
  return out;
}

}  // namespace tractfilter
