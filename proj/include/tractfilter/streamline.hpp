#pragma once

// Streamline geometry: fixed-step resampling, truncation/padding, winding
// angle, landmark shape descriptor and coordinate normalization.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "tractfilter/errors.hpp"

namespace tractfilter {

using Vec3 = Eigen::Vector3d;
using PointList = std::vector<Vec3>;

/// An ordered polyline of world-space points (mm). At least two points,
/// all finite, no zero-length segments.
class Streamline {
 public:
  Streamline() = default;

  explicit Streamline(PointList points) : points_(std::move(points)) { validate(); }

  std::span<const Vec3> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  const Vec3& front() const { return points_.front(); }
  const Vec3& back() const { return points_.back(); }

 private:
  void validate() const {
    if (points_.size() < 2) throw InvalidInput("streamline needs at least 2 points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].allFinite())
        throw InvalidInput("non-finite coordinate at point " + std::to_string(i));
      if (i > 0 && points_[i] == points_[i - 1])
        throw InvalidInput("repeated consecutive point at index " + std::to_string(i));
    }
  }

  PointList points_;
};

/// Fixed-length form: `points` has exactly N entries, the first `valid_len`
/// being real samples and the rest (0,0,0).
struct ResampledStreamline {
  PointList points;
  int valid_len = 0;
  double step = 1.0;

  int size() const noexcept { return static_cast<int>(points.size()); }
  std::span<const Vec3> real() const noexcept {
    return std::span<const Vec3>(points).first(static_cast<std::size_t>(valid_len));
  }
};

/// Cumulative arc length; result[0] == 0, result.back() == total length.
inline std::vector<double> cumulative_arc_length(std::span<const Vec3> pts) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  return cum;
}

inline double arc_length(std::span<const Vec3> pts) {
  return pts.empty() ? 0.0 : cumulative_arc_length(pts).back();
}

namespace detail {

// Point at arc length t along the polyline; `seg` is a forward-only cursor.
inline Vec3 point_at(std::span<const Vec3> pts, const std::vector<double>& cum, double t,
                     std::size_t& seg) {
  const std::size_t last = pts.size() - 1;
  while (seg + 1 < last && cum[seg + 1] < t) ++seg;
  const double len = cum[seg + 1] - cum[seg];
  if (!(len > 0.0)) return pts[seg];
  const double d = std::clamp(t - cum[seg], 0.0, len);
  return pts[seg] + d * ((pts[seg + 1] - pts[seg]) / len);
}

}  // namespace detail

/// Resample along the polyline so consecutive outputs are `step` mm apart in
/// arc length. The exact final point is always emitted, so the last interval
/// may be shorter than `step`.
inline Streamline resample_fixed_step(const Streamline& s, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInput("step must be positive");
  const auto pts = s.points();
  const auto cum = cumulative_arc_length(pts);
  const double total = cum.back();
  // Samples closer than this to the end collapse onto the endpoint.
  const double tail = 1e-9 * std::max(total, step);

  PointList out;
  out.reserve(static_cast<std::size_t>(total / step) + 2);
  std::size_t seg = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * step;
    if (t >= total - tail) break;
    out.push_back(k == 0 ? pts.front() : detail::point_at(pts, cum, t, seg));
  }
  out.push_back(pts.back());
  return Streamline(std::move(out));
}

/// `count` points equidistant in arc length, first and last at the endpoints.
inline PointList resample_count(std::span<const Vec3> pts, int count) {
  if (count < 2) throw InvalidInput("resample_count needs count >= 2");
  if (pts.size() < 2) throw InvalidInput("resample_count needs at least 2 points");
  const auto cum = cumulative_arc_length(pts);
  const double total = cum.back();
  PointList out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    if (k == 0) {
      out.push_back(pts.front());
    } else if (k == count - 1) {
      out.push_back(pts.back());
    } else {
      const double t = total * static_cast<double>(k) / static_cast<double>(count - 1);
      out.push_back(detail::point_at(pts, cum, t, seg));
    }
  }
  return out;
}

/// Keep the first min(len, n) points and zero-fill to n.
inline ResampledStreamline truncate_pad(const Streamline& s, int n, double step = 1.0) {
  if (n < 2) throw InvalidInput("truncate_pad needs n >= 2");
  ResampledStreamline r;
  r.step = step;
  r.valid_len = static_cast<int>(std::min<std::size_t>(s.size(), static_cast<std::size_t>(n)));
  r.points.assign(static_cast<std::size_t>(n), Vec3::Zero());
  std::copy_n(s.points().begin(), r.valid_len, r.points.begin());
  return r;
}

/// Total unsigned turning angle in degrees: sum over interior vertices of the
/// angle between the incoming and outgoing segment directions.
inline double winding_angle(std::span<const Vec3> pts) {
  if (pts.size() < 3) return 0.0;
  double total = 0.0;
  Vec3 prev = (pts[1] - pts[0]).normalized();
  for (std::size_t i = 2; i < pts.size(); ++i) {
    const Vec3 dir = (pts[i] - pts[i - 1]).normalized();
    // atan2 keeps precision for nearly parallel segments where acos does not.
    total += std::atan2(prev.cross(dir).norm(), prev.dot(dir));
    prev = dir;
  }
  return total * 180.0 / std::numbers::pi;
}

inline double winding_angle(const Streamline& s) { return winding_angle(s.points()); }

/// K x N distances between landmarks and samples. Padded columns are zero.
struct LandmarkDescriptor {
  Eigen::MatrixXd values;
  int landmark_count() const noexcept { return static_cast<int>(values.rows()); }
};

/// `k` landmarks equidistant in arc length along `pts` (endpoints included).
inline PointList landmark_points(std::span<const Vec3> pts, int k) {
  if (k < 2) throw InvalidInput("landmark count must be >= 2");
  return resample_count(pts, k);
}

/// Landmarks are placed on `landmark_source` and distances are taken to the
/// real samples of `r`.
inline LandmarkDescriptor landmark_descriptor(const ResampledStreamline& r, int k,
                                              std::span<const Vec3> landmark_source) {
  if (r.valid_len < 2) throw InvalidInput("landmark descriptor needs valid_len >= 2");
  const auto landmarks = landmark_points(landmark_source, k);
  LandmarkDescriptor d;
  d.values = Eigen::MatrixXd::Zero(k, r.size());
  for (int row = 0; row < k; ++row)
    for (int i = 0; i < r.valid_len; ++i)
      d.values(row, i) = (landmarks[static_cast<std::size_t>(row)] - r.points[static_cast<std::size_t>(i)]).norm();
  return d;
}

inline LandmarkDescriptor landmark_descriptor(const ResampledStreamline& r, int k) {
  return landmark_descriptor(r, k, r.real());
}

/// Axis-aligned box in world space.
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(min).cwiseMin(max); }
};

using CoordMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Map `p` from `box` to [-1, 1]^3.
inline Vec3 normalize_point(const Vec3& p, const Box& box) {
  return (2.0 * (p - box.min).array() / (box.max - box.min).array() - 1.0).matrix();
}

inline Vec3 denormalize_point(const Vec3& q, const Box& box) {
  return (box.min.array() + (q.array() + 1.0) * 0.5 * (box.max - box.min).array()).matrix();
}

/// 3 x N matrix of box-normalized real samples; padded columns stay zero.
inline CoordMatrix normalize_coordinates(const ResampledStreamline& r, const Box& box) {
  if (!((box.max - box.min).array() > 0.0).all())
    throw InvalidInput("normalization box needs positive extent on every axis");
  CoordMatrix out = CoordMatrix::Zero(3, r.size());
  for (int i = 0; i < r.valid_len; ++i) {
    const Vec3& p = r.points[static_cast<std::size_t>(i)];
    if (!box.contains(p))
      throw OutOfBounds("sample " + std::to_string(i) + " lies outside the normalization box");
    out.col(i) = normalize_point(p, box);
  }
  return out;
}

}  // namespace tractfilter
