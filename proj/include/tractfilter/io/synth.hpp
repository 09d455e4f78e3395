#pragma once

// Synthetic subjects with known supervisor verdicts.
//
// A 40^3 grid at 2 mm holds three curved bundles (quadratic Bezier
// centerlines, jittered per subject), a deep white-matter ball at the
// origin, a ventricle ball above it and one small "sentinel" region inside
// each bundle. Streamlines are drawn from categories with a fixed intended
// verdict (core, sentinel-crossing, shifted, excursion, loop, deep-WM and
// ventricle enders, distractors). Each candidate is scored analytically
// against the continuous shapes; candidates closer than one half voxel
// diagonal to a decision boundary, or whose verdict is not one the category
// allows, are redrawn. The stored truth therefore does not depend on
// rasterization details.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tractfilter/descriptors.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/rng.hpp"
#include "tractfilter/sh.hpp"
#include "tractfilter/streamline.hpp"
#include "tractfilter/supervisors.hpp"
#include "tractfilter/volume.hpp"

namespace tractfilter::synth {

inline constexpr int kBundles = 3;
inline constexpr double kTubeRadius = 11.0;
inline constexpr double kEndRadius = 11.0;
inline constexpr double kDeepRadius = 9.0;
inline constexpr double kVentricleRadius = 4.0;
inline constexpr double kSentinelRadius = 3.0;
inline constexpr double kAtlasTheta = 6.0;
inline constexpr int kAtlasPoints = 20;
inline constexpr std::uint32_t kDeepLabel = 9;
inline constexpr std::uint32_t kVentricleLabel = 10;
inline constexpr std::uint32_t kSentinelLabel0 = 11;
// Half voxel diagonal: a point and its nearest voxel center are never
// farther apart than this.
inline constexpr double kMargin = 1.75;
inline constexpr double kMdfMargin = 0.3;
inline constexpr double kWindingLow = 340.0;
inline constexpr double kWindingHigh = 380.0;
inline constexpr double kGridLimit = 38.0;

enum class Category : int {
  core = 0,
  sentinel,
  shifted,
  excursion,
  loop,
  deep_ender,
  ventricle_ender,
  distractor,
  query_distractor,
  loop_distractor,
};
inline constexpr int kCategoryCount = 10;
inline constexpr std::array<const char*, kCategoryCount> kCategoryNames{
    "core", "sentinel", "shifted", "excursion", "loop", "deep_ender", "ventricle_ender", "distractor",
    "query_distractor", "loop_distractor"};
inline constexpr std::array<double, kCategoryCount> kCategoryWeights{0.22, 0.08, 0.12, 0.10, 0.12,
                                                                     0.07, 0.07, 0.08, 0.08, 0.06};

struct SynthOptions {
  int subjects = 7;
  int streamlines = 2000;
  int directions = 60;  // per shell
  std::array<double, 2> shells{1000.0, 3000.0};
  double dwi_noise = 0.01;
  double t1w_noise = 0.02;
  double control_jitter = 1.5;
};

/// Dense polyline of a quadratic Bezier with an arc-length table.
struct Curve {
  Vec3 p0, ctrl, p2;
  PointList pts;
  std::vector<double> cum;
  Vec3 up;  // unit normal of the curve plane
  Vec3 lo, hi;

  Curve() = default;
  Curve(Vec3 a, Vec3 c, Vec3 b, int samples = 400) : p0(a), ctrl(c), p2(b) {
    for (int i = 0; i <= samples; ++i) pts.push_back(at_t(static_cast<double>(i) / samples));
    cum = cumulative_arc_length(pts);
    Vec3 n = (p0 - ctrl).cross(p2 - ctrl);
    up = n.norm() > 1e-9 ? n.normalized() : Vec3::UnitZ();
    lo = hi = pts[0];
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }

  Vec3 at_t(double t) const { return (1 - t) * (1 - t) * p0 + 2 * (1 - t) * t * ctrl + t * t * p2; }
  double length() const { return cum.back(); }

  /// Point and unit tangent at arc length s.
  std::pair<Vec3, Vec3> at_arc(double s) const {
    s = std::clamp(s, 0.0, length());
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cum.begin(), 1)),
                                          pts.size() - 1) - 1;
    const double seg = cum[i + 1] - cum[i];
    const double f = seg > 0 ? (s - cum[i]) / seg : 0.0;
    return {pts[i] + f * (pts[i + 1] - pts[i]), (pts[i + 1] - pts[i]).normalized()};
  }

  /// Lateral unit vectors: n1 in the curve plane, n2 along the plane normal.
  std::pair<Vec3, Vec3> frame(const Vec3& tangent) const {
    const Vec3 n1 = tangent.cross(up).normalized();
    return {n1, tangent.cross(n1).normalized()};
  }

  /// Distance to the polyline and the unit tangent of the closest segment.
  std::pair<double, Vec3> closest(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t seg = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Vec3 d = pts[i + 1] - pts[i];
      const double t = std::clamp((p - pts[i]).dot(d) / d.squaredNorm(), 0.0, 1.0);
      const double e = (pts[i] + t * d - p).squaredNorm();
      if (e < best) {
        best = e;
        seg = i;
      }
    }
    return {std::sqrt(best), (pts[seg + 1] - pts[seg]).normalized()};
  }

  double distance(const Vec3& p) const { return closest(p).first; }

  /// Cheap lower bound on distance() from the bounding box.
  double box_distance(const Vec3& p) const {
    return (p - p.cwiseMax(lo).cwiseMin(hi)).norm();
  }
};

struct BundleShape {
  std::string name;
  Curve curve;
  Vec3 sentinel;  // a voxel center
  std::uint32_t octant0 = 0, octant1 = 0;
};

struct SynthSubject {
  std::string id;
  VolumeGrid grid;
  std::vector<BundleShape> shapes;
  Vec3 ventricle_center;

  std::vector<Streamline> streamlines;
  std::vector<SupervisorVerdict> truth;
  std::vector<Category> categories;

  ScalarVolume t1w;  // raw intensities
  Volume<float> dwi;
  GradientScheme scheme;
  LabelVolume parcellation;
  LabelVolume deep_wm;
  LabelVolume ventricles;
  std::vector<BundleMasks> bundles;
  BundleAtlas atlas;
  std::vector<RegionQuery> queries;

  /// Share of streamlines the atlas and region-query supervisors are
  /// expected to reproduce. Ambiguous candidates are rejected, so this is 1.
  double expected_agreement = 1.0;
};

inline VolumeGrid synth_grid() {
  VolumeGrid g;
  g.dims = {40, 40, 40};
  g.spacing = Vec3::Constant(2.0);
  g.origin = Vec3::Constant(-39.0);
  return g;
}

inline std::uint32_t octant_label(const Vec3& p) {
  return 1u + (p.x() > 0 ? 1u : 0u) + (p.y() > 0 ? 2u : 0u) + (p.z() > 0 ? 4u : 0u);
}

namespace detail {

enum class Tri { no, yes, unknown };

inline Tri tri_and(Tri a, Tri b) {
  if (a == Tri::no || b == Tri::no) return Tri::no;
  if (a == Tri::unknown || b == Tri::unknown) return Tri::unknown;
  return Tri::yes;
}
inline Tri tri_or(Tri a, Tri b) {
  if (a == Tri::yes || b == Tri::yes) return Tri::yes;
  if (a == Tri::unknown || b == Tri::unknown) return Tri::unknown;
  return Tri::no;
}
inline Tri tri_not(Tri a) { return a == Tri::yes ? Tri::no : a == Tri::no ? Tri::yes : Tri::unknown; }

/// Membership of the nearest voxel center in {v : d(v) <= radius} given the
/// point's own distance d.
inline Tri within(double d, double radius, double margin = kMargin) {
  if (d <= radius - margin) return Tri::yes;
  if (d > radius + margin) return Tri::no;
  return Tri::unknown;
}

// Own 1 mm resampling, MDF and winding so the truth does not reuse the
// code it is meant to check.
inline PointList resample_step(const PointList& pts, double step) {
  PointList out{pts.front()};
  double carry = 0.0;  // arc length since the last emitted sample
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec3 a = pts[i - 1], d = pts[i] - pts[i - 1];
    const double len = d.norm();
    double pos = step - carry;
    while (pos < len - 1e-9) {
      out.push_back(a + d * (pos / len));
      pos += step;
    }
    carry = len - (pos - step);
  }
  if ((out.back() - pts.back()).norm() > 1e-9) out.push_back(pts.back());
  return out;
}

inline PointList resample_n(const PointList& pts, int n) {
  const auto cum = cumulative_arc_length(pts);
  PointList out;
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = cum.back() * k / (n - 1);
    while (seg + 2 < pts.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(pts[seg] + f * (pts[seg + 1] - pts[seg]));
  }
  return out;
}

inline double mdf(const PointList& a, const PointList& b) {
  double d = 0, f = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    d += (a[i] - b[i]).norm();
    f += (a[i] - b[n - 1 - i]).norm();
  }
  return std::min(d, f) / static_cast<double>(n);
}

inline double winding(const PointList& p) {
  double total = 0;
  for (std::size_t i = 2; i < p.size(); ++i) {
    const Vec3 u = p[i - 1] - p[i - 2], v = p[i] - p[i - 1];
    const double c = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
    total += std::acos(c);
  }
  return total * 180.0 / std::numbers::pi;
}

struct RegionTri {
  std::array<Tri, 5 + kBundles> special{};  // unused slots stay `no`
  std::optional<std::uint32_t> octant;      // set when no special region is possible
};

}  // namespace detail

/// Analytic verdict of one streamline; nullopt when any rule sits within the
/// rasterization margin of its decision boundary.
inline std::optional<SupervisorVerdict> analytic_verdict(const SynthSubject& s, const PointList& raw) {
  using detail::Tri;
  const PointList pts = detail::resample_step(raw, 1.0);
  for (const auto& p : pts)
    if (p.cwiseAbs().maxCoeff() > kGridLimit) return std::nullopt;

  // Region labels per point: special regions first, octants otherwise.
  auto regions = [&](const Vec3& p) {
    detail::RegionTri r;
    r.special.fill(Tri::no);
    r.special[0] = detail::within(p.norm(), kDeepRadius);
    r.special[1] = detail::within((p - s.ventricle_center).norm(), kVentricleRadius);
    for (int b = 0; b < kBundles; ++b)
      r.special[static_cast<std::size_t>(2 + b)] =
          detail::within((p - s.shapes[static_cast<std::size_t>(b)].sentinel).norm(), kSentinelRadius);
    bool clear = true;
    for (auto t : r.special) clear = clear && t == Tri::no;
    const bool off_plane = std::abs(p.x()) > 1e-6 && std::abs(p.y()) > 1e-6 && std::abs(p.z()) > 1e-6;
    if (clear && off_plane) r.octant = octant_label(p);
    return r;
  };

  std::vector<detail::RegionTri> labels;
  for (const auto& p : pts) labels.push_back(regions(p));

  SupervisorVerdict v;
  auto set = [](Tri t, BinaryLabel& out) {
    if (t == Tri::unknown) return false;
    out = label_from(t == Tri::yes);
    return true;
  };

  // Region queries: endpoint octants either order, no excluded region visited.
  Tri tq = Tri::no;
  Tri visits_excluded = Tri::no;
  for (const auto& l : labels)
    for (auto t : l.special) visits_excluded = detail::tri_or(visits_excluded, t);
  for (const auto& b : s.shapes) {
    auto is = [&](const detail::RegionTri& l, std::uint32_t oct) {
      if (l.octant) return *l.octant == oct ? Tri::yes : Tri::no;
      for (auto t : l.special)
        if (t == Tri::yes) return Tri::no;
      return Tri::unknown;
    };
    const Tri ends = detail::tri_or(detail::tri_and(is(labels.front(), b.octant0), is(labels.back(), b.octant1)),
                                    detail::tri_and(is(labels.front(), b.octant1), is(labels.back(), b.octant0)));
    tq = detail::tri_or(tq, detail::tri_and(ends, detail::tri_not(visits_excluded)));
  }
  if (!set(tq, v.tq)) return std::nullopt;

  // Atlas.
  const PointList r20 = detail::resample_n(pts, kAtlasPoints);
  Tri rbx = Tri::no;
  for (const auto& b : s.atlas.bundles)
    for (const auto& proto : b.prototypes)
      rbx = detail::tri_or(rbx, detail::within(detail::mdf(r20, proto), b.theta, kMdfMargin));
  if (!set(rbx, v.rbx)) return std::nullopt;

  // Bundle masks.
  Tri ts = Tri::no;
  for (const auto& b : s.shapes) {
    Tri inside = Tri::yes;
    for (const auto& p : pts) {
      inside = detail::tri_and(inside, detail::within(b.curve.distance(p), kTubeRadius));
      if (inside == Tri::no) break;
    }
    auto end = [&](const Vec3& p, const Vec3& c) { return detail::within((p - c).norm(), kEndRadius); };
    const Vec3 &e0 = b.curve.pts.front(), &e1 = b.curve.pts.back();
    const Tri ends = detail::tri_or(detail::tri_and(end(pts.front(), e0), end(pts.back(), e1)),
                                    detail::tri_and(end(pts.front(), e1), end(pts.back(), e0)));
    ts = detail::tri_or(ts, detail::tri_and(inside, ends));
  }
  if (!set(ts, v.ts)) return std::nullopt;

  // AIF. The ventricle zone holds voxel centers within 3 mm of a ventricle
  // voxel: it contains the ventricle ball and lies inside the ball of
  // radius 4 + 3.
  const double w = detail::winding(pts);
  if (w > kWindingLow && w < kWindingHigh) return std::nullopt;
  Tri bad = w >= kWindingHigh ? Tri::yes : Tri::no;
  for (const Vec3* e : {&pts.front(), &pts.back()}) {
    bad = detail::tri_or(bad, detail::within(e->norm(), kDeepRadius));
    const double dv = (*e - s.ventricle_center).norm();
    const Tri zone = dv <= kVentricleRadius - kMargin ? Tri::yes
                     : dv > kVentricleRadius + kDefaultVentricleRadiusMm + kMargin ? Tri::no
                                                                                  : Tri::unknown;
    bad = detail::tri_or(bad, zone);
  }
  if (!set(detail::tri_not(bad), v.aif)) return std::nullopt;
  return v;
}

namespace detail {

inline Vec3 unit_normal(Rng& rng, const Vec3& t) {
  std::normal_distribution<double> n(0, 1);
  for (;;) {
    Vec3 r(n(rng), n(rng), n(rng));
    r -= r.dot(t) * t;
    if (r.norm() > 1e-3) return r.normalized();
  }
}

/// Points every `step` mm of centerline arc from s0 to s1, displaced by
/// offset(u) = (a, b) along the lateral frame, u in [0, 1].
template <typename Offset>
PointList along(const Curve& c, double s0, double s1, Offset offset, double step = 1.0) {
  PointList out;
  const int n = std::max(2, static_cast<int>(std::ceil((s1 - s0) / step)) + 1);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    const auto [p, t] = c.at_arc(s0 + u * (s1 - s0));
    const auto [n1, n2] = c.frame(t);
    const auto [a, b] = offset(u);
    out.push_back(p + a * n1 + b * n2);
  }
  return out;
}

/// Insert a full circle of `radius` after point i, tangent to the path.
inline PointList insert_loop(const PointList& pts, std::size_t i, double radius, Rng& rng) {
  const Vec3 t = (pts[i + 1] - pts[i - 1]).normalized();
  const Vec3 n = unit_normal(rng, t);
  const int m = static_cast<int>(std::ceil(2 * std::numbers::pi * radius));
  PointList out(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  for (int k = 1; k < m; ++k) {
    const double phi = 2 * std::numbers::pi * k / m;
    out.push_back(pts[i] + radius * (std::sin(phi) * t + (1 - std::cos(phi)) * n));
  }
  out.insert(out.end(), pts.begin() + static_cast<std::ptrdiff_t>(i) + 1, pts.end());
  return out;
}

inline double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

/// Core-like lateral offset: a small constant plus a gentle wave.
inline auto wobble(Rng& rng, double base_max, double wave) {
  const double r = base_max * std::sqrt(uniform(rng, 0, 1)), phi = uniform(rng, 0, 2 * std::numbers::pi);
  const double a0 = r * std::cos(phi), b0 = r * std::sin(phi);
  const double wa = uniform(rng, -wave, wave), wb = uniform(rng, -wave, wave);
  const double ph = uniform(rng, 0, 2 * std::numbers::pi);
  return [=](double u) {
    const double w = std::sin(std::numbers::pi * u * 2 + ph);
    return std::pair<double, double>{a0 + wa * w, b0 + wb * w};
  };
}

inline Vec3 random_point(Rng& rng, double half) {
  return Vec3(uniform(rng, -half, half), uniform(rng, -half, half), uniform(rng, -half, half));
}

/// 1 mm sampled quadratic Bezier with a small wobble.
inline PointList bezier_path(Rng& rng, const Vec3& a, const Vec3& ctrl, const Vec3& b) {
  const Curve c(a, ctrl, b, 200);
  return along(c, 0.0, c.length(), wobble(rng, 0.5, 0.4));
}

}  // namespace detail

/// Draw one candidate polyline for `cat`; the caller validates it.
inline PointList draw_candidate(const SynthSubject& s, Category cat, Rng& rng) {
  using namespace detail;
  const auto& b = s.shapes[std::min<std::size_t>(s.shapes.size() - 1, static_cast<std::size_t>(uniform(rng, 0, static_cast<double>(s.shapes.size()))))];
  const Curve& c = b.curve;
  const double len = c.length();
  const double s0 = uniform(rng, 0.0, 0.02) * len, s1 = (1 - uniform(rng, 0.0, 0.02)) * len;
  PointList pts;
  switch (cat) {
    case Category::core:
      pts = along(c, s0, s1, wobble(rng, 1.2, 0.5));
      break;
    case Category::sentinel: {
      const auto [mid, t] = c.at_arc(0.5 * len);
      const auto [n1, n2] = c.frame(t);
      const Vec3 d = b.sentinel - mid;
      const double a = d.dot(n1), bb = d.dot(n2);
      const double um = 0.5 + (d.dot(t)) / (s1 - s0);
      auto base = wobble(rng, 0.4, 0.2);
      pts = along(c, s0, s1, [=](double u) {
        const double w = std::exp(-std::pow((u - um) / 0.12, 2));
        const auto [x, y] = base(u);
        return std::pair<double, double>{x * (1 - w) + a * w, y * (1 - w) + bb * w};
      });
      break;
    }
    case Category::shifted: {
      const double d = uniform(rng, 7.0, 8.5);
      const double phi = uniform(rng, -0.6, 0.6) + std::numbers::pi;  // away from the sentinel side
      auto base = wobble(rng, 0.0, 0.3);
      pts = along(c, s0, s1, [=](double u) {
        const auto [x, y] = base(u);
        return std::pair<double, double>{d * std::cos(phi) + x, d * std::sin(phi) + y};
      });
      break;
    }
    case Category::excursion: {
      const double h = uniform(rng, 13.5, 15.0), uc = uniform(rng, 0.3, 0.7);
      const double phi = std::numbers::pi * (0.5 + std::floor(uniform(rng, 0, 3)) * 0.5);  // -n1, +n2 or -n2
      auto base = wobble(rng, 1.0, 0.4);
      pts = along(c, s0, s1, [=](double u) {
        const double w = h * std::exp(-std::pow((u - uc) / 0.1, 2));
        const auto [x, y] = base(u);
        return std::pair<double, double>{x + w * std::cos(phi), y + w * std::sin(phi)};
      });
      break;
    }
    case Category::loop: {
      pts = along(c, s0, s1, wobble(rng, 1.0, 0.4));
      const auto i = static_cast<std::size_t>(uniform(rng, 0.3, 0.6) * static_cast<double>(pts.size()));
      pts = insert_loop(pts, i, 2.5, rng);
      break;
    }
    case Category::deep_ender:
    case Category::ventricle_ender: {
      const bool from_start = uniform(rng, 0, 1) < 0.5;
      const auto [start, t] = c.at_arc(from_start ? s0 : s1);
      const Vec3 target = cat == Category::deep_ender ? Vec3(random_point(rng, 1.7))
                                                      : Vec3(s.ventricle_center + random_point(rng, 0.8));
      const Vec3 mid = 0.5 * (start + target);
      const Vec3 ctrl = mid + uniform(rng, 0, 10) * unit_normal(rng, (target - start).normalized());
      pts = bezier_path(rng, start + random_point(rng, 1.0), ctrl, target);
      break;
    }
    case Category::distractor:
    case Category::loop_distractor: {
      Vec3 a, e;
      do {
        a = random_point(rng, 32);
        e = random_point(rng, 32);
      } while ((a - e).norm() < 30 || (a - e).norm() > 70);
      const Vec3 ctrl = 0.5 * (a + e) + uniform(rng, 0, 15) * unit_normal(rng, (e - a).normalized());
      pts = bezier_path(rng, a, ctrl, e);
      if (cat == Category::loop_distractor) {
        const auto i = static_cast<std::size_t>(uniform(rng, 0.3, 0.6) * static_cast<double>(pts.size()));
        pts = insert_loop(pts, std::max<std::size_t>(i, 1), 2.5, rng);
      }
      break;
    }
    case Category::query_distractor: {
      // Same endpoint regions as the bundle, routed well away from it.
      const Vec3 a = c.pts.front() + random_point(rng, 2.0), e = c.pts.back() + random_point(rng, 2.0);
      const Vec3 mid = 0.5 * (c.p0 + c.p2);
      const Vec3 away = (c.p2 - c.p0).cross(c.ctrl - mid).normalized();
      const double sign = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
      const Vec3 ctrl = mid + sign * uniform(rng, 30, 38) * away + random_point(rng, 4.0);
      pts = bezier_path(rng, a, ctrl, e);
      break;
    }
  }
  if (uniform(rng, 0, 1) < 0.5) std::reverse(pts.begin(), pts.end());
  // Files hold single precision; score what will be read back.
  for (auto& p : pts) p = p.cast<float>().cast<double>();
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

/// Verdict codes a category may produce.
inline bool allowed(Category cat, const SupervisorVerdict& v) {
  const std::string code = std::string{to_char(v.tq), to_char(v.rbx), to_char(v.ts), to_char(v.aif)};
  switch (cat) {
    case Category::core: return code == "pppp";
    case Category::sentinel: return code == "nppp";
    case Category::shifted: return code == "pnpp";
    case Category::excursion: return code == "ppnp";
    case Category::loop: return code == "pppn" || code == "pnpn";
    case Category::deep_ender:
    case Category::ventricle_ender: return code == "nnnn";
    case Category::distractor: return code == "nnnp" || code == "pnnp";
    case Category::query_distractor: return code == "pnnp";
    case Category::loop_distractor: return code == "nnnn";
  }
  return false;
}

/// Fibonacci directions on the upper hemisphere.
inline std::vector<Vec3> hemisphere_directions(int n) {
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return out;
}

inline SynthSubject make_subject(const std::string& id, std::uint64_t seed, const SynthOptions& opt = {}) {
  using namespace detail;
  Rng rng(seed);
  std::normal_distribution<double> jitter(0.0, opt.control_jitter);
  auto jit = [&](Vec3 p) { return Vec3(p + Vec3(jitter(rng), jitter(rng), jitter(rng))); };

  SynthSubject s;
  s.id = id;
  s.grid = synth_grid();
  s.ventricle_center = Vec3(0, 0, 14);
  const VolumeGrid& g = s.grid;

  const std::array<std::array<Vec3, 3>, kBundles> base{{
      {Vec3(-28, 12, 10), Vec3(0, 40, 10), Vec3(28, 12, 10)},
      {Vec3(-14, -26, -14), Vec3(-40, 0, -14), Vec3(-14, 26, -14)},
      {Vec3(14, -26, -14), Vec3(40, 0, -14), Vec3(14, 26, -14)},
  }};
  const std::array<const char*, kBundles> names{"arc", "left", "right"};
  for (int b = 0; b < kBundles; ++b) {
    const auto& cp = base[static_cast<std::size_t>(b)];
    BundleShape shape;
    shape.name = names[static_cast<std::size_t>(b)];
    shape.curve = Curve(jit(cp[0]), jit(cp[1]), jit(cp[2]));
    shape.octant0 = octant_label(shape.curve.p0);
    shape.octant1 = octant_label(shape.curve.p2);
    // Sentinel: the voxel center near mid-bundle whose distance to the
    // centerline is closest to 7.5 mm on the +n1 side.
    const auto [mid, t] = shape.curve.at_arc(0.5 * shape.curve.length());
    const Vec3 target = mid + 7.5 * shape.curve.frame(t).first;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.dims[2]; ++k)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int i = 0; i < g.dims[0]; ++i) {
          const Vec3 v = g.voxel_center(i, j, k);
          if ((v - target).norm() > 3.0) continue;
          const double score = std::abs(shape.curve.distance(v) - 7.5) + 0.2 * std::abs((v - mid).dot(t));
          if (score < best) {
            best = score;
            shape.sentinel = v;
          }
        }
    s.shapes.push_back(shape);
  }

  // Label volumes.
  s.parcellation = LabelVolume(g, 1);
  s.deep_wm = LabelVolume(g, 1);
  s.ventricles = LabelVolume(g, 1);
  s.t1w = ScalarVolume(g, 1);
  for (int b = 0; b < kBundles; ++b) {
    BundleMasks m;
    m.name = s.shapes[static_cast<std::size_t>(b)].name;
    m.mask = m.end0 = m.end1 = LabelVolume(g, 1);
    s.bundles.push_back(std::move(m));
  }
  const auto dirs = hemisphere_directions(opt.directions);
  for (double b : opt.shells)
    for (const auto& d : dirs) {
      s.scheme.directions.push_back(d);
      s.scheme.bvalues.push_back(b);
    }
  s.dwi = Volume<float>(g, static_cast<int>(s.scheme.size()));
  std::normal_distribution<double> dwi_noise(0.0, opt.dwi_noise), t1_noise(0.0, opt.t1w_noise);

  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 v = g.voxel_center(i, j, k);
        std::uint32_t label = octant_label(v);
        if ((v - s.ventricle_center).norm() <= kVentricleRadius) {
          label = kVentricleLabel;
        } else if (v.norm() <= kDeepRadius) {
          label = kDeepLabel;
        } else {
          for (int b = 0; b < kBundles; ++b)
            if ((v - s.shapes[static_cast<std::size_t>(b)].sentinel).norm() <= kSentinelRadius)
              label = kSentinelLabel0 + static_cast<std::uint32_t>(b);
        }
        s.parcellation.at(i, j, k) = label;
        s.deep_wm.at(i, j, k) = label == kDeepLabel ? 1u : 0u;
        s.ventricles.at(i, j, k) = label == kVentricleLabel ? 1u : 0u;

        std::optional<Vec3> fiber;
        double fiber_dist = std::numeric_limits<double>::infinity();
        for (int b = 0; b < kBundles; ++b) {
          const auto& sh = s.shapes[static_cast<std::size_t>(b)];
          auto& m = s.bundles[static_cast<std::size_t>(b)];
          if ((v - sh.curve.p0).norm() <= kEndRadius) m.end0.at(i, j, k) = 1;
          if ((v - sh.curve.p2).norm() <= kEndRadius) m.end1.at(i, j, k) = 1;
          if (sh.curve.box_distance(v) > kTubeRadius) continue;
          const auto [d, tangent] = sh.curve.closest(v);
          if (d <= kTubeRadius) {
            m.mask.at(i, j, k) = 1;
            if (d < fiber_dist) {
              fiber_dist = d;
              fiber = tangent;
            }
          }
        }

        // Tissue contrast only: white matter is uniform, ventricles are dark.
        const double t1 = label == kVentricleLabel ? 0.15 : 0.6;
        s.t1w.at(i, j, k) = static_cast<float>(t1 + t1_noise(rng));

        for (std::size_t m = 0; m < s.scheme.size(); ++m) {
          const double b = s.scheme.bvalues[m] * 1e-3;  // diffusivities below in um^2/ms
          double sig;
          if (label == kVentricleLabel) {
            sig = std::exp(-b * 3.0);
          } else if (fiber) {
            const double c = s.scheme.directions[m].dot(*fiber);
            sig = std::exp(-b * (0.3 + 1.4 * c * c));
          } else {
            sig = std::exp(-b * 0.8);
          }
          s.dwi.at(i, j, k, static_cast<int>(m)) = static_cast<float>(sig + dwi_noise(rng));
        }
      }

  s.atlas.point_count = kAtlasPoints;
  for (const auto& sh : s.shapes) {
    s.atlas.bundles.push_back(AtlasBundle{sh.name, kAtlasTheta, {resample_n(sh.curve.pts, kAtlasPoints)}});
    RegionQuery q;
    q.name = sh.name;
    q.endpoint_a = {sh.octant0};
    q.endpoint_b = {sh.octant1};
    q.exclude = {kDeepLabel, kVentricleLabel};
    for (int b = 0; b < kBundles; ++b) q.exclude.push_back(kSentinelLabel0 + static_cast<std::uint32_t>(b));
    s.queries.push_back(q);
  }

  std::discrete_distribution<int> pick(kCategoryWeights.begin(), kCategoryWeights.end());
  for (int n = 0; n < opt.streamlines; ++n) {
    const auto cat = static_cast<Category>(pick(rng));
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      const PointList pts = draw_candidate(s, cat, rng);
      if (pts.size() < 2) continue;
      const auto v = analytic_verdict(s, pts);
      if (!v || !allowed(cat, *v)) continue;
      s.streamlines.emplace_back(pts);
      s.truth.push_back(*v);
      s.categories.push_back(cat);
      done = true;
    }
    if (!done) throw Error(std::string("could not draw a '") + kCategoryNames[static_cast<std::size_t>(cat)] +
                           "' streamline");
  }
  return s;
}

/// Supervisor inputs as the toolkit would assemble them from the files.
inline SupervisorInputs supervisor_inputs(const SynthSubject& s, double ventricle_radius_mm = kDefaultVentricleRadiusMm) {
  SupervisorInputs in;
  in.aif = AifMasks{s.deep_wm, make_ventricle_zone(s.ventricles, ventricle_radius_mm)};
  in.bundles = s.bundles;
  in.parcellation = s.parcellation;
  in.queries = s.queries;
  in.atlas = s.atlas;
  return in;
}

}  // namespace tractfilter::synth
