#pragma once

// Rule-based supervisors. Each maps one streamline to a positive/negative
// label:
//   aif_label           loop and endpoint anatomy rules
//   maskrule_label      bundle-mask containment with endpoint-mask pairing
//   region_query_label  parcellation endpoint/traversal/exclusion queries
//   atlas_label         flip-invariant mean distance to bundle prototypes
// All membership tests are nearest-voxel.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tractfilter/errors.hpp"
#include "tractfilter/streamline.hpp"
#include "tractfilter/volume.hpp"

namespace tractfilter {

enum class BinaryLabel : std::uint8_t { negative = 0, positive = 1 };

inline char to_char(BinaryLabel l) { return l == BinaryLabel::positive ? 'p' : 'n'; }
inline BinaryLabel label_from(bool positive) { return positive ? BinaryLabel::positive : BinaryLabel::negative; }

enum class Supervisor : int { tq = 0, rbx = 1, ts = 2, aif = 3 };
inline constexpr int kSupervisorCount = 4;
inline constexpr std::array<const char*, kSupervisorCount> kSupervisorNames{"tq", "rbx", "ts", "aif"};

struct SupervisorVerdict {
  BinaryLabel tq = BinaryLabel::negative;
  BinaryLabel rbx = BinaryLabel::negative;
  BinaryLabel ts = BinaryLabel::negative;
  BinaryLabel aif = BinaryLabel::negative;

  BinaryLabel operator[](int i) const {
    switch (i) {
      case 0: return tq;
      case 1: return rbx;
      case 2: return ts;
      default: return aif;
    }
  }
  BinaryLabel& operator[](int i) {
    switch (i) {
      case 0: return tq;
      case 1: return rbx;
      case 2: return ts;
      default: return aif;
    }
  }
  bool operator==(const SupervisorVerdict&) const = default;
};

// ---------------------------------------------------------------------------
// AIF

inline constexpr double kDefaultLoopThresholdDeg = 360.0;
inline constexpr double kDefaultVentricleRadiusMm = 3.0;
// Turning angles are summed in floating point; a closed circle lands within
// rounding of 360 and must not count as exceeding it.
inline constexpr double kWindingToleranceDeg = 1e-6;

struct AifMasks {
  LabelVolume deep_wm;
  LabelVolume ventricle_zone;
};

/// Ventricle mask dilated by a ball of `radius_mm`.
inline LabelVolume make_ventricle_zone(const LabelVolume& ventricles, double radius_mm = kDefaultVentricleRadiusMm) {
  return dilate_ball(ventricles, radius_mm);
}

/// Negative when the streamline turns by more than `loop_threshold_deg` in
/// total, or when an endpoint lies in deep white matter, in the ventricle
/// zone, or outside the grid.
inline BinaryLabel aif_label(std::span<const Vec3> pts, const AifMasks& masks,
                             double loop_threshold_deg = kDefaultLoopThresholdDeg) {
  if (!(masks.deep_wm.grid == masks.ventricle_zone.grid)) throw InvalidInput("AIF masks must share one grid");
  if (pts.size() < 2) throw InvalidInput("streamline needs at least 2 points");
  if (winding_angle(pts) > loop_threshold_deg + kWindingToleranceDeg) return BinaryLabel::negative;
  for (const Vec3* end : {&pts.front(), &pts.back()}) {
    if (!in_range(masks.deep_wm.grid, *end)) return BinaryLabel::negative;
    if (mask_contains(masks.deep_wm, *end) || mask_contains(masks.ventricle_zone, *end)) return BinaryLabel::negative;
  }
  return BinaryLabel::positive;
}

// ---------------------------------------------------------------------------
// Bundle-mask rule

struct BundleMasks {
  std::string name;
  LabelVolume mask;
  LabelVolume end0;
  LabelVolume end1;

  void validate() const {
    if (!(mask.grid == end0.grid) || !(mask.grid == end1.grid))
      throw InvalidInput("bundle '" + name + "' masks do not share one grid");
  }
};

/// Every sample inside the bundle mask, and the endpoints in opposite
/// endpoint masks (either orientation).
inline bool satisfies_bundle_masks(std::span<const Vec3> pts, const BundleMasks& b) {
  for (const auto& p : pts)
    if (!mask_contains(b.mask, p)) return false;
  const Vec3& first = pts.front();
  const Vec3& last = pts.back();
  return (mask_contains(b.end0, first) && mask_contains(b.end1, last)) ||
         (mask_contains(b.end0, last) && mask_contains(b.end1, first));
}

inline BinaryLabel maskrule_label(std::span<const Vec3> pts, std::span<const BundleMasks> bundles) {
  if (bundles.empty()) throw InvalidInput("mask rule needs at least one bundle");
  if (pts.size() < 2) throw InvalidInput("streamline needs at least 2 points");
  for (const auto& b : bundles) {
    b.validate();
    if (satisfies_bundle_masks(pts, b)) return BinaryLabel::positive;
  }
  return BinaryLabel::negative;
}

// ---------------------------------------------------------------------------
// Region queries

struct RegionQuery {
  std::string name;
  std::vector<std::uint32_t> endpoint_a;
  std::vector<std::uint32_t> endpoint_b;
  std::vector<std::uint32_t> include;  // every region must be visited
  std::vector<std::uint32_t> exclude;  // no region may be visited

  void validate() const {
    if (endpoint_a.empty() || endpoint_b.empty())
      throw InvalidInput("region query '" + name + "' needs non-empty endpoint sets");
  }
};

namespace detail {

inline bool contains_id(const std::vector<std::uint32_t>& ids, std::optional<std::uint32_t> id) {
  return id && std::find(ids.begin(), ids.end(), *id) != ids.end();
}

inline std::optional<std::uint32_t> label_at(const LabelVolume& parc, const Vec3& p) {
  const auto idx = nearest_voxel(parc.grid, p);
  if (!idx) return std::nullopt;
  return parc.at((*idx)[0], (*idx)[1], (*idx)[2]);
}

}  // namespace detail

inline bool satisfies_query(std::span<const std::optional<std::uint32_t>> labels, const RegionQuery& q) {
  const auto& first = labels.front();
  const auto& last = labels.back();
  const bool ends = (detail::contains_id(q.endpoint_a, first) && detail::contains_id(q.endpoint_b, last)) ||
                    (detail::contains_id(q.endpoint_a, last) && detail::contains_id(q.endpoint_b, first));
  if (!ends) return false;
  for (const auto& l : labels)
    if (detail::contains_id(q.exclude, l)) return false;
  for (auto region : q.include) {
    const bool visited = std::any_of(labels.begin(), labels.end(), [&](const auto& l) { return l && *l == region; });
    if (!visited) return false;
  }
  return true;
}

inline BinaryLabel region_query_label(std::span<const Vec3> pts, const LabelVolume& parc,
                                      std::span<const RegionQuery> queries) {
  if (queries.empty()) throw InvalidInput("region query supervisor needs at least one query");
  if (pts.size() < 2) throw InvalidInput("streamline needs at least 2 points");
  std::vector<std::optional<std::uint32_t>> labels;
  labels.reserve(pts.size());
  for (const auto& p : pts) labels.push_back(detail::label_at(parc, p));
  for (const auto& q : queries) {
    q.validate();
    if (satisfies_query(labels, q)) return BinaryLabel::positive;
  }
  return BinaryLabel::negative;
}

// ---------------------------------------------------------------------------
// Atlas matching

/// Minimum over direct and flipped orderings of the mean point-to-point
/// distance. Inputs must have equal point counts.
inline double mdf_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidInput("MDF distance needs equal, non-zero point counts");
  const std::size_t n = a.size();
  double direct = 0.0, flipped = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    direct += (a[i] - b[i]).norm();
    flipped += (a[i] - b[n - 1 - i]).norm();
  }
  return std::min(direct, flipped) / static_cast<double>(n);
}

struct AtlasBundle {
  std::string name;
  double theta = 5.0;  // acceptance distance, mm
  std::vector<PointList> prototypes;
};

struct BundleAtlas {
  int point_count = 20;
  std::vector<AtlasBundle> bundles;

  void validate() const {
    if (bundles.empty()) throw InvalidInput("atlas has no bundles");
    if (point_count < 2) throw InvalidInput("atlas point count must be >= 2");
    for (const auto& b : bundles) {
      if (!(b.theta > 0.0)) throw InvalidInput("atlas bundle '" + b.name + "' needs theta > 0");
      if (b.prototypes.empty()) throw InvalidInput("atlas bundle '" + b.name + "' has no prototypes");
      for (const auto& p : b.prototypes)
        if (static_cast<int>(p.size()) != point_count)
          throw InvalidInput("atlas bundle '" + b.name + "' prototype point count mismatch");
    }
  }
};

/// Smallest MDF distance minus theta over all bundles; <= 0 means accepted.
inline double atlas_margin(std::span<const Vec3> pts, const BundleAtlas& atlas) {
  const PointList r = resample_count(pts, atlas.point_count);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : atlas.bundles)
    for (const auto& proto : b.prototypes) best = std::min(best, mdf_distance(r, proto) - b.theta);
  return best;
}

inline BinaryLabel atlas_label(std::span<const Vec3> pts, const BundleAtlas& atlas) {
  atlas.validate();
  const PointList r = resample_count(pts, atlas.point_count);
  for (const auto& b : atlas.bundles)
    for (const auto& proto : b.prototypes)
      if (mdf_distance(r, proto) <= b.theta) return BinaryLabel::positive;
  return BinaryLabel::negative;
}

// ---------------------------------------------------------------------------

/// Everything the four supervisors need for one subject.
struct SupervisorInputs {
  AifMasks aif;
  std::vector<BundleMasks> bundles;
  LabelVolume parcellation;
  std::vector<RegionQuery> queries;
  BundleAtlas atlas;
  double loop_threshold_deg = kDefaultLoopThresholdDeg;
};

/// All four labels for a streamline given as its 1 mm resampled points.
inline SupervisorVerdict supervise(std::span<const Vec3> pts, const SupervisorInputs& in) {
  SupervisorVerdict v;
  v.tq = region_query_label(pts, in.parcellation, in.queries);
  v.rbx = atlas_label(pts, in.atlas);
  v.ts = maskrule_label(pts, in.bundles);
  v.aif = aif_label(pts, in.aif, in.loop_threshold_deg);
  return v;
}

}  // namespace tractfilter
