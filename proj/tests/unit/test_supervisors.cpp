#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "tractfilter/supervisors.hpp"

using namespace tractfilter;

namespace {

VolumeGrid grid10() {
  VolumeGrid g;
  g.dims = {10, 10, 10};
  return g;
}

LabelVolume box_mask(const VolumeGrid& g, Index3 lo, Index3 hi) {
  LabelVolume m(g, 1);
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) m.at(i, j, k) = 1;
  return m;
}

PointList line(Vec3 a, Vec3 b, int n) {
  PointList pts;
  for (int i = 0; i < n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / (n - 1)));
  return pts;
}

PointList spiral(double turns, double r0, double growth_per_rad) {
  PointList pts;
  for (int d = 0; d <= static_cast<int>(turns * 360); ++d) {
    const double a = d * std::numbers::pi / 180.0;
    const double r = r0 + growth_per_rad * a;
    pts.emplace_back(r * std::cos(a), r * std::sin(a), 0);
  }
  return pts;
}

AifMasks empty_aif(const VolumeGrid& g) { return {LabelVolume(g, 1), LabelVolume(g, 1)}; }

}  // namespace

TEST(Aif, StraightLineIsPositive) {
  const auto g = grid10();
  EXPECT_EQ(aif_label(line(Vec3(1, 1, 1), Vec3(8, 8, 8), 12), empty_aif(g)), BinaryLabel::positive);
}

TEST(Aif, LoopThresholdIsStrict) {
  VolumeGrid g;
  g.dims = {60, 60, 3};
  g.origin = Vec3(-30, -30, -1);
  const auto masks = empty_aif(g);
  EXPECT_EQ(aif_label(spiral(1.5, 10, 0.5), masks), BinaryLabel::negative);
  // A closed circle at 1 degree steps turns 360 degrees in floating point.
  PointList circle;
  for (int d = 0; d <= 361; ++d) {
    const double a = d * std::numbers::pi / 180.0;
    circle.emplace_back(20 * std::cos(a), 20 * std::sin(a), 0);
  }
  EXPECT_EQ(aif_label(circle, masks), BinaryLabel::positive);
}

TEST(Aif, EndpointRules) {
  const auto g = grid10();
  AifMasks m = empty_aif(g);
  m.ventricle_zone = make_ventricle_zone(box_mask(g, {8, 8, 8}, {8, 8, 8}), 1.0);
  EXPECT_EQ(aif_label(line(Vec3(1, 1, 1), Vec3(7, 8, 8), 5), m), BinaryLabel::negative);
  EXPECT_EQ(aif_label(line(Vec3(1, 1, 1), Vec3(6, 8, 8), 5), m), BinaryLabel::positive);
  m.deep_wm = box_mask(g, {0, 0, 0}, {1, 1, 1});
  EXPECT_EQ(aif_label(line(Vec3(1, 1, 1), Vec3(5, 5, 5), 5), m), BinaryLabel::negative);
  // An interior sample in deep white matter is allowed.
  EXPECT_EQ(aif_label(line(Vec3(3, 0, 0), Vec3(0, 3, 0), 7), m), BinaryLabel::positive);
  EXPECT_EQ(aif_label(line(Vec3(3, 3, 3), Vec3(12, 3, 3), 5), m), BinaryLabel::negative);
}

TEST(Aif, GridTranslationInvariant) {
  const auto g = grid10();
  AifMasks m{box_mask(g, {0, 0, 0}, {2, 2, 2}), box_mask(g, {6, 6, 6}, {7, 7, 7})};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.4, 6.4);
  for (int n = 0; n < 200; ++n) {
    const PointList pts = line(Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), 4);
    AifMasks shifted = m;
    shifted.deep_wm.grid.origin += Vec3(2, 2, 2);
    shifted.ventricle_zone.grid.origin += Vec3(2, 2, 2);
    PointList moved;
    for (const auto& p : pts) moved.push_back(p + Vec3(2, 2, 2));
    EXPECT_EQ(aif_label(pts, m), aif_label(moved, shifted));
  }
}

TEST(MaskRule, ContainmentAndEndpoints) {
  const auto g = grid10();
  BundleMasks b{"b", box_mask(g, {1, 1, 1}, {8, 3, 3}), box_mask(g, {1, 1, 1}, {2, 3, 3}),
                box_mask(g, {7, 1, 1}, {8, 3, 3})};
  const std::vector<BundleMasks> bundles{b};
  const PointList good = line(Vec3(1, 2, 2), Vec3(8, 2, 2), 8);
  EXPECT_EQ(maskrule_label(good, bundles), BinaryLabel::positive);
  PointList swapped(good.rbegin(), good.rend());
  EXPECT_EQ(maskrule_label(swapped, bundles), BinaryLabel::positive);
  PointList dented = good;
  dented[4] = Vec3(5, 6, 2);
  EXPECT_EQ(maskrule_label(dented, bundles), BinaryLabel::negative);
  EXPECT_EQ(maskrule_label(line(Vec3(1, 2, 2), Vec3(5, 2, 2), 5), bundles), BinaryLabel::negative);
  EXPECT_THROW(maskrule_label(good, std::span<const BundleMasks>{}), InvalidInput);
}

TEST(RegionQuery, Examples) {
  const auto g = grid10();
  LabelVolume parc(g, 1);
  for (int k = 0; k < 10; ++k)
    for (int j = 0; j < 10; ++j)
      for (int i = 0; i < 10; ++i) parc.at(i, j, k) = static_cast<std::uint32_t>(1 + i / 2);
  const std::vector<RegionQuery> q{{"q", {1}, {5}, {}, {}}};
  const PointList pts = line(Vec3(0, 5, 5), Vec3(9, 5, 5), 10);
  EXPECT_EQ(region_query_label(pts, parc, q), BinaryLabel::positive);
  EXPECT_EQ(region_query_label(line(Vec3(0, 5, 5), Vec3(7, 5, 5), 8), parc, q), BinaryLabel::negative);
  const std::vector<RegionQuery> excl{{"q", {1}, {5}, {}, {3}}};
  EXPECT_EQ(region_query_label(pts, parc, excl), BinaryLabel::negative);
  const std::vector<RegionQuery> incl{{"q", {1}, {5}, {3}, {}}};
  EXPECT_EQ(region_query_label(pts, parc, incl), BinaryLabel::positive);
  const PointList jump{Vec3(0, 5, 5), Vec3(9, 5, 5)};
  EXPECT_EQ(region_query_label(jump, parc, incl), BinaryLabel::negative);
  EXPECT_THROW(region_query_label(pts, parc, std::span<const RegionQuery>{}), InvalidInput);
}

TEST(RegionQuery, MatchesBruteForce) {
  const auto g = grid10();
  std::mt19937_64 rng(4);
  LabelVolume parc(g, 1);
  std::uniform_int_distribution<std::uint32_t> lab(1, 6);
  for (auto& x : parc.data) x = lab(rng);
  std::uniform_real_distribution<double> u(-0.4, 9.4);
  for (int n = 0; n < 300; ++n) {
    RegionQuery q{"q", {lab(rng), lab(rng)}, {lab(rng)}, {}, {}};
    if (n % 3 == 0) q.include = {lab(rng)};
    if (n % 4 == 0) q.exclude = {lab(rng)};
    PointList pts;
    for (int i = 0; i < 6; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    std::vector<std::uint32_t> labels;
    for (const auto& p : pts) {
      Index3 idx;
      for (int a = 0; a < 3; ++a) idx[a] = static_cast<int>(std::lround(p[a]));
      labels.push_back(parc.at(idx[0], idx[1], idx[2]));
    }
    auto in = [](const std::vector<std::uint32_t>& set, std::uint32_t x) {
      return std::find(set.begin(), set.end(), x) != set.end();
    };
    bool expect = (in(q.endpoint_a, labels.front()) && in(q.endpoint_b, labels.back())) ||
                  (in(q.endpoint_a, labels.back()) && in(q.endpoint_b, labels.front()));
    for (auto l : labels) expect = expect && !in(q.exclude, l);
    for (auto r : q.include) expect = expect && in(labels, r);
    const std::vector<RegionQuery> qs{q};
    EXPECT_EQ(region_query_label(pts, parc, qs), label_from(expect));
  }
}

TEST(Mdf, Examples) {
  const PointList a = line(Vec3(0, 0, 0), Vec3(10, 0, 0), 11);
  const PointList rev(a.rbegin(), a.rend());
  EXPECT_EQ(mdf_distance(a, a), 0.0);
  EXPECT_EQ(mdf_distance(a, rev), 0.0);
  EXPECT_NEAR(mdf_distance(a, line(Vec3(0, 3, 4), Vec3(10, 3, 4), 11)), 5.0, 1e-12);
  EXPECT_THROW(mdf_distance(a, line(Vec3(0, 0, 0), Vec3(1, 0, 0), 3)), InvalidInput);
}

TEST(Atlas, AcceptanceThreshold) {
  BundleAtlas atlas;
  atlas.point_count = 20;
  atlas.bundles.push_back({"b", 2.0, {line(Vec3(0, 0, 0), Vec3(19, 0, 0), 20)}});
  EXPECT_EQ(atlas_label(line(Vec3(0, 0, 0), Vec3(19, 0, 0), 50), atlas), BinaryLabel::positive);
  EXPECT_EQ(atlas_label(line(Vec3(0, 2, 0), Vec3(19, 2, 0), 7), atlas), BinaryLabel::positive);
  EXPECT_EQ(atlas_label(line(Vec3(0, 2.01, 0), Vec3(19, 2.01, 0), 7), atlas), BinaryLabel::negative);
  EXPECT_EQ(atlas_label(line(Vec3(0, 9, 0), Vec3(19, 9, 0), 7), atlas), BinaryLabel::negative);
}
