#pragma once

// The five fixed-shape per-streamline network inputs and the
// noise-substitution primitive used for ablations.

#include <array>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "tractfilter/errors.hpp"
#include "tractfilter/rng.hpp"
#include "tractfilter/streamline.hpp"
#include "tractfilter/volume.hpp"

namespace tractfilter {

enum class DescriptorKind : int { xyz = 0, lm = 1, sh = 2, t1w = 3, wmparc = 4 };
inline constexpr int kDescriptorCount = 5;
inline constexpr std::array<const char*, kDescriptorCount> kDescriptorNames{"xyz", "lm", "sh", "t1w", "wmparc"};

/// Subset of descriptors, bit i set for DescriptorKind i.
using DescriptorSelection = std::bitset<kDescriptorCount>;

inline DescriptorSelection parse_selection(std::string_view text) {
  DescriptorSelection sel;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    bool found = false;
    for (int i = 0; i < kDescriptorCount; ++i) {
      if (item == kDescriptorNames[static_cast<std::size_t>(i)]) {
        sel.set(static_cast<std::size_t>(i));
        found = true;
      }
    }
    if (!found) throw InvalidInput("unknown descriptor '" + item + "'");
  }
  return sel;
}

inline std::string selection_string(DescriptorSelection sel) {
  std::string out;
  for (int i = 0; i < kDescriptorCount; ++i) {
    if (!sel.test(static_cast<std::size_t>(i))) continue;
    if (!out.empty()) out += ',';
    out += kDescriptorNames[static_cast<std::size_t>(i)];
  }
  return out;
}

using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DescriptorSet {
  int valid_len = 0;
  std::array<DescriptorMatrix, kDescriptorCount> channels;

  DescriptorMatrix& operator[](DescriptorKind k) { return channels[static_cast<std::size_t>(k)]; }
  const DescriptorMatrix& operator[](DescriptorKind k) const { return channels[static_cast<std::size_t>(k)]; }
  int length() const { return static_cast<int>(channels[0].cols()); }
};

struct DescriptorConfig {
  int n = 100;
  int k = 20;
  double step = 1.0;
  Box bbox;
  std::vector<std::uint32_t> region_table;
  bool landmarks_on_full = false;
  bool standardize = false;

  /// Row count of each descriptor for `sh_channels` SH inputs.
  std::array<int, kDescriptorCount> channel_counts(int sh_channels) const {
    return {3, k, sh_channels, 1, static_cast<int>(region_table.size())};
  }
};

struct SubjectVolumes {
  ScalarVolume t1w;        // already min-max normalized
  MultiChannelVolume sh;   // concatenated per-shell SH coefficients
  LabelVolume parcellation;
};

/// W(i, j) = 1 when real sample j lies in region_table[i]. Samples outside
/// the grid or in regions absent from the table give an all-zero column.
inline DescriptorMatrix one_hot_parcellation(const ResampledStreamline& r, const LabelVolume& parc,
                                             std::span<const std::uint32_t> region_table) {
  std::unordered_map<std::uint32_t, int> row_of;
  for (std::size_t i = 0; i < region_table.size(); ++i) row_of.emplace(region_table[i], static_cast<int>(i));
  DescriptorMatrix w = DescriptorMatrix::Zero(static_cast<Eigen::Index>(region_table.size()), r.size());
  for (int j = 0; j < r.valid_len; ++j) {
    const auto idx = nearest_voxel(parc.grid, r.points[static_cast<std::size_t>(j)]);
    if (!idx) continue;
    const auto it = row_of.find(parc.at((*idx)[0], (*idx)[1], (*idx)[2]));
    if (it != row_of.end()) w(it->second, j) = 1.0f;
  }
  return w;
}

namespace detail {

// Pull `p` onto the nearest point of the voxel-center hull so interpolation
// near the rim never fails.
inline Vec3 clamp_to_centers(const VolumeGrid& g, const Vec3& p) {
  Vec3 v = world_to_voxel(g, p);
  for (int a = 0; a < 3; ++a) v[a] = std::clamp(v[a], 0.0, static_cast<double>(g.dims[a] - 1));
  return voxel_to_world(g, v);
}

inline void standardize_real(DescriptorMatrix& m, int valid_len) {
  if (valid_len < 1 || m.size() == 0) return;
  auto block = m.leftCols(valid_len);
  const double mean = block.cast<double>().mean();
  const double var = (block.cast<double>().array() - mean).square().mean();
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  block = ((block.cast<double>().array() - mean) / sd).cast<float>().matrix();
}

}  // namespace detail

/// Assemble all five descriptors for one streamline.
inline DescriptorSet build_descriptors(const Streamline& s, const SubjectVolumes& vols, const DescriptorConfig& cfg) {
  const Streamline stepped = resample_fixed_step(s, cfg.step);
  const ResampledStreamline r = truncate_pad(stepped, cfg.n, cfg.step);
  const auto real = r.real();

  bool any_inside = false;
  for (const auto& p : real) any_inside = any_inside || (in_range(vols.sh.grid, p) && in_range(vols.t1w.grid, p));
  if (!any_inside) throw Unsampleable("streamline lies entirely outside the subject volumes");

  DescriptorSet d;
  d.valid_len = r.valid_len;
  const int n = cfg.n;

  auto& xyz = d[DescriptorKind::xyz];
  xyz = DescriptorMatrix::Zero(3, n);
  for (int i = 0; i < r.valid_len; ++i)
    xyz.col(i) = normalize_point(cfg.bbox.clamp(real[static_cast<std::size_t>(i)]), cfg.bbox).cast<float>();

  const auto lm = landmark_descriptor(r, cfg.k, cfg.landmarks_on_full ? stepped.points() : real);
  d[DescriptorKind::lm] = lm.values.cast<float>();

  auto& sh = d[DescriptorKind::sh];
  sh = DescriptorMatrix::Zero(vols.sh.channels, n);
  auto& t1 = d[DescriptorKind::t1w];
  t1 = DescriptorMatrix::Zero(1, n);
  for (int i = 0; i < r.valid_len; ++i) {
    const Vec3& p = real[static_cast<std::size_t>(i)];
    sh.col(i) = trilinear_sample(vols.sh, detail::clamp_to_centers(vols.sh.grid, p)).cast<float>();
    t1(0, i) = static_cast<float>(trilinear_sample_scalar(vols.t1w, detail::clamp_to_centers(vols.t1w.grid, p)));
  }

  d[DescriptorKind::wmparc] = one_hot_parcellation(r, vols.parcellation, cfg.region_table);

  if (cfg.standardize) {
    detail::standardize_real(d[DescriptorKind::lm], r.valid_len);
    detail::standardize_real(d[DescriptorKind::sh], r.valid_len);
  }
  return d;
}

/// Replace the selected descriptors (padding included) with i.i.d. standard
/// normal draws. Descriptors are filled in kind order from one generator.
inline DescriptorSet noise_substitute(DescriptorSet d, DescriptorSelection which, std::uint64_t seed) {
  if (which.none()) return d;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < kDescriptorCount; ++k) {
    if (!which.test(static_cast<std::size_t>(k))) continue;
    auto& m = d.channels[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(normal(rng));
  }
  return d;
}

}  // namespace tractfilter
