#pragma once

// Subject directory layout:
//
//   tractogram.strm                 streamlines
//   t1w.vol                         raw T1-weighted intensities
//   sh.vol                          SH coefficients; when absent they are fit
//   dwi.vol, dwi.scheme             from the DWI and its gradient scheme
//   wmparc.vol                      parcellation
//   deep_wm.vol, ventricles.vol     AIF masks
//   bundles.json                    bundle names; masks in bundles/<name>_{mask,end0,end1}.vol
//   atlas.json                      atlas prototypes
//   queries.json                    region queries
//   labels.csv                      supervisor labels (written by `supervise` or imported)
//   truth.csv                       synthetic subjects only
//
// A dataset directory holds dataset.json ({"subjects": [ids]}) and one
// subdirectory per subject id.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractfilter/errors.hpp"
#include "tractfilter/io/formats.hpp"
#include "tractfilter/io/synth.hpp"
#include "tractfilter/sh.hpp"
#include "tractfilter/supervisors.hpp"
#include "tractfilter/training.hpp"

namespace tractfilter {

inline void to_json(nlohmann::json& j, const RegionQuery& q) {
  j = nlohmann::json{{"name", q.name}, {"endpoint_a", q.endpoint_a}, {"endpoint_b", q.endpoint_b},
                     {"include", q.include}, {"exclude", q.exclude}};
}
inline void from_json(const nlohmann::json& j, RegionQuery& q) {
  q.name = j.at("name").get<std::string>();
  q.endpoint_a = j.at("endpoint_a").get<std::vector<std::uint32_t>>();
  q.endpoint_b = j.at("endpoint_b").get<std::vector<std::uint32_t>>();
  q.include = j.value("include", std::vector<std::uint32_t>{});
  q.exclude = j.value("exclude", std::vector<std::uint32_t>{});
}

inline nlohmann::json points_json(const PointList& pts) {
  auto a = nlohmann::json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y(), p.z()});
  return a;
}
inline PointList points_from_json(const nlohmann::json& j) {
  PointList pts;
  for (const auto& p : j) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
  return pts;
}

inline void to_json(nlohmann::json& j, const BundleAtlas& a) {
  auto bundles = nlohmann::json::array();
  for (const auto& b : a.bundles) {
    auto protos = nlohmann::json::array();
    for (const auto& p : b.prototypes) protos.push_back(points_json(p));
    bundles.push_back({{"name", b.name}, {"theta", b.theta}, {"prototypes", protos}});
  }
  j = nlohmann::json{{"point_count", a.point_count}, {"bundles", bundles}};
}
inline void from_json(const nlohmann::json& j, BundleAtlas& a) {
  a.point_count = j.at("point_count").get<int>();
  a.bundles.clear();
  for (const auto& b : j.at("bundles")) {
    AtlasBundle ab;
    ab.name = b.at("name").get<std::string>();
    ab.theta = b.at("theta").get<double>();
    for (const auto& p : b.at("prototypes")) ab.prototypes.push_back(points_from_json(p));
    a.bundles.push_back(std::move(ab));
  }
}

}  // namespace tractfilter

namespace tractfilter::io {

namespace fs = std::filesystem;

inline nlohmann::json read_json(const fs::path& path) {
  const auto bytes = read_file(path.string());
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  const std::string s = j.dump(2) + "\n";
  write_file(path.string(), std::vector<char>(s.begin(), s.end()));
}

template <typename T>
T json_as(const fs::path& path) {
  const auto j = read_json(path);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::vector<std::string> read_dataset_subjects(const fs::path& root) {
  return json_as<nlohmann::json>(root / "dataset.json").at("subjects").get<std::vector<std::string>>();
}

inline void write_dataset_index(const fs::path& root, const std::vector<std::string>& ids) {
  write_json(root / "dataset.json", nlohmann::json{{"subjects", ids}});
}

inline SupervisorInputs load_supervisor_inputs(const fs::path& dir, double loop_threshold_deg,
                                               double ventricle_radius_mm) {
  SupervisorInputs in;
  const auto deep = read_volume<std::uint32_t>((dir / "deep_wm.vol").string());
  const auto vent = read_volume<std::uint32_t>((dir / "ventricles.vol").string());
  in.aif = AifMasks{deep, make_ventricle_zone(vent, ventricle_radius_mm)};
  for (const auto& name : json_as<std::vector<std::string>>(dir / "bundles.json")) {
    BundleMasks b;
    b.name = name;
    b.mask = read_volume<std::uint32_t>((dir / "bundles" / (name + "_mask.vol")).string());
    b.end0 = read_volume<std::uint32_t>((dir / "bundles" / (name + "_end0.vol")).string());
    b.end1 = read_volume<std::uint32_t>((dir / "bundles" / (name + "_end1.vol")).string());
    in.bundles.push_back(std::move(b));
  }
  in.parcellation = read_volume<std::uint32_t>((dir / "wmparc.vol").string());
  in.queries = json_as<std::vector<RegionQuery>>(dir / "queries.json");
  in.atlas = json_as<BundleAtlas>(dir / "atlas.json");
  in.loop_threshold_deg = loop_threshold_deg;
  return in;
}

/// SH coefficients from sh.vol, or fit from dwi.vol + dwi.scheme.
inline MultiChannelVolume load_sh(const fs::path& dir, int lmax, const std::vector<double>& shells) {
  if (fs::exists(dir / "sh.vol")) {
    auto sh = read_volume<float>((dir / "sh.vol").string());
    const int expected = static_cast<int>(shells.size()) * sh_coefficient_count(lmax);
    if (sh.channels != expected)
      throw FormatError((dir / "sh.vol").string() + ": " + std::to_string(sh.channels) + " channels, expected " +
                        std::to_string(expected));
    return sh;
  }
  const auto dwi = read_volume<float>((dir / "dwi.vol").string());
  const auto scheme = read_scheme((dir / "dwi.scheme").string());
  return fit_sh_per_shell(dwi, scheme, lmax, shells).coefficients;
}

/// Streamlines, labels and descriptor volumes of one subject. Labels come
/// from `labels_file` inside the directory.
inline SubjectData load_subject(const fs::path& dir, int lmax, const std::vector<double>& shells,
                                const std::string& labels_file = "labels.csv") {
  SubjectData s;
  s.id = dir.filename().string();
  s.streamlines = read_tractogram((dir / "tractogram.strm").string());
  s.verdicts = import_labels((dir / labels_file).string(), static_cast<long>(s.streamlines.size()));
  s.volumes.t1w = normalize_t1w(read_volume<float>((dir / "t1w.vol").string()));
  s.volumes.sh = load_sh(dir, lmax, shells);
  s.volumes.parcellation = read_volume<std::uint32_t>((dir / "wmparc.vol").string());
  if (!(s.volumes.t1w.grid == s.volumes.sh.grid) || !(s.volumes.t1w.grid == s.volumes.parcellation.grid))
    throw InvalidInput("subject '" + s.id + "' volumes do not share one grid");
  return s;
}

inline void write_synth_subject(const fs::path& dir, const synth::SynthSubject& s, int lmax,
                                const std::vector<double>& shells) {
  fs::create_directories(dir / "bundles");
  write_tractogram((dir / "tractogram.strm").string(), s.streamlines);
  write_volume((dir / "t1w.vol").string(), s.t1w);
  write_volume((dir / "dwi.vol").string(), s.dwi);
  write_scheme((dir / "dwi.scheme").string(), s.scheme);
  write_volume((dir / "sh.vol").string(), fit_sh_per_shell(s.dwi, s.scheme, lmax, shells).coefficients);
  write_volume((dir / "wmparc.vol").string(), s.parcellation);
  write_volume((dir / "deep_wm.vol").string(), s.deep_wm);
  write_volume((dir / "ventricles.vol").string(), s.ventricles);
  std::vector<std::string> names;
  for (const auto& b : s.bundles) {
    names.push_back(b.name);
    write_volume((dir / "bundles" / (b.name + "_mask.vol")).string(), b.mask);
    write_volume((dir / "bundles" / (b.name + "_end0.vol")).string(), b.end0);
    write_volume((dir / "bundles" / (b.name + "_end1.vol")).string(), b.end1);
  }
  write_json(dir / "bundles.json", names);
  write_json(dir / "atlas.json", s.atlas);
  write_json(dir / "queries.json", s.queries);
  write_label_csv((dir / "truth.csv").string(), s.truth);
  auto categories = nlohmann::json::array();
  for (auto c : s.categories) categories.push_back(synth::kCategoryNames[static_cast<std::size_t>(c)]);
  write_json(dir / "synth.json", {{"expected_agreement", s.expected_agreement}, {"categories", categories}});
}

}  // namespace tractfilter::io
