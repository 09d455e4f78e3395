#pragma once

// On-disk formats. All binary formats are little-endian.
//
// Tractogram (.strm)
//   "STRM" | u32 version = 1 | u32 streamline count
//   per streamline: u32 point count | count * (f32 x, f32 y, f32 z)
//
// Volume (.vol)
//   "VOL1" | u8 dtype (0 = f32, 1 = u32 label) | u32 channels | 3 * u32 dims
//   | 3 * f32 spacing | 3 * f32 origin | voxels x-fastest, channels interleaved
//
// Label CSV
//   header "index,tq,rbx,ts,aif"; one row per streamline, dense ascending
//   0-based index, tokens p/n
//
// Gradient scheme (text)
//   one measurement per line: "x y z b"; blank lines and '#' comments skipped
//
// Descriptor dump (.dsc)
//   "DSC1" | u32 version = 1 | u32 record count | u32 N
//   | 5 * u32 row counts (xyz, lm, sh, t1w, wmparc)
//   per record: u32 valid_len | the five matrices as row-major f32

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "tractfilter/descriptors.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/io/binary.hpp"
#include "tractfilter/sh.hpp"
#include "tractfilter/streamline.hpp"
#include "tractfilter/supervisors.hpp"
#include "tractfilter/volume.hpp"

namespace tractfilter::io {

inline constexpr std::uint32_t kTractogramVersion = 1;
inline constexpr std::uint32_t kDescriptorDumpVersion = 1;

// ---------------------------------------------------------------------------
// Tractogram

inline std::vector<char> encode_tractogram(const std::vector<Streamline>& streamlines) {
  ByteWriter w;
  w.magic("STRM");
  w.u32(kTractogramVersion);
  w.u32(static_cast<std::uint32_t>(streamlines.size()));
  for (const auto& s : streamlines) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (const auto& p : s.points())
      for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(p[a]));
  }
  return w.bytes();
}

inline std::vector<Streamline> decode_tractogram(std::vector<char> bytes, const std::string& source = "<memory>") {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("STRM");
  const auto version = r.u32();
  if (version != kTractogramVersion)
    throw FormatError(source + ": unsupported tractogram version " + std::to_string(version), r.offset() - 4);
  const auto count = r.u32();
  std::vector<Streamline> out;
  out.reserve(count);
  for (std::uint32_t s = 0; s < count; ++s) {
    const auto start = r.offset();
    const auto n = r.u32();
    r.need(static_cast<std::uint64_t>(n) * 12, "streamline " + std::to_string(s) + " payload");
    PointList pts(n);
    for (auto& p : pts)
      for (int a = 0; a < 3; ++a) p[a] = r.f32();
    try {
      out.emplace_back(std::move(pts));
    } catch (const InvalidInput& e) {
      throw FormatError(source + ": streamline " + std::to_string(s) + ": " + e.what(), start);
    }
  }
  r.expect_end();
  return out;
}

inline void write_tractogram(const std::string& path, const std::vector<Streamline>& s) {
  write_file(path, encode_tractogram(s));
}
inline std::vector<Streamline> read_tractogram(const std::string& path) {
  return decode_tractogram(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Volume

template <typename T>
constexpr std::uint8_t volume_dtype() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, std::uint32_t>, "volume files hold f32 or u32 data");
  return std::is_same_v<T, float> ? 0 : 1;
}

template <typename T>
std::vector<char> encode_volume(const Volume<T>& v) {
  ByteWriter w;
  w.magic("VOL1");
  w.u8(volume_dtype<T>());
  w.u32(static_cast<std::uint32_t>(v.channels));
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(v.grid.dims[a]));
  for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(v.grid.spacing[a]));
  for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(v.grid.origin[a]));
  for (const T& x : v.data) {
    if constexpr (std::is_same_v<T, float>) w.f32(x);
    else w.u32(x);
  }
  return w.bytes();
}

template <typename T>
Volume<T> decode_volume(std::vector<char> bytes, const std::string& source = "<memory>") {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("VOL1");
  const auto dtype = r.u8();
  if (dtype != volume_dtype<T>())
    throw FormatError(source + ": volume dtype " + std::to_string(dtype) + " where " +
                          std::to_string(volume_dtype<T>()) + " was expected",
                      r.offset() - 1);
  const auto channels = r.u32();
  VolumeGrid g;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(r.u32());
  for (int a = 0; a < 3; ++a) g.spacing[a] = r.f32();
  for (int a = 0; a < 3; ++a) g.origin[a] = r.f32();
  try {
    g.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(source + ": " + e.what(), r.offset());
  }
  if (channels < 1) throw FormatError(source + ": volume declares zero channels", r.offset());
  const std::uint64_t expected = static_cast<std::uint64_t>(channels) * g.voxel_count() * 4;
  if (r.remaining() != expected)
    throw FormatError(source + ": volume payload size mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(r.remaining()),
                      r.offset());
  Volume<T> v(g, static_cast<int>(channels));
  for (auto& x : v.data) {
    if constexpr (std::is_same_v<T, float>) x = r.f32();
    else x = r.u32();
  }
  return v;
}

template <typename T>
void write_volume(const std::string& path, const Volume<T>& v) {
  write_file(path, encode_volume(v));
}
template <typename T>
Volume<T> read_volume(const std::string& path) {
  return decode_volume<T>(read_file(path), path);
}

// ---------------------------------------------------------------------------
// Label CSV

inline constexpr const char* kLabelCsvHeader = "index,tq,rbx,ts,aif";

inline std::string encode_label_csv(const std::vector<SupervisorVerdict>& verdicts) {
  std::string out = std::string(kLabelCsvHeader) + "\n";
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    out += std::to_string(i);
    for (int s = 0; s < kSupervisorCount; ++s) {
      out += ',';
      out += to_char(verdicts[i][s]);
    }
    out += '\n';
  }
  return out;
}

/// `expected_count` < 0 skips the count check. Offsets in errors are 1-based
/// line numbers.
inline std::vector<SupervisorVerdict> decode_label_csv(const std::string& text, long expected_count = -1,
                                                       const std::string& source = "<memory>") {
  std::istringstream in(text);
  std::string line;
  std::uint64_t lineno = 0;
  if (!std::getline(in, line)) throw FormatError(source + ": empty label file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLabelCsvHeader) throw FormatError(source + ": bad header '" + line + "'", lineno);

  std::vector<SupervisorVerdict> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw FormatError(source + ": row " + std::to_string(lineno) + " needs 5 fields", lineno);
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size())
      throw FormatError(source + ": row " + std::to_string(lineno) + " has a bad index '" + fields[0] + "'", lineno);
    if (index != out.size())
      throw FormatError(source + ": row " + std::to_string(lineno) + " index " + std::to_string(index) +
                            " breaks the dense ascending order",
                        lineno);
    SupervisorVerdict v;
    for (int s = 0; s < kSupervisorCount; ++s) {
      const auto& tok = fields[static_cast<std::size_t>(s) + 1];
      if (tok != "p" && tok != "n")
        throw FormatError(source + ": row " + std::to_string(lineno) + " has unknown label token '" + tok + "'",
                          lineno);
      v[s] = label_from(tok == "p");
    }
    out.push_back(v);
  }
  if (expected_count >= 0 && out.size() != static_cast<std::size_t>(expected_count))
    throw FormatError(source + ": " + std::to_string(out.size()) + " label rows for " +
                          std::to_string(expected_count) + " streamlines",
                      lineno);
  return out;
}

inline void write_label_csv(const std::string& path, const std::vector<SupervisorVerdict>& v) {
  const std::string s = encode_label_csv(v);
  write_file(path, std::vector<char>(s.begin(), s.end()));
}

/// Import externally computed labels.
inline std::vector<SupervisorVerdict> import_labels(const std::string& path, long expected_count = -1) {
  const auto bytes = read_file(path);
  return decode_label_csv(std::string(bytes.begin(), bytes.end()), expected_count, path);
}

// ---------------------------------------------------------------------------
// Gradient scheme

inline std::string encode_scheme(const GradientScheme& g) {
  std::ostringstream out;
  out.precision(9);
  for (std::size_t i = 0; i < g.size(); ++i)
    out << g.directions[i].x() << ' ' << g.directions[i].y() << ' ' << g.directions[i].z() << ' ' << g.bvalues[i]
        << '\n';
  return out.str();
}

inline GradientScheme decode_scheme(const std::string& text, const std::string& source = "<memory>") {
  GradientScheme g;
  std::istringstream in(text);
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double x, y, z, b;
    if (!(ls >> x)) continue;
    if (!(ls >> y >> z >> b)) throw FormatError(source + ": scheme line needs 'x y z b'", lineno);
    Vec3 d(x, y, z);
    // Text round-off; renormalize.
    if (d.norm() > 0) d.normalize();
    g.directions.push_back(d);
    g.bvalues.push_back(b);
  }
  return g;
}

inline GradientScheme read_scheme(const std::string& path) {
  const auto bytes = read_file(path);
  return decode_scheme(std::string(bytes.begin(), bytes.end()), path);
}

inline void write_scheme(const std::string& path, const GradientScheme& g) {
  const std::string s = encode_scheme(g);
  write_file(path, std::vector<char>(s.begin(), s.end()));
}

// ---------------------------------------------------------------------------
// Descriptor dump

inline std::vector<char> encode_descriptors(const std::vector<DescriptorSet>& sets) {
  ByteWriter w;
  w.magic("DSC1");
  w.u32(kDescriptorDumpVersion);
  w.u32(static_cast<std::uint32_t>(sets.size()));
  const int n = sets.empty() ? 0 : sets[0].length();
  w.u32(static_cast<std::uint32_t>(n));
  for (int k = 0; k < kDescriptorCount; ++k)
    w.u32(sets.empty() ? 0u : static_cast<std::uint32_t>(sets[0].channels[static_cast<std::size_t>(k)].rows()));
  for (const auto& d : sets) {
    w.u32(static_cast<std::uint32_t>(d.valid_len));
    for (int k = 0; k < kDescriptorCount; ++k) {
      const auto& m = d.channels[static_cast<std::size_t>(k)];
      if (m.rows() != sets[0].channels[static_cast<std::size_t>(k)].rows() || m.cols() != n)
        throw ShapeError("descriptor shapes differ between records");
      for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(m.data()[i]);
    }
  }
  return w.bytes();
}

inline std::vector<DescriptorSet> decode_descriptors(std::vector<char> bytes, const std::string& source = "<memory>") {
  ByteReader r(std::move(bytes), source);
  r.expect_magic("DSC1");
  const auto version = r.u32();
  if (version != kDescriptorDumpVersion)
    throw FormatError(source + ": unsupported descriptor dump version " + std::to_string(version), r.offset() - 4);
  const auto count = r.u32();
  const auto n = r.u32();
  std::array<std::uint32_t, kDescriptorCount> rows{};
  std::uint64_t per_record = 4;
  for (auto& x : rows) {
    x = r.u32();
    per_record += static_cast<std::uint64_t>(x) * n * 4;
  }
  if (r.remaining() != per_record * count)
    throw FormatError(source + ": descriptor payload size mismatch: expected " + std::to_string(per_record * count) +
                          " bytes, found " + std::to_string(r.remaining()),
                      r.offset());
  std::vector<DescriptorSet> out(count);
  for (auto& d : out) {
    d.valid_len = static_cast<int>(r.u32());
    for (int k = 0; k < kDescriptorCount; ++k) {
      auto& m = d.channels[static_cast<std::size_t>(k)];
      m.resize(rows[static_cast<std::size_t>(k)], n);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
    }
  }
  return out;
}

}  // namespace tractfilter::io
