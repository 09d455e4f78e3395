#pragma once

// Little-endian byte encoding helpers shared by the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "tractfilter/errors.hpp"

namespace tractfilter::io {

class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes, std::string source = "<memory>")
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::string_view(bytes_.data() + pos_, m.size()) != m)
      throw FormatError(source_ + ": bad magic, expected '" + std::string(m) + "'", pos_);
    pos_ += m.size();
  }
  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n, "string");
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  /// Fail unless `n` more bytes are available; `what` names the payload.
  void need(std::uint64_t n, const std::string& what) const {
    if (remaining() < n)
      throw FormatError(source_ + ": truncated " + what + ": expected " + std::to_string(n) + " bytes, found " +
                            std::to_string(remaining()),
                        pos_);
  }
  void expect_end() const {
    if (remaining() != 0)
      throw FormatError(source_ + ": " + std::to_string(remaining()) + " trailing bytes after payload", pos_);
  }

  std::uint64_t remaining() const { return bytes_.size() - pos_; }
  std::uint64_t offset() const { return pos_; }
  const std::string& source() const { return source_; }

 private:
  std::vector<char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace tractfilter::io
