#pragma once

// Composition of the four supervisor labels into 16 classes and the
// POS / NEG / U mapping.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "tractfilter/errors.hpp"
#include "tractfilter/supervisors.hpp"

namespace tractfilter {

/// One of the 16 joint outcomes. Bit i (from the most significant, TQ first)
/// is set when supervisor i is positive, so code() spells the letters in
/// TQ, RBX, TS, AIF order.
class CompositionClass {
 public:
  static constexpr int kCount = 16;

  constexpr CompositionClass() = default;
  static constexpr CompositionClass from_index(int index) {
    CompositionClass c;
    c.bits_ = static_cast<std::uint8_t>(index & 0xF);
    return c;
  }
  static CompositionClass from_code(std::string_view code) {
    if (code.size() != 4) throw InvalidInput("composition code must have 4 letters");
    int bits = 0;
    for (char ch : code) {
      if (ch != 'p' && ch != 'n') throw InvalidInput("composition code letters must be 'p' or 'n'");
      bits = (bits << 1) | (ch == 'p' ? 1 : 0);
    }
    return from_index(bits);
  }

  constexpr int index() const noexcept { return bits_; }
  constexpr bool positive(Supervisor s) const noexcept { return (bits_ >> (3 - static_cast<int>(s))) & 1; }

  std::string code() const {
    std::string s(4, 'n');
    for (int i = 0; i < 4; ++i)
      if (positive(static_cast<Supervisor>(i))) s[static_cast<std::size_t>(i)] = 'p';
    return s;
  }

  SupervisorVerdict verdict() const {
    SupervisorVerdict v;
    for (int i = 0; i < 4; ++i) v[i] = label_from(positive(static_cast<Supervisor>(i)));
    return v;
  }

  constexpr bool operator==(const CompositionClass&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

enum class TriClass : int { pos = 0, neg = 1, u = 2 };
inline constexpr int kTriClassCount = 3;
inline constexpr std::array<const char*, kTriClassCount> kTriClassNames{"POS", "NEG", "U"};

inline const char* to_string(TriClass t) { return kTriClassNames[static_cast<std::size_t>(t)]; }

inline CompositionClass compose(const SupervisorVerdict& v) {
  int bits = 0;
  for (int i = 0; i < 4; ++i) bits = (bits << 1) | (v[i] == BinaryLabel::positive ? 1 : 0);
  return CompositionClass::from_index(bits);
}

/// A negative AIF label overrides everything; otherwise a positive atlas or
/// mask-rule label gives POS and the rest is inconclusive.
inline TriClass map_to_triclass(CompositionClass c) {
  if (!c.positive(Supervisor::aif)) return TriClass::neg;
  if (c.positive(Supervisor::rbx) || c.positive(Supervisor::ts)) return TriClass::pos;
  return TriClass::u;
}

/// Combinations expected mainly from processing inaccuracies.
inline bool is_borderline(CompositionClass c) {
  static constexpr std::array<std::string_view, 6> kBorderline{"nnpp", "ppnn", "pppn", "npnn", "nnpn", "nppn"};
  const std::string code = c.code();
  for (auto b : kBorderline)
    if (code == b) return true;
  return false;
}

struct ClassDistribution {
  std::array<std::uint64_t, CompositionClass::kCount> composition{};
  std::array<std::uint64_t, kTriClassCount> triclass{};
  std::uint64_t total = 0;
};

inline ClassDistribution class_distribution(std::span<const SupervisorVerdict> verdicts) {
  ClassDistribution d;
  for (const auto& v : verdicts) ++d.composition[static_cast<std::size_t>(compose(v).index())];
  for (int i = 0; i < CompositionClass::kCount; ++i)
    d.triclass[static_cast<std::size_t>(map_to_triclass(CompositionClass::from_index(i)))] +=
        d.composition[static_cast<std::size_t>(i)];
  d.total = verdicts.size();
  return d;
}

}  // namespace tractfilter
