#pragma once

// Per-branch and aggregated classification metrics.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tractfilter/ensemble.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/supervisors.hpp"

namespace tractfilter {

using Confusion2 = std::array<std::array<std::uint64_t, 2>, 2>;  // [truth][prediction]

struct BranchMetrics {
  std::optional<double> loss;  // mean cross-entropy, when logits were available
  double accuracy = 0.0;
  std::optional<double> precision;  // undefined without positive predictions
  std::optional<double> recall;     // undefined without positive truth
  Confusion2 confusion{};
};

struct ClassMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::uint64_t support = 0;
};

struct MetricsReport {
  std::uint64_t count = 0;
  std::array<BranchMetrics, kSupervisorCount> branches;
  double accuracy_16 = 0.0;
  double accuracy_3 = 0.0;
  double mean_branch_accuracy = 0.0;
  std::array<ClassMetrics, CompositionClass::kCount> composition;
  std::array<ClassMetrics, kTriClassCount> triclass;
  std::array<std::array<std::uint64_t, CompositionClass::kCount>, CompositionClass::kCount> confusion_16{};
  std::array<std::array<std::uint64_t, kTriClassCount>, kTriClassCount> confusion_3{};
};

namespace detail {

inline std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

template <std::size_t N>
std::array<ClassMetrics, N> class_metrics(const std::array<std::array<std::uint64_t, N>, N>& c) {
  std::array<ClassMetrics, N> out;
  for (std::size_t k = 0; k < N; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < N; ++j) {
      row += c[k][j];
      col += c[j][k];
    }
    out[k].support = row;
    out[k].recall = ratio(c[k][k], row);
    out[k].precision = ratio(c[k][k], col);
  }
  return out;
}

inline void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidInput("prediction and truth counts differ");
}

}  // namespace detail

inline std::array<BranchMetrics, kSupervisorCount> branch_metrics(std::span<const SupervisorVerdict> pred,
                                                                  std::span<const SupervisorVerdict> truth) {
  detail::check_lengths(pred.size(), truth.size());
  std::array<BranchMetrics, kSupervisorCount> out;
  for (int o = 0; o < kSupervisorCount; ++o) {
    auto& m = out[static_cast<std::size_t>(o)];
    for (std::size_t i = 0; i < pred.size(); ++i)
      ++m.confusion[static_cast<std::size_t>(truth[i][o])][static_cast<std::size_t>(pred[i][o])];
    const auto& c = m.confusion;
    m.accuracy = pred.empty() ? 0.0 : static_cast<double>(c[0][0] + c[1][1]) / static_cast<double>(pred.size());
    m.precision = detail::ratio(c[1][1], c[0][1] + c[1][1]);
    m.recall = detail::ratio(c[1][1], c[1][0] + c[1][1]);
  }
  return out;
}

struct AggregateAccuracy {
  double accuracy_16 = 0.0;
  double accuracy_3 = 0.0;
};

inline AggregateAccuracy aggregate_accuracy(std::span<const SupervisorVerdict> pred,
                                            std::span<const SupervisorVerdict> truth) {
  detail::check_lengths(pred.size(), truth.size());
  if (pred.empty()) return {};
  std::uint64_t hit16 = 0, hit3 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = compose(pred[i]), t = compose(truth[i]);
    hit16 += p == t;
    hit3 += map_to_triclass(p) == map_to_triclass(t);
  }
  const double n = static_cast<double>(pred.size());
  return {static_cast<double>(hit16) / n, static_cast<double>(hit3) / n};
}

/// Full report; `branch_losses` are mean cross-entropies when available.
inline MetricsReport make_report(std::span<const SupervisorVerdict> pred, std::span<const SupervisorVerdict> truth,
                                 std::optional<std::array<double, kSupervisorCount>> branch_losses = std::nullopt) {
  MetricsReport r;
  r.count = pred.size();
  r.branches = branch_metrics(pred, truth);
  const auto agg = aggregate_accuracy(pred, truth);
  r.accuracy_16 = agg.accuracy_16;
  r.accuracy_3 = agg.accuracy_3;
  for (int o = 0; o < kSupervisorCount; ++o) {
    r.mean_branch_accuracy += r.branches[static_cast<std::size_t>(o)].accuracy / kSupervisorCount;
    if (branch_losses) r.branches[static_cast<std::size_t>(o)].loss = (*branch_losses)[static_cast<std::size_t>(o)];
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = compose(pred[i]), t = compose(truth[i]);
    ++r.confusion_16[static_cast<std::size_t>(t.index())][static_cast<std::size_t>(p.index())];
    ++r.confusion_3[static_cast<std::size_t>(map_to_triclass(t))][static_cast<std::size_t>(map_to_triclass(p))];
  }
  r.composition = detail::class_metrics(r.confusion_16);
  r.triclass = detail::class_metrics(r.confusion_3);
  return r;
}

}  // namespace tractfilter
