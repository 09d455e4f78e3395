#pragma once

// Subject-level splitting and hierarchical subject -> class -> streamline
// sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tractfilter/ensemble.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/rng.hpp"

namespace tractfilter {

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

struct SubjectPools {
  std::string id;
  std::array<std::vector<int>, CompositionClass::kCount> pools;  // streamline ids per class

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& p : pools) t += p.size();
    return t;
  }
};

struct DatasetIndex {
  std::vector<SubjectPools> subjects;

  static SubjectPools index_subject(std::string id, std::span<const SupervisorVerdict> verdicts) {
    SubjectPools s;
    s.id = std::move(id);
    for (std::size_t i = 0; i < verdicts.size(); ++i)
      s.pools[static_cast<std::size_t>(compose(verdicts[i]).index())].push_back(static_cast<int>(i));
    return s;
  }
};

struct Sample {
  int subject = 0;       // index into DatasetIndex::subjects
  int composition = 0;   // CompositionClass index
  int streamline = 0;    // id within the subject
  bool operator==(const Sample&) const = default;
};

/// Draws are i.i.d.: subject proportional to its streamline count, class
/// uniform over the subject's non-empty classes, streamline uniform in the
/// pool.
inline std::vector<Sample> hierarchical_sample(const DatasetIndex& idx, std::size_t n, std::uint64_t seed) {
  std::vector<double> cdf;
  double acc = 0.0;
  std::vector<std::vector<int>> nonempty(idx.subjects.size());
  for (std::size_t s = 0; s < idx.subjects.size(); ++s) {
    acc += static_cast<double>(idx.subjects[s].total());
    cdf.push_back(acc);
    for (int c = 0; c < CompositionClass::kCount; ++c)
      if (!idx.subjects[s].pools[static_cast<std::size_t>(c)].empty()) nonempty[s].push_back(c);
  }
  if (acc <= 0.0) throw InvalidInput("hierarchical sampling needs at least one non-empty pool");

  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng) * acc;
    const auto subj = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const auto& classes = nonempty[std::min(subj, cdf.size() - 1)];
    const int cls = classes[uniform_index(rng, classes.size())];
    const auto& pool = idx.subjects[subj].pools[static_cast<std::size_t>(cls)];
    out.push_back(Sample{static_cast<int>(subj), cls, pool[uniform_index(rng, pool.size())]});
  }
  return out;
}

/// Contiguous chunks of `batch_size`; the last one may be shorter.
inline std::vector<std::span<const Sample>> epoch_batches(std::span<const Sample> samples, std::size_t batch_size) {
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  std::vector<std::span<const Sample>> out;
  for (std::size_t i = 0; i < samples.size(); i += batch_size)
    out.push_back(samples.subspan(i, std::min(batch_size, samples.size() - i)));
  return out;
}

struct SplitRatios {
  double train = 0.60;
  double validation = 0.25;
  double test = 0.15;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// Shuffle subjects with `seed`; validation and test sizes are floor(n *
/// ratio) but at least one each, and the remainder goes to training.
inline Split split_subjects(std::vector<std::string> subjects, const SplitRatios& ratios, std::uint64_t seed) {
  if (subjects.size() < 3) throw InvalidInput("splitting needs at least 3 subjects");
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0 || ratios.validation < 0 || ratios.test < 0)
    throw InvalidInput("split ratios must be non-negative and sum to 1");

  Rng rng(seed);
  // Fisher-Yates with our own index draw so the permutation is stdlib-independent.
  for (std::size_t i = subjects.size() - 1; i > 0; --i) std::swap(subjects[i], subjects[uniform_index(rng, i + 1)]);

  const auto n = static_cast<double>(subjects.size());
  // The epsilon guards against 20 * 0.15 = 2.9999999999999996.
  auto count = [&](double r) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * r + 1e-9))); };
  const std::size_t n_val = count(ratios.validation);
  const std::size_t n_test = count(ratios.test);
  if (n_val + n_test >= subjects.size()) throw InvalidInput("not enough subjects for the requested split");

  Split s;
  s.validation.assign(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(subjects.begin() + static_cast<std::ptrdiff_t>(n_val),
                subjects.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(subjects.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), subjects.end());
  return s;
}

}  // namespace tractfilter
