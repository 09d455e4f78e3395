#pragma once

// Retraining with subsets of the inputs replaced by noise.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tractfilter/descriptors.hpp"
#include "tractfilter/metrics.hpp"
#include "tractfilter/training.hpp"

namespace tractfilter {

enum class AblationMode { leave_one_out, single_input, both };

struct AblationConfiguration {
  std::string name;              // "baseline", "without:<d>" or "only:<d>"
  DescriptorSelection substitute;  // descriptors replaced by noise
};

/// Baseline first, then the leave-one-out and/or single-input cases in
/// descriptor order.
inline std::vector<AblationConfiguration> ablation_configurations(AblationMode mode) {
  std::vector<AblationConfiguration> out{{"baseline", {}}};
  if (mode != AblationMode::single_input)
    for (int k = 0; k < kDescriptorCount; ++k) {
      DescriptorSelection s;
      s.set(static_cast<std::size_t>(k));
      out.push_back({std::string("without:") + kDescriptorNames[static_cast<std::size_t>(k)], s});
    }
  if (mode != AblationMode::leave_one_out)
    for (int k = 0; k < kDescriptorCount; ++k) {
      DescriptorSelection s;
      s.set();
      s.reset(static_cast<std::size_t>(k));
      out.push_back({std::string("only:") + kDescriptorNames[static_cast<std::size_t>(k)], s});
    }
  return out;
}

struct SubjectSplitView {
  std::vector<const SubjectData*> train, validation, test;
};

struct AblationRun {
  AblationConfiguration configuration;
  int realization = 0;
  MetricsReport test;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x / static_cast<double>(xs.size());
  for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean) / static_cast<double>(xs.size());
  s.stddev = std::sqrt(s.stddev);
  return s;
}

struct AblationSummary {
  AblationConfiguration configuration;
  Summary accuracy_3, accuracy_16, mean_branch_accuracy;
};

/// Every configuration is trained from scratch on each split realization
/// with the same seeds and sample draws; only the substituted descriptors
/// differ.
inline std::vector<AblationRun> run_ablation(std::span<const SubjectSplitView> realizations,
                                             const nn::StarNetworkConfig& net_cfg, const DescriptorConfig& cfg,
                                             const TrainOptions& base, std::span<const AblationConfiguration> configs,
                                             std::size_t test_samples,
                                             const std::function<void(const AblationRun&)>& on_run = {}) {
  std::vector<AblationRun> out;
  for (std::size_t r = 0; r < realizations.size(); ++r) {
    const auto& split = realizations[r];
    for (const auto& c : configs) {
      TrainOptions opt = base;
      opt.substitute = c.substitute;
      opt.seed = derive_seed(base.seed, {static_cast<std::uint64_t>(r)});
      auto trained = train(net_cfg, split.train, split.validation, cfg, opt);
      AblationRun run{c, static_cast<int>(r), {}};
      run.test = evaluate(trained.net, split.test, cfg, c.substitute, test_samples,
                          derive_seed(opt.seed, {kSeedTestDraw}), derive_seed(opt.seed, {kSeedNoise, kSeedTestDraw}),
                          opt.batch_size)
                     .report;
      if (on_run) on_run(run);
      out.push_back(std::move(run));
    }
  }
  return out;
}

inline std::vector<AblationSummary> summarize_ablation(std::span<const AblationRun> runs) {
  std::vector<AblationSummary> out;
  for (const auto& run : runs) {
    bool seen = false;
    for (const auto& s : out) seen = seen || s.configuration.name == run.configuration.name;
    if (seen) continue;
    std::vector<double> a3, a16, mb;
    for (const auto& r : runs)
      if (r.configuration.name == run.configuration.name) {
        a3.push_back(r.test.accuracy_3);
        a16.push_back(r.test.accuracy_16);
        mb.push_back(r.test.mean_branch_accuracy);
      }
    out.push_back({run.configuration, summarize(a3), summarize(a16), summarize(mb)});
  }
  return out;
}

}  // namespace tractfilter
