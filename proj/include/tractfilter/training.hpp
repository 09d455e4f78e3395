#pragma once

// Training and evaluation loops over hierarchically sampled streamlines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tractfilter/descriptors.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/metrics.hpp"
#include "tractfilter/nn/adam.hpp"
#include "tractfilter/nn/star_network.hpp"
#include "tractfilter/rng.hpp"
#include "tractfilter/sampler.hpp"

namespace tractfilter {

struct SubjectData {
  std::string id;
  std::vector<Streamline> streamlines;
  std::vector<SupervisorVerdict> verdicts;
  SubjectVolumes volumes;

  /// Coordinate normalization box: the subject's volume extent.
  Box bbox() const { return volumes.sh.grid.bounds(); }
};

/// Every parcellation label found in the subjects, ascending.
inline std::vector<std::uint32_t> derive_region_table(std::span<const SubjectData* const> subjects) {
  std::set<std::uint32_t> labels;
  for (const auto* s : subjects) labels.insert(s->volumes.parcellation.data.begin(), s->volumes.parcellation.data.end());
  return {labels.begin(), labels.end()};
}

inline DatasetIndex index_subjects(std::span<const SubjectData* const> subjects) {
  DatasetIndex idx;
  for (const auto* s : subjects) {
    if (s->streamlines.size() != s->verdicts.size())
      throw InvalidInput("subject '" + s->id + "' has " + std::to_string(s->verdicts.size()) + " labels for " +
                         std::to_string(s->streamlines.size()) + " streamlines");
    idx.subjects.push_back(DatasetIndex::index_subject(s->id, s->verdicts));
  }
  return idx;
}

/// Positive when the positive logit is strictly larger; ties are negative.
inline SupervisorVerdict predict(const nn::Logits<float>& logits, Eigen::Index row) {
  SupervisorVerdict v;
  for (int o = 0; o < nn::kOutputBranches; ++o) {
    const auto& l = logits[static_cast<std::size_t>(o)];
    v[o] = label_from(l(row, 1) > l(row, 0));
  }
  return v;
}

struct TrainOptions {
  nn::AdamOptions adam;
  int epochs = 250;
  int train_samples = 10000;
  int val_samples = 4000;
  int batch_size = 32;
  DescriptorSelection substitute;  // descriptors replaced by noise
  std::uint64_t seed = 1;
};

// Seed-derivation keys.
inline constexpr std::uint64_t kSeedInit = 1;
inline constexpr std::uint64_t kSeedTrainDraw = 2;
inline constexpr std::uint64_t kSeedValDraw = 3;
inline constexpr std::uint64_t kSeedNoise = 4;
inline constexpr std::uint64_t kSeedTestDraw = 5;

/// Builds descriptors for sampled streamlines, applying noise substitution
/// with one child seed per (stream, position) so results do not depend on
/// batch boundaries.
class BatchBuilder {
 public:
  BatchBuilder(std::span<const SubjectData* const> subjects, DescriptorConfig cfg, DescriptorSelection substitute)
      : subjects_(subjects.begin(), subjects.end()), cfg_(std::move(cfg)), substitute_(substitute) {}

  std::vector<DescriptorSet> descriptors(std::span<const Sample> batch, std::uint64_t noise_seed,
                                         std::size_t first_index) const {
    std::vector<DescriptorSet> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& smp = batch[i];
      const auto& subj = *subjects_[static_cast<std::size_t>(smp.subject)];
      DescriptorConfig cfg = cfg_;
      cfg.bbox = subj.bbox();
      DescriptorSet d = build_descriptors(subj.streamlines[static_cast<std::size_t>(smp.streamline)], subj.volumes, cfg);
      out.push_back(noise_substitute(std::move(d), substitute_, derive_seed(noise_seed, {first_index + i})));
    }
    return out;
  }

  std::vector<SupervisorVerdict> verdicts(std::span<const Sample> batch) const {
    std::vector<SupervisorVerdict> out;
    for (const auto& smp : batch)
      out.push_back(subjects_[static_cast<std::size_t>(smp.subject)]->verdicts[static_cast<std::size_t>(smp.streamline)]);
    return out;
  }

 private:
  std::vector<const SubjectData*> subjects_;
  DescriptorConfig cfg_;
  DescriptorSelection substitute_;
};

struct Evaluation {
  std::vector<Sample> samples;
  std::vector<SupervisorVerdict> predictions;
  std::vector<SupervisorVerdict> truth;
  MetricsReport report;
};

/// Draw `n` samples hierarchically from `subjects` and score the network in
/// eval mode.
inline Evaluation evaluate(nn::StarNetwork<float>& net, std::span<const SubjectData* const> subjects,
                           const DescriptorConfig& cfg, DescriptorSelection substitute, std::size_t n,
                           std::uint64_t draw_seed, std::uint64_t noise_seed, int batch_size) {
  Evaluation ev;
  const DatasetIndex idx = index_subjects(subjects);
  ev.samples = hierarchical_sample(idx, n, draw_seed);
  const BatchBuilder builder(subjects, cfg, substitute);
  std::array<double, nn::kOutputBranches> loss_sum{};
  std::size_t offset = 0;
  for (auto batch : epoch_batches(ev.samples, static_cast<std::size_t>(batch_size))) {
    const auto d = builder.descriptors(batch, noise_seed, offset);
    const auto truth = builder.verdicts(batch);
    const auto logits = net.forward(nn::make_inputs<float>(d), nn::Mode::eval);
    const auto loss = nn::star_loss(logits, nn::make_targets(truth));
    for (int o = 0; o < nn::kOutputBranches; ++o)
      loss_sum[static_cast<std::size_t>(o)] += static_cast<double>(loss.branch[static_cast<std::size_t>(o)]) *
                                               static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) ev.predictions.push_back(predict(logits, static_cast<Eigen::Index>(i)));
    ev.truth.insert(ev.truth.end(), truth.begin(), truth.end());
    offset += batch.size();
  }
  for (auto& l : loss_sum) l /= static_cast<double>(std::max<std::size_t>(1, ev.samples.size()));
  ev.report = make_report(ev.predictions, ev.truth, loss_sum);
  return ev;
}

struct EpochRecord {
  int epoch = 0;
  std::array<double, nn::kOutputBranches> train_loss{};  // mean over batches
  std::array<double, nn::kOutputBranches> train_accuracy{};
  MetricsReport validation;
};

struct TrainResult {
  nn::StarNetwork<float> net;
  std::vector<EpochRecord> history;
};

/// Train from scratch. The network is initialized, sampled and
/// noise-substituted from seeds derived from `opt.seed`, so two calls with
/// equal arguments produce bit-identical parameters.
inline TrainResult train(const nn::StarNetworkConfig& net_cfg, std::span<const SubjectData* const> train_subjects,
                         std::span<const SubjectData* const> val_subjects, const DescriptorConfig& cfg,
                         const TrainOptions& opt, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_subjects.empty() || val_subjects.empty())
    throw InvalidInput("training needs non-empty train and validation subject sets");
  TrainResult result{nn::StarNetwork<float>(net_cfg), {}};
  auto& net = result.net;
  net.init(derive_seed(opt.seed, {kSeedInit}));
  nn::Adam<float> adam(net.params(), opt.adam);
  const DatasetIndex idx = index_subjects(train_subjects);
  const BatchBuilder builder(train_subjects, cfg, opt.substitute);

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto samples =
        hierarchical_sample(idx, static_cast<std::size_t>(opt.train_samples), derive_seed(opt.seed, {kSeedTrainDraw, static_cast<std::uint64_t>(epoch)}));
    const std::uint64_t noise_seed = derive_seed(opt.seed, {kSeedNoise, static_cast<std::uint64_t>(epoch)});
    EpochRecord rec;
    rec.epoch = epoch;
    std::array<std::uint64_t, nn::kOutputBranches> hits{};
    std::size_t offset = 0, batches = 0;
    for (auto batch : epoch_batches(samples, static_cast<std::size_t>(opt.batch_size))) {
      const auto d = builder.descriptors(batch, noise_seed, offset);
      const auto truth = builder.verdicts(batch);
      net.zero_grad();
      const auto logits = net.forward(nn::make_inputs<float>(d), nn::Mode::train);
      const auto loss = nn::star_loss(logits, nn::make_targets(truth));
      if (!std::isfinite(loss.total))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches + 1));
      net.backward(loss.dlogits);
      adam.step();
      for (int o = 0; o < nn::kOutputBranches; ++o)
        rec.train_loss[static_cast<std::size_t>(o)] += loss.branch[static_cast<std::size_t>(o)];
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto p = predict(logits, static_cast<Eigen::Index>(i));
        for (int o = 0; o < nn::kOutputBranches; ++o) hits[static_cast<std::size_t>(o)] += p[o] == truth[i][o];
      }
      offset += batch.size();
      ++batches;
    }
    for (int o = 0; o < nn::kOutputBranches; ++o) {
      rec.train_loss[static_cast<std::size_t>(o)] /= static_cast<double>(batches);
      rec.train_accuracy[static_cast<std::size_t>(o)] =
          static_cast<double>(hits[static_cast<std::size_t>(o)]) / static_cast<double>(samples.size());
    }
    rec.validation = evaluate(net, val_subjects, cfg, opt.substitute, static_cast<std::size_t>(opt.val_samples),
                              derive_seed(opt.seed, {kSeedValDraw}), derive_seed(opt.seed, {kSeedNoise, 0}),
                              opt.batch_size)
                         .report;
    if (on_epoch) on_epoch(rec);
    result.history.push_back(std::move(rec));
  }
  return result;
}

}  // namespace tractfilter
