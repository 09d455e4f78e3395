#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "fixture.hpp"
#include "tractfilter/ablation.hpp"
#include "tractfilter/io/checkpoint.hpp"

using namespace tractfilter;

namespace {

const testsupport::SynthDataset& dataset() {
  static const auto d = testsupport::synth_dataset(3, 150, 21);
  return d;
}

nn::StarNetworkConfig tiny_net(const DescriptorConfig& c) {
  return nn::StarNetworkConfig::compact(c.n, c.channel_counts(56), 1, 4, 8);
}

TrainOptions tiny_options() {
  TrainOptions o;
  o.adam.lr = 1e-3;
  o.epochs = 2;
  o.train_samples = 64;
  o.val_samples = 32;
  o.batch_size = 16;
  o.seed = 5;
  return o;
}

std::vector<char> trained_bytes(const TrainOptions& o) {
  const auto& d = dataset();
  const auto cfg = testsupport::descriptor_config(d);
  auto r = train(tiny_net(cfg), d.pick({0, 1}), d.pick({2}), cfg, o);
  return io::encode_checkpoint(io::snapshot(r.net));
}

}  // namespace

TEST(Training, DeterministicForFixedSeed) {
  const auto a = trained_bytes(tiny_options());
  EXPECT_EQ(a, trained_bytes(tiny_options()));
  auto other = tiny_options();
  other.seed = 6;
  EXPECT_NE(a, trained_bytes(other));
}

TEST(Training, HistoryAndCoarsening) {
  const auto& d = dataset();
  const auto cfg = testsupport::descriptor_config(d);
  int calls = 0;
  auto r = train(tiny_net(cfg), d.pick({0, 1}), d.pick({2}), cfg, tiny_options(), [&](const EpochRecord&) { ++calls; });
  EXPECT_EQ(calls, 2);
  ASSERT_EQ(r.history.size(), 2u);
  for (const auto& e : r.history) {
    EXPECT_GE(e.validation.accuracy_3, e.validation.accuracy_16);
    for (double l : e.train_loss) EXPECT_TRUE(std::isfinite(l));
  }
  const auto ev = evaluate(r.net, d.pick({2}), cfg, {}, 40, 1, 2, 16);
  EXPECT_EQ(ev.samples.size(), 40u);
  EXPECT_EQ(ev.predictions.size(), 40u);
  EXPECT_GE(ev.report.accuracy_3, ev.report.accuracy_16);
}

TEST(Training, NonFiniteInputsDiverge) {
  auto d = testsupport::synth_dataset(2, 30, 22);
  for (auto& s : d.subjects)
    std::fill(s.volumes.t1w.data.begin(), s.volumes.t1w.data.end(), std::numeric_limits<float>::quiet_NaN());
  const auto cfg = testsupport::descriptor_config(d);
  EXPECT_THROW(train(tiny_net(cfg), d.pick({0}), d.pick({1}), cfg, tiny_options()), DivergenceError);
}

TEST(Training, RejectsEmptySetsAndMismatchedLabels) {
  auto d = testsupport::synth_dataset(2, 20, 23);
  const auto cfg = testsupport::descriptor_config(d);
  EXPECT_THROW(train(tiny_net(cfg), d.pick({0}), {}, cfg, tiny_options()), InvalidInput);
  d.subjects[0].verdicts.pop_back();
  EXPECT_THROW(train(tiny_net(cfg), d.pick({0}), d.pick({1}), cfg, tiny_options()), InvalidInput);
}

TEST(Ablation, ConfigurationOrder) {
  const auto loo = ablation_configurations(AblationMode::leave_one_out);
  ASSERT_EQ(loo.size(), 6u);
  EXPECT_EQ(loo[0].name, "baseline");
  EXPECT_TRUE(loo[0].substitute.none());
  EXPECT_EQ(loo[1].name, "without:xyz");
  EXPECT_EQ(selection_string(loo[3].substitute), "sh");
  const auto single = ablation_configurations(AblationMode::single_input);
  ASSERT_EQ(single.size(), 6u);
  EXPECT_EQ(single[5].name, "only:wmparc");
  EXPECT_EQ(selection_string(single[5].substitute), "xyz,lm,sh,t1w");
  EXPECT_EQ(ablation_configurations(AblationMode::both).size(), 11u);
}

TEST(Ablation, RunsAndEmptySubstitutionMatchesPlainTraining) {
  const auto& d = dataset();
  const auto cfg = testsupport::descriptor_config(d);
  auto opt = tiny_options();
  opt.epochs = 1;
  const std::vector<SubjectSplitView> views{{d.pick({0}), d.pick({1}), d.pick({2})}};
  const std::vector<AblationConfiguration> configs{{"baseline", {}}, {"only:xyz", parse_selection("lm,sh,t1w,wmparc")}};
  const auto runs = run_ablation(views, tiny_net(cfg), cfg, opt, configs, 50);
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[1].configuration.name, "only:xyz");
  EXPECT_EQ(runs[0].test.count, 50u);

  // The baseline run equals a direct call with the same derived seed.
  auto direct = opt;
  direct.seed = derive_seed(opt.seed, {0});
  auto plain = train(tiny_net(cfg), d.pick({0}), d.pick({1}), cfg, direct);
  const auto ev = evaluate(plain.net, d.pick({2}), cfg, {}, 50, derive_seed(direct.seed, {kSeedTestDraw}),
                           derive_seed(direct.seed, {kSeedNoise, kSeedTestDraw}), direct.batch_size);
  EXPECT_EQ(ev.report.accuracy_16, runs[0].test.accuracy_16);
  EXPECT_EQ(ev.report.mean_branch_accuracy, runs[0].test.mean_branch_accuracy);

  const auto summary = summarize_ablation(runs);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[0].accuracy_3.stddev, 0.0);
}
