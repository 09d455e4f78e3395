#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "instances.hpp"
#include "tractfilter/io/config.hpp"
#include "tractfilter/io/subject.hpp"
#include "tractfilter/io/synth.hpp"

using namespace tractfilter;
namespace fs = std::filesystem;

TEST(Formats, RandomRoundTrips) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    EXPECT_TRUE(testsupport::tractogram_round_trip(rng));
    EXPECT_TRUE(testsupport::volume_round_trip<float>(rng));
    EXPECT_TRUE(testsupport::volume_round_trip<std::uint32_t>(rng));
    EXPECT_TRUE(testsupport::label_round_trip(rng));
  }
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(testsupport::checkpoint_round_trip(rng));
}

TEST(Formats, TruncatedVolumeNamesSizes) {
  std::mt19937_64 rng(2);
  auto bytes = io::encode_volume(testsupport::random_volume<float>(rng));
  const auto full = bytes.size();
  bytes.resize(full - 3);
  try {
    io::decode_volume<float>(bytes, "t.vol");
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found"), std::string::npos) << msg;
    EXPECT_NE(msg.find("t.vol"), std::string::npos) << msg;
  }
  EXPECT_THROW(io::decode_volume<std::uint32_t>(io::encode_volume(testsupport::random_volume<float>(rng))), FormatError);
  EXPECT_THROW(io::decode_tractogram(std::vector<char>{'S', 'T'}), FormatError);
  auto t = io::encode_tractogram({Streamline({Vec3(0, 0, 0), Vec3(1, 0, 0)})});
  t.push_back(0);
  EXPECT_THROW(io::decode_tractogram(t), FormatError);
}

TEST(Formats, LabelCsvErrorsCiteRows) {
  const std::string good = "index,tq,rbx,ts,aif\n0,p,n,p,p\n1,n,n,n,n\n";
  EXPECT_EQ(io::decode_label_csv(good).size(), 2u);
  try {
    io::decode_label_csv("index,tq,rbx,ts,aif\n0,p,n,p,p\n1,n,x,n,n\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 3u);
    EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
  }
  EXPECT_THROW(io::decode_label_csv(good, 3), FormatError);
  EXPECT_THROW(io::decode_label_csv("index,tq,rbx,ts,aif\n1,p,n,p,p\n"), FormatError);
  EXPECT_THROW(io::decode_label_csv("i,a,b,c,d\n"), FormatError);
}

TEST(Formats, SchemeAndDescriptors) {
  GradientScheme g;
  g.directions = {Vec3(1, 0, 0), Vec3(0, 0.6, 0.8)};
  g.bvalues = {1000, 3000};
  const auto back = io::decode_scheme(io::encode_scheme(g));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(back.directions[1].isApprox(g.directions[1], 1e-9));
  EXPECT_EQ(back.bvalues, g.bvalues);
  EXPECT_THROW(io::decode_scheme("1 0 0\n"), FormatError);

  std::mt19937_64 rng(3);
  std::vector<DescriptorSet> sets(3);
  for (auto& d : sets) {
    d.valid_len = static_cast<int>(rng() % 10);
    const std::array<int, 5> rows{3, 2, 4, 1, 5};
    for (int k = 0; k < 5; ++k) {
      d.channels[static_cast<std::size_t>(k)] = DescriptorMatrix::Random(rows[static_cast<std::size_t>(k)], 10);
    }
  }
  const auto bytes = io::encode_descriptors(sets);
  EXPECT_EQ(io::encode_descriptors(io::decode_descriptors(bytes)), bytes);
}

TEST(Config, DefaultsUnknownKeysAndHash) {
  const auto c = io::parse_config("{}");
  EXPECT_EQ(c.descriptors.n, 100);
  EXPECT_EQ(c.descriptors.k, 20);
  EXPECT_EQ(c.sh_channels(), 56);
  EXPECT_EQ(c.training.batch_size, 32);
  const auto partial = io::parse_config(R"({"training": {"epochs": 3}})");
  EXPECT_EQ(partial.training.epochs, 3);
  EXPECT_EQ(partial.training.lr, c.training.lr);
  EXPECT_THROW(io::parse_config(R"({"trainig": {}})"), InvalidInput);
  EXPECT_THROW(io::parse_config(R"({"training": {"epoch": 3}})"), InvalidInput);
  EXPECT_THROW(io::parse_config(R"({"descriptors": {"k": 200}})"), InvalidInput);
  EXPECT_THROW(io::parse_config(R"({"ablation": ["foo"]})"), InvalidInput);
  EXPECT_THROW(io::parse_config("{"), InvalidInput);
  EXPECT_EQ(io::config_hash(c), io::config_hash(io::parse_config("{}")));
  EXPECT_NE(io::config_hash(c), io::config_hash(partial));
}

TEST(Synth, SupervisorsRecoverTruth) {
  synth::SynthOptions opt;
  opt.streamlines = 400;
  const auto s = synth::make_subject("s", 5, opt);
  ASSERT_EQ(s.streamlines.size(), 400u);
  const auto in = synth::supervisor_inputs(s);
  std::array<int, kSupervisorCount> agree{};
  for (std::size_t i = 0; i < s.streamlines.size(); ++i) {
    const auto v = supervise(resample_fixed_step(s.streamlines[i], 1.0).points(), in);
    for (int k = 0; k < kSupervisorCount; ++k) agree[static_cast<std::size_t>(k)] += v[k] == s.truth[i][k];
  }
  EXPECT_EQ(agree[2], 400);
  EXPECT_EQ(agree[3], 400);
  EXPECT_GE(agree[0], 396);
  EXPECT_GE(agree[1], 396);
}

TEST(Synth, WriteAndLoadSubject) {
  synth::SynthOptions opt;
  opt.streamlines = 50;
  const auto s = synth::make_subject("s", 6, opt);
  const fs::path dir = fs::temp_directory_path() / "tractfilter_io_test";
  fs::remove_all(dir);
  io::write_synth_subject(dir, s, 6, {1000.0, 3000.0});
  const auto loaded = io::load_subject(dir, 6, {1000.0, 3000.0}, "truth.csv");
  EXPECT_EQ(loaded.streamlines.size(), 50u);
  EXPECT_EQ(loaded.verdicts, s.truth);
  EXPECT_EQ(loaded.volumes.sh.channels, 56);
  EXPECT_EQ(loaded.volumes.parcellation.grid, s.grid);
  fs::remove_all(dir);
}
