#pragma once

// In-memory synthetic dataset labelled by the toolkit's own supervisors.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tractfilter/io/synth.hpp"
#include "tractfilter/rng.hpp"
#include "tractfilter/training.hpp"

namespace testsupport {

using namespace tractfilter;

inline SubjectData synth_subject_data(const std::string& id, std::uint64_t seed, int streamlines) {
  synth::SynthOptions opt;
  opt.streamlines = streamlines;
  const auto s = synth::make_subject(id, seed, opt);
  const auto in = synth::supervisor_inputs(s);
  SubjectData d;
  d.id = id;
  d.streamlines = s.streamlines;
  for (const auto& sl : s.streamlines) d.verdicts.push_back(supervise(resample_fixed_step(sl, 1.0).points(), in));
  d.volumes.t1w = normalize_t1w(s.t1w);
  const std::vector<double> shells{1000.0, 3000.0};
  d.volumes.sh = fit_sh_per_shell(s.dwi, s.scheme, 6, shells).coefficients;
  d.volumes.parcellation = s.parcellation;
  return d;
}

struct SynthDataset {
  std::vector<SubjectData> subjects;

  std::vector<const SubjectData*> pick(std::initializer_list<int> which) const {
    std::vector<const SubjectData*> out;
    for (int i : which) out.push_back(&subjects[static_cast<std::size_t>(i)]);
    return out;
  }
  std::vector<const SubjectData*> all() const {
    std::vector<const SubjectData*> out;
    for (const auto& s : subjects) out.push_back(&s);
    return out;
  }
};

inline SynthDataset synth_dataset(int count, int streamlines, std::uint64_t seed) {
  SynthDataset d;
  for (int i = 0; i < count; ++i)
    d.subjects.push_back(
        synth_subject_data("subject_" + std::to_string(i), derive_seed(seed, {static_cast<std::uint64_t>(i)}), streamlines));
  return d;
}

inline DescriptorConfig descriptor_config(const SynthDataset& d) {
  DescriptorConfig c;
  const auto all = d.all();
  c.region_table = derive_region_table(all);
  return c;
}

/// Two blocks per branch, 16 kernels.
inline nn::StarNetworkConfig toy_network(const DescriptorConfig& c, int sh_channels = 56) {
  return nn::StarNetworkConfig::compact(c.n, c.channel_counts(sh_channels), 2, 16, 32);
}

}  // namespace testsupport
