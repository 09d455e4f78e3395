#pragma once

// Run configuration. Every field has a default; a JSON file only needs the
// keys it overrides. Unknown keys are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractfilter/descriptors.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/io/binary.hpp"
#include "tractfilter/nn/adam.hpp"
#include "tractfilter/nn/star_network.hpp"
#include "tractfilter/sampler.hpp"
#include "tractfilter/supervisors.hpp"

namespace tractfilter::io {

using nlohmann::json;

struct DescriptorOptions {
  int n = 100;
  int k = 20;
  double step = 1.0;
  int lmax = 6;
  std::vector<double> shells{1000.0, 3000.0};
  std::vector<std::uint32_t> region_table;  // empty: every label in the parcellation, ascending
  bool landmarks_on_full = false;
  bool standardize = false;
};

struct NetworkOptions {
  int input_blocks = 12;
  int input_kernels = 208;
  int sh_kernels = 416;
  int input_ksize = 3;
  std::vector<int> pool_after{4, 8};
  int pool_size = 2;
  int output_blocks = 4;
  int output_kernels = 208;
  int output_ksize = 5;
  int fc_width = 196;
};

struct TrainingOptions {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 250;
  int train_samples = 10000;
  int val_samples = 4000;
  int test_samples = 500000;
  int batch_size = 32;
};

struct SupervisorOptions {
  double loop_threshold_deg = kDefaultLoopThresholdDeg;
  double ventricle_radius_mm = kDefaultVentricleRadiusMm;
};

struct RunConfig {
  DescriptorOptions descriptors;
  NetworkOptions network;
  TrainingOptions training;
  SplitRatios split;
  int realizations = 5;
  std::uint64_t seed = 1;
  std::vector<std::string> ablation;  // descriptor names replaced by noise
  SupervisorOptions supervisors;

  void validate() const {
    const auto& d = descriptors;
    if (d.n < 2 || d.k < 2 || d.k > d.n) throw InvalidInput("config: need 2 <= k <= n");
    if (!(d.step > 0.0)) throw InvalidInput("config: step must be positive");
    if (d.lmax < 0 || d.lmax % 2 != 0) throw InvalidInput("config: lmax must be even and >= 0");
    if (d.shells.empty()) throw InvalidInput("config: at least one shell is required");
    const auto& t = training;
    if (!(t.lr > 0.0) || t.epochs < 1 || t.train_samples < 1 || t.val_samples < 1 || t.test_samples < 1 ||
        t.batch_size < 1)
      throw InvalidInput("config: training counts and learning rate must be positive");
    if (realizations < 1) throw InvalidInput("config: realizations must be >= 1");
    for (const auto& name : ablation) parse_selection(name);
    if (!(supervisors.loop_threshold_deg > 0.0) || supervisors.ventricle_radius_mm < 0.0)
      throw InvalidInput("config: invalid supervisor thresholds");
  }

  DescriptorSelection ablation_selection() const {
    DescriptorSelection sel;
    for (const auto& name : ablation) sel |= parse_selection(name);
    return sel;
  }

  int sh_channels() const {
    return static_cast<int>(descriptors.shells.size()) * ((descriptors.lmax + 1) * (descriptors.lmax + 2) / 2);
  }

  nn::StarNetworkConfig network_config(int regions) const {
    nn::StarNetworkConfig c;
    c.length = descriptors.n;
    c.input_channels = {3, descriptors.k, sh_channels(), 1, regions};
    c.input_blocks.fill(network.input_blocks);
    c.input_kernels.fill(network.input_kernels);
    c.input_kernels[static_cast<std::size_t>(DescriptorKind::sh)] = network.sh_kernels;
    c.input_ksize = network.input_ksize;
    c.pool_after = network.pool_after;
    c.pool_size = network.pool_size;
    c.output_blocks = network.output_blocks;
    c.output_kernels = network.output_kernels;
    c.output_ksize = network.output_ksize;
    c.fc_width = network.fc_width;
    return c;
  }

  nn::AdamOptions adam() const { return {training.lr, training.beta1, training.beta2, training.eps}; }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DescriptorOptions, n, k, step, lmax, shells, region_table,
                                                landmarks_on_full, standardize)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkOptions, input_blocks, input_kernels, sh_kernels, input_ksize,
                                                pool_after, pool_size, output_blocks, output_kernels, output_ksize,
                                                fc_width)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainingOptions, lr, beta1, beta2, eps, epochs, train_samples,
                                                val_samples, test_samples, batch_size)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SupervisorOptions, loop_threshold_deg, ventricle_radius_mm)

}  // namespace tractfilter::io

namespace tractfilter {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SplitRatios, train, validation, test)
}

namespace tractfilter::nn {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StarNetworkConfig, length, input_channels, input_blocks, input_kernels, input_ksize,
                                   pool_after, pool_size, output_blocks, output_kernels, output_ksize, fc_width,
                                   classes)
}

namespace tractfilter::io {

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"descriptors", c.descriptors}, {"network", c.network},         {"training", c.training},
           {"split", c.split},             {"realizations", c.realizations}, {"seed", c.seed},
           {"ablation", c.ablation},       {"supervisors", c.supervisors}};
}

namespace detail {
inline void reject_unknown(const json& j, const json& reference, const std::string& where) {
  if (!j.is_object()) throw InvalidInput("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!reference.contains(it.key())) throw InvalidInput("config: unknown key '" + where + it.key() + "'");
    if (reference[it.key()].is_object()) reject_unknown(it.value(), reference[it.key()], where + it.key() + ".");
  }
}
}  // namespace detail

inline void from_json(const json& j, RunConfig& c) {
  detail::reject_unknown(j, json(RunConfig{}), "");
  RunConfig d;
  c.descriptors = j.value("descriptors", d.descriptors);
  c.network = j.value("network", d.network);
  c.training = j.value("training", d.training);
  c.split = j.value("split", d.split);
  c.realizations = j.value("realizations", d.realizations);
  c.seed = j.value("seed", d.seed);
  c.ablation = j.value("ablation", d.ablation);
  c.supervisors = j.value("supervisors", d.supervisors);
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  try {
    c = json::parse(text).get<RunConfig>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

/// FNV-1a 64 over the canonical JSON dump.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(json(c).dump())); }

}  // namespace tractfilter::io
