#pragma once

// Multi-branch 1D convolutional classifier.
//
//   five input branches (xyz, lm, sh, t1w, wmparc), each a stack of
//   conv -> batchnorm -> relu [-> maxpool] blocks
//     -> channel concatenation (shared trunk)
//   four output branches (tq, rbx, ts, aif), each conv blocks -> flatten
//     -> fc1 -> relu -> fc2 -> relu
//     -> concatenation of all four fc2 outputs -> fc3 -> relu -> fc4 (2 logits)
//
// The fc2 features of other branches enter a branch's fc3 as constants: the
// loss of branch A never produces gradients for the parameters of output
// branch B != A. Input branches receive gradients from all four losses.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tractfilter/descriptors.hpp"
#include "tractfilter/errors.hpp"
#include "tractfilter/nn/layers.hpp"
#include "tractfilter/rng.hpp"
#include "tractfilter/supervisors.hpp"

namespace tractfilter::nn {

inline constexpr int kInputBranches = kDescriptorCount;
inline constexpr int kOutputBranches = kSupervisorCount;

struct StarNetworkConfig {
  int length = 100;
  std::array<int, kInputBranches> input_channels{3, 20, 56, 1, 1};
  std::array<int, kInputBranches> input_blocks{12, 12, 12, 12, 12};
  std::array<int, kInputBranches> input_kernels{208, 208, 416, 208, 208};
  int input_ksize = 3;
  std::vector<int> pool_after{4, 8};  // 1-based block ids
  int pool_size = 2;
  int output_blocks = 4;
  int output_kernels = 208;
  int output_ksize = 5;
  int fc_width = 196;
  int classes = 2;

  /// Full-size architecture for the given descriptor row counts.
  static StarNetworkConfig full(int length, const std::array<int, kInputBranches>& channels) {
    StarNetworkConfig c;
    c.length = length;
    c.input_channels = channels;
    return c;
  }

  /// Reduced architecture with `blocks` blocks per branch and `kernels`
  /// kernels everywhere.
  static StarNetworkConfig compact(int length, const std::array<int, kInputBranches>& channels, int blocks,
                                   int kernels, int fc_width) {
    StarNetworkConfig c = full(length, channels);
    c.input_blocks.fill(blocks);
    c.input_kernels.fill(kernels);
    c.output_blocks = blocks;
    c.output_kernels = kernels;
    c.fc_width = fc_width;
    return c;
  }

  bool pools_after(int block_id) const {
    for (int p : pool_after)
      if (p == block_id) return true;
    return false;
  }

  /// Length of each input branch output. All input branches share the
  /// pooling schedule only when their block counts agree, which validate()
  /// enforces.
  int trunk_length() const {
    int len = length;
    for (int b = 1; b <= input_blocks[0]; ++b)
      if (pools_after(b)) len = MaxPool1d<float>::output_length(len, pool_size);
    return len;
  }

  int trunk_channels() const {
    int c = 0;
    for (int k : input_kernels) c += k;
    return c;
  }

  /// fc1 input width: output kernels times trunk length.
  int flatten_width() const { return output_kernels * trunk_length(); }

  void validate() const {
    if (length < 1) throw InvalidInput("network length must be >= 1");
    for (int i = 0; i < kInputBranches; ++i) {
      if (input_channels[static_cast<std::size_t>(i)] < 1) throw InvalidInput("every input branch needs >= 1 channel");
      if (input_blocks[static_cast<std::size_t>(i)] < 1 || input_kernels[static_cast<std::size_t>(i)] < 1)
        throw InvalidInput("input branches need >= 1 block and kernel");
      if (input_blocks[static_cast<std::size_t>(i)] != input_blocks[0])
        throw InvalidInput("input branches must share one block count");
    }
    if (output_blocks < 1 || output_kernels < 1 || fc_width < 1 || classes < 2)
      throw InvalidInput("invalid output branch configuration");
    if (input_ksize % 2 == 0 || output_ksize % 2 == 0) throw InvalidInput("kernel sizes must be odd");
    if (trunk_length() < 1) throw InvalidInput("pooling shrinks the trunk to zero length");
  }
};

template <typename T>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, int in, int out, int ksize, std::optional<int> pool)
      : conv(name + ".conv", in, out, ksize), bn(name + ".bn", out) {
    if (pool) this->pool.emplace(*pool);
  }

  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) {
    FeatureMap<T> y = relu.forward(bn.forward(conv.forward(x), mode));
    return pool ? pool->forward(y) : y;
  }

  FeatureMap<T> backward(FeatureMap<T> dy) {
    if (pool) dy = pool->backward(dy);
    return conv.backward(bn.backward(relu.backward(std::move(dy))));
  }

  Conv1d<T> conv;
  BatchNorm1d<T> bn;
  ReLU<T> relu;
  std::optional<MaxPool1d<T>> pool;
};

template <typename T>
struct OutputBranch {
  std::vector<ConvBlock<T>> blocks;
  Linear<T> fc1, fc2, fc3, fc4;
  DenseReLU<T> act1, act2, act3;
};

template <typename T>
using Logits = std::array<RowMatrix<T>, kOutputBranches>;

template <typename T>
class StarNetwork {
 public:
  explicit StarNetwork(StarNetworkConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (int i = 0; i < kInputBranches; ++i) {
      const auto si = static_cast<std::size_t>(i);
      int in = cfg_.input_channels[si];
      for (int b = 1; b <= cfg_.input_blocks[si]; ++b) {
        const std::string name = std::string("in.") + kDescriptorNames[si] + ".block" + std::to_string(b);
        std::optional<int> pool;
        if (cfg_.pools_after(b)) pool = cfg_.pool_size;
        inputs_[si].emplace_back(name, in, cfg_.input_kernels[si], cfg_.input_ksize, pool);
        in = cfg_.input_kernels[si];
      }
    }
    const int flat = cfg_.flatten_width();
    for (int o = 0; o < kOutputBranches; ++o) {
      const auto so = static_cast<std::size_t>(o);
      const std::string prefix = std::string("out.") + kSupervisorNames[so];
      auto& br = outputs_[so];
      int in = cfg_.trunk_channels();
      for (int b = 1; b <= cfg_.output_blocks; ++b) {
        br.blocks.emplace_back(prefix + ".block" + std::to_string(b), in, cfg_.output_kernels, cfg_.output_ksize,
                               std::nullopt);
        in = cfg_.output_kernels;
      }
      br.fc1 = Linear<T>(prefix + ".fc1", flat, cfg_.fc_width);
      br.fc2 = Linear<T>(prefix + ".fc2", cfg_.fc_width, cfg_.fc_width);
      br.fc3 = Linear<T>(prefix + ".fc3", kOutputBranches * cfg_.fc_width, cfg_.fc_width);
      br.fc4 = Linear<T>(prefix + ".fc4", cfg_.fc_width, cfg_.classes);
    }
  }

  const StarNetworkConfig& config() const { return cfg_; }

  /// Concatenated fc2 outputs of the last forward pass, batch x (4 * fc_width).
  const RowMatrix<T>& shared_features() const { return shared_; }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& branch : inputs_)
      for (auto& blk : branch) blk.conv.init(rng);
    for (auto& br : outputs_) {
      for (auto& blk : br.blocks) blk.conv.init(rng);
      br.fc1.init(rng);
      br.fc2.init(rng);
      br.fc3.init(rng);
      br.fc4.init(rng);
    }
  }

  /// With `frozen` set, each output branch combines its own live features
  /// with the other branches' features taken from `frozen` (a previous
  /// shared_features()). This evaluates the function whose gradient
  /// backward() computes.
  Logits<T> forward(const std::array<FeatureMap<T>, kInputBranches>& x, Mode mode,
                    const RowMatrix<T>* frozen = nullptr) {
    const int batch = x[0].batch;
    // Shared trunk: channel-major storage makes channel concatenation a plain
    // append of the branch buffers.
    FeatureMap<T> trunk(batch, 0, cfg_.trunk_length());
    trunk.data.clear();
    trunk.data.reserve(static_cast<std::size_t>(batch) * cfg_.trunk_channels() * cfg_.trunk_length());
    for (int i = 0; i < kInputBranches; ++i) {
      const auto si = static_cast<std::size_t>(i);
      const auto& in = x[si];
      if (in.batch != batch || in.length != cfg_.length || in.channels != cfg_.input_channels[si])
        throw ShapeError(std::string("input '") + kDescriptorNames[si] + "' has an unexpected shape");
      FeatureMap<T> h = in;
      for (auto& blk : inputs_[si]) h = blk.forward(h, mode);
      trunk.channels += h.channels;
      trunk.data.insert(trunk.data.end(), h.data.begin(), h.data.end());
    }

    std::array<RowMatrix<T>, kOutputBranches> h2;
    for (int o = 0; o < kOutputBranches; ++o) {
      auto& br = outputs_[static_cast<std::size_t>(o)];
      FeatureMap<T> h = trunk;
      for (auto& blk : br.blocks) h = blk.forward(h, mode);
      RowMatrix<T> f = br.act1.forward(br.fc1.forward(flatten(h)));
      h2[static_cast<std::size_t>(o)] = br.act2.forward(br.fc2.forward(f));
    }

    RowMatrix<T> shared(batch, kOutputBranches * cfg_.fc_width);
    for (int o = 0; o < kOutputBranches; ++o)
      shared.middleCols(static_cast<Eigen::Index>(o) * cfg_.fc_width, cfg_.fc_width) = h2[static_cast<std::size_t>(o)];

    if (frozen && (frozen->rows() != shared.rows() || frozen->cols() != shared.cols()))
      throw ShapeError("frozen shared features have the wrong shape");
    Logits<T> logits;
    for (int o = 0; o < kOutputBranches; ++o) {
      auto& br = outputs_[static_cast<std::size_t>(o)];
      RowMatrix<T> in = frozen ? *frozen : shared;
      if (frozen)
        in.middleCols(static_cast<Eigen::Index>(o) * cfg_.fc_width, cfg_.fc_width) = h2[static_cast<std::size_t>(o)];
      logits[static_cast<std::size_t>(o)] = br.fc4.forward(br.act3.forward(br.fc3.forward(in)));
    }
    shared_ = std::move(shared);
    trunk_channels_seen_ = trunk.channels;
    batch_ = batch;
    return logits;
  }

  /// Accumulates parameter gradients for d(loss)/d(logits) of each branch.
  void backward(const Logits<T>& dlogits) {
    FeatureMap<T> dtrunk(batch_, trunk_channels_seen_, cfg_.trunk_length());
    for (int o = 0; o < kOutputBranches; ++o) {
      const auto so = static_cast<std::size_t>(o);
      auto& br = outputs_[so];
      const RowMatrix<T> dshared = br.fc3.backward(br.act3.backward(br.fc4.backward(dlogits[so])));
      // Only this branch's own slice flows back; the others are detached.
      RowMatrix<T> dh2 = dshared.middleCols(static_cast<Eigen::Index>(o) * cfg_.fc_width, cfg_.fc_width);
      RowMatrix<T> df = br.fc1.backward(br.act1.backward(br.fc2.backward(br.act2.backward(dh2))));
      FeatureMap<T> dh = unflatten(df, cfg_.output_kernels, cfg_.trunk_length());
      for (auto it = br.blocks.rbegin(); it != br.blocks.rend(); ++it) dh = it->backward(std::move(dh));
      for (std::size_t i = 0; i < dtrunk.data.size(); ++i) dtrunk.data[i] += dh.data[i];
    }

    std::size_t offset = 0;
    for (int i = 0; i < kInputBranches; ++i) {
      const auto si = static_cast<std::size_t>(i);
      const int ch = cfg_.input_kernels[si];
      FeatureMap<T> dh(batch_, ch, cfg_.trunk_length());
      std::copy_n(dtrunk.data.begin() + static_cast<std::ptrdiff_t>(offset), dh.data.size(), dh.data.begin());
      offset += dh.data.size();
      for (auto it = inputs_[si].rbegin(); it != inputs_[si].rend(); ++it) dh = it->backward(std::move(dh));
    }
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    auto add_block = [&](ConvBlock<T>& b) {
      out.push_back(&b.conv.weight);
      out.push_back(&b.conv.bias);
      out.push_back(&b.bn.scale);
      out.push_back(&b.bn.shift);
    };
    for (auto& branch : inputs_)
      for (auto& b : branch) add_block(b);
    for (auto& br : outputs_) {
      for (auto& b : br.blocks) add_block(b);
      for (Linear<T>* fc : {&br.fc1, &br.fc2, &br.fc3, &br.fc4}) {
        out.push_back(&fc->weight);
        out.push_back(&fc->bias);
      }
    }
    return out;
  }

  std::vector<Buffer<T>*> buffers() {
    std::vector<Buffer<T>*> out;
    auto add = [&](ConvBlock<T>& b) {
      out.push_back(&b.bn.running_mean);
      out.push_back(&b.bn.running_var);
    };
    for (auto& branch : inputs_)
      for (auto& b : branch) add(b);
    for (auto& br : outputs_)
      for (auto& b : br.blocks) add(b);
    return out;
  }

  /// Parameters owned by output branch `o` (names start with "out.<name>.").
  std::vector<Param<T>*> output_branch_params(int o) {
    const std::string prefix = std::string("out.") + kSupervisorNames[static_cast<std::size_t>(o)] + ".";
    std::vector<Param<T>*> out;
    for (auto* p : params())
      if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->size();
    return n;
  }

  static RowMatrix<T> flatten(const FeatureMap<T>& h) {
    RowMatrix<T> out(h.batch, static_cast<Eigen::Index>(h.channels) * h.length);
    for (int b = 0; b < h.batch; ++b)
      for (int c = 0; c < h.channels; ++c)
        std::copy_n(&h.at(b, c, 0), h.length, out.row(b).data() + static_cast<std::size_t>(c) * h.length);
    return out;
  }

  static FeatureMap<T> unflatten(const RowMatrix<T>& m, int channels, int length) {
    FeatureMap<T> h(static_cast<int>(m.rows()), channels, length);
    for (int b = 0; b < h.batch; ++b)
      for (int c = 0; c < channels; ++c)
        std::copy_n(m.row(b).data() + static_cast<std::size_t>(c) * length, length, &h.at(b, c, 0));
    return h;
  }

 private:
  StarNetworkConfig cfg_;
  std::array<std::vector<ConvBlock<T>>, kInputBranches> inputs_;
  std::array<OutputBranch<T>, kOutputBranches> outputs_;
  RowMatrix<T> shared_;
  int trunk_channels_seen_ = 0;
  int batch_ = 0;
};

/// Per-branch targets: 1 for a positive supervisor label, 0 for negative.
using BranchTargets = std::array<std::vector<int>, kOutputBranches>;

template <typename T>
struct StarLoss {
  T total = 0;
  std::array<T, kOutputBranches> branch{};
  Logits<T> dlogits;
};

/// Sum over branches of the batch-mean cross-entropy. `branch_weights`
/// scales each branch's contribution (all ones for training).
template <typename T>
StarLoss<T> star_loss(const Logits<T>& logits, const BranchTargets& targets,
                      const std::array<T, kOutputBranches>& branch_weights = {T{1}, T{1}, T{1}, T{1}}) {
  StarLoss<T> out;
  for (int o = 0; o < kOutputBranches; ++o) {
    const auto so = static_cast<std::size_t>(o);
    out.branch[so] = softmax_xent(logits[so], targets[so], &out.dlogits[so]);
    out.dlogits[so] *= branch_weights[so];
    out.total += branch_weights[so] * out.branch[so];
  }
  return out;
}

/// Stack descriptor sets into per-branch feature maps.
template <typename T>
std::array<FeatureMap<T>, kInputBranches> make_inputs(std::span<const DescriptorSet> batch) {
  if (batch.empty()) throw InvalidInput("empty batch");
  std::array<FeatureMap<T>, kInputBranches> out;
  const int b = static_cast<int>(batch.size());
  for (int k = 0; k < kInputBranches; ++k) {
    const auto& first = batch[0].channels[static_cast<std::size_t>(k)];
    const int ch = static_cast<int>(first.rows()), len = static_cast<int>(first.cols());
    auto& fm = out[static_cast<std::size_t>(k)];
    fm = FeatureMap<T>(b, ch, len);
    for (int i = 0; i < b; ++i) {
      const auto& m = batch[static_cast<std::size_t>(i)].channels[static_cast<std::size_t>(k)];
      if (m.rows() != ch || m.cols() != len) throw ShapeError("descriptor shapes differ within a batch");
      for (int c = 0; c < ch; ++c)
        for (int l = 0; l < len; ++l) fm.at(i, c, l) = static_cast<T>(m(c, l));
    }
  }
  return out;
}

inline BranchTargets make_targets(std::span<const SupervisorVerdict> verdicts) {
  BranchTargets t;
  for (const auto& v : verdicts)
    for (int o = 0; o < kOutputBranches; ++o)
      t[static_cast<std::size_t>(o)].push_back(v[o] == BinaryLabel::positive ? 1 : 0);
  return t;
}

}  // namespace tractfilter::nn
