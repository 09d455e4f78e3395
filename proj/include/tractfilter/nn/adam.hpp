#pragma once

// Bias-corrected Adam.

#include <cmath>
#include <cstdint>
#include <vector>

#include "tractfilter/errors.hpp"
#include "tractfilter/nn/layers.hpp"

namespace tractfilter::nn {

struct AdamOptions {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, AdamOptions opt = {}) : params_(std::move(params)), opt_(opt) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), T{0});
      v_.emplace_back(p->size(), T{0});
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      if (p.grad.size() != p.value.size() || m_[k].size() != p.value.size())
        throw ShapeError("parameter '" + p.name + "' changed shape under the optimizer");
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const T g = p.grad[i];
        m[i] = b1 * m[i] + (T{1} - b1) * g;
        v[i] = b2 * v[i] + (T{1} - b2) * g * g;
        const double mhat = static_cast<double>(m[i]) / bc1;
        const double vhat = static_cast<double>(v[i]) / bc2;
        p.value[i] -= static_cast<T>(opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps));
      }
    }
  }

  std::int64_t step_count() const { return t_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  const AdamOptions& options() const { return opt_; }

 private:
  std::vector<Param<T>*> params_;
  AdamOptions opt_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace tractfilter::nn
