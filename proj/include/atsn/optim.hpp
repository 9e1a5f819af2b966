#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "atsn/common.hpp"
#include "atsn/matrix.hpp"

namespace atsn {

// Adam with optional decoupled weight decay (AdamW when weight_decay > 0).
// Constants follow the usual convention and are pinned project-wide.
struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <class S>
class Adam {
 public:
  Adam(const std::vector<TensorRef<S>>& params, const AdamHyper& hyper) : hyper_(hyper) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p.mat->size(), S(0));
      v_.emplace_back(p.mat->size(), S(0));
    }
  }

  // Applies one update; params and grads must match the constructor list.
  void step(const std::vector<TensorRef<S>>& params, const std::vector<TensorRef<S>>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw NumericError("optimizer tensor list changed between steps");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
      auto& theta = params[ti].mat->a;
      const auto& g = grads[ti].mat->a;
      auto& m = m_[ti];
      auto& v = v_[ti];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = hyper_.beta1 * static_cast<double>(m[i]) + (1.0 - hyper_.beta1) * gi;
        const double vi = hyper_.beta2 * static_cast<double>(v[i]) + (1.0 - hyper_.beta2) * gi * gi;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        double delta = mhat / (std::sqrt(vhat) + hyper_.eps);
        if (hyper_.weight_decay > 0.0) delta += hyper_.weight_decay * static_cast<double>(theta[i]);
        theta[i] = static_cast<S>(static_cast<double>(theta[i]) - hyper_.lr * delta);
      }
    }
  }

  std::int64_t steps_taken() const { return t_; }

 private:
  AdamHyper hyper_;
  std::vector<std::vector<S>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace atsn
