#pragma once

#include <cmath>
#include <map>
#include <string>

#include "entailkit/autodiff.hpp"

namespace entailkit {

// Plain gradient descent. Kept alongside AdamW because the weak-batch
// learning-rate law (update at lr_scale alpha == alpha * update at scale 1)
// is exact only for a stateless optimizer.
class SgdOptimizer {
 public:
  void step(ParamSet& params, double lr) {
    for (auto& [name, v] : params.items())
      for (std::size_t i = 0; i < v->value.numel(); ++i)
        v->value.data[i] -= lr * v->grad.data[i];
  }
};

// AdamW with decoupled weight decay.
class AdamWOptimizer {
 public:
  explicit AdamWOptimizer(double weight_decay = 0.02, double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& params, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, v] : params.items()) {
      auto& m = m_[name];
      auto& s = s_[name];
      if (m.size() != v->value.numel()) {
        m.assign(v->value.numel(), 0.0);
        s.assign(v->value.numel(), 0.0);
      }
      for (std::size_t i = 0; i < v->value.numel(); ++i) {
        double g = v->grad.data[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        s[i] = beta2_ * s[i] + (1.0 - beta2_) * g * g;
        double mhat = m[i] / bc1;
        double shat = s[i] / bc2;
        v->value.data[i] -= lr * (mhat / (std::sqrt(shat) + eps_) +
                                  weight_decay_ * v->value.data[i]);
      }
    }
  }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, std::vector<double>> m_, s_;
};

}  // namespace entailkit
