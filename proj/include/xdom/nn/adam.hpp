#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xdom/nn/layer.hpp"

namespace xdom::nn {

// Adam with decoupled weight decay: every step first shrinks the parameter
// by lr*decay, then applies the bias-corrected moment update computed from
// the raw gradient (the decay never enters the moment estimates).
template <class T>
class Adam {
 public:
  struct Hyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  struct Slot {
    ParamPtr<T> param;
    Tensor<T> m, v;
    int64_t t = 0;
    Slot(ParamPtr<T> p) : param(std::move(p)), m(param->value.shape()), v(param->value.shape()) {}
  };

  Adam() = default;
  Adam(std::vector<ParamPtr<T>> params, Hyper h) : hyper_(h) {
    slots_.reserve(params.size());
    for (auto& p : params) slots_.emplace_back(std::move(p));
  }

  void zero_grad() {
    for (auto& s : slots_) s.param->grad.zero();
  }

  void step() {
    for (auto& s : slots_) {
      Tensor<T>& p = s.param->value;
      const Tensor<T>& g = s.param->grad;
      s.t += 1;
      const double bc1 = 1.0 - std::pow(hyper_.beta1, double(s.t));
      const double bc2 = 1.0 - std::pow(hyper_.beta2, double(s.t));
      const double shrink = 1.0 - hyper_.lr * hyper_.weight_decay;
      for (int64_t i = 0; i < p.numel(); ++i) {
        const double gi = double(g[i]);
        const double mi = hyper_.beta1 * double(s.m[i]) + (1.0 - hyper_.beta1) * gi;
        const double vi = hyper_.beta2 * double(s.v[i]) + (1.0 - hyper_.beta2) * gi * gi;
        s.m[i] = T(mi);
        s.v[i] = T(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p[i] = T(double(p[i]) * shrink - hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps));
      }
    }
  }

  const Hyper& hyper() const { return hyper_; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  Hyper hyper_;
  std::vector<Slot> slots_;
};

}  // namespace xdom::nn
