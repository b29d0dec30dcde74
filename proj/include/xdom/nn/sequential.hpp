#pragma once

#include <memory>
#include <vector>

#include "xdom/nn/layer.hpp"

namespace xdom::nn {

// Layer chain with an externally-owned forward trace, so one network object
// can serve several concurrent forwards (the same shared layer object may
// appear in two networks).
template <class T>
struct Trace {
  std::vector<LayerCtx<T>> ctxs;
};

template <class T>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerPtr<T>> layers) : layers_(std::move(layers)) {}

  void append(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }
  size_t size() const { return layers_.size(); }
  const std::vector<LayerPtr<T>>& layers() const { return layers_; }

  Tensor<T> forward(Tensor<T> x, Trace<T>* trace, Mode mode) const {
    if (trace) trace->ctxs.assign(layers_.size(), LayerCtx<T>{});
    for (size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i]->forward(x, trace ? &trace->ctxs[i] : nullptr, mode);
    }
    return x;
  }

  Tensor<T> backward(const Trace<T>& trace, Tensor<T> dy) const {
    if (trace.ctxs.size() != layers_.size()) {
      throw ShapeError("trace does not match network depth");
    }
    for (size_t i = layers_.size(); i-- > 0;) {
      dy = layers_[i]->backward(dy, trace.ctxs[i]);
    }
    return dy;
  }

  // Unique parameters in definition order (a shared layer contributes once).
  std::vector<ParamPtr<T>> params() const {
    std::vector<ParamPtr<T>> out;
    for (const auto& l : layers_) l->collect_params(out);
    return out;
  }

  std::vector<NamedTensor<T>> state() const {
    std::vector<NamedTensor<T>> out;
    for (const auto& l : layers_) l->collect_state(out);
    return out;
  }

 private:
  std::vector<LayerPtr<T>> layers_;
};

}  // namespace xdom::nn
