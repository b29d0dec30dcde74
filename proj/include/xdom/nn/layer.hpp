#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xdom/tensor.hpp"

namespace xdom::nn {

enum class Mode { train, eval };

enum class Act { relu, leaky_relu, tanh, sigmoid, softmax };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::relu: return "relu";
    case Act::leaky_relu: return "leaky_relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
    case Act::softmax: return "softmax";
  }
  return "?";
}

// Weight-initialization policy, fixed per parameter at construction time:
//   zeros/ones      -- biases and batch-norm shift / scale
//   gaussian        -- N(0, std^2), used for encoder/generator weights
//   xavier_uniform  -- U(+-sqrt(6/(fan_in+fan_out))), discriminator weights
enum class Init { zeros, ones, gaussian, xavier_uniform };

template <class T>
struct Parameter {
  std::string path;  // canonical checkpoint name, assigned at assembly
  Tensor<T> value;
  Tensor<T> grad;
  Init init = Init::zeros;
  int64_t fan_in = 0, fan_out = 0;

  explicit Parameter(std::vector<int64_t> shape) : value(shape), grad(std::move(shape)) {}
};

template <class T>
using ParamPtr = std::shared_ptr<Parameter<T>>;

// Per-forward cached state consumed by the matching backward call.
template <class T>
struct LayerCtx {
  std::vector<Tensor<T>> saved;
  std::vector<Tensor<int32_t>> saved_idx;
};

// Named view of a persistent tensor (parameter values and batch-norm
// running statistics) for checkpointing.
template <class T>
struct NamedTensor {
  std::string path;
  Tensor<T>* tensor;
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  // `ctx` may be null for inference-only forwards (nothing is cached and
  // backward() is impossible for that pass).
  virtual Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode mode) = 0;

  // Accumulates into parameter .grad members and returns dL/dx.
  virtual Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) = 0;

  virtual void collect_params(std::vector<ParamPtr<T>>& /*out*/) {}
  virtual void collect_state(std::vector<NamedTensor<T>>& /*out*/) {}

  virtual std::string kind() const = 0;

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

 protected:
  std::string name_;
};

template <class T>
using LayerPtr = std::shared_ptr<Layer<T>>;

}  // namespace xdom::nn
