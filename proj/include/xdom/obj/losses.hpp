#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xdom/error.hpp"
#include "xdom/metrics/metrics.hpp"
#include "xdom/tensor.hpp"

namespace xdom::obj {

// All adversarial logs are clamped below at kLogFloor; the matching gradient
// is 1/max(p, floor), which stays bounded instead of vanishing in the
// clamped region.
inline constexpr double kLogFloor = 1e-8;

inline double log_c(double p) { return std::log(std::max(p, kLogFloor)); }
inline double inv_c(double p) { return 1.0 / std::max(p, kLogFloor); }

template <class T>
struct ValueGrad {
  double value = 0.0;
  Tensor<T> grad;  // with respect to the single differentiable input
};

template <class T>
struct ValueGrad2 {
  double value = 0.0;
  Tensor<T> grad_a, grad_b;
};

// Mean absolute difference over every element (batch and feature dims both
// averaged, so weights stay comparable across resolutions).
template <class T>
ValueGrad2<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(msg("l1 operands differ in shape: ", shape_string(a.shape()), " vs ",
                         shape_string(b.shape())));
  }
  ValueGrad2<T> out;
  out.grad_a = Tensor<T>(a.shape());
  out.grad_b = Tensor<T>(b.shape());
  const double inv = 1.0 / static_cast<double>(a.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += std::abs(d);
    const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.grad_a[i] = T(s * inv);
    out.grad_b[i] = T(-s * inv);
  }
  out.value = acc * inv;
  return out;
}

// mean_i [ -log p_i ]  (discriminator on authentic inputs, or the
// non-saturating generator objective on synthetic inputs).
template <class T>
ValueGrad<T> adv_real(const Tensor<T>& p) {
  ValueGrad<T> out;
  out.grad = Tensor<T>(p.shape());
  const double inv = 1.0 / static_cast<double>(p.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    acc += -log_c(double(p[i]));
    out.grad[i] = T(-inv_c(double(p[i])) * inv);
  }
  out.value = acc * inv;
  return out;
}

// mean_i [ -log (1 - p_i) ]  (discriminator on synthetic inputs).
template <class T>
ValueGrad<T> adv_fake(const Tensor<T>& p) {
  ValueGrad<T> out;
  out.grad = Tensor<T>(p.shape());
  const double inv = 1.0 / static_cast<double>(p.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    acc += -log_c(1.0 - double(p[i]));
    out.grad[i] = T(inv_c(1.0 - double(p[i])) * inv);
  }
  out.value = acc * inv;
  return out;
}

// mean_i [ -log probs[i, label_i] ] over a batch of simplex rows.
template <class T>
ValueGrad<T> cross_entropy(const Tensor<T>& probs, const std::vector<int64_t>& labels) {
  if (probs.rank() != 2) throw ShapeError("class probabilities must be rank 2");
  const int64_t B = probs.dim(0), K = probs.dim(1);
  if (static_cast<int64_t>(labels.size()) != B) {
    throw ShapeError(msg("expected ", B, " labels, got ", labels.size()));
  }
  ValueGrad<T> out;
  out.grad = Tensor<T>(probs.shape());
  const double inv = 1.0 / static_cast<double>(B);
  double acc = 0.0;
  for (int64_t i = 0; i < B; ++i) {
    const int64_t y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= K) throw DomainError(msg("label ", y, " outside [0, ", K - 1, "]"));
    const double p = double(probs.at(i, y));
    acc += -log_c(p);
    out.grad.at(i, y) = T(-inv_c(p) * inv);
  }
  out.value = acc * inv;
  return out;
}

struct KernelCfg {
  metrics::KernelFamily family = metrics::KernelFamily::inverse_multiquadric;
  double scale = 1.0;  // IMQ C, or gaussian bandwidth
};

// Default IMQ scale used for the latent penalty: C = 2 * d_z * sigma^2.
inline double default_imq_scale(int64_t dz, double sigma) {
  return 2.0 * static_cast<double>(dz) * sigma * sigma;
}

// Unbiased squared maximum mean discrepancy between a prior sample (fixed)
// and encoded codes (differentiable); both are (n, d) / (m, d) rank-2.
// The value is the raw U-statistic, which may legitimately dip below zero.
template <class T>
ValueGrad<T> mmd_penalty(const Tensor<T>& prior, const Tensor<T>& encoded,
                         const KernelCfg& k) {
  if (prior.rank() != 2 || encoded.rank() != 2 || prior.dim(1) != encoded.dim(1)) {
    throw ShapeError("mmd operands must be rank-2 with equal feature width");
  }
  const int64_t n = prior.dim(0), m = encoded.dim(0), d = prior.dim(1);
  if (n < 2 || m < 2) throw DomainError("unbiased mmd needs at least two samples per side");
  if (!(k.scale > 0.0)) throw DomainError("kernel scale must be positive");

  ValueGrad<T> out;
  out.grad = Tensor<T>(encoded.shape());

  auto kern = [&](const T* x, const T* y, double& kval, double& gcoef) {
    double r2 = 0.0;
    for (int64_t c = 0; c < d; ++c) {
      const double diff = double(x[c]) - double(y[c]);
      r2 += diff * diff;
    }
    if (k.family == metrics::KernelFamily::inverse_multiquadric) {
      const double den = k.scale + r2;
      kval = k.scale / den;
      gcoef = -2.0 * k.scale / (den * den);  // d k / d r2 * 2
    } else {
      kval = std::exp(-r2 / (2.0 * k.scale));
      gcoef = -kval / k.scale;
    }
  };

  double s_pp = 0.0, s_zz = 0.0, s_pz = 0.0;
  // prior-prior (no gradient)
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      double kv, gc;
      kern(prior.data() + i * d, prior.data() + j * d, kv, gc);
      s_pp += 2.0 * kv;
    }
  s_pp /= static_cast<double>(n) * static_cast<double>(n - 1);

  // encoded-encoded
  const double inv_zz = 1.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = i + 1; j < m; ++j) {
      double kv, gc;
      const T* zi = encoded.data() + i * d;
      const T* zj = encoded.data() + j * d;
      kern(zi, zj, kv, gc);
      s_zz += 2.0 * kv;
      // d k(zi, zj)/d zi = gcoef * (zi - zj); both (i,j) and (j,i) terms
      for (int64_t c = 0; c < d; ++c) {
        const double g = gc * (double(zi[c]) - double(zj[c])) * 2.0 * inv_zz;
        out.grad.at(i, c) += T(g);
        out.grad.at(j, c) -= T(g);
      }
    }
  s_zz *= inv_zz;

  // prior-encoded cross term
  const double inv_pz = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) {
      double kv, gc;
      const T* pi = prior.data() + i * d;
      const T* zj = encoded.data() + j * d;
      kern(pi, zj, kv, gc);
      s_pz += kv;
      for (int64_t c = 0; c < d; ++c) {
        out.grad.at(j, c) -= T(2.0 * gc * (double(zj[c]) - double(pi[c])) * inv_pz);
      }
    }
  s_pz *= inv_pz;

  out.value = s_pp + s_zz - 2.0 * s_pz;
  return out;
}

}  // namespace xdom::obj
