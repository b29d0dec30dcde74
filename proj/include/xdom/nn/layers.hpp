#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "xdom/error.hpp"
#include "xdom/kernels/elementwise.hpp"
#include "xdom/kernels/gemm.hpp"
#include "xdom/nn/conv_util.hpp"
#include "xdom/nn/layer.hpp"

namespace xdom::nn {

// ---------------------------------------------------------------- Conv2d ----

// 2-D convolution with independent edge padding (pad_t/b/l/r), lowered to
// one im2col + GEMM per batch. Weight layout (out_c, in_c, kh, kw).
template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int64_t in_c, int64_t out_c, int64_t kh, int64_t kw, int64_t stride, int64_t pad_t,
         int64_t pad_b, int64_t pad_l, int64_t pad_r, Init weight_init)
      : in_c_(in_c), out_c_(out_c), kh_(kh), kw_(kw), stride_(stride), pad_t_(pad_t),
        pad_b_(pad_b), pad_l_(pad_l), pad_r_(pad_r) {
    w_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{out_c, in_c, kh, kw});
    w_->init = weight_init;
    w_->fan_in = in_c * kh * kw;
    w_->fan_out = out_c * kh * kw;
    b_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{out_c});
    b_->init = Init::zeros;
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode) override {
    check_input(x);
    const int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t OH = (H + pad_t_ + pad_b_ - kh_) / stride_ + 1;
    const int64_t OW = (W + pad_l_ + pad_r_ - kw_) / stride_ + 1;
    if (OH <= 0 || OW <= 0) {
      throw ShapeError(msg(this->name_, ": non-positive output size ", OH, "x", OW));
    }
    const int64_t ckk = in_c_ * kh_ * kw_, cols = B * OH * OW, pos = OH * OW;

    Tensor<T> col({ckk, cols});
    for (int64_t b = 0; b < B; ++b) {
      im2col(x.data() + b * in_c_ * H * W, in_c_, H, W, kh_, kw_, stride_, pad_t_, pad_l_, OH,
             OW, col.data(), cols, b * pos);
    }
    Tensor<T> y_r({out_c_, cols});
    kernels::gemm_nn(out_c_, ckk, cols, w_->value.data(), col.data(), y_r.data(), false);

    Tensor<T> out({B, out_c_, OH, OW});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t o = 0; o < out_c_; ++o) {
        const T bias = b_->value[o];
        const T* src = y_r.data() + o * cols + b * pos;
        T* dst = out.data() + (b * out_c_ + o) * pos;
        for (int64_t p = 0; p < pos; ++p) dst[p] = src[p] + bias;
      }
    if (ctx) ctx->saved = {x};
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<T>& x = ctx.saved.at(0);
    const int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t OH = dy.dim(2), OW = dy.dim(3);
    const int64_t ckk = in_c_ * kh_ * kw_, cols = B * OH * OW, pos = OH * OW;

    // Regroup dy as (out_c, B*OH*OW) and accumulate the bias gradient.
    Tensor<T> dy_r({out_c_, cols});
    for (int64_t o = 0; o < out_c_; ++o) {
      double bsum = 0.0;
      T* dst = dy_r.data() + o * cols;
      for (int64_t b = 0; b < B; ++b) {
        const T* src = dy.data() + (b * out_c_ + o) * pos;
        for (int64_t p = 0; p < pos; ++p) {
          dst[b * pos + p] = src[p];
          bsum += src[p];
        }
      }
      b_->grad[o] += static_cast<T>(bsum);
    }

    Tensor<T> col({ckk, cols});
    for (int64_t b = 0; b < B; ++b) {
      im2col(x.data() + b * in_c_ * H * W, in_c_, H, W, kh_, kw_, stride_, pad_t_, pad_l_, OH,
             OW, col.data(), cols, b * pos);
    }
    kernels::gemm_nt(out_c_, cols, ckk, dy_r.data(), col.data(), w_->grad.data(), true);

    Tensor<T> dcol({ckk, cols});
    kernels::gemm_tn(ckk, out_c_, cols, w_->value.data(), dy_r.data(), dcol.data(), false);
    Tensor<T> dx({B, in_c_, H, W});
    for (int64_t b = 0; b < B; ++b) {
      col2im_add(dcol.data(), in_c_, H, W, kh_, kw_, stride_, pad_t_, pad_l_, OH, OW,
                 dx.data() + b * in_c_ * H * W, cols, b * pos);
    }
    return dx;
  }

  void collect_params(std::vector<ParamPtr<T>>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void collect_state(std::vector<NamedTensor<T>>& out) override {
    out.push_back({this->name_ + ".w", &w_->value});
    out.push_back({this->name_ + ".b", &b_->value});
  }
  std::string kind() const override { return "conv"; }

  ParamPtr<T> weight() { return w_; }
  ParamPtr<T> bias() { return b_; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != in_c_) {
      throw ShapeError(msg(this->name_, ": expected (B,", in_c_, ",H,W) input, got ",
                           shape_string(x.shape())));
    }
  }

  int64_t in_c_, out_c_, kh_, kw_, stride_, pad_t_, pad_b_, pad_l_, pad_r_;
  ParamPtr<T> w_, b_;
};

// ------------------------------------------------------- ConvTranspose2d ----

// Transposed convolution (fractionally-strided). Weight layout
// (in_c, out_c, kh, kw); output size (H-1)*stride - pad_t - pad_b + kh.
template <class T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int64_t in_c, int64_t out_c, int64_t k, int64_t stride, int64_t pad,
                  Init weight_init)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {
    w_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{in_c, out_c, k, k});
    w_->init = weight_init;
    w_->fan_in = in_c * k * k;
    w_->fan_out = out_c * k * k;
    b_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{out_c});
    b_->init = Init::zeros;
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode) override {
    if (x.rank() != 4 || x.dim(1) != in_c_) {
      throw ShapeError(msg(this->name_, ": expected (B,", in_c_, ",H,W) input, got ",
                           shape_string(x.shape())));
    }
    const int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t OH = (H - 1) * stride_ - 2 * pad_ + k_;
    const int64_t OW = (W - 1) * stride_ - 2 * pad_ + k_;
    if (OH <= 0 || OW <= 0) {
      throw ShapeError(msg(this->name_, ": non-positive output size ", OH, "x", OW));
    }
    const int64_t okk = out_c_ * k_ * k_, cols = B * H * W, pos = H * W;

    // X regrouped to (in_c, B*H*W), then col = W^T X, scattered into y.
    Tensor<T> x_r({in_c_, cols});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < in_c_; ++c)
        std::copy_n(x.data() + (b * in_c_ + c) * pos, pos, x_r.data() + c * cols + b * pos);

    Tensor<T> col({okk, cols});
    kernels::gemm_tn(okk, in_c_, cols, w_->value.data(), x_r.data(), col.data(), false);

    Tensor<T> out({B, out_c_, OH, OW});
    for (int64_t b = 0; b < B; ++b) {
      col2im_add(col.data(), out_c_, OH, OW, k_, k_, stride_, pad_, pad_, H, W,
                 out.data() + b * out_c_ * OH * OW, cols, b * pos);
    }
    for (int64_t b = 0; b < B; ++b)
      for (int64_t o = 0; o < out_c_; ++o) {
        T* dst = out.data() + (b * out_c_ + o) * OH * OW;
        const T bias = b_->value[o];
        for (int64_t p = 0; p < OH * OW; ++p) dst[p] += bias;
      }
    if (ctx) ctx->saved = {x};
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<T>& x = ctx.saved.at(0);
    const int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t OH = dy.dim(2), OW = dy.dim(3);
    const int64_t okk = out_c_ * k_ * k_, cols = B * H * W, pos = H * W;

    for (int64_t o = 0; o < out_c_; ++o) {
      double bsum = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const T* src = dy.data() + (b * out_c_ + o) * OH * OW;
        for (int64_t p = 0; p < OH * OW; ++p) bsum += src[p];
      }
      b_->grad[o] += static_cast<T>(bsum);
    }

    // Gather of dy is the adjoint of the forward scatter.
    Tensor<T> dcol({okk, cols});
    for (int64_t b = 0; b < B; ++b) {
      im2col(dy.data() + b * out_c_ * OH * OW, out_c_, OH, OW, k_, k_, stride_, pad_, pad_, H,
             W, dcol.data(), cols, b * pos);
    }

    Tensor<T> x_r({in_c_, cols});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < in_c_; ++c)
        std::copy_n(x.data() + (b * in_c_ + c) * pos, pos, x_r.data() + c * cols + b * pos);
    kernels::gemm_nt(in_c_, cols, okk, x_r.data(), dcol.data(), w_->grad.data(), true);

    Tensor<T> dx_r({in_c_, cols});
    kernels::gemm_nn(in_c_, okk, cols, w_->value.data(), dcol.data(), dx_r.data(), false);
    Tensor<T> dx({B, in_c_, H, W});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < in_c_; ++c)
        std::copy_n(dx_r.data() + c * cols + b * pos, pos, dx.data() + (b * in_c_ + c) * pos);
    return dx;
  }

  void collect_params(std::vector<ParamPtr<T>>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void collect_state(std::vector<NamedTensor<T>>& out) override {
    out.push_back({this->name_ + ".w", &w_->value});
    out.push_back({this->name_ + ".b", &b_->value});
  }
  std::string kind() const override { return "deconv"; }

 private:
  int64_t in_c_, out_c_, k_, stride_, pad_;
  ParamPtr<T> w_, b_;
};

// ---------------------------------------------------------------- Linear ----

// Fully connected layer; flattens any higher-rank input per sample.
template <class T>
class Linear : public Layer<T> {
 public:
  Linear(int64_t in, int64_t out, Init weight_init) : in_(in), out_(out) {
    w_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{out, in});
    w_->init = weight_init;
    w_->fan_in = in;
    w_->fan_out = out;
    b_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{out});
    b_->init = Init::zeros;
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode) override {
    const int64_t B = x.dim(0);
    if (x.numel() != B * in_) {
      throw ShapeError(msg(this->name_, ": expected ", in_, " features per sample, got ",
                           shape_string(x.shape())));
    }
    Tensor<T> flat = x;
    flat.reshape({B, in_});
    Tensor<T> y({B, out_});
    kernels::gemm_nt(B, in_, out_, flat.data(), w_->value.data(), y.data(), false);
    for (int64_t i = 0; i < B; ++i)
      for (int64_t o = 0; o < out_; ++o) y.at(i, o) += b_->value[o];
    if (ctx) ctx->saved = {x};
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<T>& x = ctx.saved.at(0);
    const int64_t B = x.dim(0);
    Tensor<T> flat = x;
    flat.reshape({B, in_});
    kernels::gemm_tn(out_, B, in_, dy.data(), flat.data(), w_->grad.data(), true);
    for (int64_t o = 0; o < out_; ++o) {
      double s = 0.0;
      for (int64_t i = 0; i < B; ++i) s += dy.at(i, o);
      b_->grad[o] += static_cast<T>(s);
    }
    Tensor<T> dx({B, in_});
    kernels::gemm_nn(B, out_, in_, dy.data(), w_->value.data(), dx.data(), false);
    dx.reshape(x.shape());
    return dx;
  }

  void collect_params(std::vector<ParamPtr<T>>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void collect_state(std::vector<NamedTensor<T>>& out) override {
    out.push_back({this->name_ + ".w", &w_->value});
    out.push_back({this->name_ + ".b", &b_->value});
  }
  std::string kind() const override { return "fully_connected"; }

 private:
  int64_t in_, out_;
  ParamPtr<T> w_, b_;
};

// ----------------------------------------------------------- BatchNorm2d ----

// Channel-wise batch normalization for NCHW tensors. Batch statistics in
// training mode (running statistics updated with momentum 0.1, unbiased
// variance), running statistics in eval mode. Statistics accumulate in
// double regardless of T.
template <class T>
class BatchNorm2d : public Layer<T> {
 public:
  explicit BatchNorm2d(int64_t channels, double eps = 1e-5, double momentum = 0.1)
      : c_(channels), eps_(eps), momentum_(momentum), running_mean_({channels}),
        running_var_(Tensor<T>::full({channels}, T(1))) {
    gamma_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{channels});
    gamma_->init = Init::ones;
    beta_ = std::make_shared<Parameter<T>>(std::vector<int64_t>{channels});
    beta_->init = Init::zeros;
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode mode) override {
    if (x.rank() != 4 || x.dim(1) != c_) {
      throw ShapeError(msg(this->name_, ": expected (B,", c_, ",H,W) input, got ",
                           shape_string(x.shape())));
    }
    const int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3), pos = H * W;
    const int64_t N = B * pos;
    Tensor<T> y(x.shape());

    if (mode == Mode::train) {
      Tensor<T> xhat(x.shape());
      Tensor<T> invstd({c_});
      for (int64_t c = 0; c < c_; ++c) {
        double sum = 0.0;
        for (int64_t b = 0; b < B; ++b) {
          const T* p = x.data() + (b * c_ + c) * pos;
          for (int64_t i = 0; i < pos; ++i) sum += p[i];
        }
        const double mean = sum / N;
        double varsum = 0.0;
        for (int64_t b = 0; b < B; ++b) {
          const T* p = x.data() + (b * c_ + c) * pos;
          for (int64_t i = 0; i < pos; ++i) {
            const double d = p[i] - mean;
            varsum += d * d;
          }
        }
        const double var = varsum / N;
        const double istd = 1.0 / std::sqrt(var + eps_);
        invstd[c] = static_cast<T>(istd);
        const double g = gamma_->value[c], bt = beta_->value[c];
        for (int64_t b = 0; b < B; ++b) {
          const T* p = x.data() + (b * c_ + c) * pos;
          T* xh = xhat.data() + (b * c_ + c) * pos;
          T* py = y.data() + (b * c_ + c) * pos;
          for (int64_t i = 0; i < pos; ++i) {
            const double h = (p[i] - mean) * istd;
            xh[i] = static_cast<T>(h);
            py[i] = static_cast<T>(g * h + bt);
          }
        }
        running_mean_[c] =
            static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
        const double unbiased = N > 1 ? var * double(N) / double(N - 1) : var;
        running_var_[c] =
            static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
      }
      if (ctx) {
        ctx->saved = {std::move(xhat), std::move(invstd)};
      }
    } else {
      for (int64_t c = 0; c < c_; ++c) {
        const double istd = 1.0 / std::sqrt(double(running_var_[c]) + eps_);
        const double mean = running_mean_[c];
        const double g = gamma_->value[c], bt = beta_->value[c];
        for (int64_t b = 0; b < B; ++b) {
          const T* p = x.data() + (b * c_ + c) * pos;
          T* py = y.data() + (b * c_ + c) * pos;
          for (int64_t i = 0; i < pos; ++i) py[i] = static_cast<T>(g * (p[i] - mean) * istd + bt);
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<T>& xhat = ctx.saved.at(0);
    const Tensor<T>& invstd = ctx.saved.at(1);
    const int64_t B = dy.dim(0), pos = dy.dim(2) * dy.dim(3), N = B * pos;
    Tensor<T> dx(dy.shape());
    for (int64_t c = 0; c < c_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int64_t b = 0; b < B; ++b) {
        const T* pdy = dy.data() + (b * c_ + c) * pos;
        const T* ph = xhat.data() + (b * c_ + c) * pos;
        for (int64_t i = 0; i < pos; ++i) {
          sum_dy += pdy[i];
          sum_dy_xhat += double(pdy[i]) * ph[i];
        }
      }
      beta_->grad[c] += static_cast<T>(sum_dy);
      gamma_->grad[c] += static_cast<T>(sum_dy_xhat);
      const double g_istd = double(gamma_->value[c]) * invstd[c];
      const double mean_dy = sum_dy / N, mean_dy_xhat = sum_dy_xhat / N;
      for (int64_t b = 0; b < B; ++b) {
        const T* pdy = dy.data() + (b * c_ + c) * pos;
        const T* ph = xhat.data() + (b * c_ + c) * pos;
        T* pdx = dx.data() + (b * c_ + c) * pos;
        for (int64_t i = 0; i < pos; ++i) {
          pdx[i] = static_cast<T>(g_istd * (pdy[i] - mean_dy - double(ph[i]) * mean_dy_xhat));
        }
      }
    }
    return dx;
  }

  void collect_params(std::vector<ParamPtr<T>>& out) override {
    out.push_back(gamma_);
    out.push_back(beta_);
  }
  void collect_state(std::vector<NamedTensor<T>>& out) override {
    out.push_back({this->name_ + ".gamma", &gamma_->value});
    out.push_back({this->name_ + ".beta", &beta_->value});
    out.push_back({this->name_ + ".running_mean", &running_mean_});
    out.push_back({this->name_ + ".running_var", &running_var_});
  }
  std::string kind() const override { return "batch_norm"; }

  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

 private:
  int64_t c_;
  double eps_, momentum_;
  ParamPtr<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
};

// ------------------------------------------------------------- MaxPool2d ----

// 2x2 max pooling with stride 2; remembers argmax positions for backward.
template <class T>
class MaxPool2d : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode) override {
    if (x.rank() != 4) throw ShapeError(msg(this->name_, ": expected rank-4 input"));
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t OH = H / 2, OW = W / 2;
    Tensor<T> y({B, C, OH, OW});
    Tensor<int32_t> idx({B, C, OH, OW});
    for (int64_t bc = 0; bc < B * C; ++bc) {
      const T* px = x.data() + bc * H * W;
      T* py = y.data() + bc * OH * OW;
      int32_t* pi = idx.data() + bc * OH * OW;
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          const int64_t h0 = 2 * oh, w0 = 2 * ow;
          int64_t best = h0 * W + w0;
          T bv = px[best];
          const int64_t cand[3] = {h0 * W + w0 + 1, (h0 + 1) * W + w0, (h0 + 1) * W + w0 + 1};
          for (int64_t k = 0; k < 3; ++k) {
            if (px[cand[k]] > bv) {
              bv = px[cand[k]];
              best = cand[k];
            }
          }
          py[oh * OW + ow] = bv;
          pi[oh * OW + ow] = static_cast<int32_t>(best);
        }
    }
    if (ctx) {
      ctx->saved_idx = {std::move(idx)};
      Tensor<T> in_shape({4});
      in_shape[0] = T(B);
      in_shape[1] = T(C);
      in_shape[2] = T(H);
      in_shape[3] = T(W);
      ctx->saved = {std::move(in_shape)};
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<int32_t>& idx = ctx.saved_idx.at(0);
    const Tensor<T>& sh = ctx.saved.at(0);
    const int64_t B = int64_t(sh[0]), C = int64_t(sh[1]), H = int64_t(sh[2]), W = int64_t(sh[3]);
    const int64_t OH = dy.dim(2), OW = dy.dim(3);
    Tensor<T> dx({B, C, H, W});
    for (int64_t bc = 0; bc < B * C; ++bc) {
      const T* pdy = dy.data() + bc * OH * OW;
      const int32_t* pi = idx.data() + bc * OH * OW;
      T* pdx = dx.data() + bc * H * W;
      for (int64_t p = 0; p < OH * OW; ++p) pdx[pi[p]] += pdy[p];
    }
    return dx;
  }

  std::string kind() const override { return "max_pool"; }
};

// ------------------------------------------------------------ Activation ----

template <class T>
class Activation : public Layer<T> {
 public:
  explicit Activation(Act act, double slope = 0.2) : act_(act), slope_(slope) {}

  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode) override {
    Tensor<T> y(x.shape());
    const int64_t n = x.numel();
    switch (act_) {
      case Act::relu:
        for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        if (ctx) ctx->saved = {x};
        break;
      case Act::leaky_relu:
        kernels::leaky_relu_forward(static_cast<size_t>(n), static_cast<T>(slope_), x.data(),
                                    y.data());
        if (ctx) ctx->saved = {x};
        break;
      case Act::tanh:
        for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
        if (ctx) ctx->saved = {y};
        break;
      case Act::sigmoid:
        for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
        if (ctx) ctx->saved = {y};
        break;
      case Act::softmax: {
        if (x.rank() != 2) throw ShapeError("softmax expects a (batch, classes) tensor");
        const int64_t B = x.dim(0), C = x.dim(1);
        for (int64_t b = 0; b < B; ++b) {
          const T* px = x.data() + b * C;
          T* py = y.data() + b * C;
          T mx = px[0];
          for (int64_t c = 1; c < C; ++c) mx = std::max(mx, px[c]);
          double sum = 0.0;
          for (int64_t c = 0; c < C; ++c) {
            py[c] = std::exp(px[c] - mx);
            sum += py[c];
          }
          for (int64_t c = 0; c < C; ++c) py[c] = static_cast<T>(py[c] / sum);
        }
        if (ctx) ctx->saved = {y};
        break;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<T>& s = ctx.saved.at(0);
    Tensor<T> dx(dy.shape());
    const int64_t n = dy.numel();
    switch (act_) {
      case Act::relu:
        for (int64_t i = 0; i < n; ++i) dx[i] = s[i] > T(0) ? dy[i] : T(0);
        break;
      case Act::leaky_relu:
        kernels::leaky_relu_backward(static_cast<size_t>(n), static_cast<T>(slope_), s.data(),
                                     dy.data(), dx.data());
        break;
      case Act::tanh:
        for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (T(1) - s[i] * s[i]);
        break;
      case Act::sigmoid:
        for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * s[i] * (T(1) - s[i]);
        break;
      case Act::softmax: {
        const int64_t B = dy.dim(0), C = dy.dim(1);
        for (int64_t b = 0; b < B; ++b) {
          const T* py = s.data() + b * C;
          const T* pdy = dy.data() + b * C;
          T* pdx = dx.data() + b * C;
          double dot = 0.0;
          for (int64_t c = 0; c < C; ++c) dot += double(pdy[c]) * py[c];
          for (int64_t c = 0; c < C; ++c)
            pdx[c] = static_cast<T>(py[c] * (pdy[c] - dot));
        }
        break;
      }
    }
    return dx;
  }

  std::string kind() const override { return std::string("activation:") + act_name(act_); }
  Act act() const { return act_; }

 private:
  Act act_;
  double slope_;
};

// --------------------------------------------------------------- Reshape ----

// Fixed per-sample target shape (batch dimension passes through).
template <class T>
class Reshape : public Layer<T> {
 public:
  explicit Reshape(std::vector<int64_t> sample_shape) : sample_shape_(std::move(sample_shape)) {}

  Tensor<T> forward(const Tensor<T>& x, LayerCtx<T>* ctx, Mode) override {
    if (ctx) {
      Tensor<T> sh({x.rank()});
      for (int i = 0; i < x.rank(); ++i) sh[i] = T(x.dim(i));
      ctx->saved = {std::move(sh)};
    }
    Tensor<T> y = x;
    std::vector<int64_t> target{x.dim(0)};
    target.insert(target.end(), sample_shape_.begin(), sample_shape_.end());
    y.reshape(std::move(target));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCtx<T>& ctx) override {
    const Tensor<T>& sh = ctx.saved.at(0);
    std::vector<int64_t> orig(static_cast<size_t>(sh.numel()));
    for (int64_t i = 0; i < sh.numel(); ++i) orig[static_cast<size_t>(i)] = int64_t(sh[i]);
    Tensor<T> dx = dy;
    dx.reshape(std::move(orig));
    return dx;
  }

  std::string kind() const override { return "reshape"; }

 private:
  std::vector<int64_t> sample_shape_;
};

}  // namespace xdom::nn
