#pragma once

#include <cstdint>

namespace xdom::nn {

// Patch-matrix lowering for convolutions. `col` is a (C*kh*kw) x ld_col
// matrix; the image's patch columns start at column offset `col0`, so a
// whole batch can share one matrix (ld_col = B*OH*OW) and a single GEMM.

template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad_t, int64_t pad_l, int64_t OH, int64_t OW, T* col, int64_t ld_col,
            int64_t col0) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        const int64_t row = (c * kh + i) * kw + j;
        T* dst = col + row * ld_col + col0;
        for (int64_t oh = 0; oh < OH; ++oh) {
          const int64_t ih = oh * stride - pad_t + i;
          for (int64_t ow = 0; ow < OW; ++ow) {
            const int64_t iw = ow * stride - pad_l + j;
            dst[oh * OW + ow] = (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                    ? x[(c * H + ih) * W + iw]
                                    : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch columns back into the image.
template <class T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad_t, int64_t pad_l, int64_t OH, int64_t OW, T* x,
                int64_t ld_col, int64_t col0) {
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        const int64_t row = (c * kh + i) * kw + j;
        const T* src = col + row * ld_col + col0;
        for (int64_t oh = 0; oh < OH; ++oh) {
          const int64_t ih = oh * stride - pad_t + i;
          if (ih < 0 || ih >= H) continue;
          for (int64_t ow = 0; ow < OW; ++ow) {
            const int64_t iw = ow * stride - pad_l + j;
            if (iw >= 0 && iw < W) x[(c * H + ih) * W + iw] += src[oh * OW + ow];
          }
        }
      }
    }
  }
}

}  // namespace xdom::nn
