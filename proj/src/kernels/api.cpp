#include "kernels_internal.hpp"
#include "xdom/kernels/dispatch.hpp"
#include "xdom/kernels/elementwise.hpp"
#include "xdom/kernels/gemm.hpp"

// Public kernel entry points: branch once per call on the active ISA.

namespace xdom::kernels {

#define XDOM_GEMM_DISPATCH(name, T)                                                     \
  void name(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C, bool acc) {  \
    if (active_isa() == Isa::avx2) {                                                    \
      detail::name##_avx2(M, K, N, A, B, C, acc);                                       \
    } else {                                                                            \
      detail::name##_scalar<T>(M, K, N, A, B, C, acc);                                  \
    }                                                                                   \
  }

XDOM_GEMM_DISPATCH(gemm_nn, float)
XDOM_GEMM_DISPATCH(gemm_nt, float)
XDOM_GEMM_DISPATCH(gemm_tn, float)
XDOM_GEMM_DISPATCH(gemm_nn, double)
XDOM_GEMM_DISPATCH(gemm_nt, double)
XDOM_GEMM_DISPATCH(gemm_tn, double)
#undef XDOM_GEMM_DISPATCH

void leaky_relu_forward(size_t n, float slope, const float* x, float* y) {
  if (active_isa() == Isa::avx2) {
    detail::leaky_relu_forward_avx2(n, slope, x, y);
  } else {
    detail::leaky_relu_forward_scalar(n, slope, x, y);
  }
}
void leaky_relu_forward(size_t n, double slope, const double* x, double* y) {
  if (active_isa() == Isa::avx2) {
    detail::leaky_relu_forward_avx2(n, slope, x, y);
  } else {
    detail::leaky_relu_forward_scalar(n, slope, x, y);
  }
}
void leaky_relu_backward(size_t n, float slope, const float* x, const float* dy, float* dx) {
  if (active_isa() == Isa::avx2) {
    detail::leaky_relu_backward_avx2(n, slope, x, dy, dx);
  } else {
    detail::leaky_relu_backward_scalar(n, slope, x, dy, dx);
  }
}
void leaky_relu_backward(size_t n, double slope, const double* x, const double* dy, double* dx) {
  if (active_isa() == Isa::avx2) {
    detail::leaky_relu_backward_avx2(n, slope, x, dy, dx);
  } else {
    detail::leaky_relu_backward_scalar(n, slope, x, dy, dx);
  }
}
void axpy(size_t n, float a, const float* x, float* y) {
  if (active_isa() == Isa::avx2) {
    detail::axpy_avx2(n, a, x, y);
  } else {
    detail::axpy_scalar(n, a, x, y);
  }
}
void axpy(size_t n, double a, const double* x, double* y) {
  if (active_isa() == Isa::avx2) {
    detail::axpy_avx2(n, a, x, y);
  } else {
    detail::axpy_scalar(n, a, x, y);
  }
}

}  // namespace xdom::kernels
