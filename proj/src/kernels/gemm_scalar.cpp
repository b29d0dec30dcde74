#include <algorithm>
#include <cstdint>

#include "kernels_internal.hpp"

// Reference GEMM implementations. Deliberately plain triple loops: these
// define the semantics the AVX2 variants are tested against, and they are
// the fallback on CPUs without AVX2/FMA.

namespace xdom::kernels::detail {

template <class T>
void gemm_nn_scalar(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
                    bool accumulate) {
  for (int64_t m = 0; m < M; ++m) {
    T* c = C + m * N;
    if (!accumulate) std::fill(c, c + N, T(0));
    const T* a = A + m * K;
    for (int64_t k = 0; k < K; ++k) {
      const T av = a[k];
      const T* b = B + k * N;
      for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

template <class T>
void gemm_nt_scalar(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
                    bool accumulate) {
  for (int64_t m = 0; m < M; ++m) {
    const T* a = A + m * K;
    T* c = C + m * N;
    for (int64_t n = 0; n < N; ++n) {
      const T* b = B + n * K;
      T acc = 0;
      for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
      c[n] = accumulate ? c[n] + acc : acc;
    }
  }
}

template <class T>
void gemm_tn_scalar(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
                    bool accumulate) {
  for (int64_t m = 0; m < M; ++m) {
    T* c = C + m * N;
    if (!accumulate) std::fill(c, c + N, T(0));
    for (int64_t k = 0; k < K; ++k) {
      const T av = A[k * M + m];
      const T* b = B + k * N;
      for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

template void gemm_nn_scalar<float>(int64_t, int64_t, int64_t, const float*, const float*,
                                    float*, bool);
template void gemm_nt_scalar<float>(int64_t, int64_t, int64_t, const float*, const float*,
                                    float*, bool);
template void gemm_tn_scalar<float>(int64_t, int64_t, int64_t, const float*, const float*,
                                    float*, bool);
template void gemm_nn_scalar<double>(int64_t, int64_t, int64_t, const double*, const double*,
                                     double*, bool);
template void gemm_nt_scalar<double>(int64_t, int64_t, int64_t, const double*, const double*,
                                     double*, bool);
template void gemm_tn_scalar<double>(int64_t, int64_t, int64_t, const double*, const double*,
                                     double*, bool);

}  // namespace xdom::kernels::detail
