#pragma once

#include <cstddef>
#include <cstdint>

// Internal declarations shared between the dispatch layer and the
// per-ISA translation units. gemm_avx2.cpp / elementwise_avx2.cpp are the
// only files compiled with -mavx2 -mfma; nothing here may be inlined into
// generic TUs, hence plain function declarations only.

namespace xdom::kernels::detail {

template <class T>
void gemm_nn_scalar(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
                    bool accumulate);
template <class T>
void gemm_nt_scalar(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
                    bool accumulate);
template <class T>
void gemm_tn_scalar(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
                    bool accumulate);

void gemm_nn_avx2(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
                  bool accumulate);
void gemm_nt_avx2(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
                  bool accumulate);
void gemm_tn_avx2(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
                  bool accumulate);
void gemm_nn_avx2(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
                  bool accumulate);
void gemm_nt_avx2(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
                  bool accumulate);
void gemm_tn_avx2(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
                  bool accumulate);

template <class T>
void leaky_relu_forward_scalar(size_t n, T slope, const T* x, T* y);
template <class T>
void leaky_relu_backward_scalar(size_t n, T slope, const T* x, const T* dy, T* dx);
template <class T>
void axpy_scalar(size_t n, T a, const T* x, T* y);

void leaky_relu_forward_avx2(size_t n, float slope, const float* x, float* y);
void leaky_relu_backward_avx2(size_t n, float slope, const float* x, const float* dy, float* dx);
void axpy_avx2(size_t n, float a, const float* x, float* y);
void leaky_relu_forward_avx2(size_t n, double slope, const double* x, double* y);
void leaky_relu_backward_avx2(size_t n, double slope, const double* x, const double* dy,
                              double* dx);
void axpy_avx2(size_t n, double a, const double* x, double* y);

}  // namespace xdom::kernels::detail
