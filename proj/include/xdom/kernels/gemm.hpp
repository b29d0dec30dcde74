#pragma once

#include <cstdint>

namespace xdom::kernels {

// Dense single-threaded GEMM for fully packed row-major matrices
// (leading dimension == logical column count). The three layouts cover
// every product the network layers need:
//
//   gemm_nn: C[M,N] (+)= A[M,K]  * B[K,N]
//   gemm_nt: C[M,N] (+)= A[M,K]  * B[N,K]^T
//   gemm_tn: C[M,N] (+)= A[K,M]^T * B[K,N]
//
// When `accumulate` is false C is overwritten, otherwise the product is
// added to the existing contents. Dispatches to the scalar reference or
// the AVX2/FMA implementation according to active_isa().

void gemm_nn(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
             bool accumulate);
void gemm_nt(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
             bool accumulate);
void gemm_tn(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
             bool accumulate);

void gemm_nn(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
             bool accumulate);
void gemm_nt(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
             bool accumulate);
void gemm_tn(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
             bool accumulate);

}  // namespace xdom::kernels
