#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

#include "kernels_internal.hpp"

// AVX2/FMA GEMM. One packed, blocked core serves all three layouts: the
// packing routines absorb the transposition, the microkernel only ever sees
// contiguous MR-wide A strips and NR-wide B strips. This TU is the only one
// compiled with -mavx2 -mfma; keep everything with intrinsics in here.

namespace xdom::kernels::detail {
namespace {

// ---- vector type adapters ------------------------------------------------

struct VecF32 {
  using T = float;
  using V = __m256;
  static constexpr int lanes = 8;
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V broadcast(T x) { return _mm256_set1_ps(x); }
  static V zero() { return _mm256_setzero_ps(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
};

struct VecF64 {
  using T = double;
  using V = __m256d;
  static constexpr int lanes = 4;
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V broadcast(T x) { return _mm256_set1_pd(x); }
  static V zero() { return _mm256_setzero_pd(); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
};

// ---- blocking parameters ---------------------------------------------------

constexpr int64_t MR = 6;   // microkernel rows
constexpr int64_t KC = 256; // depth block (B strip KC*NR stays L1-resident)
constexpr int64_t MC = 120; // row block (A pack ~120*256*4B = 120 KiB, L2)
constexpr int64_t NC = 1024;

// ---- microkernel -----------------------------------------------------------

// C tile (MR x 2*lanes) (+)= sum_k Ap[k*MR+i] * Bp[k*NR+j].
template <class Vec>
void ukernel(int64_t kc, const typename Vec::T* Ap, const typename Vec::T* Bp,
             typename Vec::T* C, int64_t ldc, bool add_to_c) {
  using V = typename Vec::V;
  constexpr int64_t NR = 2 * Vec::lanes;
  V acc0[MR], acc1[MR];
  for (int i = 0; i < MR; ++i) {
    acc0[i] = Vec::zero();
    acc1[i] = Vec::zero();
  }
  for (int64_t k = 0; k < kc; ++k) {
    const V b0 = Vec::load(Bp + k * NR);
    const V b1 = Vec::load(Bp + k * NR + Vec::lanes);
    const typename Vec::T* a = Ap + k * MR;
    for (int i = 0; i < MR; ++i) {
      const V av = Vec::broadcast(a[i]);
      acc0[i] = Vec::fmadd(av, b0, acc0[i]);
      acc1[i] = Vec::fmadd(av, b1, acc1[i]);
    }
  }
  for (int i = 0; i < MR; ++i) {
    typename Vec::T* c = C + i * ldc;
    if (add_to_c) {
      Vec::store(c, Vec::add(Vec::load(c), acc0[i]));
      Vec::store(c + Vec::lanes, Vec::add(Vec::load(c + Vec::lanes), acc1[i]));
    } else {
      Vec::store(c, acc0[i]);
      Vec::store(c + Vec::lanes, acc1[i]);
    }
  }
}

// ---- packing ---------------------------------------------------------------

// Element accessors; the transposed variants absorb NT/TN layouts.
template <class T>
struct PlainA {
  const T* p;
  int64_t ld;  // row stride of A (== K)
  T at(int64_t m, int64_t k) const { return p[m * ld + k]; }
};
template <class T>
struct TransA {  // stored (K x M): logical A[m][k] = p[k*M + m]
  const T* p;
  int64_t ld;  // == M
  T at(int64_t m, int64_t k) const { return p[k * ld + m]; }
};
template <class T>
struct PlainB {
  const T* p;
  int64_t ld;  // == N
  T at(int64_t k, int64_t n) const { return p[k * ld + n]; }
};
template <class T>
struct TransB {  // stored (N x K): logical B[k][n] = p[n*K + k]
  const T* p;
  int64_t ld;  // == K
  T at(int64_t k, int64_t n) const { return p[n * ld + k]; }
};

// Pack an (mc x kc) block of A into MR-strips, zero-padding partial strips.
template <class T, class Acc>
void pack_a(const Acc& A, int64_t m0, int64_t mc, int64_t k0, int64_t kc, T* Ap) {
  for (int64_t s = 0; s < mc; s += MR) {
    const int64_t mr = std::min(MR, mc - s);
    T* dst = Ap + (s / MR) * kc * MR;
    for (int64_t k = 0; k < kc; ++k) {
      for (int64_t i = 0; i < mr; ++i) dst[k * MR + i] = A.at(m0 + s + i, k0 + k);
      for (int64_t i = mr; i < MR; ++i) dst[k * MR + i] = T(0);
    }
  }
}

// Pack a (kc x nc) block of B into NR-strips, zero-padding partial strips.
template <class T, class Acc>
void pack_b(const Acc& B, int64_t k0, int64_t kc, int64_t n0, int64_t nc, int64_t NR, T* Bp) {
  for (int64_t s = 0; s < nc; s += NR) {
    const int64_t nr = std::min(NR, nc - s);
    T* dst = Bp + (s / NR) * kc * NR;
    for (int64_t k = 0; k < kc; ++k) {
      for (int64_t j = 0; j < nr; ++j) dst[k * NR + j] = B.at(k0 + k, n0 + s + j);
      for (int64_t j = nr; j < NR; ++j) dst[k * NR + j] = T(0);
    }
  }
}

// ---- macro kernel ------------------------------------------------------------

template <class Vec, class AccA, class AccB>
void gemm_packed(int64_t M, int64_t K, int64_t N, const AccA& A, const AccB& B,
                 typename Vec::T* C, bool accumulate) {
  using T = typename Vec::T;
  constexpr int64_t NR = 2 * Vec::lanes;
  if (M <= 0 || N <= 0) return;
  if (K <= 0) {
    if (!accumulate)
      for (int64_t m = 0; m < M; ++m) std::fill(C + m * N, C + m * N + N, T(0));
    return;
  }
  thread_local std::vector<T> a_buf, b_buf;
  a_buf.resize(static_cast<size_t>((MC + MR) * KC));
  b_buf.resize(static_cast<size_t>((NC + NR) * KC));
  alignas(32) T tmp[MR * 2 * Vec::lanes];

  for (int64_t jc = 0; jc < N; jc += NC) {
    const int64_t nc = std::min(NC, N - jc);
    for (int64_t pc = 0; pc < K; pc += KC) {
      const int64_t kc = std::min(KC, K - pc);
      const bool add = accumulate || pc > 0;
      pack_b<T>(B, pc, kc, jc, nc, NR, b_buf.data());
      for (int64_t ic = 0; ic < M; ic += MC) {
        const int64_t mc = std::min(MC, M - ic);
        pack_a<T>(A, ic, mc, pc, kc, a_buf.data());
        for (int64_t jr = 0; jr < nc; jr += NR) {
          const int64_t nr = std::min(NR, nc - jr);
          const T* Bp = b_buf.data() + (jr / NR) * kc * NR;
          for (int64_t ir = 0; ir < mc; ir += MR) {
            const int64_t mr = std::min(MR, mc - ir);
            const T* Ap = a_buf.data() + (ir / MR) * kc * MR;
            T* c = C + (ic + ir) * N + jc + jr;
            if (mr == MR && nr == NR) {
              ukernel<Vec>(kc, Ap, Bp, c, N, add);
            } else {
              // Partial tile: compute into a full scratch tile, copy corner.
              ukernel<Vec>(kc, Ap, Bp, tmp, NR, false);
              for (int64_t i = 0; i < mr; ++i)
                for (int64_t j = 0; j < nr; ++j) {
                  T* dst = c + i * N + j;
                  *dst = add ? *dst + tmp[i * NR + j] : tmp[i * NR + j];
                }
            }
          }
        }
      }
    }
  }
}

}  // namespace

void gemm_nn_avx2(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
                  bool accumulate) {
  gemm_packed<VecF32>(M, K, N, PlainA<float>{A, K}, PlainB<float>{B, N}, C, accumulate);
}
void gemm_nt_avx2(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
                  bool accumulate) {
  gemm_packed<VecF32>(M, K, N, PlainA<float>{A, K}, TransB<float>{B, K}, C, accumulate);
}
void gemm_tn_avx2(int64_t M, int64_t K, int64_t N, const float* A, const float* B, float* C,
                  bool accumulate) {
  gemm_packed<VecF32>(M, K, N, TransA<float>{A, M}, PlainB<float>{B, N}, C, accumulate);
}
void gemm_nn_avx2(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
                  bool accumulate) {
  gemm_packed<VecF64>(M, K, N, PlainA<double>{A, K}, PlainB<double>{B, N}, C, accumulate);
}
void gemm_nt_avx2(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
                  bool accumulate) {
  gemm_packed<VecF64>(M, K, N, PlainA<double>{A, K}, TransB<double>{B, K}, C, accumulate);
}
void gemm_tn_avx2(int64_t M, int64_t K, int64_t N, const double* A, const double* B, double* C,
                  bool accumulate) {
  gemm_packed<VecF64>(M, K, N, TransA<double>{A, M}, PlainB<double>{B, N}, C, accumulate);
}

}  // namespace xdom::kernels::detail
