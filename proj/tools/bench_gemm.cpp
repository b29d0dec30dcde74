// Micro-benchmark for the GEMM kernels. Used to size the desk-scale
// training configuration against the host; not part of the test suite.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "xdom/kernels/dispatch.hpp"
#include "xdom/kernels/gemm.hpp"
#include "xdom/rng.hpp"

using Clock = std::chrono::steady_clock;

template <class T>
static void bench(const char* tag, int64_t M, int64_t K, int64_t N) {
  std::vector<T> A(static_cast<size_t>(M * K)), B(static_cast<size_t>(K * N)),
      C(static_cast<size_t>(M * N));
  xdom::Rng rng(42);
  for (auto& v : A) v = static_cast<T>(rng.normal());
  for (auto& v : B) v = static_cast<T>(rng.normal());

  const double flops = 2.0 * static_cast<double>(M) * static_cast<double>(K) *
                       static_cast<double>(N);
  // Warm-up + timed repetitions sized for ~0.3s total.
  xdom::kernels::gemm_nn(M, K, N, A.data(), B.data(), C.data(), false);
  int reps = std::max<int>(1, static_cast<int>(3e8 / flops));
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    xdom::kernels::gemm_nn(M, K, N, A.data(), B.data(), C.data(), false);
  }
  auto t1 = Clock::now();
  const double sec = std::chrono::duration<double>(t1 - t0).count() / reps;
  std::printf("%-8s %-6s M=%-5lld K=%-5lld N=%-5lld  %8.3f ms  %7.2f GFLOP/s\n", tag,
              sizeof(T) == 4 ? "f32" : "f64", static_cast<long long>(M),
              static_cast<long long>(K), static_cast<long long>(N), sec * 1e3,
              flops / sec * 1e-9);
}

int main(int argc, char** argv) {
  if (argc > 1 && std::string(argv[1]) == "scalar") {
    xdom::kernels::force_isa(xdom::kernels::Isa::scalar);
  }
  std::printf("active isa: %s\n", xdom::kernels::isa_name(xdom::kernels::active_isa()));

  // Representative convolution-lowered shapes (per-image and per-batch).
  bench<float>("square", 512, 512, 512);
  bench<float>("square", 1024, 1024, 1024);
  bench<float>("conv", 96, 75, 1024);    // wide-image first conv
  bench<float>("conv", 192, 2400, 256);  // mid discriminator conv
  bench<float>("conv", 768, 9600, 16);   // deep discriminator conv
  bench<float>("conv", 512, 8192, 1);    // encoder valid conv, per image
  bench<float>("fc", 64, 3072, 10);      // classifier head
  bench<double>("square", 384, 384, 384);
  return 0;
}
