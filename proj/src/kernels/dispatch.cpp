#include "xdom/kernels/dispatch.hpp"

#include <cstdlib>
#include <cstring>

#include "xdom/error.hpp"

namespace xdom::kernels {

namespace {

Isa probe_cpu() {
#if defined(__x86_64__) || defined(__i386__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Isa::avx2;
  }
#endif
  return Isa::scalar;
}

// Selection from the XDOM_SIMD environment variable, evaluated once.
Isa env_selection() {
  const char* env = std::getenv("XDOM_SIMD");
  if (env == nullptr || std::strcmp(env, "auto") == 0 || env[0] == '\0') {
    return probe_cpu();
  }
  if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
  if (std::strcmp(env, "avx2") == 0) {
    if (probe_cpu() != Isa::avx2) {
      throw ConfigError("XDOM_SIMD=avx2 requested but CPU lacks AVX2/FMA");
    }
    return Isa::avx2;
  }
  throw ConfigError(msg("unknown XDOM_SIMD value '", env, "' (want scalar|avx2|auto)"));
}

bool g_overridden = false;
Isa g_override = Isa::scalar;

}  // namespace

Isa detected_isa() {
  static const Isa probed = probe_cpu();
  return probed;
}

Isa active_isa() {
  if (g_overridden) return g_override;
  static const Isa selected = env_selection();
  return selected;
}

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2) {
    throw ConfigError("cannot force avx2 kernels: CPU lacks AVX2/FMA");
  }
  g_overridden = true;
  g_override = isa;
}

void reset_isa() { g_overridden = false; }

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace xdom::kernels
