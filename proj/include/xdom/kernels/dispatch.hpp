#pragma once

namespace xdom::kernels {

// Instruction-set tiers for the compute kernels. Every kernel has a scalar
// reference implementation; the AVX2 variants are selected at runtime when
// the CPU supports AVX2+FMA. The XDOM_SIMD environment variable ("scalar",
// "avx2", "auto") overrides detection; force_isa() is the programmatic hook
// used by the equivalence tests.
enum class Isa { scalar, avx2 };

// What the CPU supports (probed once, cached).
Isa detected_isa();

// What the kernels will actually use right now.
Isa active_isa();

// Override the active tier. Forcing avx2 on a CPU without it throws.
void force_isa(Isa isa);

// Drop any override and fall back to env/auto selection.
void reset_isa();

const char* isa_name(Isa isa);

}  // namespace xdom::kernels
