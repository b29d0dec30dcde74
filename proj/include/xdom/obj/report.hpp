#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xdom/error.hpp"

namespace xdom::obj {

enum class Scheme { mmd, gan };

inline const char* scheme_name(Scheme s) { return s == Scheme::mmd ? "mmd" : "gan"; }

// Loss weights as published: lambda0 reconstruction, lambda1 latent penalty
// (MMD weight, or the latent-critic weight under the gan scheme), lambda2
// image-adversarial, lambda3 feature matching, lambda4 classification.
struct Weights {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double lambda4 = 0.0;
};

// One scalar summand of a step's objective. Indices are stable: they define
// the CSV column order.
enum class Term : int {
  recon_1 = 0,  // L1 reconstruction, domain 1
  recon_2,
  mmd_1,  // latent MMD penalty per domain (mmd scheme only)
  mmd_2,
  gan_d_1,  // image-discriminator loss per domain (D phase)
  gan_d_2,
  gan_g_1,  // non-saturating generator loss per domain (EG phase)
  gan_g_2,
  feat_1,  // cross-discriminator feature matching, source side
  feat_2,
  cls,       // source classification cross-entropy
  latent_d,  // latent-critic loss (gan scheme only)
  latent_g,  // latent generator loss (gan scheme only)
};
inline constexpr int kTermCount = static_cast<int>(Term::latent_g) + 1;

const char* term_name(Term t);
double term_weight(Term t, const Weights& w);

// Values logged for one training step. Absent terms (wrong scheme, or a
// zero-weighted group whose evaluation was skipped) serialize as empty CSV
// cells; weighted values and totals treat them as zero contributions.
struct LossReport {
  int64_t step = 0;
  std::array<std::optional<double>, kTermCount> raw{};
  std::array<std::optional<double>, kTermCount> weighted{};
  std::optional<double> total_d, total_latent, total_eg;
  std::optional<double> target_accuracy, source_accuracy;

  std::optional<double>& operator[](Term t) { return raw[static_cast<int>(t)]; }
  const std::optional<double>& operator[](Term t) const { return raw[static_cast<int>(t)]; }

  static std::string csv_header();
  std::string csv_row() const;
};

// Fills weighted values and the three phase totals from the raw fragments.
// A fragment is required whenever its weight is nonzero for the scheme;
// a missing required fragment is an assembly error. Fragments from the
// other scheme's exclusive terms must be absent.
LossReport assemble(const LossReport& fragments, const Weights& w, Scheme scheme);

}  // namespace xdom::obj
