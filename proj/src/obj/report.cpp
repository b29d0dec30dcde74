#include "xdom/obj/report.hpp"

#include <cstdio>
#include <sstream>

namespace xdom::obj {

namespace {

constexpr const char* kTermNames[kTermCount] = {
    "recon_1", "recon_2", "mmd_1",  "mmd_2",  "gan_d_1",  "gan_d_2", "gan_g_1",
    "gan_g_2", "feat_1",  "feat_2", "cls",    "latent_d", "latent_g"};

enum class Phase { d, latent, eg };

Phase term_phase(Term t) {
  switch (t) {
    case Term::gan_d_1:
    case Term::gan_d_2:
    case Term::feat_1:
    case Term::feat_2:
    case Term::cls:
      return Phase::d;
    case Term::latent_d:
      return Phase::latent;
    default:
      return Phase::eg;
  }
}

bool mmd_only(Term t) { return t == Term::mmd_1 || t == Term::mmd_2; }
bool gan_only(Term t) {
  return t == Term::latent_d || t == Term::latent_g;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

}  // namespace

const char* term_name(Term t) { return kTermNames[static_cast<int>(t)]; }

double term_weight(Term t, const Weights& w) {
  switch (t) {
    case Term::recon_1:
    case Term::recon_2:
      return w.lambda0;
    case Term::mmd_1:
    case Term::mmd_2:
    case Term::latent_d:
    case Term::latent_g:
      return w.lambda1;  // the latent-critic weight maps onto lambda1
    case Term::gan_d_1:
    case Term::gan_d_2:
    case Term::gan_g_1:
    case Term::gan_g_2:
      return w.lambda2;
    case Term::feat_1:
    case Term::feat_2:
      return w.lambda3;
    case Term::cls:
      return w.lambda4;
  }
  return 0.0;
}

LossReport assemble(const LossReport& fragments, const Weights& w, Scheme scheme) {
  LossReport r = fragments;
  double total_d = 0.0, total_latent = 0.0, total_eg = 0.0;

  for (int i = 0; i < kTermCount; ++i) {
    const Term t = static_cast<Term>(i);
    const bool applicable = !(scheme == Scheme::mmd && gan_only(t)) &&
                            !(scheme == Scheme::gan && mmd_only(t));
    if (!applicable) {
      if (r.raw[i]) {
        throw AssemblyError(msg("fragment '", term_name(t), "' does not belong to scheme ",
                                scheme_name(scheme)));
      }
      continue;
    }
    const double weight = term_weight(t, w);
    if (!r.raw[i]) {
      if (weight != 0.0) {
        throw AssemblyError(msg("missing fragment '", term_name(t), "' (weight ", weight, ")"));
      }
      continue;  // zero-weighted and skipped upstream: contributes nothing
    }
    const double wv = weight * *r.raw[i];
    r.weighted[i] = wv;
    switch (term_phase(t)) {
      case Phase::d: total_d += wv; break;
      case Phase::latent: total_latent += wv; break;
      case Phase::eg: total_eg += wv; break;
    }
  }

  r.total_d = total_d;
  r.total_eg = total_eg;
  r.total_latent = scheme == Scheme::gan ? std::optional<double>(total_latent) : std::nullopt;
  return r;
}

std::string LossReport::csv_header() {
  std::ostringstream o;
  o << "step";
  for (int i = 0; i < kTermCount; ++i) o << ',' << kTermNames[i];
  for (int i = 0; i < kTermCount; ++i) o << ",w_" << kTermNames[i];
  o << ",total_d,total_latent,total_eg,target_accuracy,source_accuracy";
  return o.str();
}

std::string LossReport::csv_row() const {
  std::ostringstream o;
  o << step;
  for (int i = 0; i < kTermCount; ++i) o << ',' << fmt(raw[i]);
  for (int i = 0; i < kTermCount; ++i) o << ',' << fmt(weighted[i]);
  o << ',' << fmt(total_d) << ',' << fmt(total_latent) << ',' << fmt(total_eg) << ','
    << fmt(target_accuracy) << ',' << fmt(source_accuracy);
  return o.str();
}

}  // namespace xdom::obj
