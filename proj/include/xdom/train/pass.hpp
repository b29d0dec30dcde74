#pragma once

#include <cmath>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include "xdom/nn/adam.hpp"
#include "xdom/nn/bundle.hpp"
#include "xdom/obj/losses.hpp"
#include "xdom/obj/report.hpp"
#include "xdom/rng.hpp"

namespace xdom::train {

// Per-step objective settings, already resolved from the experiment config
// (in particular the kernel scale is a concrete number here).
struct PassSettings {
  obj::Scheme scheme = obj::Scheme::mmd;
  obj::Weights w;
  obj::KernelCfg kernel;
  bool cls_on_reconstructed = false;
};

// One step's data: a source batch with labels, an unlabeled target batch,
// and one prior sample shared by every latent term of the step.
template <class T>
struct StepInputs {
  Tensor<T> x_s;                 // (B, 3, H, W)
  Tensor<T> x_t;                 // (B, 3, H, W)
  std::vector<int64_t> labels;   // source labels, length B
  Tensor<T> prior;               // (B, dz)
};

template <class T>
struct StepOptims {
  nn::Adam<T>* eg = nullptr;   // encoders + generators
  nn::Adam<T>* d = nullptr;    // image discriminators
  nn::Adam<T>* lat = nullptr;  // latent critic (gan scheme only)
};

// i.i.d. draws from N(0, sigma^2), one row per sample.
template <class T>
Tensor<T> sample_prior(int64_t n, int64_t dz, double sigma, Rng& rng) {
  if (n < 1 || dz < 1) throw DomainError("prior sample needs positive dimensions");
  if (!(sigma > 0.0)) throw DomainError("prior stddev must be positive");
  Tensor<T> out({n, dz});
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(rng.normal(0.0, sigma));
  return out;
}

namespace detail {

template <class T>
void axpy(Tensor<T>& dst, double a, const Tensor<T>& src) {
  if (dst.shape() != src.shape()) {
    throw ShapeError(msg("gradient accumulation shape mismatch: ", shape_string(dst.shape()),
                         " vs ", shape_string(src.shape())));
  }
  for (int64_t i = 0; i < dst.numel(); ++i) dst[i] += static_cast<T>(a * double(src[i]));
}

template <class T>
Tensor<T> scaled(double a, const Tensor<T>& src) {
  Tensor<T> out(src.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(a * double(src[i]));
  return out;
}

template <class T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("row concatenation needs rank-2 operands of equal width");
  }
  Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1)});
  std::copy_n(a.data(), a.numel(), out.data());
  std::copy_n(b.data(), b.numel(), out.data() + a.numel());
  return out;
}

inline void require_finite(const obj::LossReport& r, std::initializer_list<obj::Term> terms) {
  for (obj::Term t : terms) {
    const std::optional<double>& v = r[t];
    if (v && !std::isfinite(*v)) {
      throw NumericError(msg("non-finite loss term '", obj::term_name(t), "' at step ", r.step));
    }
  }
}

}  // namespace detail

// Shared first stage of every step: both encoders and all four generator
// applications, traced so the later phase can backpropagate without
// re-running them (encoder/generator parameters do not change in between).
template <class T>
struct EgForward {
  Tensor<T> z_s, z_t;            // (B, dz)
  Tensor<T> rec_s, rec_t;        // same-domain reconstructions
  Tensor<T> trans_st, trans_ts;  // cross-domain translations
  nn::Trace<T> tr_e1, tr_e2;
  nn::Trace<T> tr_rec_s, tr_rec_t, tr_trans_ts, tr_trans_st;
};

template <class T>
EgForward<T> forward_eg(const nn::NetworkBundle<T>& b, const StepInputs<T>& in) {
  EgForward<T> f;
  f.z_s = nn::encode(b.e1, nn::append_coords(in.x_s), &f.tr_e1, nn::Mode::train);
  f.z_t = nn::encode(b.e2, nn::append_coords(in.x_t), &f.tr_e2, nn::Mode::train);
  f.rec_s = b.g1.forward(f.z_s, &f.tr_rec_s, nn::Mode::train);
  f.rec_t = b.g2.forward(f.z_t, &f.tr_rec_t, nn::Mode::train);
  f.trans_st = b.g2.forward(f.z_s, &f.tr_trans_st, nn::Mode::train);
  f.trans_ts = b.g1.forward(f.z_t, &f.tr_trans_ts, nn::Mode::train);
  return f;
}

// Discriminator phase: image-adversarial, feature-matching and source
// classification terms, each evaluated only when its weight is nonzero.
// Synthetic inputs are treated as constants here (no gradient flows back
// into the encoders or generators).
template <class T>
void d_phase(const nn::NetworkBundle<T>& b, const StepInputs<T>& in, const EgForward<T>& f,
             const PassSettings& s, nn::Adam<T>* opt, obj::LossReport& rep) {
  using obj::Term;
  const bool adv = s.w.lambda2 > 0.0;
  const bool fm = s.w.lambda3 > 0.0;
  const bool cls = s.w.lambda4 > 0.0;
  const bool cls_rec = s.cls_on_reconstructed;

  const bool need_1r = adv || fm || (cls && !cls_rec);  // D1 on real source
  const bool need_1a = adv || (cls && cls_rec);         // D1 on source reconstruction
  const bool need_1b = adv || fm;                       // D1 on target->source translation
  const bool need_2r = adv || fm;                       // D2 on real target
  const bool need_2a = adv;                             // D2 on target reconstruction
  const bool need_2b = adv || fm;                       // D2 on source->target translation

  if (opt) opt->zero_grad();

  nn::DiscTrace<T> t1r, t1a, t1b, t2r, t2a, t2b;
  nn::DiscOut<T> o1r, o1a, o1b, o2r, o2a, o2b;
  if (need_1r) o1r = b.d1.forward(in.x_s, &t1r, nn::Mode::train);
  if (need_1a) o1a = b.d1.forward(f.rec_s, &t1a, nn::Mode::train);
  if (need_1b) o1b = b.d1.forward(f.trans_ts, &t1b, nn::Mode::train);
  if (need_2r) o2r = b.d2.forward(in.x_t, &t2r, nn::Mode::train);
  if (need_2a) o2a = b.d2.forward(f.rec_t, &t2a, nn::Mode::train);
  if (need_2b) o2b = b.d2.forward(f.trans_st, &t2b, nn::Mode::train);

  std::optional<obj::ValueGrad<T>> ar1, af1a, af1b, ar2, af2a, af2b;
  if (adv) {
    ar1 = obj::adv_real(o1r.adv);
    af1a = obj::adv_fake(o1a.adv);
    af1b = obj::adv_fake(o1b.adv);
    ar2 = obj::adv_real(o2r.adv);
    af2a = obj::adv_fake(o2a.adv);
    af2b = obj::adv_fake(o2b.adv);
    rep[Term::gan_d_1] = ar1->value + af1a->value + af1b->value;
    rep[Term::gan_d_2] = ar2->value + af2a->value + af2b->value;
  }

  std::optional<obj::ValueGrad2<T>> fm1, fm2;
  if (fm) {
    fm1 = obj::l1_mean(o1r.features, o2b.features);  // real source vs its translation
    fm2 = obj::l1_mean(o2r.features, o1b.features);  // real target vs its translation
    rep[Term::feat_1] = fm1->value;
    rep[Term::feat_2] = fm2->value;
  }

  std::optional<obj::ValueGrad<T>> ce;
  if (cls) {
    ce = obj::cross_entropy(cls_rec ? o1a.cls : o1r.cls, in.labels);
    rep[Term::cls] = ce->value;
  }

  detail::require_finite(rep, {Term::gan_d_1, Term::gan_d_2, Term::feat_1, Term::feat_2,
                               Term::cls});

  // Weighted backward into discriminator parameters; the returned input
  // gradients are discarded on purpose.
  auto backward = [&](const nn::Discriminator<T>& d, const nn::DiscTrace<T>& tr,
                      const Tensor<T>* g_adv, const Tensor<T>* g_cls, const Tensor<T>* g_feat) {
    std::optional<Tensor<T>> da, dc, df;
    if (g_adv) da = detail::scaled(s.w.lambda2, *g_adv);
    if (g_cls) dc = detail::scaled(s.w.lambda4, *g_cls);
    if (g_feat) df = detail::scaled(s.w.lambda3, *g_feat);
    if (!da && !dc && !df) return;
    d.backward(tr, da ? &*da : nullptr, dc ? &*dc : nullptr, df ? &*df : nullptr);
  };

  if (need_1r) {
    backward(b.d1, t1r, adv ? &ar1->grad : nullptr,
             (cls && !cls_rec) ? &ce->grad : nullptr, fm ? &fm1->grad_a : nullptr);
  }
  if (need_1a) {
    backward(b.d1, t1a, adv ? &af1a->grad : nullptr,
             (cls && cls_rec) ? &ce->grad : nullptr, nullptr);
  }
  if (need_1b) {
    backward(b.d1, t1b, adv ? &af1b->grad : nullptr, nullptr, fm ? &fm2->grad_b : nullptr);
  }
  if (need_2r) {
    backward(b.d2, t2r, adv ? &ar2->grad : nullptr, nullptr, fm ? &fm2->grad_a : nullptr);
  }
  if (need_2a) {
    backward(b.d2, t2a, adv ? &af2a->grad : nullptr, nullptr, nullptr);
  }
  if (need_2b) {
    backward(b.d2, t2b, adv ? &af2b->grad : nullptr, nullptr, fm ? &fm1->grad_b : nullptr);
  }

  if (opt) opt->step();
}

// Latent-critic phase (gan scheme): the critic learns to separate prior
// draws from the concatenated encodings of both domains.
template <class T>
void latent_d_phase(const nn::NetworkBundle<T>& b, const EgForward<T>& f, const Tensor<T>& prior,
                    const PassSettings& s, nn::Adam<T>* opt, obj::LossReport& rep) {
  if (!b.dlat) throw AssemblyError("latent phase requires a bundle built with the latent critic");
  if (opt) opt->zero_grad();
  if (s.w.lambda1 > 0.0) {
    Tensor<T> zc = detail::concat_rows(f.z_s, f.z_t);
    typename nn::LatentDisc<T>::TraceL tp, tf;
    Tensor<T> pp = b.dlat->forward(prior, &tp, nn::Mode::train);
    Tensor<T> pf = b.dlat->forward(zc, &tf, nn::Mode::train);
    obj::ValueGrad<T> ar = obj::adv_real(pp);
    obj::ValueGrad<T> af = obj::adv_fake(pf);
    rep[obj::Term::latent_d] = ar.value + af.value;
    detail::require_finite(rep, {obj::Term::latent_d});
    b.dlat->backward(tp, detail::scaled(s.w.lambda1, ar.grad));
    b.dlat->backward(tf, detail::scaled(s.w.lambda1, af.grad));
  }
  if (opt) opt->step();
}

// Encoder/generator phase. Image-space gradients (reconstruction plus the
// non-saturating adversarial term against the just-updated discriminators)
// flow through the traced generator forwards into latent gradients, which
// the latent penalty (MMD, or the latent-critic generator term) then joins
// before the encoder backward.
template <class T>
void eg_phase(const nn::NetworkBundle<T>& b, const StepInputs<T>& in, const EgForward<T>& f,
              const PassSettings& s, nn::Adam<T>* opt, obj::LossReport& rep) {
  using obj::Term;
  if (opt) opt->zero_grad();

  Tensor<T> d_rec_s(f.rec_s.shape()), d_rec_t(f.rec_t.shape());
  Tensor<T> d_trans_st(f.trans_st.shape()), d_trans_ts(f.trans_ts.shape());
  bool any_rec_s = false, any_rec_t = false, any_trans_st = false, any_trans_ts = false;

  if (s.w.lambda0 > 0.0) {
    obj::ValueGrad2<T> r1 = obj::l1_mean(f.rec_s, in.x_s);
    obj::ValueGrad2<T> r2 = obj::l1_mean(f.rec_t, in.x_t);
    rep[Term::recon_1] = r1.value;
    rep[Term::recon_2] = r2.value;
    detail::axpy(d_rec_s, s.w.lambda0, r1.grad_a);
    detail::axpy(d_rec_t, s.w.lambda0, r2.grad_a);
    any_rec_s = any_rec_t = true;
  }

  if (s.w.lambda2 > 0.0) {
    // Fresh discriminator passes: their parameters moved in the first phase.
    nn::DiscTrace<T> q1a, q1b, q2a, q2b;
    nn::DiscOut<T> o1a = b.d1.forward(f.rec_s, &q1a, nn::Mode::train);
    nn::DiscOut<T> o1b = b.d1.forward(f.trans_ts, &q1b, nn::Mode::train);
    nn::DiscOut<T> o2a = b.d2.forward(f.rec_t, &q2a, nn::Mode::train);
    nn::DiscOut<T> o2b = b.d2.forward(f.trans_st, &q2b, nn::Mode::train);
    obj::ValueGrad<T> g1a = obj::adv_real(o1a.adv);
    obj::ValueGrad<T> g1b = obj::adv_real(o1b.adv);
    obj::ValueGrad<T> g2a = obj::adv_real(o2a.adv);
    obj::ValueGrad<T> g2b = obj::adv_real(o2b.adv);
    rep[Term::gan_g_1] = g1a.value + g1b.value;
    rep[Term::gan_g_2] = g2a.value + g2b.value;

    Tensor<T> da = detail::scaled(s.w.lambda2, g1a.grad);
    detail::axpy(d_rec_s, 1.0, b.d1.backward(q1a, &da, nullptr, nullptr));
    da = detail::scaled(s.w.lambda2, g1b.grad);
    detail::axpy(d_trans_ts, 1.0, b.d1.backward(q1b, &da, nullptr, nullptr));
    da = detail::scaled(s.w.lambda2, g2a.grad);
    detail::axpy(d_rec_t, 1.0, b.d2.backward(q2a, &da, nullptr, nullptr));
    da = detail::scaled(s.w.lambda2, g2b.grad);
    detail::axpy(d_trans_st, 1.0, b.d2.backward(q2b, &da, nullptr, nullptr));
    any_rec_s = any_rec_t = any_trans_st = any_trans_ts = true;
  }

  Tensor<T> dz_s(f.z_s.shape()), dz_t(f.z_t.shape());
  bool any_z_s = false, any_z_t = false;
  if (any_rec_s) {
    detail::axpy(dz_s, 1.0, b.g1.backward(f.tr_rec_s, std::move(d_rec_s)));
    any_z_s = true;
  }
  if (any_trans_st) {
    detail::axpy(dz_s, 1.0, b.g2.backward(f.tr_trans_st, std::move(d_trans_st)));
    any_z_s = true;
  }
  if (any_rec_t) {
    detail::axpy(dz_t, 1.0, b.g2.backward(f.tr_rec_t, std::move(d_rec_t)));
    any_z_t = true;
  }
  if (any_trans_ts) {
    detail::axpy(dz_t, 1.0, b.g1.backward(f.tr_trans_ts, std::move(d_trans_ts)));
    any_z_t = true;
  }

  if (s.w.lambda1 > 0.0) {
    if (s.scheme == obj::Scheme::mmd) {
      obj::ValueGrad<T> m1 = obj::mmd_penalty(in.prior, f.z_s, s.kernel);
      obj::ValueGrad<T> m2 = obj::mmd_penalty(in.prior, f.z_t, s.kernel);
      rep[Term::mmd_1] = m1.value;
      rep[Term::mmd_2] = m2.value;
      detail::axpy(dz_s, s.w.lambda1, m1.grad);
      detail::axpy(dz_t, s.w.lambda1, m2.grad);
    } else {
      if (!b.dlat) throw AssemblyError("latent generator term requires the latent critic");
      Tensor<T> zc = detail::concat_rows(f.z_s, f.z_t);
      typename nn::LatentDisc<T>::TraceL tl;
      Tensor<T> p = b.dlat->forward(zc, &tl, nn::Mode::train);
      obj::ValueGrad<T> lg = obj::adv_real(p);
      rep[Term::latent_g] = lg.value;
      Tensor<T> dzc = b.dlat->backward(tl, detail::scaled(s.w.lambda1, lg.grad));
      const int64_t B = f.z_s.dim(0), dz = f.z_s.dim(1);
      for (int64_t i = 0; i < B * dz; ++i) {
        dz_s[i] += dzc[i];
        dz_t[i] += dzc[B * dz + i];
      }
    }
    any_z_s = any_z_t = true;
  }

  detail::require_finite(rep, {Term::recon_1, Term::recon_2, Term::gan_g_1, Term::gan_g_2,
                               Term::mmd_1, Term::mmd_2, Term::latent_g});

  if (any_z_s) b.e1.backward(f.tr_e1, std::move(dz_s));
  if (any_z_t) b.e2.backward(f.tr_e2, std::move(dz_t));

  if (opt) opt->step();
}

// One full optimization step. Phase order: image discriminators, then the
// latent critic (gan scheme), then encoders+generators. Every phase zeroes
// its own gradients first and applies its optimizer unconditionally, so a
// phase whose loss terms are all disabled still performs its weight-decay
// drift (and stray gradients deposited on another phase's parameters never
// survive into that phase's next update).
template <class T>
obj::LossReport run_step(const nn::NetworkBundle<T>& b, const StepInputs<T>& in,
                         const PassSettings& s, StepOptims<T> opt, int64_t step) {
  if (in.x_s.rank() != 4 || in.x_t.rank() != 4) {
    throw ShapeError("step inputs must be rank-4 image batches");
  }
  if (in.x_s.dim(0) != in.x_t.dim(0) || in.prior.rank() != 2 ||
      in.prior.dim(0) != in.x_s.dim(0)) {
    throw ShapeError("source, target and prior batches must agree in size");
  }
  obj::LossReport frag;
  frag.step = step;

  EgForward<T> f = forward_eg(b, in);
  d_phase(b, in, f, s, opt.d, frag);
  if (s.scheme == obj::Scheme::gan) latent_d_phase(b, f, in.prior, s, opt.lat, frag);
  eg_phase(b, in, f, s, opt.eg, frag);

  return obj::assemble(frag, s.w, s.scheme);
}

// ---------------------------------------------------------------- probing ----

// Evaluates one raw (unweighted) objective term and backpropagates its exact
// gradient into only the parameters that term trains, leaving everything it
// treats as constant untouched. Used by the finite-difference gradient
// checks; the returned set is the one to perturb.
template <class T>
struct ProbeResult {
  double value = 0.0;
  std::vector<nn::ParamPtr<T>> trained;
};

template <class T>
ProbeResult<T> probe_term(const nn::NetworkBundle<T>& b, const StepInputs<T>& in, obj::Term term,
                          const PassSettings& s) {
  using obj::Term;
  using nn::Mode;
  for (const auto& p : b.all_params()) p->grad.zero();
  ProbeResult<T> out;

  auto encode_src = [&](nn::Trace<T>* tr) {
    return nn::encode(b.e1, nn::append_coords(in.x_s), tr, Mode::train);
  };
  auto encode_tgt = [&](nn::Trace<T>* tr) {
    return nn::encode(b.e2, nn::append_coords(in.x_t), tr, Mode::train);
  };

  switch (term) {
    case Term::recon_1: {
      nn::Trace<T> te, tg;
      Tensor<T> z = encode_src(&te);
      Tensor<T> rec = b.g1.forward(z, &tg, Mode::train);
      obj::ValueGrad2<T> l = obj::l1_mean(rec, in.x_s);
      out.value = l.value;
      b.e1.backward(te, b.g1.backward(tg, std::move(l.grad_a)));
      out.trained = nn::NetworkBundle<T>::unique_params({b.e1.params(), b.g1.params()});
      break;
    }
    case Term::recon_2: {
      nn::Trace<T> te, tg;
      Tensor<T> z = encode_tgt(&te);
      Tensor<T> rec = b.g2.forward(z, &tg, Mode::train);
      obj::ValueGrad2<T> l = obj::l1_mean(rec, in.x_t);
      out.value = l.value;
      b.e2.backward(te, b.g2.backward(tg, std::move(l.grad_a)));
      out.trained = nn::NetworkBundle<T>::unique_params({b.e2.params(), b.g2.params()});
      break;
    }
    case Term::mmd_1: {
      nn::Trace<T> te;
      Tensor<T> z = encode_src(&te);
      obj::ValueGrad<T> m = obj::mmd_penalty(in.prior, z, s.kernel);
      out.value = m.value;
      b.e1.backward(te, std::move(m.grad));
      out.trained = b.e1.params();
      break;
    }
    case Term::mmd_2: {
      nn::Trace<T> te;
      Tensor<T> z = encode_tgt(&te);
      obj::ValueGrad<T> m = obj::mmd_penalty(in.prior, z, s.kernel);
      out.value = m.value;
      b.e2.backward(te, std::move(m.grad));
      out.trained = b.e2.params();
      break;
    }
    case Term::gan_d_1: {
      Tensor<T> rec_s = b.g1.forward(encode_src(nullptr), nullptr, Mode::train);
      Tensor<T> trans_ts = b.g1.forward(encode_tgt(nullptr), nullptr, Mode::train);
      nn::DiscTrace<T> tr, ta, tb;
      obj::ValueGrad<T> ar = obj::adv_real(b.d1.forward(in.x_s, &tr, Mode::train).adv);
      obj::ValueGrad<T> afa = obj::adv_fake(b.d1.forward(rec_s, &ta, Mode::train).adv);
      obj::ValueGrad<T> afb = obj::adv_fake(b.d1.forward(trans_ts, &tb, Mode::train).adv);
      out.value = ar.value + afa.value + afb.value;
      b.d1.backward(tr, &ar.grad, nullptr, nullptr);
      b.d1.backward(ta, &afa.grad, nullptr, nullptr);
      b.d1.backward(tb, &afb.grad, nullptr, nullptr);
      out.trained = b.d1.params();
      break;
    }
    case Term::gan_d_2: {
      Tensor<T> rec_t = b.g2.forward(encode_tgt(nullptr), nullptr, Mode::train);
      Tensor<T> trans_st = b.g2.forward(encode_src(nullptr), nullptr, Mode::train);
      nn::DiscTrace<T> tr, ta, tb;
      obj::ValueGrad<T> ar = obj::adv_real(b.d2.forward(in.x_t, &tr, Mode::train).adv);
      obj::ValueGrad<T> afa = obj::adv_fake(b.d2.forward(rec_t, &ta, Mode::train).adv);
      obj::ValueGrad<T> afb = obj::adv_fake(b.d2.forward(trans_st, &tb, Mode::train).adv);
      out.value = ar.value + afa.value + afb.value;
      b.d2.backward(tr, &ar.grad, nullptr, nullptr);
      b.d2.backward(ta, &afa.grad, nullptr, nullptr);
      b.d2.backward(tb, &afb.grad, nullptr, nullptr);
      out.trained = b.d2.params();
      break;
    }
    case Term::gan_g_1: {
      nn::Trace<T> te1, te2, ta, tb;
      Tensor<T> z_s = encode_src(&te1);
      Tensor<T> z_t = encode_tgt(&te2);
      Tensor<T> rec_s = b.g1.forward(z_s, &ta, Mode::train);
      Tensor<T> trans_ts = b.g1.forward(z_t, &tb, Mode::train);
      nn::DiscTrace<T> qa, qb;
      obj::ValueGrad<T> ga = obj::adv_real(b.d1.forward(rec_s, &qa, Mode::train).adv);
      obj::ValueGrad<T> gb = obj::adv_real(b.d1.forward(trans_ts, &qb, Mode::train).adv);
      out.value = ga.value + gb.value;
      b.e1.backward(te1, b.g1.backward(ta, b.d1.backward(qa, &ga.grad, nullptr, nullptr)));
      b.e2.backward(te2, b.g1.backward(tb, b.d1.backward(qb, &gb.grad, nullptr, nullptr)));
      out.trained =
          nn::NetworkBundle<T>::unique_params({b.e1.params(), b.e2.params(), b.g1.params()});
      break;
    }
    case Term::gan_g_2: {
      nn::Trace<T> te1, te2, ta, tb;
      Tensor<T> z_s = encode_src(&te1);
      Tensor<T> z_t = encode_tgt(&te2);
      Tensor<T> rec_t = b.g2.forward(z_t, &ta, Mode::train);
      Tensor<T> trans_st = b.g2.forward(z_s, &tb, Mode::train);
      nn::DiscTrace<T> qa, qb;
      obj::ValueGrad<T> ga = obj::adv_real(b.d2.forward(rec_t, &qa, Mode::train).adv);
      obj::ValueGrad<T> gb = obj::adv_real(b.d2.forward(trans_st, &qb, Mode::train).adv);
      out.value = ga.value + gb.value;
      b.e2.backward(te2, b.g2.backward(ta, b.d2.backward(qa, &ga.grad, nullptr, nullptr)));
      b.e1.backward(te1, b.g2.backward(tb, b.d2.backward(qb, &gb.grad, nullptr, nullptr)));
      out.trained =
          nn::NetworkBundle<T>::unique_params({b.e1.params(), b.e2.params(), b.g2.params()});
      break;
    }
    case Term::feat_1: {
      Tensor<T> trans_st = b.g2.forward(encode_src(nullptr), nullptr, Mode::train);
      nn::DiscTrace<T> t1, t2;
      nn::DiscOut<T> o1 = b.d1.forward(in.x_s, &t1, Mode::train);
      nn::DiscOut<T> o2 = b.d2.forward(trans_st, &t2, Mode::train);
      obj::ValueGrad2<T> l = obj::l1_mean(o1.features, o2.features);
      out.value = l.value;
      b.d1.backward(t1, nullptr, nullptr, &l.grad_a);
      b.d2.backward(t2, nullptr, nullptr, &l.grad_b);
      out.trained = b.disc_params();
      break;
    }
    case Term::feat_2: {
      Tensor<T> trans_ts = b.g1.forward(encode_tgt(nullptr), nullptr, Mode::train);
      nn::DiscTrace<T> t1, t2;
      nn::DiscOut<T> o2 = b.d2.forward(in.x_t, &t2, Mode::train);
      nn::DiscOut<T> o1 = b.d1.forward(trans_ts, &t1, Mode::train);
      obj::ValueGrad2<T> l = obj::l1_mean(o2.features, o1.features);
      out.value = l.value;
      b.d2.backward(t2, nullptr, nullptr, &l.grad_a);
      b.d1.backward(t1, nullptr, nullptr, &l.grad_b);
      out.trained = b.disc_params();
      break;
    }
    case Term::cls: {
      Tensor<T> input = in.x_s;
      if (s.cls_on_reconstructed) {
        input = b.g1.forward(encode_src(nullptr), nullptr, Mode::train);
      }
      nn::DiscTrace<T> t;
      nn::DiscOut<T> o = b.d1.forward(input, &t, Mode::train);
      obj::ValueGrad<T> ce = obj::cross_entropy(o.cls, in.labels);
      out.value = ce.value;
      b.d1.backward(t, nullptr, &ce.grad, nullptr);
      out.trained = b.d1.params();
      break;
    }
    case Term::latent_d: {
      if (!b.dlat) throw AssemblyError("latent term probe requires the latent critic");
      Tensor<T> zc = detail::concat_rows(encode_src(nullptr), encode_tgt(nullptr));
      typename nn::LatentDisc<T>::TraceL tp, tf;
      obj::ValueGrad<T> ar = obj::adv_real(b.dlat->forward(in.prior, &tp, Mode::train));
      obj::ValueGrad<T> af = obj::adv_fake(b.dlat->forward(zc, &tf, Mode::train));
      out.value = ar.value + af.value;
      b.dlat->backward(tp, ar.grad);
      b.dlat->backward(tf, af.grad);
      out.trained = b.latent_params();
      break;
    }
    case Term::latent_g: {
      if (!b.dlat) throw AssemblyError("latent term probe requires the latent critic");
      nn::Trace<T> te1, te2;
      Tensor<T> z_s = encode_src(&te1);
      Tensor<T> z_t = encode_tgt(&te2);
      Tensor<T> zc = detail::concat_rows(z_s, z_t);
      typename nn::LatentDisc<T>::TraceL tl;
      obj::ValueGrad<T> lg = obj::adv_real(b.dlat->forward(zc, &tl, Mode::train));
      out.value = lg.value;
      Tensor<T> dzc = b.dlat->backward(tl, lg.grad);
      const int64_t B = z_s.dim(0), dz = z_s.dim(1);
      Tensor<T> dz_s({B, dz}), dz_t({B, dz});
      for (int64_t i = 0; i < B * dz; ++i) {
        dz_s[i] = dzc[i];
        dz_t[i] = dzc[B * dz + i];
      }
      b.e1.backward(te1, std::move(dz_s));
      b.e2.backward(te2, std::move(dz_t));
      out.trained = nn::NetworkBundle<T>::unique_params({b.e1.params(), b.e2.params()});
      break;
    }
  }
  return out;
}

}  // namespace xdom::train
