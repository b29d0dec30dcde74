#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "xdom/nn/layers.hpp"
#include "xdom/nn/plans.hpp"
#include "xdom/nn/sequential.hpp"
#include "xdom/rng.hpp"

namespace xdom::nn {

// ------------------------------------------------------------ discriminator ----

// Convolutional trunk + two fully-connected heads on the trunk features:
// a 1-unit sigmoid "real probability" head and a softmax class head.
// The trunk output is also exposed as the feature tap for feature matching.
template <class T>
struct DiscOut {
  Tensor<T> adv;       // (B) real-probabilities
  Tensor<T> cls;       // (B, classes) softmax
  Tensor<T> features;  // trunk output (B, C, h, w)
};

template <class T>
struct DiscTrace {
  Trace<T> trunk;
  LayerCtx<T> adv_lin, adv_sig, cls_lin, cls_soft;
};

template <class T>
class Discriminator {
 public:
  Sequential<T> trunk;
  LayerPtr<T> adv_lin, adv_sig, cls_lin, cls_soft;  // head objects (tied across the pair)

  DiscOut<T> forward(const Tensor<T>& x, DiscTrace<T>* tr, Mode mode) const {
    DiscOut<T> out;
    out.features = trunk.forward(x, tr ? &tr->trunk : nullptr, mode);
    Tensor<T> advz = adv_lin->forward(out.features, tr ? &tr->adv_lin : nullptr, mode);
    Tensor<T> advp = adv_sig->forward(advz, tr ? &tr->adv_sig : nullptr, mode);
    advp.reshape({advp.dim(0)});
    out.adv = std::move(advp);
    Tensor<T> clsz = cls_lin->forward(out.features, tr ? &tr->cls_lin : nullptr, mode);
    out.cls = cls_soft->forward(clsz, tr ? &tr->cls_soft : nullptr, mode);
    return out;
  }

  // d_adv: (B) gradient w.r.t. the real-probability; d_cls: (B, classes)
  // gradient w.r.t. the softmax output; d_features: optional gradient
  // w.r.t. the trunk features. Returns dL/dx.
  Tensor<T> backward(const DiscTrace<T>& tr, const Tensor<T>* d_adv, const Tensor<T>* d_cls,
                     const Tensor<T>* d_features) const {
    std::optional<Tensor<T>> dfeat;
    if (d_features) dfeat = *d_features;
    if (d_adv) {
      Tensor<T> da = *d_adv;
      da.reshape({da.dim(0), 1});
      Tensor<T> dz = adv_sig->backward(da, tr.adv_sig);
      Tensor<T> dx = adv_lin->backward(dz, tr.adv_lin);
      if (dfeat) {
        for (int64_t i = 0; i < dfeat->numel(); ++i) (*dfeat)[i] += dx[i];
      } else {
        dfeat = std::move(dx);
      }
    }
    if (d_cls) {
      Tensor<T> dz = cls_soft->backward(*d_cls, tr.cls_soft);
      Tensor<T> dx = cls_lin->backward(dz, tr.cls_lin);
      if (dfeat) {
        for (int64_t i = 0; i < dfeat->numel(); ++i) (*dfeat)[i] += dx[i];
      } else {
        dfeat = std::move(dx);
      }
    }
    if (!dfeat) throw AssemblyError("discriminator backward called without any gradient");
    return trunk.backward(tr.trunk, std::move(*dfeat));
  }

  std::vector<ParamPtr<T>> params() const {
    std::vector<ParamPtr<T>> out = trunk.params();
    adv_lin->collect_params(out);
    cls_lin->collect_params(out);
    return out;
  }

  std::vector<NamedTensor<T>> state() const {
    std::vector<NamedTensor<T>> out = trunk.state();
    adv_lin->collect_state(out);
    cls_lin->collect_state(out);
    return out;
  }
};

// ---------------------------------------------------------- latent critic ----

// Fully-connected critic on latent codes. The final row emits two logits;
// the "authentic prior sample" probability is the sigmoid of the first
// logit (the second is an unused spare kept for head-shape uniformity).
template <class T>
class LatentDisc {
 public:
  Sequential<T> body;  // hidden fc/relu rows plus the 2-logit output row

  struct TraceL {
    Trace<T> body;
    Tensor<T> prob;  // sigmoid(logit0), cached for backward
  };

  Tensor<T> forward(const Tensor<T>& z, TraceL* tr, Mode mode) const {
    Tensor<T> logits = body.forward(z, tr ? &tr->body : nullptr, mode);
    const int64_t B = logits.dim(0);
    Tensor<T> p({B});
    for (int64_t i = 0; i < B; ++i) p[i] = T(1) / (T(1) + std::exp(-logits.at(i, 0)));
    if (tr) tr->prob = p;
    return p;
  }

  Tensor<T> backward(const TraceL& tr, const Tensor<T>& d_prob) const {
    const int64_t B = d_prob.dim(0);
    Tensor<T> dlogits({B, 2});
    for (int64_t i = 0; i < B; ++i) {
      const T p = tr.prob[i];
      dlogits.at(i, 0) = d_prob[i] * p * (T(1) - p);
      dlogits.at(i, 1) = T(0);
    }
    return body.backward(tr.body, std::move(dlogits));
  }

  std::vector<ParamPtr<T>> params() const { return body.params(); }
  std::vector<NamedTensor<T>> state() const { return body.state(); }
};

// ------------------------------------------------------------------ bundle ----

enum class NetId { e1, e2, g1, g2, d1, d2, dlat };

template <class T>
struct SharedGroup {
  std::string name;
  ParamPtr<T> param;
  std::vector<std::string> owners;
};

struct BundleOptions {
  int64_t dz = 64;
  double width_scale = 1.0;
  bool mini = false;              // use the 8x8 miniature family
  double leaky_slope = 0.2;
  double init_std = 0.02;         // encoder/generator gaussian init
  bool with_latent_critic = false;
};

template <class T>
struct NetworkBundle {
  PlanSet plans;
  BundleOptions options;

  Sequential<T> e1, e2;  // encoders (domain 1 / domain 2)
  Sequential<T> g1, g2;  // generators
  Discriminator<T> d1, d2;
  std::optional<LatentDisc<T>> dlat;

  std::vector<ParamPtr<T>> params_of(NetId id) const {
    switch (id) {
      case NetId::e1: return e1.params();
      case NetId::e2: return e2.params();
      case NetId::g1: return g1.params();
      case NetId::g2: return g2.params();
      case NetId::d1: return d1.params();
      case NetId::d2: return d2.params();
      case NetId::dlat: return dlat ? dlat->params() : std::vector<ParamPtr<T>>{};
    }
    return {};
  }

  // Encoder+generator phase parameters (unique, canonical order).
  std::vector<ParamPtr<T>> eg_params() const {
    return unique_params({e1.params(), e2.params(), g1.params(), g2.params()});
  }
  std::vector<ParamPtr<T>> disc_params() const {
    return unique_params({d1.params(), d2.params()});
  }
  std::vector<ParamPtr<T>> latent_params() const {
    return dlat ? dlat->params() : std::vector<ParamPtr<T>>{};
  }
  std::vector<ParamPtr<T>> all_params() const {
    return unique_params({e1.params(), e2.params(), g1.params(), g2.params(), d1.params(),
                          d2.params(), latent_params()});
  }

  // Persistent named tensors (parameters + batch-norm statistics), shared
  // entries once. Used for checkpoints and the parameter-count reports.
  std::vector<NamedTensor<T>> state() const {
    std::vector<NamedTensor<T>> all;
    for (const auto& s : {e1.state(), e2.state(), g1.state(), g2.state(), d1.state(),
                          d2.state(), dlat ? dlat->state() : std::vector<NamedTensor<T>>{}}) {
      all.insert(all.end(), s.begin(), s.end());
    }
    std::vector<NamedTensor<T>> out;
    std::unordered_set<Tensor<T>*> seen;
    for (auto& nt : all) {
      if (seen.insert(nt.tensor).second) out.push_back(nt);
    }
    return out;
  }

  std::vector<SharedGroup<T>> shared_groups() const {
    struct Entry {
      ParamPtr<T> p;
      std::vector<std::string> owners;
    };
    std::vector<std::pair<NetId, const char*>> nets = {
        {NetId::e1, "E1"}, {NetId::e2, "E2"}, {NetId::g1, "G1"}, {NetId::g2, "G2"},
        {NetId::d1, "D1"}, {NetId::d2, "D2"}};
    std::vector<Entry> entries;
    std::unordered_map<Parameter<T>*, size_t> index;
    for (auto& [id, label] : nets) {
      for (auto& p : params_of(id)) {
        auto it = index.find(p.get());
        if (it == index.end()) {
          index.emplace(p.get(), entries.size());
          entries.push_back({p, {label}});
        } else {
          entries[it->second].owners.push_back(label);
        }
      }
    }
    std::vector<SharedGroup<T>> groups;
    for (auto& e : entries) {
      if (e.owners.size() > 1) groups.push_back({e.p->path, e.p, e.owners});
    }
    return groups;
  }

  static std::vector<ParamPtr<T>> unique_params(
      std::initializer_list<std::vector<ParamPtr<T>>> lists) {
    std::vector<ParamPtr<T>> out;
    std::unordered_set<Parameter<T>*> seen;
    for (const auto& list : lists) {
      for (const auto& p : list) {
        if (seen.insert(p.get()).second) out.push_back(p);
      }
    }
    return out;
  }
};

// ----------------------------------------------------------------- builder ----

namespace detail {

inline const char* kind_short(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::batch_norm: return "bn";
    case LayerKind::activation: return "act";
    case LayerKind::max_pool: return "pool";
    case LayerKind::reshape: return "reshape";
  }
  return "?";
}

struct ShapeCursor {
  int64_t c, h, w;
  int64_t flat() const { return c * h * w; }
};

template <class T>
LayerPtr<T> make_layer(const LayerSpec& s, ShapeCursor& cur, Init winit, double slope) {
  LayerPtr<T> layer;
  switch (s.kind) {
    case LayerKind::conv:
      layer = std::make_shared<Conv2d<T>>(cur.c, s.width, s.kernel, s.kernel, s.stride, s.pad_t,
                                          s.pad_b, s.pad_l, s.pad_r, winit);
      cur.c = s.width;
      cur.h = (cur.h + s.pad_t + s.pad_b - s.kernel) / s.stride + 1;
      cur.w = (cur.w + s.pad_l + s.pad_r - s.kernel) / s.stride + 1;
      break;
    case LayerKind::deconv:
      layer = std::make_shared<ConvTranspose2d<T>>(cur.c, s.width, s.kernel, s.stride, s.pad_t,
                                                   winit);
      cur.c = s.width;
      cur.h = (cur.h - 1) * s.stride - 2 * s.pad_t + s.kernel;
      cur.w = (cur.w - 1) * s.stride - 2 * s.pad_t + s.kernel;
      break;
    case LayerKind::fully_connected:
      layer = std::make_shared<Linear<T>>(cur.flat(), s.width, winit);
      cur = {s.width, 1, 1};
      break;
    case LayerKind::batch_norm:
      layer = std::make_shared<BatchNorm2d<T>>(cur.c);
      break;
    case LayerKind::activation:
      layer = std::make_shared<Activation<T>>(s.activation, slope);
      break;
    case LayerKind::max_pool:
      layer = std::make_shared<MaxPool2d<T>>();
      cur.h /= 2;
      cur.w /= 2;
      break;
    case LayerKind::reshape:
      layer = std::make_shared<Reshape<T>>(std::vector<int64_t>{s.width, s.out_h, s.out_w});
      cur = {s.width, s.out_h, s.out_w};
      break;
  }
  return layer;
}

// Assign canonical paths to a layer's parameters based on its name.
template <class T>
void label_params(const LayerPtr<T>& layer) {
  std::vector<NamedTensor<T>> st;
  layer->collect_state(st);
  std::vector<ParamPtr<T>> ps;
  layer->collect_params(ps);
  for (auto& p : ps) {
    for (auto& nt : st) {
      if (nt.tensor == &p->value) p->path = nt.path;
    }
  }
}

// Build two networks from one plan; rows flagged `shared` reuse the SAME
// layer object in both, so their parameters (and any batch-norm running
// statistics) alias by construction.
template <class T>
std::pair<Sequential<T>, Sequential<T>> build_pair(const std::vector<LayerSpec>& plan,
                                                   ShapeCursor in, Init winit, double slope,
                                                   const std::string& shared_prefix,
                                                   const std::string& a_prefix,
                                                   const std::string& b_prefix,
                                                   ShapeCursor* out_shape = nullptr) {
  Sequential<T> a, b;
  ShapeCursor cur_a = in, cur_b = in;
  for (const auto& s : plan) {
    if (s.shared) {
      LayerPtr<T> layer = make_layer<T>(s, cur_a, winit, slope);
      cur_b = cur_a;
      layer->set_name(shared_prefix + "." + s.row + "." + kind_short(s.kind));
      label_params(layer);
      a.append(layer);
      b.append(layer);
    } else {
      LayerPtr<T> la = make_layer<T>(s, cur_a, winit, slope);
      la->set_name(a_prefix + "." + s.row + "." + kind_short(s.kind));
      label_params(la);
      a.append(la);
      LayerPtr<T> lb = make_layer<T>(s, cur_b, winit, slope);
      lb->set_name(b_prefix + "." + s.row + "." + kind_short(s.kind));
      label_params(lb);
      b.append(lb);
    }
  }
  if (out_shape) *out_shape = cur_a;
  return {std::move(a), std::move(b)};
}

template <class T>
Sequential<T> build_single(const std::vector<LayerSpec>& plan, ShapeCursor in, Init winit,
                           double slope, const std::string& prefix,
                           ShapeCursor* out_shape = nullptr) {
  Sequential<T> net;
  ShapeCursor cur = in;
  for (const auto& s : plan) {
    LayerPtr<T> layer = make_layer<T>(s, cur, winit, slope);
    layer->set_name(prefix + "." + s.row + "." + kind_short(s.kind));
    label_params(layer);
    net.append(layer);
  }
  if (out_shape) *out_shape = cur;
  return net;
}

}  // namespace detail

// Deterministic parameter initialization: a single stream consumed in
// canonical parameter order, so equal seeds give bit-identical models.
template <class T>
void initialize_bundle(NetworkBundle<T>& bundle, uint64_t seed) {
  Rng rng(seed, /*stream=*/17);
  const double stddev = bundle.options.init_std;
  for (const auto& p : bundle.all_params()) {
    switch (p->init) {
      case Init::zeros:
        p->value.zero();
        break;
      case Init::ones:
        p->value.fill(T(1));
        break;
      case Init::gaussian:
        for (int64_t i = 0; i < p->value.numel(); ++i)
          p->value[i] = static_cast<T>(rng.normal(0.0, stddev));
        break;
      case Init::xavier_uniform: {
        const double bound = std::sqrt(6.0 / static_cast<double>(p->fan_in + p->fan_out));
        for (int64_t i = 0; i < p->value.numel(); ++i)
          p->value[i] = static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound);
        break;
      }
    }
    p->grad.zero();
  }
}

template <class T>
NetworkBundle<T> build_bundle(const BundleOptions& opt, uint64_t seed) {
  NetworkBundle<T> b;
  b.options = opt;
  b.plans = opt.mini ? mini_plans(opt.dz) : paper_plans(opt.dz, opt.width_scale);
  const auto& P = b.plans;

  detail::ShapeCursor enc_in{P.encoder_in_channels, P.image_hw, P.image_hw};
  auto [e1, e2] = detail::build_pair<T>(P.encoder, enc_in, Init::gaussian, opt.leaky_slope,
                                        "enc", "enc1", "enc2");
  b.e1 = std::move(e1);
  b.e2 = std::move(e2);

  detail::ShapeCursor gen_in{P.dz, 1, 1};
  auto [g1, g2] = detail::build_pair<T>(P.generator, gen_in, Init::gaussian, opt.leaky_slope,
                                        "gen", "gen1", "gen2");
  b.g1 = std::move(g1);
  b.g2 = std::move(g2);

  detail::ShapeCursor disc_in{P.disc_in_channels, P.image_hw, P.image_hw};
  detail::ShapeCursor feat{0, 0, 0};
  auto [t1, t2] = detail::build_pair<T>(P.disc_trunk, disc_in, Init::xavier_uniform,
                                        opt.leaky_slope, "disc", "disc1", "disc2", &feat);
  b.d1.trunk = std::move(t1);
  b.d2.trunk = std::move(t2);

  // Tied heads: one object each, present in both discriminators.
  auto adv_lin = std::make_shared<Linear<T>>(feat.flat(), 1, Init::xavier_uniform);
  adv_lin->set_name("disc.adv.fc");
  detail::label_params<T>(adv_lin);
  auto cls_lin = std::make_shared<Linear<T>>(feat.flat(), P.classes, Init::xavier_uniform);
  cls_lin->set_name("disc.cls.fc");
  detail::label_params<T>(cls_lin);
  auto adv_sig = std::make_shared<Activation<T>>(Act::sigmoid);
  auto cls_soft = std::make_shared<Activation<T>>(Act::softmax);
  b.d1.adv_lin = adv_lin;
  b.d1.adv_sig = adv_sig;
  b.d1.cls_lin = cls_lin;
  b.d1.cls_soft = cls_soft;
  b.d2.adv_lin = adv_lin;
  b.d2.adv_sig = adv_sig;
  b.d2.cls_lin = cls_lin;
  b.d2.cls_soft = cls_soft;

  if (opt.with_latent_critic) {
    detail::ShapeCursor lat_in{P.dz, 1, 1};
    detail::ShapeCursor lat_out{0, 0, 0};
    LatentDisc<T> lat;
    lat.body = detail::build_single<T>(P.latent_body, lat_in, Init::xavier_uniform,
                                       opt.leaky_slope, "lat", &lat_out);
    auto head = std::make_shared<Linear<T>>(lat_out.flat(), 2, Init::xavier_uniform);
    head->set_name("lat.head.fc");
    detail::label_params<T>(head);
    lat.body.append(head);
    b.dlat = std::move(lat);
  }

  initialize_bundle(b, seed);
  return b;
}

// ------------------------------------------------------------ conveniences ----

// Append the two fixed coordinate channels (x then y, each linear from -1
// at index 0 to +1 at the far edge) to a (B,3,H,W) image batch.
template <class T>
Tensor<T> append_coords(const Tensor<T>& rgb) {
  if (rgb.rank() != 4 || rgb.dim(1) != 3) {
    throw ShapeError(msg("expected (B,3,H,W) image batch, got ", shape_string(rgb.shape())));
  }
  const int64_t B = rgb.dim(0), H = rgb.dim(2), W = rgb.dim(3);
  Tensor<T> out({B, 5, H, W});
  for (int64_t b = 0; b < B; ++b) {
    std::copy_n(rgb.data() + b * 3 * H * W, 3 * H * W, out.data() + b * 5 * H * W);
    T* cx = out.data() + (b * 5 + 3) * H * W;
    T* cy = out.data() + (b * 5 + 4) * H * W;
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j < W; ++j) {
        cx[i * W + j] = W > 1 ? static_cast<T>(-1.0 + 2.0 * double(j) / double(W - 1)) : T(0);
        cy[i * W + j] = H > 1 ? static_cast<T>(-1.0 + 2.0 * double(i) / double(H - 1)) : T(0);
      }
  }
  return out;
}

// Encoder forward with the input contract (5 channels, finite values).
template <class T>
Tensor<T> encode(const Sequential<T>& enc, const Tensor<T>& x5, Trace<T>* tr, Mode mode,
                 int64_t expect_channels = 5) {
  if (x5.rank() != 4 || x5.dim(1) != expect_channels) {
    throw ShapeError(msg("encoder expects (B,", expect_channels, ",H,W) input, got ",
                         shape_string(x5.shape())));
  }
  if (!x5.all_finite()) throw NumericError("encoder input contains non-finite values");
  return enc.forward(x5, tr, mode);
}

}  // namespace xdom::nn
