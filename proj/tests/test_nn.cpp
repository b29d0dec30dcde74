#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xdom/nn/adam.hpp"
#include "xdom/nn/bundle.hpp"
#include "xdom/nn/layers.hpp"
#include "xdom/nn/plans.hpp"
#include "xdom/nn/sequential.hpp"
#include "xdom/rng.hpp"

using namespace xdom;
using namespace xdom::nn;

namespace {

void fill_uniform(Tensor<double>& t, Rng& rng, double lo, double hi) {
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = lo + (hi - lo) * rng.uniform01();
}

// Values bounded away from zero so relu/leaky kinks and max-pool ties are
// not straddled by the finite-difference probes.
void fill_away_from_zero(Tensor<double>& t, Rng& rng) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double mag = 0.1 + 0.9 * rng.uniform01();
    t[i] = rng.uniform01() < 0.5 ? -mag : mag;
  }
}

void randomize_params(const std::vector<ParamPtr<double>>& ps, Rng& rng) {
  for (const auto& p : ps) fill_uniform(p->value, rng, -0.5, 0.5);
}

double weighted_sum(const Tensor<double>& y, const Tensor<double>& c) {
  REQUIRE(y.numel() == c.numel());
  double s = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) s += y[i] * c[i];
  return s;
}

double rel_err(double numeric, double analytic) {
  return std::abs(numeric - analytic) /
         std::max({1.0, std::abs(numeric), std::abs(analytic)});
}

// Central-difference check of one layer: perturbs every input element and
// every parameter element, comparing against the layer's backward pass.
double fd_check_layer(Layer<double>& layer, Tensor<double> x, uint64_t seed,
                      double h = 1e-5) {
  Rng rng(seed, 3);
  LayerCtx<double> ctx;
  Tensor<double> y = layer.forward(x, &ctx, Mode::train);
  Tensor<double> c(y.shape());
  fill_uniform(c, rng, -1.0, 1.0);

  std::vector<ParamPtr<double>> ps;
  layer.collect_params(ps);
  for (auto& p : ps) p->grad.zero();
  Tensor<double> dx = layer.backward(c, ctx);
  REQUIRE(dx.numel() == x.numel());

  double worst = 0.0;
  auto probe = [&](double* slot, double analytic) {
    const double save = *slot;
    *slot = save + h;
    LayerCtx<double> c1;
    const double lp = weighted_sum(layer.forward(x, &c1, Mode::train), c);
    *slot = save - h;
    LayerCtx<double> c2;
    const double lm = weighted_sum(layer.forward(x, &c2, Mode::train), c);
    *slot = save;
    worst = std::max(worst, rel_err((lp - lm) / (2.0 * h), analytic));
  };
  for (int64_t i = 0; i < x.numel(); ++i) probe(&x[i], dx[i]);
  for (auto& p : ps)
    for (int64_t i = 0; i < p->value.numel(); ++i) probe(&p->value[i], p->grad[i]);
  return worst;
}

// Same idea for a whole Sequential network.
double fd_check_net(const Sequential<double>& net, Tensor<double> x, uint64_t seed,
                    double h = 1e-5) {
  Rng rng(seed, 5);
  Trace<double> tr;
  Tensor<double> y = net.forward(x, &tr, Mode::train);
  Tensor<double> c(y.shape());
  fill_uniform(c, rng, -1.0, 1.0);

  auto ps = net.params();
  for (auto& p : ps) p->grad.zero();
  Tensor<double> dx = net.backward(tr, c);
  REQUIRE(dx.numel() == x.numel());

  double worst = 0.0;
  auto probe = [&](double* slot, double analytic) {
    const double save = *slot;
    *slot = save + h;
    const double lp = weighted_sum(net.forward(x, nullptr, Mode::train), c);
    *slot = save - h;
    const double lm = weighted_sum(net.forward(x, nullptr, Mode::train), c);
    *slot = save;
    worst = std::max(worst, rel_err((lp - lm) / (2.0 * h), analytic));
  };
  for (int64_t i = 0; i < x.numel(); ++i) probe(&x[i], dx[i]);
  for (auto& p : ps)
    for (int64_t i = 0; i < p->value.numel(); ++i) probe(&p->value[i], p->grad[i]);
  return worst;
}

int64_t total_numel(const std::vector<ParamPtr<float>>& ps) {
  int64_t n = 0;
  for (const auto& p : ps) n += p->value.numel();
  return n;
}

const ParamPtr<float>& find_param(const std::vector<ParamPtr<float>>& ps,
                                  const std::string& path) {
  for (const auto& p : ps)
    if (p->path == path) return p;
  REQUIRE_MESSAGE(false, "missing parameter ", path);
  static ParamPtr<float> none;
  return none;
}

std::string describe(const LayerSpec& s) {
  std::ostringstream o;
  o << s.row << (s.shared ? "+" : "-") << ' ';
  switch (s.kind) {
    case LayerKind::conv:
      o << "conv" << s.width << " k" << s.kernel << " s" << s.stride << " p" << s.pad_t << ','
        << s.pad_b << ',' << s.pad_l << ',' << s.pad_r;
      break;
    case LayerKind::deconv:
      o << "deconv" << s.width << " k" << s.kernel << " s" << s.stride << " p" << s.pad_t;
      break;
    case LayerKind::fully_connected:
      o << "fc" << s.width;
      break;
    case LayerKind::batch_norm:
      o << "bn";
      break;
    case LayerKind::activation:
      o << act_name(s.activation);
      break;
    case LayerKind::max_pool:
      o << "pool";
      break;
    case LayerKind::reshape:
      o << "reshape(" << s.width << ',' << s.out_h << ',' << s.out_w << ')';
      break;
  }
  return o.str();
}

std::vector<std::string> describe_all(const std::vector<LayerSpec>& plan) {
  std::vector<std::string> out;
  for (const auto& s : plan) out.push_back(describe(s));
  return out;
}

}  // namespace

// --------------------------------------------------------------------------
// Per-layer gradient checks against central finite differences (double).
// --------------------------------------------------------------------------

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(101, 1);

  SUBCASE("strided, symmetric padding") {
    Conv2d<double> layer(3, 4, 3, 3, 2, 1, 1, 1, 1, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 3, 6, 6});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 11) < 2e-6);
  }
  SUBCASE("asymmetric padding") {
    Conv2d<double> layer(3, 2, 3, 3, 1, 0, 1, 2, 0, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 3, 5, 5});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 12) < 2e-6);
  }
  SUBCASE("1x1 kernel") {
    Conv2d<double> layer(5, 3, 1, 1, 1, 0, 0, 0, 0, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 5, 4, 4});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 13) < 2e-6);
  }
  SUBCASE("full-image valid kernel") {
    Conv2d<double> layer(3, 6, 4, 4, 1, 0, 0, 0, 0, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 3, 4, 4});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 14) < 2e-6);
  }
}

TEST_CASE("conv-transpose gradients match finite differences") {
  Rng rng(102, 1);

  SUBCASE("k4 s2 p1 upsampler") {
    ConvTranspose2d<double> layer(3, 4, 4, 2, 1, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 3, 4, 4});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 21) < 2e-6);
  }
  SUBCASE("1x1 projector") {
    ConvTranspose2d<double> layer(4, 3, 1, 1, 0, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 4, 5, 5});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 22) < 2e-6);
  }
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(103, 1);

  SUBCASE("rank-2 input") {
    Linear<double> layer(7, 5, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({3, 7});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 31) < 2e-6);
  }
  SUBCASE("rank-4 input is flattened per sample") {
    Linear<double> layer(12, 4, Init::gaussian);
    std::vector<ParamPtr<double>> ps;
    layer.collect_params(ps);
    randomize_params(ps, rng);
    Tensor<double> x({2, 3, 2, 2});
    fill_uniform(x, rng, -1.0, 1.0);
    CHECK(fd_check_layer(layer, x, 32) < 2e-6);
  }
}

TEST_CASE("batch-norm gradients match finite differences in train mode") {
  Rng rng(104, 1);
  BatchNorm2d<double> layer(3);
  std::vector<ParamPtr<double>> ps;
  layer.collect_params(ps);
  // gamma around 1, beta around 0 but perturbed
  for (auto& p : ps) fill_uniform(p->value, rng, 0.5, 1.5);
  Tensor<double> x({4, 3, 3, 3});
  fill_uniform(x, rng, -2.0, 2.0);
  CHECK(fd_check_layer(layer, x, 41) < 5e-6);
}

TEST_CASE("batch-norm eval mode uses running statistics") {
  BatchNorm2d<double> layer(2);
  Rng rng(105, 1);
  Tensor<double> x({8, 2, 2, 2});
  fill_uniform(x, rng, -1.0, 3.0);
  // A couple of train-mode passes move the running stats off (0, 1).
  LayerCtx<double> ctx;
  layer.forward(x, &ctx, Mode::train);
  layer.forward(x, &ctx, Mode::train);

  std::vector<NamedTensor<double>> st;
  layer.set_name("bn");
  layer.collect_state(st);
  const Tensor<double>*rm = nullptr, *rv = nullptr;
  for (auto& nt : st) {
    if (nt.path == "bn.running_mean") rm = nt.tensor;
    if (nt.path == "bn.running_var") rv = nt.tensor;
  }
  REQUIRE(rm != nullptr);
  REQUIRE(rv != nullptr);

  Tensor<double> y = layer.forward(x, nullptr, Mode::eval);
  // Spot-check one element against the running-stat formula.
  std::vector<ParamPtr<double>> ps;
  layer.collect_params(ps);
  const double g0 = ps[0]->value[0], b0 = ps[1]->value[0];
  const double expect =
      g0 * (x.at(0, 0, 0, 0) - (*rm)[0]) / std::sqrt((*rv)[0] + 1e-5) + b0;
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("max-pool gradients match finite differences") {
  Rng rng(106, 1);
  MaxPool2d<double> layer;
  Tensor<double> x({2, 3, 4, 4});
  fill_uniform(x, rng, -1.0, 1.0);  // continuous draws: ties have measure zero
  CHECK(fd_check_layer(layer, x, 51) < 2e-6);
}

TEST_CASE("activation gradients match finite differences") {
  Rng rng(107, 1);

  for (Act a : {Act::relu, Act::leaky_relu, Act::tanh, Act::sigmoid}) {
    CAPTURE(act_name(a));
    Activation<double> layer(a, 0.2);
    Tensor<double> x({2, 3, 4, 4});
    fill_away_from_zero(x, rng);
    CHECK(fd_check_layer(layer, x, 61) < 2e-6);
  }

  SUBCASE("softmax over rank-2 rows") {
    Activation<double> layer(Act::softmax);
    Tensor<double> x({4, 7});
    fill_uniform(x, rng, -2.0, 2.0);
    CHECK(fd_check_layer(layer, x, 62) < 2e-6);

    // Rows sum to one and are positive.
    LayerCtx<double> ctx;
    Tensor<double> y = layer.forward(x, &ctx, Mode::train);
    for (int64_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < 7; ++j) {
        CHECK(y.at(i, j) > 0.0);
        s += y.at(i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("reshape round-trips gradients") {
  Rng rng(108, 1);
  Reshape<double> layer(std::vector<int64_t>{3, 2, 2});
  Tensor<double> x({2, 12});
  fill_uniform(x, rng, -1.0, 1.0);
  LayerCtx<double> ctx;
  Tensor<double> y = layer.forward(x, &ctx, Mode::train);
  CHECK(y.shape() == std::vector<int64_t>{2, 3, 2, 2});
  CHECK(fd_check_layer(layer, x, 71) < 1e-9);
}

// --------------------------------------------------------------------------
// Whole-network gradient checks on the miniature family (double precision).
// --------------------------------------------------------------------------

// The whole-network checks probe at parameters drawn uniform in [-0.5, 0.5]
// rather than at the fresh 0.02-sigma init: near init the composed map is too
// ill-conditioned for central differences (pre-normalization batch variances
// land near the normalizer's epsilon, and activations cluster at the relu
// kink), so FD noise would swamp correct gradients.
TEST_CASE("miniature encoder end-to-end gradients") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  auto b = build_bundle<double>(opt, 2024);
  Rng prng(2124, 2);
  randomize_params(b.e1.params(), prng);
  Tensor<double> x({2, 5, 8, 8});
  Rng rng(109, 1);
  fill_uniform(x, rng, -1.0, 1.0);
  CHECK(fd_check_net(b.e1, x, 81) < 5e-6);
}

TEST_CASE("miniature generator end-to-end gradients") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  auto b = build_bundle<double>(opt, 2025);
  Rng prng(2125, 2);
  randomize_params(b.g2.params(), prng);
  Tensor<double> z({2, 6});
  Rng rng(110, 1);
  fill_uniform(z, rng, -1.0, 1.0);
  const double err = fd_check_net(b.g2, z, 82);
  CAPTURE(err);
  CHECK(err < 5e-6);
}

TEST_CASE("miniature discriminator gradients through both heads and the feature tap") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  auto b = build_bundle<double>(opt, 2026);
  auto& d = b.d1;
  Rng prng(2126, 2);
  randomize_params(d.params(), prng);

  Tensor<double> x({2, 3, 8, 8});
  Rng rng(111, 1);
  fill_uniform(x, rng, -1.0, 1.0);

  DiscTrace<double> tr;
  DiscOut<double> out = d.forward(x, &tr, Mode::train);
  REQUIRE(out.adv.shape() == std::vector<int64_t>{2});
  REQUIRE(out.cls.shape() == std::vector<int64_t>{2, 10});
  REQUIRE(out.features.rank() == 4);

  Tensor<double> ca(out.adv.shape()), cc(out.cls.shape()), cf(out.features.shape());
  fill_uniform(ca, rng, -1.0, 1.0);
  fill_uniform(cc, rng, -1.0, 1.0);
  fill_uniform(cf, rng, -1.0, 1.0);

  auto loss_of = [&](const DiscOut<double>& o) {
    return weighted_sum(o.adv, ca) + weighted_sum(o.cls, cc) + weighted_sum(o.features, cf);
  };

  auto ps = d.params();
  for (auto& p : ps) p->grad.zero();
  Tensor<double> dx = d.backward(tr, &ca, &cc, &cf);
  REQUIRE(dx.numel() == x.numel());

  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double* slot, double analytic) {
    const double save = *slot;
    *slot = save + h;
    const double lp = loss_of(d.forward(x, nullptr, Mode::train));
    *slot = save - h;
    const double lm = loss_of(d.forward(x, nullptr, Mode::train));
    *slot = save;
    worst = std::max(worst, rel_err((lp - lm) / (2.0 * h), analytic));
  };
  for (int64_t i = 0; i < x.numel(); ++i) probe(&x[i], dx[i]);
  for (auto& p : ps)
    for (int64_t i = 0; i < p->value.numel(); ++i) probe(&p->value[i], p->grad[i]);
  CAPTURE(worst);
  CHECK(worst < 5e-6);
}

TEST_CASE("latent critic gradients and probability range") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  opt.with_latent_critic = true;
  auto b = build_bundle<double>(opt, 2027);
  REQUIRE(b.dlat.has_value());
  auto& lat = *b.dlat;
  Rng prng(2127, 2);
  randomize_params(lat.params(), prng);

  Tensor<double> z({3, 6});
  Rng rng(112, 1);
  fill_uniform(z, rng, -1.5, 1.5);

  LatentDisc<double>::TraceL tr;
  Tensor<double> p = lat.forward(z, &tr, Mode::train);
  REQUIRE(p.shape() == std::vector<int64_t>{3});
  for (int64_t i = 0; i < 3; ++i) {
    CHECK(p[i] > 0.0);
    CHECK(p[i] < 1.0);
  }

  Tensor<double> c(p.shape());
  fill_uniform(c, rng, -1.0, 1.0);
  auto ps = lat.params();
  for (auto& q : ps) q->grad.zero();
  Tensor<double> dz = lat.backward(tr, c);
  REQUIRE(dz.numel() == z.numel());

  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double* slot, double analytic) {
    const double save = *slot;
    *slot = save + h;
    const double lp = weighted_sum(lat.forward(z, nullptr, Mode::train), c);
    *slot = save - h;
    const double lm = weighted_sum(lat.forward(z, nullptr, Mode::train), c);
    *slot = save;
    worst = std::max(worst, rel_err((lp - lm) / (2.0 * h), analytic));
  };
  for (int64_t i = 0; i < z.numel(); ++i) probe(&z[i], dz[i]);
  for (auto& q : ps)
    for (int64_t i = 0; i < q->value.numel(); ++i) probe(&q->value[i], q->grad[i]);
  CHECK(worst < 5e-6);
}

// --------------------------------------------------------------------------
// Plan tables: pin every row of the full-size family.
// --------------------------------------------------------------------------

TEST_CASE("full-size plan tables match the published layout") {
  PlanSet p = paper_plans(128, 1.0);

  CHECK(describe_all(p.encoder) == std::vector<std::string>{
      "l1- conv64 k5 s2 p2,2,2,2", "l1- bn", "l1- leaky_relu",
      "l2+ conv128 k5 s2 p2,2,2,2", "l2+ bn", "l2+ leaky_relu",
      "l3+ conv256 k8 s1 p3,4,3,4", "l3+ bn", "l3+ leaky_relu",
      "l4+ conv512 k8 s1 p0,0,0,0", "l4+ bn", "l4+ leaky_relu",
      "l5+ conv1024 k1 s1 p0,0,0,0",
      "l6+ fc128"});

  CHECK(describe_all(p.generator) == std::vector<std::string>{
      "l1+ fc1024", "l1+ relu", "l1+ reshape(256,2,2)",
      "l2+ deconv512 k4 s2 p1", "l2+ bn", "l2+ leaky_relu",
      "l3+ deconv256 k4 s2 p1", "l3+ bn", "l3+ leaky_relu",
      "l4+ deconv128 k4 s2 p1", "l4+ bn", "l4+ leaky_relu",
      "l5- deconv64 k4 s2 p1", "l5- bn", "l5- leaky_relu",
      "l6- deconv3 k1 s1 p0", "l6- tanh"});

  CHECK(describe_all(p.disc_trunk) == std::vector<std::string>{
      "l1- conv96 k5 s1 p2,2,2,2", "l1- relu", "l1- pool",
      "l2+ conv192 k5 s1 p2,2,2,2", "l2+ relu", "l2+ pool",
      "l3+ conv384 k5 s1 p2,2,2,2", "l3+ relu", "l3+ pool",
      "l4+ conv768 k5 s1 p2,2,2,2", "l4+ relu", "l4+ pool"});

  CHECK(describe_all(p.latent_body) == std::vector<std::string>{
      "l1- fc512", "l1- relu", "l2- fc512", "l2- relu",
      "l3- fc512", "l3- relu", "l4- fc512", "l4- relu"});

  CHECK(p.encoder_in_channels == 5);
  CHECK(p.disc_in_channels == 3);
  CHECK(p.image_hw == 32);
  CHECK(p.classes == 10);
}

TEST_CASE("width scaling rounds and clamps") {
  CHECK(scaled_width(64, 1.0) == 64);
  CHECK(scaled_width(64, 0.5) == 32);
  CHECK(scaled_width(64, 1.0 / 16.0) == 4);
  CHECK(scaled_width(3, 1.0 / 16.0) == 1);  // clamped to at least one channel
  CHECK_THROWS_AS(scaled_width(64, 0.0), ConfigError);
  CHECK_THROWS_AS(paper_plans(0, 1.0), ConfigError);

  PlanSet half = paper_plans(64, 0.5);
  CHECK(half.encoder[0].width == 32);
  CHECK(half.encoder[3].width == 64);
  // fc width stays exactly 4x the reshape channel count
  CHECK(half.generator[0].width == 4 * half.generator[2].width);
}

// --------------------------------------------------------------------------
// Full-size bundle: shapes and closed-form parameter counts.
// --------------------------------------------------------------------------

TEST_CASE("full-size forward shapes") {
  BundleOptions opt;
  opt.dz = 64;
  auto b = build_bundle<float>(opt, 3001);

  Tensor<float> rgb({2, 3, 32, 32});
  Rng rng(113, 1);
  for (int64_t i = 0; i < rgb.numel(); ++i) rgb[i] = float(2.0 * rng.uniform01() - 1.0);

  Tensor<float> x5 = append_coords(rgb);
  REQUIRE(x5.shape() == std::vector<int64_t>{2, 5, 32, 32});

  Tensor<float> z = encode(b.e1, x5, static_cast<Trace<float>*>(nullptr), Mode::train);
  CHECK(z.shape() == std::vector<int64_t>{2, 64});

  Tensor<float> y = b.g1.forward(z, nullptr, Mode::train);
  CHECK(y.shape() == std::vector<int64_t>{2, 3, 32, 32});
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(y[i] <= 1.0f);
    CHECK(y[i] >= -1.0f);
  }

  DiscOut<float> out = b.d1.forward(y, nullptr, Mode::train);
  CHECK(out.adv.shape() == std::vector<int64_t>{2});
  CHECK(out.cls.shape() == std::vector<int64_t>{2, 10});
  CHECK(out.features.shape() == std::vector<int64_t>{2, 768, 2, 2});
}

TEST_CASE("parameter counts match closed-form arithmetic") {
  BundleOptions opt;
  opt.dz = 64;
  opt.with_latent_critic = true;
  auto b = build_bundle<float>(opt, 3002);

  // Encoder: l1 private (conv 5->64 k5 plus bn), l2..l6 shared.
  const int64_t e_priv = (64 * 5 * 25 + 64) + 2 * 64;
  const int64_t e_shared = (128 * 64 * 25 + 128) + 2 * 128      // l2 conv+bn
                           + (256 * 128 * 64 + 256) + 2 * 256   // l3 conv+bn (k8)
                           + (512 * 256 * 64 + 512) + 2 * 512   // l4 conv+bn (k8)
                           + (1024 * 512 * 1 + 1024)            // l5 conv k1
                           + (64 * 1024 + 64);                  // l6 fc -> dz
  CHECK(total_numel(b.params_of(NetId::e1)) == e_priv + e_shared);
  CHECK(total_numel(b.params_of(NetId::e2)) == e_priv + e_shared);

  // Generator: l1..l4 shared, l5/l6 private.
  const int64_t g_shared = (1024 * 64 + 1024)                   // l1 fc
                           + (256 * 512 * 16 + 512) + 2 * 512   // l2 deconv+bn
                           + (512 * 256 * 16 + 256) + 2 * 256   // l3 deconv+bn
                           + (256 * 128 * 16 + 128) + 2 * 128;  // l4 deconv+bn
  const int64_t g_priv = (128 * 64 * 16 + 64) + 2 * 64          // l5 deconv+bn
                         + (64 * 3 * 1 + 3);                    // l6 deconv k1
  CHECK(total_numel(b.params_of(NetId::g1)) == g_shared + g_priv);

  // Discriminator: l1 private, l2..l4 shared, heads tied across the pair.
  const int64_t d_priv = 96 * 3 * 25 + 96;
  const int64_t d_shared = (192 * 96 * 25 + 192) + (384 * 192 * 25 + 384) +
                           (768 * 384 * 25 + 768);
  const int64_t d_heads = (3072 + 1) + (10 * 3072 + 10);
  CHECK(total_numel(b.params_of(NetId::d1)) == d_priv + d_shared + d_heads);

  // Latent critic: four hidden fc rows plus the 2-logit head.
  const int64_t lat = (512 * 64 + 512) + 3 * (512 * 512 + 512) + (2 * 512 + 2);
  CHECK(total_numel(b.params_of(NetId::dlat)) == lat);

  // Phase sets count shared parameters exactly once.
  CHECK(total_numel(b.eg_params()) ==
        e_shared + 2 * e_priv + g_shared + 2 * g_priv);
  CHECK(total_numel(b.disc_params()) == d_shared + 2 * d_priv + d_heads);
}

// --------------------------------------------------------------------------
// Sharing, naming, and deterministic initialization.
// --------------------------------------------------------------------------

TEST_CASE("shared rows alias the same parameter objects") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  auto b = build_bundle<float>(opt, 3003);

  auto e1p = b.params_of(NetId::e1);
  auto e2p = b.params_of(NetId::e2);

  const auto& shared_w = find_param(e1p, "enc.l2.conv.w");
  CHECK(shared_w.get() == find_param(e2p, "enc.l2.conv.w").get());

  const auto& priv1 = find_param(e1p, "enc1.l1.conv.w");
  const auto& priv2 = find_param(e2p, "enc2.l1.conv.w");
  CHECK(priv1.get() != priv2.get());

  // Mutating through one encoder is visible through the other.
  shared_w->value[0] = 42.0f;
  CHECK(find_param(e2p, "enc.l2.conv.w")->value[0] == 42.0f);

  // Discriminator heads are one object in both discriminators.
  CHECK(b.d1.adv_lin.get() == b.d2.adv_lin.get());
  CHECK(b.d1.cls_lin.get() == b.d2.cls_lin.get());
  CHECK(find_param(b.params_of(NetId::d1), "disc.adv.fc.w").get() ==
        find_param(b.params_of(NetId::d2), "disc.adv.fc.w").get());

  auto groups = b.shared_groups();
  CHECK(!groups.empty());
  bool saw_enc = false, saw_head = false;
  for (const auto& g : groups) {
    if (g.name == "enc.l2.conv.w") {
      saw_enc = true;
      CHECK(g.owners == std::vector<std::string>{"E1", "E2"});
    }
    if (g.name == "disc.adv.fc.w") {
      saw_head = true;
      CHECK(g.owners == std::vector<std::string>{"D1", "D2"});
    }
    CHECK(g.owners.size() > 1);
  }
  CHECK(saw_enc);
  CHECK(saw_head);
}

TEST_CASE("state paths are unique and cover batch-norm statistics") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  opt.with_latent_critic = true;
  auto b = build_bundle<float>(opt, 3004);

  auto st = b.state();
  std::set<std::string> paths;
  for (const auto& nt : st) {
    CHECK(paths.insert(nt.path).second);  // no duplicate names
  }
  CHECK(paths.count("enc1.l1.conv.w") == 1);
  CHECK(paths.count("enc2.l1.conv.b") == 1);
  CHECK(paths.count("enc.l2.bn.running_mean") == 1);
  CHECK(paths.count("enc.l2.bn.running_var") == 1);
  CHECK(paths.count("gen.l1.fc.w") == 1);
  CHECK(paths.count("gen1.l4.deconv.w") == 1);
  CHECK(paths.count("disc.adv.fc.w") == 1);
  CHECK(paths.count("disc.cls.fc.b") == 1);
  CHECK(paths.count("lat.head.fc.w") == 1);
}

TEST_CASE("initialization is deterministic in the seed") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  auto a = build_bundle<float>(opt, 77);
  auto b = build_bundle<float>(opt, 77);
  auto c = build_bundle<float>(opt, 78);

  auto pa = a.all_params(), pb = b.all_params(), pc = c.all_params();
  REQUIRE(pa.size() == pb.size());
  REQUIRE(pa.size() == pc.size());

  bool any_diff_seed77_78 = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->path == pb[i]->path);
    REQUIRE(pa[i]->value.numel() == pb[i]->value.numel());
    for (int64_t j = 0; j < pa[i]->value.numel(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
      if (pa[i]->value[j] != pc[i]->value[j]) any_diff_seed77_78 = true;
    }
  }
  CHECK(any_diff_seed77_78);
}

TEST_CASE("initialization respects the per-parameter policy") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  opt.init_std = 0.02;
  auto b = build_bundle<float>(opt, 3005);

  for (const auto& p : b.all_params()) {
    CAPTURE(p->path);
    if (p->init == Init::zeros) {
      for (int64_t i = 0; i < p->value.numel(); ++i) CHECK(p->value[i] == 0.0f);
    } else if (p->init == Init::ones) {
      for (int64_t i = 0; i < p->value.numel(); ++i) CHECK(p->value[i] == 1.0f);
    } else if (p->init == Init::xavier_uniform) {
      const double bound = std::sqrt(6.0 / double(p->fan_in + p->fan_out));
      for (int64_t i = 0; i < p->value.numel(); ++i) {
        CHECK(std::abs(p->value[i]) <= bound);
      }
    }
  }

  // Encoder/generator weights are gaussian with the configured spread.
  const auto& w = find_param(b.params_of(NetId::e1), "enc.l2.conv.w");
  double ss = 0.0;
  for (int64_t i = 0; i < w->value.numel(); ++i) ss += double(w->value[i]) * w->value[i];
  const double sd = std::sqrt(ss / double(w->value.numel()));
  CHECK(sd > 0.01);
  CHECK(sd < 0.04);
}

TEST_CASE("forward passes are deterministic") {
  BundleOptions opt;
  opt.dz = 6;
  opt.mini = true;
  auto a = build_bundle<float>(opt, 55);
  auto b = build_bundle<float>(opt, 55);

  Tensor<float> x({2, 5, 8, 8});
  Rng rng(114, 1);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = float(2.0 * rng.uniform01() - 1.0);

  Tensor<float> za = a.e1.forward(x, nullptr, Mode::train);
  Tensor<float> zb = b.e1.forward(x, nullptr, Mode::train);
  REQUIRE(za.numel() == zb.numel());
  for (int64_t i = 0; i < za.numel(); ++i) CHECK(za[i] == zb[i]);
}

TEST_CASE("coordinate channels span the corner values") {
  Tensor<float> rgb({1, 3, 4, 4});
  for (int64_t i = 0; i < rgb.numel(); ++i) rgb[i] = 0.25f;
  Tensor<float> x5 = append_coords(rgb);

  CHECK(x5.at(0, 0, 0, 0) == 0.25f);
  CHECK(x5.at(0, 2, 3, 3) == 0.25f);
  // channel 3: horizontal ramp; channel 4: vertical ramp
  CHECK(x5.at(0, 3, 0, 0) == -1.0f);
  CHECK(x5.at(0, 3, 0, 3) == 1.0f);
  CHECK(x5.at(0, 3, 3, 0) == -1.0f);
  CHECK(x5.at(0, 4, 0, 0) == -1.0f);
  CHECK(x5.at(0, 4, 3, 0) == 1.0f);
  CHECK(x5.at(0, 4, 3, 3) == 1.0f);
  CHECK(x5.at(0, 3, 1, 1) == doctest::Approx(-1.0 + 2.0 / 3.0));

  Tensor<float> bad({1, 5, 4, 4});
  CHECK_THROWS_AS(append_coords(bad), ShapeError);
}

// --------------------------------------------------------------------------
// Optimizer: oracle sequence computed from the closed-form moment sums.
// --------------------------------------------------------------------------

TEST_CASE("adam matches the closed-form reference sequence") {
  auto p = std::make_shared<Parameter<double>>(std::vector<int64_t>{1});
  p->value[0] = 0.7;

  Adam<double>::Hyper h;
  h.lr = 0.01;
  h.beta1 = 0.9;
  h.beta2 = 0.999;
  h.eps = 1e-8;
  h.weight_decay = 0.1;
  Adam<double> opt({p}, h);

  const std::vector<double> grads = {0.4, -0.3, 0.25, 0.9, -0.05};

  // Reference: moments written as explicit geometric sums over the gradient
  // history, never via the optimizer's own recurrences.
  double ref = 0.7;
  for (size_t t = 1; t <= grads.size(); ++t) {
    double m = 0.0, v = 0.0;
    for (size_t k = 1; k <= t; ++k) {
      m += (1.0 - h.beta1) * std::pow(h.beta1, double(t - k)) * grads[k - 1];
      v += (1.0 - h.beta2) * std::pow(h.beta2, double(t - k)) * grads[k - 1] * grads[k - 1];
    }
    const double mhat = m / (1.0 - std::pow(h.beta1, double(t)));
    const double vhat = v / (1.0 - std::pow(h.beta2, double(t)));
    ref = ref * (1.0 - h.lr * h.weight_decay) - h.lr * mhat / (std::sqrt(vhat) + h.eps);

    p->grad[0] = grads[t - 1];
    opt.step();
    CHECK(p->value[0] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("adam first step moves by roughly the learning rate") {
  auto p = std::make_shared<Parameter<double>>(std::vector<int64_t>{1});
  p->value[0] = 1.0;
  Adam<double>::Hyper h;
  h.lr = 1e-3;
  Adam<double> opt({p}, h);
  p->grad[0] = 0.123;
  opt.step();
  // mhat = g, vhat = g^2 at t=1, so the update is -lr * g/(|g|+eps).
  CHECK(p->value[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam decay applies even when gradients are zero") {
  auto p = std::make_shared<Parameter<double>>(std::vector<int64_t>{1});
  p->value[0] = 2.0;
  Adam<double>::Hyper h;
  h.lr = 0.1;
  h.weight_decay = 0.5;
  Adam<double> opt({p}, h);
  p->grad[0] = 0.0;
  opt.step();
  opt.step();
  CHECK(p->value[0] == doctest::Approx(2.0 * 0.95 * 0.95).epsilon(1e-12));
}

TEST_CASE("adam zero_grad clears accumulated gradients") {
  auto p = std::make_shared<Parameter<double>>(std::vector<int64_t>{3});
  Adam<double> opt({p}, {});
  p->grad[0] = 1.0;
  p->grad[2] = -2.0;
  opt.zero_grad();
  for (int64_t i = 0; i < 3; ++i) CHECK(p->grad[i] == 0.0);
}
