#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xdom/ckpt/checkpoint.hpp"
#include "xdom/data/ppm.hpp"
#include "xdom/error.hpp"
#include "xdom/eval/eval.hpp"
#include "xdom/nn/bundle.hpp"
#include "xdom/obj/report.hpp"
#include "xdom/rng.hpp"
#include "xdom/train/config.hpp"
#include "xdom/train/pass.hpp"
#include "xdom/train/trainer.hpp"

using namespace xdom;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("xdom_trainer_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// CSV column layout: step, 13 raw terms, 13 weighted terms, 3 totals, 2
// accuracies.
constexpr size_t kCols = 32;
constexpr size_t kColTargetAcc = 30;
constexpr size_t kColSourceAcc = 31;

// Whole-network probes are evaluated at parameters drawn uniform in
// [-0.15, 0.15] rather than at the 0.02-sigma init. Near init the
// pre-normalization batch variances sit close to the normalizer epsilon and
// finite differences become unreliable; much larger draws saturate the
// clamped-log losses, whose value plateaus at the floor while the gradient
// convention passes through it, so finite differences go flat.
template <class T>
void randomize_params(const std::vector<nn::ParamPtr<T>>& ps, Rng& rng) {
  for (const auto& p : ps) {
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      p->value[i] = static_cast<T>((rng.uniform01() - 0.5) * 0.3);
    }
  }
}

template <class T>
train::StepInputs<T> random_inputs(int64_t B, int64_t hw, int64_t dz, double sigma,
                                   uint64_t seed) {
  Rng rng(seed, 3);
  train::StepInputs<T> in;
  in.x_s = Tensor<T>({B, 3, hw, hw});
  in.x_t = Tensor<T>({B, 3, hw, hw});
  for (int64_t i = 0; i < in.x_s.numel(); ++i) {
    in.x_s[i] = static_cast<T>(2.0 * rng.uniform01() - 1.0);
  }
  for (int64_t i = 0; i < in.x_t.numel(); ++i) {
    in.x_t[i] = static_cast<T>(2.0 * rng.uniform01() - 1.0);
  }
  in.labels.resize(static_cast<size_t>(B));
  for (auto& l : in.labels) l = rng.uniform_int(10);
  in.prior = train::sample_prior<T>(B, dz, sigma, rng);
  return in;
}

nn::NetworkBundle<double> probe_bundle(uint64_t seed) {
  nn::BundleOptions bo;
  bo.dz = 6;
  bo.mini = true;
  bo.with_latent_critic = true;
  nn::NetworkBundle<double> b = nn::build_bundle<double>(bo, seed);
  Rng prng(seed + 1, 2);
  randomize_params(b.all_params(), prng);
  return b;
}

train::PassSettings probe_settings(bool cls_on_rec = false) {
  train::PassSettings s;
  s.scheme = obj::Scheme::mmd;
  s.w = obj::Weights{1.0, 1.0, 1.0, 1.0, 1.0};
  s.kernel = obj::KernelCfg{metrics::KernelFamily::inverse_multiquadric,
                            obj::default_imq_scale(6, 1.5)};
  s.cls_on_reconstructed = cls_on_rec;
  return s;
}

struct FlatPos {
  size_t param;
  int64_t elem;
};

std::vector<FlatPos> sample_positions(const std::vector<nn::ParamPtr<double>>& ps, int64_t want,
                                      Rng& rng) {
  int64_t total = 0;
  for (const auto& p : ps) total += p->value.numel();
  want = std::min(want, total);
  std::set<int64_t> chosen;
  while (static_cast<int64_t>(chosen.size()) < want) chosen.insert(rng.uniform_int(total));
  std::vector<FlatPos> out;
  for (int64_t flat : chosen) {
    size_t pi = 0;
    while (flat >= ps[pi]->value.numel()) {
      flat -= ps[pi]->value.numel();
      ++pi;
    }
    out.push_back({pi, flat});
  }
  return out;
}

// Central-difference check of one objective term against its probe
// gradients. 140 trained parameters are sampled; positions where the second
// difference reveals a kink inside the +-h interval (a leaky-relu corner or
// pool argmax flip, where central differences are meaningless) are excluded,
// and at least 100 of the remainder must match to 1e-4.
void check_term_gradients(obj::Term term, bool cls_on_rec, uint64_t seed) {
  nn::NetworkBundle<double> b = probe_bundle(seed);
  const train::PassSettings s = probe_settings(cls_on_rec);
  const train::StepInputs<double> in = random_inputs<double>(4, 8, 6, 1.5, seed + 2);

  train::ProbeResult<double> pr = train::probe_term(b, in, term, s);
  REQUIRE(std::isfinite(pr.value));
  REQUIRE(!pr.trained.empty());
  const double f0 = pr.value;

  std::vector<Tensor<double>> analytic;
  analytic.reserve(pr.trained.size());
  for (const auto& p : pr.trained) analytic.push_back(p->grad);

  Rng posrng(seed + 3, 4);
  const std::vector<FlatPos> pos = sample_positions(pr.trained, 140, posrng);

  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  for (const FlatPos& fp : pos) {
    Tensor<double>& val = pr.trained[fp.param]->value;
    const double orig = val[fp.elem];
    val[fp.elem] = orig + h;
    const double vp = train::probe_term(b, in, term, s).value;
    val[fp.elem] = orig - h;
    const double vm = train::probe_term(b, in, term, s).value;
    val[fp.elem] = orig;
    const double fd = (vp - vm) / (2.0 * h);
    const double an = analytic[fp.param][fp.elem];
    const double scale = std::max({1.0, std::abs(fd), std::abs(an)});
    if (std::abs(vp - 2.0 * f0 + vm) / h > 0.02 * scale) continue;
    ++checked;
    const double rel = std::abs(fd - an) / scale;
    worst = std::max(worst, rel);
    CAPTURE(fp.param);
    CAPTURE(fp.elem);
    CAPTURE(fd);
    CAPTURE(an);
    CHECK(rel < 1e-4);
  }
  INFO("worst relative error ", worst);
  CHECK(worst < 1e-4);
  CHECK(checked >= 100);
}

uint64_t checksum_values(const std::vector<nn::ParamPtr<double>>& ps) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& p : ps) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const size_t n = static_cast<size_t>(p->value.numel()) * sizeof(double);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

train::ExperimentConfig tiny_cfg(const fs::path& out, uint64_t seed = 5) {
  train::ExperimentConfig c;
  c.pair = train::Pair::toy;
  c.scheme = obj::Scheme::mmd;
  c.dz = 8;
  c.sigma = 1.5;
  c.w = obj::Weights{1.0, 0.1, 0.5, 0.01, 1.0};
  c.width_scale = 0.0625;
  c.max_iterations = 12;
  c.eval_every = 4;
  c.checkpoint_every = 4;
  c.train_batch = 4;
  c.test_batch = 16;
  c.seed = seed;
  c.output_dir = out.string();
  c.toy_per_class = 12;
  c.toy_test_per_class = 10;
  return c;
}

template <class T>
bool states_equal(const std::vector<nn::NamedTensor<T>>& a,
                  const std::vector<nn::NamedTensor<T>>& b, const std::string& prefix = "") {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].path != b[i].path) return false;
    if (!prefix.empty() && a[i].path.rfind(prefix, 0) != 0) continue;
    if (a[i].tensor->shape() != b[i].tensor->shape()) return false;
    if (std::memcmp(a[i].tensor->data(), b[i].tensor->data(),
                    static_cast<size_t>(a[i].tensor->numel()) * sizeof(T)) != 0) {
      return false;
    }
  }
  return true;
}

size_t shared_param_count(const std::vector<nn::ParamPtr<float>>& a,
                          const std::vector<nn::ParamPtr<float>>& b) {
  std::set<const void*> pa;
  for (const auto& p : a) pa.insert(p.get());
  size_t n = 0;
  for (const auto& p : b) n += pa.count(p.get());
  return n;
}

}  // namespace

// ------------------------------------------------------------ prior draws ----

TEST_CASE("prior sample has the requested moments") {
  Rng rng(11, 7);
  Tensor<float> p = train::sample_prior<float>(50000, 16, 2.0, rng);
  REQUIRE(p.rank() == 2);
  REQUIRE(p.dim(0) == 50000);
  REQUIRE(p.dim(1) == 16);
  double mean = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) mean += p[i];
  mean /= static_cast<double>(p.numel());
  double var = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) var += (p[i] - mean) * (p[i] - mean);
  var /= static_cast<double>(p.numel() - 1);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::sqrt(var) > 1.99);
  CHECK(std::sqrt(var) < 2.01);
}

TEST_CASE("prior sample rejects degenerate requests") {
  Rng rng(1, 7);
  CHECK_THROWS_AS(train::sample_prior<float>(0, 4, 1.0, rng), DomainError);
  CHECK_THROWS_AS(train::sample_prior<float>(4, 0, 1.0, rng), DomainError);
  CHECK_THROWS_AS(train::sample_prior<float>(4, 4, 0.0, rng), DomainError);
}

// -------------------------------------------- per-term gradient probes ----

TEST_CASE("reconstruction term gradients match finite differences") {
  check_term_gradients(obj::Term::recon_1, false, 3101);
  check_term_gradients(obj::Term::recon_2, false, 3111);
}

TEST_CASE("latent mmd term gradients match finite differences") {
  check_term_gradients(obj::Term::mmd_1, false, 3121);
  check_term_gradients(obj::Term::mmd_2, false, 3131);
}

TEST_CASE("discriminator adversarial term gradients match finite differences") {
  check_term_gradients(obj::Term::gan_d_1, false, 3141);
  check_term_gradients(obj::Term::gan_d_2, false, 3151);
}

TEST_CASE("generator adversarial term gradients match finite differences") {
  check_term_gradients(obj::Term::gan_g_1, false, 3161);
  check_term_gradients(obj::Term::gan_g_2, false, 3171);
}

TEST_CASE("feature matching term gradients match finite differences") {
  check_term_gradients(obj::Term::feat_1, false, 3181);
  check_term_gradients(obj::Term::feat_2, false, 3191);
}

TEST_CASE("classification term gradients match finite differences") {
  check_term_gradients(obj::Term::cls, false, 3201);
  check_term_gradients(obj::Term::cls, true, 3202);  // classifying reconstructions
}

TEST_CASE("latent critic term gradients match finite differences") {
  check_term_gradients(obj::Term::latent_d, false, 3211);
  check_term_gradients(obj::Term::latent_g, false, 3221);
}

// ------------------------------------------------------- step mechanics ----

TEST_CASE("step report carries exactly the active fragments") {
  nn::BundleOptions bo;
  bo.dz = 6;
  bo.mini = true;
  bo.with_latent_critic = true;
  const train::StepInputs<double> in = random_inputs<double>(4, 8, 6, 1.5, 41);
  nn::Adam<double>::Hyper h;

  auto optims = [&](nn::NetworkBundle<double>& b) {
    return std::tuple<nn::Adam<double>, nn::Adam<double>, nn::Adam<double>>(
        nn::Adam<double>(b.eg_params(), h), nn::Adam<double>(b.disc_params(), h),
        nn::Adam<double>(b.latent_params(), h));
  };

  SUBCASE("mmd scheme with every weight active") {
    nn::NetworkBundle<double> b = nn::build_bundle<double>(bo, 42);
    auto [eg, d, lat] = optims(b);
    train::PassSettings s = probe_settings();
    obj::LossReport r = train::run_step(b, in, s, {&eg, &d, &lat}, 1);
    using obj::Term;
    for (Term t : {Term::recon_1, Term::recon_2, Term::mmd_1, Term::mmd_2, Term::gan_d_1,
                   Term::gan_d_2, Term::gan_g_1, Term::gan_g_2, Term::feat_1, Term::feat_2,
                   Term::cls}) {
      CHECK(r[t].has_value());
      CHECK(r.weighted[static_cast<int>(t)].has_value());
    }
    CHECK(!r[Term::latent_d].has_value());
    CHECK(!r[Term::latent_g].has_value());
    CHECK(r.total_d.has_value());
    CHECK(r.total_eg.has_value());
    CHECK(!r.total_latent.has_value());
    CHECK(!r.target_accuracy.has_value());
  }

  SUBCASE("gan scheme replaces the mmd terms with critic terms") {
    nn::NetworkBundle<double> b = nn::build_bundle<double>(bo, 42);
    auto [eg, d, lat] = optims(b);
    train::PassSettings s = probe_settings();
    s.scheme = obj::Scheme::gan;
    obj::LossReport r = train::run_step(b, in, s, {&eg, &d, &lat}, 1);
    using obj::Term;
    CHECK(r[Term::latent_d].has_value());
    CHECK(r[Term::latent_g].has_value());
    CHECK(!r[Term::mmd_1].has_value());
    CHECK(!r[Term::mmd_2].has_value());
    CHECK(r.total_latent.has_value());
  }

  SUBCASE("zero-weighted groups are skipped") {
    nn::NetworkBundle<double> b = nn::build_bundle<double>(bo, 42);
    auto [eg, d, lat] = optims(b);
    train::PassSettings s = probe_settings();
    s.w.lambda3 = 0.0;
    s.w.lambda4 = 0.0;
    obj::LossReport r = train::run_step(b, in, s, {&eg, &d, &lat}, 1);
    using obj::Term;
    CHECK(!r[Term::feat_1].has_value());
    CHECK(!r[Term::feat_2].has_value());
    CHECK(!r[Term::cls].has_value());
    CHECK(r[Term::recon_1].has_value());
  }

  SUBCASE("gan scheme without a critic is an assembly error") {
    nn::BundleOptions plain = bo;
    plain.with_latent_critic = false;
    nn::NetworkBundle<double> b = nn::build_bundle<double>(plain, 42);
    nn::Adam<double> eg(b.eg_params(), h), d(b.disc_params(), h);
    train::PassSettings s = probe_settings();
    s.scheme = obj::Scheme::gan;
    train::StepOptims<double> opt;
    opt.eg = &eg;
    opt.d = &d;
    CHECK_THROWS_AS(train::run_step(b, in, s, opt, 1), AssemblyError);
  }

  SUBCASE("mismatched batch sizes are rejected") {
    nn::NetworkBundle<double> b = nn::build_bundle<double>(bo, 42);
    auto [eg, d, lat] = optims(b);
    train::StepInputs<double> bad = random_inputs<double>(4, 8, 6, 1.5, 43);
    bad.x_t = Tensor<double>({3, 3, 8, 8});
    CHECK_THROWS_AS(train::run_step(b, bad, probe_settings(), {&eg, &d, &lat}, 1), ShapeError);
  }
}

TEST_CASE("each phase updates exactly its own parameter set") {
  nn::BundleOptions bo;
  bo.dz = 6;
  bo.mini = true;
  bo.with_latent_critic = true;
  const train::StepInputs<double> in = random_inputs<double>(4, 8, 6, 1.5, 51);
  nn::Adam<double>::Hyper h;
  h.weight_decay = 5e-4;

  for (obj::Scheme scheme : {obj::Scheme::mmd, obj::Scheme::gan}) {
    CAPTURE(scheme_name(scheme));
    nn::NetworkBundle<double> b = nn::build_bundle<double>(bo, 52);
    Rng prng(53, 2);
    randomize_params(b.all_params(), prng);
    nn::Adam<double> eg(b.eg_params(), h), d(b.disc_params(), h), lat(b.latent_params(), h);
    train::PassSettings s = probe_settings();
    s.scheme = scheme;

    // The three phase parameter sets must be pairwise disjoint for the
    // isolation claim to mean anything.
    std::set<const void*> seen;
    for (const auto& p : b.eg_params()) CHECK(seen.insert(p.get()).second);
    for (const auto& p : b.disc_params()) CHECK(seen.insert(p.get()).second);
    for (const auto& p : b.latent_params()) CHECK(seen.insert(p.get()).second);

    obj::LossReport frag;
    frag.step = 1;
    train::EgForward<double> f = train::forward_eg(b, in);

    uint64_t eg0 = checksum_values(b.eg_params());
    uint64_t d0 = checksum_values(b.disc_params());
    uint64_t lat0 = checksum_values(b.latent_params());

    train::d_phase(b, in, f, s, &d, frag);
    CHECK(checksum_values(b.eg_params()) == eg0);
    CHECK(checksum_values(b.disc_params()) != d0);
    CHECK(checksum_values(b.latent_params()) == lat0);
    const uint64_t d1sum = checksum_values(b.disc_params());

    if (scheme == obj::Scheme::gan) {
      train::latent_d_phase(b, f, in.prior, s, &lat, frag);
      CHECK(checksum_values(b.eg_params()) == eg0);
      CHECK(checksum_values(b.disc_params()) == d1sum);
      CHECK(checksum_values(b.latent_params()) != lat0);
    }
    const uint64_t lat1 = checksum_values(b.latent_params());

    train::eg_phase(b, in, f, s, &eg, frag);
    CHECK(checksum_values(b.eg_params()) != eg0);
    CHECK(checksum_values(b.disc_params()) == d1sum);
    CHECK(checksum_values(b.latent_params()) == lat1);

    CHECK_NOTHROW(obj::assemble(frag, s.w, s.scheme));
  }
}

// ----------------------------------------------------------- the trainer ----

TEST_CASE("equal configs produce byte-identical runs") {
  TempDir tmp;
  train::ExperimentConfig ca = tiny_cfg(tmp.path / "a");
  ca.max_iterations = 6;
  ca.eval_every = 3;
  ca.checkpoint_every = 3;
  train::ExperimentConfig cb = ca;
  cb.output_dir = (tmp.path / "b").string();

  train::Trainer ta(ca);
  ta.run();
  train::Trainer tb(cb);
  tb.run();

  CHECK(read_file(tmp.path / "a" / "metrics.csv") == read_file(tmp.path / "b" / "metrics.csv"));
  CHECK(states_equal(ta.bundle().state(), tb.bundle().state()));
  CHECK(std::isfinite(ta.recent_recon_mean()));

  train::ExperimentConfig cc = ca;
  cc.output_dir = (tmp.path / "c").string();
  cc.seed = 6;
  train::Trainer tc(cc);
  tc.run();
  CHECK(read_file(tmp.path / "a" / "metrics.csv") != read_file(tmp.path / "c" / "metrics.csv"));
}

TEST_CASE("resume continues the interrupted run exactly") {
  TempDir tmp;
  train::ExperimentConfig ca = tiny_cfg(tmp.path / "a", 7);
  ca.scheme = obj::Scheme::gan;  // exercises the latent optimizer round-trip
  train::ExperimentConfig cb = ca;
  cb.output_dir = (tmp.path / "b").string();

  train::Trainer ta(ca);
  ta.run();
  const std::string metrics_a = read_file(tmp.path / "a" / "metrics.csv");

  {
    train::Trainer tb(cb);
    for (int i = 0; i < 4; ++i) tb.step_once();
  }  // closes b's metrics stream with rows 1..4 and checkpoints/step_4.ckpt

  {
    // Stale rows beyond the checkpoint step (a crashed run's leftovers) and
    // malformed lines must both be dropped on resume.
    std::ofstream app(tmp.path / "b" / "metrics.csv", std::ios::app);
    app << "7,0.5,bogus\n";
    app << "not a row\n";
  }

  auto tb2 = train::Trainer::from_checkpoint(
      (tmp.path / "b" / "checkpoints" / "step_4.ckpt").string());
  CHECK(tb2->step() == 4);
  CHECK(tb2->config() == cb);
  tb2->run();

  CHECK(read_file(tmp.path / "b" / "metrics.csv") == metrics_a);
  CHECK(states_equal(ta.bundle().state(), tb2->bundle().state()));
  CHECK(ta.best_target_accuracy() == tb2->best_target_accuracy());
}

TEST_CASE("from_checkpoint honors machine-local overrides only") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "a", 8);
  c.max_iterations = 2;
  c.eval_every = 2;
  c.checkpoint_every = 2;
  train::Trainer t(c);
  t.run();

  const std::string ckpt = (tmp.path / "a" / "checkpoints" / "step_2.ckpt").string();
  auto r = train::Trainer::from_checkpoint(ckpt, "/elsewhere/data",
                                           (tmp.path / "moved").string(), 5);
  CHECK(r->config().data_root == "/elsewhere/data");
  CHECK(r->config().output_dir == (tmp.path / "moved").string());
  CHECK(r->config().max_iterations == 5);
  CHECK(r->config().seed == c.seed);
  CHECK(r->config().dz == c.dz);
  CHECK(fs::exists(tmp.path / "moved" / "metrics.csv"));
}

TEST_CASE("rejects checkpoints that do not describe a trainer") {
  TempDir tmp;
  const std::string path = (tmp.path / "other.ckpt").string();
  ckpt::Writer w;
  w.meta()["kind"] = "something-else";
  w.write(path);
  CHECK_THROWS_AS(train::Trainer::from_checkpoint(path), IngestionError);
}

TEST_CASE("evaluation cadence fills accuracy cells on schedule") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 9);
  c.max_iterations = 4;
  c.eval_every = 2;
  c.checkpoint_every = 4;
  train::Trainer t(c);
  // Constant classifiers: the toy test split is class-balanced, so any
  // constant prediction scores exactly 1/10.
  t.set_classifier_override(
      [](const Tensor<float>& x) { return std::vector<int64_t>(x.dim(0), 5); },
      [](const Tensor<float>& x) { return std::vector<int64_t>(x.dim(0), 3); });
  t.run();

  const std::vector<std::string> lines = read_lines(tmp.path / "run" / "metrics.csv");
  REQUIRE(lines.size() == 5);  // header + 4 steps
  CHECK(lines[0] == obj::LossReport::csv_header());
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> cells = split_csv(lines[i]);
    REQUIRE(cells.size() == kCols);
    CHECK(cells[0] == std::to_string(i));
    const bool eval_step = (i % 2 == 0);
    if (eval_step) {
      CHECK(std::stod(cells[kColTargetAcc]) == 0.1);
      CHECK(std::stod(cells[kColSourceAcc]) == 0.1);
    } else {
      CHECK(cells[kColTargetAcc].empty());
      CHECK(cells[kColSourceAcc].empty());
    }
  }

  CHECK(fs::exists(tmp.path / "run" / "checkpoints" / "best.ckpt"));
  CHECK(t.best_target_accuracy().has_value());
  CHECK(*t.best_target_accuracy() == 0.1);
  // Panels rendered at both evaluation steps.
  for (const char* kind : {"real", "recon", "trans"}) {
    for (const char* domain : {"source", "target"}) {
      CHECK(fs::exists(tmp.path / "run" / "panels" /
                       ("step_2_" + std::string(domain) + "_" + kind + ".ppm")));
    }
  }
}

TEST_CASE("standalone eval rows carry only step and accuracies") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 10);
  train::Trainer t(c);
  eval::EvalResult er;
  er.pair = "toy";
  er.step = 7;
  er.target_accuracy = 0.25;
  er.source_accuracy = 0.5;
  t.append_eval_row(er);

  const std::vector<std::string> lines = read_lines(tmp.path / "run" / "metrics.csv");
  REQUIRE(lines.size() == 2);
  const std::vector<std::string> cells = split_csv(lines[1]);
  REQUIRE(cells.size() == kCols);
  CHECK(cells[0] == "7");
  for (size_t i = 1; i < kCols - 2; ++i) CHECK(cells[i].empty());
  CHECK(std::stod(cells[kColTargetAcc]) == 0.25);
  CHECK(std::stod(cells[kColSourceAcc]) == 0.5);
}

TEST_CASE("disabling the discriminator terms leaves pure weight-decay drift") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 11);
  c.w = obj::Weights{1.0, 0.1, 0.0, 0.0, 0.0};
  c.max_iterations = 3;
  c.eval_every = 100;
  c.checkpoint_every = 100;
  train::Trainer t(c);

  std::vector<std::vector<float>> expect;
  for (const auto& p : t.bundle().disc_params()) {
    std::vector<float> v(p->value.data(), p->value.data() + p->value.numel());
    expect.push_back(std::move(v));
  }
  const double shrink = 1.0 - c.learning_rate * c.weight_decay;
  for (int step = 0; step < 3; ++step) {
    for (auto& v : expect) {
      for (auto& x : v) x = static_cast<float>(static_cast<double>(x) * shrink);
    }
  }
  t.run();

  size_t i = 0;
  for (const auto& p : t.bundle().disc_params()) {
    REQUIRE(p->value.numel() == static_cast<int64_t>(expect[i].size()));
    CHECK(std::memcmp(p->value.data(), expect[i].data(), expect[i].size() * sizeof(float)) == 0);
    ++i;
  }
}

TEST_CASE("gan scheme with a zero latent weight matches the mmd scheme") {
  TempDir tmp;
  train::ExperimentConfig cm = tiny_cfg(tmp.path / "m", 12);
  cm.w.lambda1 = 0.0;
  cm.max_iterations = 3;
  cm.eval_every = 100;
  cm.checkpoint_every = 100;
  train::ExperimentConfig cg = cm;
  cg.scheme = obj::Scheme::gan;
  cg.output_dir = (tmp.path / "g").string();

  train::Trainer tm(cm), tg(cg);
  tm.run();
  tg.run();

  // The gan bundle has extra latent-critic tensors; every tensor the two
  // runs share (encoders, generators, discriminators) must agree bitwise.
  auto sm = tm.bundle().state();
  auto sg = tg.bundle().state();
  size_t compared = 0;
  for (const auto& a : sm) {
    for (const auto& b : sg) {
      if (a.path != b.path) continue;
      REQUIRE(a.tensor->shape() == b.tensor->shape());
      CHECK(std::memcmp(a.tensor->data(), b.tensor->data(),
                        static_cast<size_t>(a.tensor->numel()) * sizeof(float)) == 0);
      ++compared;
    }
  }
  CHECK(compared == sm.size());
  CHECK(sg.size() > sm.size());
}

TEST_CASE("numeric failures name the term and leave a diagnostic snapshot") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 13);
  c.w = obj::Weights{1.0, 0.0, 0.0, 0.0, 0.0};
  train::Trainer t(c);
  // The output row feeds tanh, which preserves the NaN; a poisoned hidden
  // row would be absorbed by relu (max-with-zero maps NaN to zero).
  t.bundle_mut().g1.params().back()->value[0] = std::numeric_limits<float>::quiet_NaN();

  bool threw = false;
  try {
    t.step_once();
  } catch (const NumericError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("recon_1") != std::string::npos);
  }
  CHECK(threw);
  CHECK(t.step() == 0);

  const fs::path diag = tmp.path / "run" / "checkpoints" / "diagnostic.ckpt";
  REQUIRE(fs::exists(diag));
  ckpt::Reader r(diag.string());
  CHECK(r.meta().at("failed_step") == 1);
  CHECK(r.meta().at("diagnostic_error").get<std::string>().find("recon_1") !=
        std::string::npos);
}

TEST_CASE("row-sharing survives training and matches the published layout") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 14);
  c.max_iterations = 5;
  c.eval_every = 100;
  c.checkpoint_every = 100;
  train::Trainer t(c);
  t.run();

  const auto& b = t.bundle();
  // Encoder: rows l2..l6 shared -> conv+bn (4 params) x3 rows... see plans.
  CHECK(shared_param_count(b.e1.params(), b.e2.params()) == 16);
  CHECK(shared_param_count(b.g1.params(), b.g2.params()) == 14);
  CHECK(shared_param_count(b.d1.params(), b.d2.params()) == 10);

  const auto groups = b.shared_groups();
  CHECK(!groups.empty());
  for (const auto& g : groups) {
    CHECK(g.owners.size() >= 2);
    CHECK(!g.name.empty());
  }
  // Optimizer slots cover each shared parameter exactly once.
  std::set<const void*> seen;
  for (const auto& p : b.eg_params()) CHECK(seen.insert(p.get()).second);
  for (const auto& p : b.disc_params()) CHECK(seen.insert(p.get()).second);
}

TEST_CASE("evaluation routes the target domain per config") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 15);
  train::Trainer t(c);

  eval::EvalResult by_domain = t.evaluate();
  const double via_d2 =
      eval::accuracy(t.target_test(), eval::disc_classifier(t.bundle(), false), c.test_batch);
  const double src_via_d1 =
      eval::accuracy(t.source_test(), eval::disc_classifier(t.bundle(), true), c.test_batch);
  CHECK(by_domain.target_accuracy == via_d2);
  CHECK(by_domain.source_accuracy == src_via_d1);
  CHECK(by_domain.n_evaluated == t.target_test().size());
  CHECK(by_domain.pair == "toy");

  train::ExperimentConfig cs = train::source_only_variant(c);
  cs.output_dir = (tmp.path / "run_src").string();
  train::Trainer ts(cs);
  eval::EvalResult routed = ts.evaluate();
  const double via_d1 =
      eval::accuracy(ts.target_test(), eval::disc_classifier(ts.bundle(), true), c.test_batch);
  CHECK(routed.target_accuracy == via_d1);
}

TEST_CASE("checkpoints echo the full configuration") {
  TempDir tmp;
  train::ExperimentConfig c = tiny_cfg(tmp.path / "run", 16);
  train::Trainer t(c);
  t.save_checkpoint("snap.ckpt");

  ckpt::Reader r((tmp.path / "run" / "checkpoints" / "snap.ckpt").string());
  CHECK(r.meta().at("kind") == "trainer");
  CHECK(train::parse_config(r.meta().at("config").get<std::string>()) == t.config());
  CHECK(r.meta().at("step") == 0);
  CHECK(r.meta().contains("iterator"));
  CHECK(r.meta().contains("prior_rng"));
  CHECK(r.meta().at("best_target_accuracy").is_null());
  CHECK(r.has("model.enc.l2.conv.w"));
  CHECK(r.has("adam.eg.t"));
  CHECK(r.has("adam.d.t"));
}

// ------------------------------------------------------------- evaluation ----

TEST_CASE("accuracy batches the dataset and scores the remainder") {
  data::DomainDataset ds(data::Split::test, data::DomainId::target);
  Tensor<float> img({3, 32, 32});
  for (int i = 0; i < 25; ++i) {
    img.fill(static_cast<float>(i) / 25.0f);
    ds.add(img, i % 10);
  }

  std::vector<int64_t> batch_sizes;
  eval::BatchClassifier always7 = [&](const Tensor<float>& x) {
    batch_sizes.push_back(x.dim(0));
    return std::vector<int64_t>(static_cast<size_t>(x.dim(0)), 7);
  };
  const double acc = eval::accuracy(ds, always7, 10);
  CHECK(batch_sizes == std::vector<int64_t>{10, 10, 5});
  CHECK(acc == 2.0 / 25.0);  // labels 7 and 17 are class 7

  eval::BatchClassifier wrong_count = [](const Tensor<float>&) {
    return std::vector<int64_t>{1};
  };
  CHECK_THROWS_AS(eval::accuracy(ds, wrong_count, 10), ShapeError);
  CHECK_THROWS_AS(eval::accuracy(ds, always7, 0), DomainError);

  data::DomainDataset unlabeled(data::Split::test, data::DomainId::target);
  unlabeled.add(img, std::nullopt);
  CHECK_THROWS_AS(eval::accuracy(unlabeled, always7, 4), DomainError);
  data::DomainDataset empty(data::Split::test, data::DomainId::target);
  CHECK_THROWS_AS(eval::accuracy(empty, always7, 4), DomainError);
}

TEST_CASE("image grids tile row-major with black padding") {
  TempDir tmp;
  Tensor<float> imgs({2, 3, 4, 4});
  imgs.fill(-1.0f);
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < 4; ++y) {
      for (int64_t x = 0; x < 4; ++x) {
        imgs.at(int64_t(0), c, y, x) = 1.0f;   // tile 0: white
        imgs.at(int64_t(1), c, y, x) = 0.0f;   // tile 1: mid gray
      }
    }
  }
  const fs::path p = tmp.path / "grid.ppm";
  eval::write_image_grid(p, imgs);

  const data::PpmImage ppm = data::read_ppm(p);
  REQUIRE(ppm.h == 32);
  REQUIRE(ppm.w == 32);
  auto px = [&](int64_t c, int64_t y, int64_t x) {
    return ppm.planar[static_cast<size_t>((c * 32 + y) * 32 + x)];
  };
  CHECK(px(0, 0, 0) == data::quantize_unit(1.0f));
  CHECK(px(1, 3, 3) == data::quantize_unit(1.0f));
  CHECK(px(0, 0, 4) == data::quantize_unit(0.0f));  // tile 1 starts at x=4
  CHECK(px(2, 3, 7) == data::quantize_unit(0.0f));
  CHECK(px(0, 0, 8) == 0);   // tile 2: unused -> black
  CHECK(px(0, 31, 31) == 0);  // last tile: unused

  CHECK_THROWS_AS(eval::write_image_grid(tmp.path / "bad.ppm", Tensor<float>({2, 1, 4, 4})),
                  ShapeError);
}
