#include "xdom/train/trainer.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <utility>
#include <vector>

#include "xdom/ckpt/checkpoint.hpp"

namespace xdom::train {

namespace fs = std::filesystem;

namespace {

// Serialized names of the per-phase Adam states inside a checkpoint:
//   adam.<phase>.t               (i64, one bias-correction counter per slot)
//   adam.<phase>.<param path>.m  first-moment estimate
//   adam.<phase>.<param path>.v  second-moment estimate
void add_adam(ckpt::Writer& w, const std::string& phase, const nn::Adam<float>& opt) {
  Tensor<int64_t> steps({static_cast<int64_t>(opt.slots().size())});
  for (size_t i = 0; i < opt.slots().size(); ++i) {
    steps[static_cast<int64_t>(i)] = opt.slots()[i].t;
  }
  w.add("adam." + phase + ".t", steps);
  for (const auto& s : opt.slots()) {
    w.add("adam." + phase + "." + s.param->path + ".m", s.m);
    w.add("adam." + phase + "." + s.param->path + ".v", s.v);
  }
}

void restore_adam(const ckpt::Reader& r, const std::string& phase, nn::Adam<float>& opt) {
  Tensor<int64_t> steps = r.tensor<int64_t>("adam." + phase + ".t");
  if (steps.numel() != static_cast<int64_t>(opt.slots().size())) {
    throw IngestionError(msg("checkpoint has ", steps.numel(), " optimizer slots for phase '",
                             phase, "', expected ", opt.slots().size()));
  }
  for (size_t i = 0; i < opt.slots().size(); ++i) {
    auto& s = opt.slots()[i];
    s.t = steps[static_cast<int64_t>(i)];
    Tensor<float> m = r.tensor<float>("adam." + phase + "." + s.param->path + ".m");
    Tensor<float> v = r.tensor<float>("adam." + phase + "." + s.param->path + ".v");
    if (m.shape() != s.m.shape() || v.shape() != s.v.shape()) {
      throw IngestionError(msg("optimizer state shape mismatch for '", s.param->path, "'"));
    }
    s.m = std::move(m);
    s.v = std::move(v);
  }
}

std::pair<data::Corpus, data::Corpus> pair_corpora(Pair p) {
  switch (p) {
    case Pair::mnist2usps: return {data::Corpus::mnist, data::Corpus::usps};
    case Pair::usps2mnist: return {data::Corpus::usps, data::Corpus::mnist};
    case Pair::svhn2mnist: return {data::Corpus::svhn, data::Corpus::mnist};
    case Pair::toy: break;
  }
  throw ConfigError("the toy pair has no corpus files");
}

// Offset separating the synthetic test draw from the training draw; any
// fixed nonzero value keeps the two sample sets independent for every seed.
constexpr uint64_t kToyTestSeedOffset = 1000003;

}  // namespace

Trainer::Trainer(const ExperimentConfig& cfg)
    : cfg_(parse_config(serialize_config(cfg))) {  // round-trip re-validates
  init_from_config();
  fresh_metrics();
}

Trainer::Trainer(const ExperimentConfig& cfg, ResumeTag)
    : cfg_(parse_config(serialize_config(cfg))) {
  init_from_config();
}

void Trainer::init_from_config() {
  settings_.scheme = cfg_.scheme;
  settings_.w = cfg_.w;
  settings_.kernel = obj::KernelCfg{cfg_.kernel, obj::default_imq_scale(cfg_.dz, cfg_.sigma)};
  settings_.cls_on_reconstructed = cfg_.cls_on_reconstructed;

  if (cfg_.pair == Pair::toy) {
    auto [a, b] = data::make_toy_domains(cfg_.toy_per_class, cfg_.seed);
    auto [at, bt] = data::make_toy_domains(cfg_.toy_test_per_class, cfg_.seed + kToyTestSeedOffset);
    src_train_ = std::move(a);
    tgt_train_ = std::move(b);
    src_test_ = std::move(at);
    tgt_test_ = std::move(bt);
  } else {
    std::string root = cfg_.data_root;
    if (root.empty()) {
      if (const char* env = std::getenv("XDOMAIN_DATA_ROOT")) root = env;
    }
    if (root.empty()) {
      throw ConfigError("data_root is empty and XDOMAIN_DATA_ROOT is not set");
    }
    auto [sc, tc] = pair_corpora(cfg_.pair);
    src_train_ = data::load_corpus(sc, root, data::Split::train);
    tgt_train_ = data::load_corpus(tc, root, data::Split::train);
    src_test_ = data::load_corpus(sc, root, data::Split::test);
    tgt_test_ = data::load_corpus(tc, root, data::Split::test);
  }
  if (cfg_.augment_source) src_train_ = data::augment_inversion(*src_train_);
  if (cfg_.augment_target) tgt_train_ = data::augment_inversion(*tgt_train_);
  src_train_->set_domain(data::DomainId::source);
  src_test_->set_domain(data::DomainId::source);
  tgt_train_->set_domain(data::DomainId::target);
  tgt_test_->set_domain(data::DomainId::target);

  nn::BundleOptions bo;
  bo.dz = cfg_.dz;
  bo.width_scale = cfg_.width_scale;
  bo.with_latent_critic = cfg_.scheme == obj::Scheme::gan;
  bundle_ = nn::build_bundle<float>(bo, cfg_.seed);

  nn::Adam<float>::Hyper h;
  h.lr = cfg_.learning_rate;
  h.beta1 = cfg_.beta1;
  h.beta2 = cfg_.beta2;
  h.eps = cfg_.epsilon;
  h.weight_decay = cfg_.weight_decay;
  opt_eg_.emplace(bundle_->eg_params(), h);
  opt_d_.emplace(bundle_->disc_params(), h);
  if (bo.with_latent_critic) opt_lat_.emplace(bundle_->latent_params(), h);

  iter_.emplace(&*src_train_, &*tgt_train_, cfg_.train_batch, cfg_.seed);
  prior_rng_ = Rng(cfg_.seed, /*stream=*/7);

  fs::create_directories(fs::path(cfg_.output_dir) / "checkpoints");
  fs::create_directories(fs::path(cfg_.output_dir) / "panels");
}

std::string Trainer::checkpoint_dir() const {
  return (fs::path(cfg_.output_dir) / "checkpoints").string();
}

std::string Trainer::metrics_path() const {
  return (fs::path(cfg_.output_dir) / "metrics.csv").string();
}

void Trainer::fresh_metrics() {
  metrics_.open(metrics_path(), std::ios::trunc);
  if (!metrics_) throw IngestionError(msg("cannot open '", metrics_path(), "' for writing"));
  metrics_ << obj::LossReport::csv_header() << '\n';
  metrics_.flush();
}

void Trainer::resume_metrics() {
  std::vector<std::string> keep;
  {
    std::ifstream in(metrics_path());
    std::string line;
    bool first = true;
    while (in && std::getline(in, line)) {
      if (line.empty()) continue;
      if (first) {  // header is re-emitted canonically below
        first = false;
        continue;
      }
      char* end = nullptr;
      const long long s = std::strtoll(line.c_str(), &end, 10);
      if (end == line.c_str() || *end != ',') continue;  // malformed row: drop
      if (s <= step_) keep.push_back(line);
    }
  }
  std::ofstream out(metrics_path(), std::ios::trunc);
  if (!out) throw IngestionError(msg("cannot rewrite '", metrics_path(), "'"));
  out << obj::LossReport::csv_header() << '\n';
  for (const auto& l : keep) out << l << '\n';
  out.close();
  metrics_.open(metrics_path(), std::ios::app);
  if (!metrics_) throw IngestionError(msg("cannot reopen '", metrics_path(), "'"));
}

void Trainer::append_row(const obj::LossReport& rep) {
  metrics_ << rep.csv_row() << '\n';
  metrics_.flush();
}

void Trainer::append_eval_row(const eval::EvalResult& r) {
  obj::LossReport rep;
  rep.step = r.step;
  rep.target_accuracy = r.target_accuracy;
  rep.source_accuracy = r.source_accuracy;
  append_row(rep);
}

double Trainer::recent_recon_mean() const {
  if (recent_recon_.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double v : recent_recon_) acc += v;
  return acc / static_cast<double>(recent_recon_.size());
}

eval::EvalResult Trainer::evaluate() {
  const bool target_via_source = cfg_.eval_route == EvalRoute::source;
  eval::BatchClassifier source_cls =
      override_source_ ? override_source_ : eval::disc_classifier(*bundle_, true);
  eval::BatchClassifier target_cls =
      override_target_ ? override_target_
                       : eval::disc_classifier(*bundle_, /*source_disc=*/target_via_source);
  return eval::evaluate_pair(pair_name(cfg_.pair), step_, *src_test_, *tgt_test_, source_cls,
                             target_cls, cfg_.test_batch);
}

void Trainer::set_classifier_override(eval::BatchClassifier source_cls,
                                      eval::BatchClassifier target_cls) {
  override_source_ = std::move(source_cls);
  override_target_ = std::move(target_cls);
}

void Trainer::render_panels() {
  eval::render_panels(*bundle_, *src_test_, *tgt_test_, fs::path(cfg_.output_dir) / "panels",
                      step_);
}

void Trainer::write_checkpoint(const std::string& path, const std::string& diagnostic_error,
                               int64_t failed_step) {
  ckpt::Writer w;
  w.meta()["kind"] = "trainer";
  w.meta()["config"] = serialize_config(cfg_);
  w.meta()["step"] = step_;
  w.meta()["iterator"] = iter_->state();
  w.meta()["prior_rng"] = prior_rng_.serialize();
  if (best_) {
    w.meta()["best_target_accuracy"] = *best_;
  } else {
    w.meta()["best_target_accuracy"] = nullptr;
  }
  if (!diagnostic_error.empty()) {
    w.meta()["diagnostic_error"] = diagnostic_error;
    w.meta()["failed_step"] = failed_step;
  }
  for (const auto& nt : bundle_->state()) {
    w.add("model." + nt.path, *nt.tensor);
  }
  add_adam(w, "eg", *opt_eg_);
  add_adam(w, "d", *opt_d_);
  if (opt_lat_) add_adam(w, "lat", *opt_lat_);
  w.write(path);
}

void Trainer::save_checkpoint(const std::string& filename) {
  write_checkpoint((fs::path(checkpoint_dir()) / filename).string(), "", 0);
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const std::string& path,
                                                  const std::string& data_root_override,
                                                  const std::string& output_dir_override,
                                                  int64_t max_iterations_override) {
  ckpt::Reader r(path);
  if (!r.meta().contains("kind") || r.meta()["kind"] != "trainer") {
    throw IngestionError(msg("'", path, "' is not a trainer checkpoint"));
  }
  ExperimentConfig cfg = parse_config(r.meta().at("config").get<std::string>());
  if (!data_root_override.empty()) cfg.data_root = data_root_override;
  if (!output_dir_override.empty()) cfg.output_dir = output_dir_override;
  if (max_iterations_override > 0) cfg.max_iterations = max_iterations_override;

  std::unique_ptr<Trainer> t(new Trainer(cfg, ResumeTag{}));
  for (const auto& nt : t->bundle_->state()) {
    Tensor<float> loaded = r.tensor<float>("model." + nt.path);
    if (loaded.shape() != nt.tensor->shape()) {
      throw IngestionError(msg("checkpoint tensor 'model.", nt.path, "' has shape ",
                               shape_string(loaded.shape()), ", expected ",
                               shape_string(nt.tensor->shape())));
    }
    *nt.tensor = std::move(loaded);
  }
  restore_adam(r, "eg", *t->opt_eg_);
  restore_adam(r, "d", *t->opt_d_);
  if (t->opt_lat_) restore_adam(r, "lat", *t->opt_lat_);
  t->step_ = r.meta().at("step").get<int64_t>();
  t->iter_->restore(r.meta().at("iterator").get<std::string>());
  t->prior_rng_ = Rng::deserialize(r.meta().at("prior_rng").get<std::string>());
  const auto& best = r.meta().at("best_target_accuracy");
  if (!best.is_null()) t->best_ = best.get<double>();
  t->resume_metrics();
  return t;
}

obj::LossReport Trainer::step_once() {
  if (step_ >= cfg_.max_iterations) {
    throw DomainError(msg("training already reached max_iterations = ", cfg_.max_iterations));
  }
  const int64_t k = step_ + 1;
  data::PairedBatch batch = iter_->next();
  StepInputs<float> in;
  in.x_s = std::move(batch.source);
  in.x_t = std::move(batch.target);
  in.labels = std::move(batch.source_labels);
  in.prior = sample_prior<float>(cfg_.train_batch, cfg_.dz, cfg_.sigma, prior_rng_);

  StepOptims<float> opt;
  opt.eg = &*opt_eg_;
  opt.d = &*opt_d_;
  opt.lat = opt_lat_ ? &*opt_lat_ : nullptr;

  obj::LossReport rep;
  try {
    rep = run_step(*bundle_, in, settings_, opt, k);
  } catch (const NumericError& e) {
    // Snapshot whatever state the failing step left behind, then propagate.
    write_checkpoint((fs::path(checkpoint_dir()) / "diagnostic.ckpt").string(), e.what(), k);
    throw;
  }
  step_ = k;

  if (k % cfg_.eval_every == 0) {
    const eval::EvalResult er = evaluate();
    rep.target_accuracy = er.target_accuracy;
    rep.source_accuracy = er.source_accuracy;
    if (!best_ || er.target_accuracy > *best_) {
      best_ = er.target_accuracy;
      save_checkpoint("best.ckpt");
    }
    render_panels();
  }
  append_row(rep);
  if (k % cfg_.checkpoint_every == 0 || k == cfg_.max_iterations) {
    save_checkpoint("step_" + std::to_string(k) + ".ckpt");
  }

  double recon = 0.0;
  bool has_recon = false;
  if (rep[obj::Term::recon_1]) {
    recon += *rep[obj::Term::recon_1];
    has_recon = true;
  }
  if (rep[obj::Term::recon_2]) {
    recon += *rep[obj::Term::recon_2];
    has_recon = true;
  }
  if (has_recon) {
    recent_recon_.push_back(recon);
    if (recent_recon_.size() > 100) recent_recon_.pop_front();
  }

  last_ = rep;
  return rep;
}

void Trainer::run() {
  while (step_ < cfg_.max_iterations) step_once();
}

}  // namespace xdom::train
