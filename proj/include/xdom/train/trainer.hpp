#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "xdom/data/dataset.hpp"
#include "xdom/eval/eval.hpp"
#include "xdom/nn/adam.hpp"
#include "xdom/nn/bundle.hpp"
#include "xdom/rng.hpp"
#include "xdom/train/config.hpp"
#include "xdom/train/pass.hpp"

namespace xdom::train {

// Owns one experiment end to end: the datasets for the configured pair, the
// network bundle, the per-phase optimizers, the batch stream, the metrics
// log and the checkpoint files. All randomness derives from the config seed
// through fixed named streams, so equal configs produce bit-identical runs;
// resuming from a checkpoint continues the interrupted run exactly.
//
// Layout under config.output_dir:
//   metrics.csv               one row per completed step (see LossReport);
//                             accuracy cells filled on evaluation steps
//   checkpoints/step_<k>.ckpt every checkpoint_every steps and at the end
//   checkpoints/best.ckpt     best target accuracy so far
//   checkpoints/diagnostic.ckpt  written before a numeric failure propagates
//   panels/step_<k>_<source|target>_<real|recon|trans>.ppm  image grids
class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg);

  // Rebuilds the run a checkpoint describes (the checkpoint's own config,
  // with optional overrides for the machine-local keys) and restores model,
  // optimizer, batch-stream and metrics state. metrics.csv rows beyond the
  // checkpoint step are dropped so the continued log matches an
  // uninterrupted run byte for byte.
  static std::unique_ptr<Trainer> from_checkpoint(const std::string& path,
                                                  const std::string& data_root_override = "",
                                                  const std::string& output_dir_override = "",
                                                  int64_t max_iterations_override = 0);

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Advances exactly one optimization step (evaluating, logging and
  // checkpointing as the schedule dictates) and returns its report.
  obj::LossReport step_once();

  // Runs remaining steps up to max_iterations.
  void run();

  // Accuracy of the current parameters on the held-out splits. The target
  // side normally routes through the target discriminator; eval_route =
  // source sends it through the source classifier path instead.
  eval::EvalResult evaluate();

  // Appends a metrics.csv row carrying only step and accuracies (used when
  // evaluating a checkpoint outside the training loop).
  void append_eval_row(const eval::EvalResult& r);

  void render_panels();
  void save_checkpoint(const std::string& filename);  // under checkpoints/

  // Test seam: replaces the discriminator classifiers inside evaluate().
  void set_classifier_override(eval::BatchClassifier source_cls,
                               eval::BatchClassifier target_cls);

  const ExperimentConfig& config() const { return cfg_; }
  int64_t step() const { return step_; }
  const nn::NetworkBundle<float>& bundle() const { return *bundle_; }
  nn::NetworkBundle<float>& bundle_mut() { return *bundle_; }
  const std::optional<double>& best_target_accuracy() const { return best_; }
  const std::optional<obj::LossReport>& last_report() const { return last_; }
  // Mean of the raw reconstruction terms over the last (up to) 100 steps;
  // the descent-stability objective of the hyper-parameter search.
  double recent_recon_mean() const;
  std::string checkpoint_dir() const;
  std::string metrics_path() const;

  const data::DomainDataset& source_test() const { return *src_test_; }
  const data::DomainDataset& target_test() const { return *tgt_test_; }

 private:
  struct ResumeTag {};
  Trainer(const ExperimentConfig& cfg, ResumeTag);

  void init_from_config();
  void fresh_metrics();
  void resume_metrics();
  void append_row(const obj::LossReport& rep);
  void write_checkpoint(const std::string& path, const std::string& diagnostic_error,
                        int64_t failed_step);

  ExperimentConfig cfg_;
  PassSettings settings_;

  std::optional<data::DomainDataset> src_train_, tgt_train_, src_test_, tgt_test_;
  std::optional<nn::NetworkBundle<float>> bundle_;
  std::optional<nn::Adam<float>> opt_eg_, opt_d_, opt_lat_;
  std::optional<data::PairedBatchIterator> iter_;
  Rng prior_rng_{0, 7};

  int64_t step_ = 0;
  std::optional<double> best_;
  std::optional<obj::LossReport> last_;
  std::deque<double> recent_recon_;
  std::ofstream metrics_;
  eval::BatchClassifier override_source_, override_target_;
};

}  // namespace xdom::train
