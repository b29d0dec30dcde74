#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "xdom/data/dataset.hpp"
#include "xdom/nn/bundle.hpp"

namespace xdom::eval {

struct EvalResult {
  std::string pair;  // experiment pair name, echoed for log readers
  int64_t step = 0;
  double target_accuracy = 0.0;
  double source_accuracy = 0.0;
  int64_t n_evaluated = 0;  // target test-set size
};

// Maps a (B, 3, H, W) image batch to one predicted class per row. The
// production classifiers run a discriminator's class head; tests inject
// stand-ins to pin down the accuracy bookkeeping itself.
using BatchClassifier = std::function<std::vector<int64_t>(const Tensor<float>&)>;

// Class-head argmax through the chosen image discriminator, run in eval
// mode. Ties resolve to the lowest class index.
BatchClassifier disc_classifier(const nn::NetworkBundle<float>& b, bool source_disc);

// Fraction of correctly classified images, evaluated in batches of `batch`
// (the final remainder batch is smaller). The dataset must be labeled.
double accuracy(const data::DomainDataset& ds, const BatchClassifier& cls, int64_t batch);

EvalResult evaluate_pair(const std::string& pair, int64_t step,
                         const data::DomainDataset& src_test,
                         const data::DomainDataset& tgt_test,
                         const BatchClassifier& source_cls, const BatchClassifier& target_cls,
                         int64_t batch);

// Renders up to 64 images as an 8x8 tile grid (row-major, unused tiles
// black) through the shared 8-bit display mapping.
void write_image_grid(const std::filesystem::path& path, const Tensor<float>& images);

// The six per-evaluation panels: real inputs, same-domain reconstructions
// and cross-domain translations for both test sets (first up-to-64 images
// each), named <dir>/step_<k>_<source|target>_<real|recon|trans>.ppm.
void render_panels(const nn::NetworkBundle<float>& b, const data::DomainDataset& src_test,
                   const data::DomainDataset& tgt_test, const std::filesystem::path& dir,
                   int64_t step);

}  // namespace xdom::eval
