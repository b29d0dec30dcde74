#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdom/nn/layer.hpp"

namespace xdom::nn {

// Declarative layer rows from which concrete networks are assembled.
// A "row" in the architecture tables expands into several specs
// (conv + batch_norm + activation, ...). `shared` marks rows whose layer
// OBJECT is aliased between the two networks of a pair.
enum class LayerKind { conv, deconv, fully_connected, batch_norm, activation, max_pool, reshape };

struct LayerSpec {
  LayerKind kind;
  std::string row;  // row label, e.g. "l3"
  bool shared = false;

  int64_t width = 0;   // out channels / units (conv, deconv, fc, reshape)
  int64_t kernel = 0;  // square kernel size
  int64_t stride = 1;
  int64_t pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;
  Act activation = Act::relu;      // for kind == activation
  int64_t out_h = 0, out_w = 0;    // for kind == reshape
};

// Full set of plans for one model family.
struct PlanSet {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> generator;
  std::vector<LayerSpec> disc_trunk;
  std::vector<LayerSpec> latent_body;  // hidden rows; the 2-logit head is implicit

  int64_t dz = 0;
  int64_t encoder_in_channels = 5;  // RGB + 2 coordinate channels
  int64_t disc_in_channels = 3;
  int64_t image_hw = 32;
  int64_t classes = 10;
};

// Production-scale architecture (32x32 inputs). `width_scale` multiplies
// every interior width (the latent width dz, image channels, and head
// widths stay fixed); 1.0 reproduces the published tables.
//
// Encoder rows (input 5x32x32):
//   l1 conv 64  k5 s2 pad 2        -> 16x16   private
//   l2 conv 128 k5 s2 pad 2        -> 8x8     shared
//   l3 conv 256 k8 s1 pad (3,4)    -> 8x8     shared   (asymmetric SAME)
//   l4 conv 512 k8 s1 pad 0        -> 1x1     shared   (VALID)
//   l5 conv 1024 k1 s1             -> 1x1     shared   (no norm/act)
//   l6 fc dz                                  shared
// Rows l1-l4 carry batch norm + leaky ReLU. The l3/l4 padding split is the
// only plan that reproduces both tabulated output shapes (8x8 then 1x1).
PlanSet paper_plans(int64_t dz, double width_scale);

// Miniature 8x8 family used by the double-precision gradient checks;
// same machinery, much smaller tensors.
PlanSet mini_plans(int64_t dz);

// Width scaling helper (exposed for tests).
int64_t scaled_width(int64_t w, double scale);

}  // namespace xdom::nn
