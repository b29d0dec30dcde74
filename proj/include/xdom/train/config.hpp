#pragma once

#include <cstdint>
#include <string>

#include "xdom/obj/losses.hpp"
#include "xdom/obj/report.hpp"

namespace xdom::train {

enum class Pair { toy, mnist2usps, usps2mnist, svhn2mnist };
const char* pair_name(Pair p);

// Where evaluation routes target-domain images: normally through the
// target-side discriminator trunk; the source-only baseline overrides this
// so both domains share the source classifier path.
enum class EvalRoute { by_domain, source };

// Flat experiment description. Every field has a serializable key; parsing
// rejects unknown keys and validates invariants, and serialize() echoes all
// keys (including defaulted ones) so configs round-trip exactly.
struct ExperimentConfig {
  Pair pair = Pair::toy;
  obj::Scheme scheme = obj::Scheme::mmd;

  // Model.
  int64_t dz = 64;
  double sigma = 2.0;
  obj::Weights w;  // lambda0..lambda4
  metrics::KernelFamily kernel = metrics::KernelFamily::inverse_multiquadric;
  double width_scale = 1.0;
  bool cls_on_reconstructed = false;

  // Schedule.
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t max_iterations = 200000;
  int64_t eval_every = 100;
  int64_t checkpoint_every = 1000;
  int64_t train_batch = 64;
  int64_t test_batch = 100;

  // Environment.
  uint64_t seed = 1;
  std::string data_root;
  std::string output_dir = "run";

  // Data handling.
  bool augment_source = false;
  bool augment_target = false;
  EvalRoute eval_route = EvalRoute::by_domain;
  int64_t toy_per_class = 200;
  int64_t toy_test_per_class = 50;
};

// Parses "key = value" lines (# comments, blank lines allowed). Unknown or
// duplicate keys and invariant violations raise a config error naming the
// key. `pair` is required; everything else falls back to the default above.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Emits every key in a fixed order; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& c);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// The source-only ablation: adversarial, reconstruction and alignment
// weights zeroed, evaluation routed through the source classifier path.
ExperimentConfig source_only_variant(ExperimentConfig c);

}  // namespace xdom::train
