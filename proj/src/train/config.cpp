#include "xdom/train/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "xdom/error.hpp"

namespace xdom::train {

const char* pair_name(Pair p) {
  switch (p) {
    case Pair::toy: return "toy";
    case Pair::mnist2usps: return "mnist2usps";
    case Pair::usps2mnist: return "usps2mnist";
    case Pair::svhn2mnist: return "svhn2mnist";
  }
  return "?";
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(msg(key, ": not a number: '", v, "'"));
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError(msg(key, ": not an integer: '", v, "'"));
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw ConfigError(msg(key, ": expected 0/1, got '", v, "'"));
}

void validate(const ExperimentConfig& c) {
  const auto require = [](bool ok, const std::string& m) {
    if (!ok) throw ConfigError(m);
  };
  require(c.dz >= 2, msg("dz: must be >= 2, got ", c.dz));
  require(c.sigma > 0, "sigma: must be positive");
  require(c.w.lambda0 >= 0 && c.w.lambda1 >= 0 && c.w.lambda2 >= 0 &&
              c.w.lambda3 >= 0 && c.w.lambda4 >= 0,
          "lambda0..lambda4: must be non-negative");
  require(c.width_scale > 0 && c.width_scale <= 4, "width_scale: must be in (0,4]");
  require(c.learning_rate > 0, "learning_rate: must be positive");
  require(c.weight_decay >= 0, "weight_decay: must be non-negative");
  require(c.beta1 >= 0 && c.beta1 < 1, "beta1: must be in [0,1)");
  require(c.beta2 >= 0 && c.beta2 < 1, "beta2: must be in [0,1)");
  require(c.epsilon > 0, "epsilon: must be positive");
  require(c.max_iterations >= 1, "max_iterations: must be >= 1");
  require(c.eval_every >= 1, "eval_every: must be >= 1");
  require(c.checkpoint_every >= 1, "checkpoint_every: must be >= 1");
  require(c.train_batch >= 2, "train_batch: must be >= 2");
  require(c.test_batch >= 1, "test_batch: must be >= 1");
  require(c.toy_per_class >= 10, "toy_per_class: must be >= 10");
  require(c.toy_test_per_class >= 10, "toy_test_per_class: must be >= 10");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto strip = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(msg("line ", line_no, ": expected key = value"));
    }
    const std::string key = strip(stripped.substr(0, eq));
    const std::string val = strip(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError(msg("line ", line_no, ": empty key"));
    if (kv.count(key)) throw ConfigError(msg(key, ": duplicate key"));
    kv[key] = val;
  }

  ExperimentConfig c;
  const auto pull = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  const auto p = pull("pair");
  if (!p.has_value()) throw ConfigError("pair: required key missing");
  if (*p == "toy") c.pair = Pair::toy;
  else if (*p == "mnist2usps") c.pair = Pair::mnist2usps;
  else if (*p == "usps2mnist") c.pair = Pair::usps2mnist;
  else if (*p == "svhn2mnist") c.pair = Pair::svhn2mnist;
  else throw ConfigError(msg("pair: unknown value '", *p, "'"));

  if (auto v = pull("scheme")) {
    if (*v == "mmd") c.scheme = obj::Scheme::mmd;
    else if (*v == "gan") c.scheme = obj::Scheme::gan;
    else throw ConfigError(msg("scheme: unknown value '", *v, "'"));
  }
  if (auto v = pull("dz")) c.dz = parse_int("dz", *v);
  if (auto v = pull("sigma")) c.sigma = parse_double("sigma", *v);
  if (auto v = pull("lambda0")) c.w.lambda0 = parse_double("lambda0", *v);
  if (auto v = pull("lambda1")) c.w.lambda1 = parse_double("lambda1", *v);
  if (auto v = pull("lambda2")) c.w.lambda2 = parse_double("lambda2", *v);
  if (auto v = pull("lambda3")) c.w.lambda3 = parse_double("lambda3", *v);
  if (auto v = pull("lambda4")) c.w.lambda4 = parse_double("lambda4", *v);
  if (auto v = pull("kernel")) {
    if (*v == "imq") c.kernel = metrics::KernelFamily::inverse_multiquadric;
    else if (*v == "rbf") c.kernel = metrics::KernelFamily::gaussian;
    else throw ConfigError(msg("kernel: unknown value '", *v, "'"));
  }
  if (auto v = pull("width_scale")) c.width_scale = parse_double("width_scale", *v);
  if (auto v = pull("cls_on_reconstructed")) {
    c.cls_on_reconstructed = parse_bool("cls_on_reconstructed", *v);
  }
  if (auto v = pull("learning_rate")) c.learning_rate = parse_double("learning_rate", *v);
  if (auto v = pull("weight_decay")) c.weight_decay = parse_double("weight_decay", *v);
  if (auto v = pull("beta1")) c.beta1 = parse_double("beta1", *v);
  if (auto v = pull("beta2")) c.beta2 = parse_double("beta2", *v);
  if (auto v = pull("epsilon")) c.epsilon = parse_double("epsilon", *v);
  if (auto v = pull("max_iterations")) c.max_iterations = parse_int("max_iterations", *v);
  if (auto v = pull("eval_every")) c.eval_every = parse_int("eval_every", *v);
  if (auto v = pull("checkpoint_every")) {
    c.checkpoint_every = parse_int("checkpoint_every", *v);
  }
  if (auto v = pull("train_batch")) c.train_batch = parse_int("train_batch", *v);
  if (auto v = pull("test_batch")) c.test_batch = parse_int("test_batch", *v);
  if (auto v = pull("seed")) c.seed = static_cast<uint64_t>(parse_int("seed", *v));
  if (auto v = pull("data_root")) c.data_root = *v;
  if (auto v = pull("output_dir")) c.output_dir = *v;
  if (auto v = pull("augment_source")) c.augment_source = parse_bool("augment_source", *v);
  if (auto v = pull("augment_target")) c.augment_target = parse_bool("augment_target", *v);
  if (auto v = pull("eval_route")) {
    if (*v == "domain") c.eval_route = EvalRoute::by_domain;
    else if (*v == "source") c.eval_route = EvalRoute::source;
    else throw ConfigError(msg("eval_route: unknown value '", *v, "'"));
  }
  if (auto v = pull("toy_per_class")) c.toy_per_class = parse_int("toy_per_class", *v);
  if (auto v = pull("toy_test_per_class")) {
    c.toy_test_per_class = parse_int("toy_test_per_class", *v);
  }

  if (!kv.empty()) {
    throw ConfigError(msg(kv.begin()->first, ": unknown key"));
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(msg("cannot open config file ", path));
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "pair = " << pair_name(c.pair) << "\n";
  os << "scheme = " << obj::scheme_name(c.scheme) << "\n";
  os << "dz = " << c.dz << "\n";
  os << "sigma = " << fmt_double(c.sigma) << "\n";
  os << "lambda0 = " << fmt_double(c.w.lambda0) << "\n";
  os << "lambda1 = " << fmt_double(c.w.lambda1) << "\n";
  os << "lambda2 = " << fmt_double(c.w.lambda2) << "\n";
  os << "lambda3 = " << fmt_double(c.w.lambda3) << "\n";
  os << "lambda4 = " << fmt_double(c.w.lambda4) << "\n";
  os << "kernel = "
     << (c.kernel == metrics::KernelFamily::inverse_multiquadric ? "imq" : "rbf")
     << "\n";
  os << "width_scale = " << fmt_double(c.width_scale) << "\n";
  os << "cls_on_reconstructed = " << (c.cls_on_reconstructed ? 1 : 0) << "\n";
  os << "learning_rate = " << fmt_double(c.learning_rate) << "\n";
  os << "weight_decay = " << fmt_double(c.weight_decay) << "\n";
  os << "beta1 = " << fmt_double(c.beta1) << "\n";
  os << "beta2 = " << fmt_double(c.beta2) << "\n";
  os << "epsilon = " << fmt_double(c.epsilon) << "\n";
  os << "max_iterations = " << c.max_iterations << "\n";
  os << "eval_every = " << c.eval_every << "\n";
  os << "checkpoint_every = " << c.checkpoint_every << "\n";
  os << "train_batch = " << c.train_batch << "\n";
  os << "test_batch = " << c.test_batch << "\n";
  os << "seed = " << c.seed << "\n";
  os << "data_root = " << c.data_root << "\n";
  os << "output_dir = " << c.output_dir << "\n";
  os << "augment_source = " << (c.augment_source ? 1 : 0) << "\n";
  os << "augment_target = " << (c.augment_target ? 1 : 0) << "\n";
  os << "eval_route = " << (c.eval_route == EvalRoute::source ? "source" : "domain")
     << "\n";
  os << "toy_per_class = " << c.toy_per_class << "\n";
  os << "toy_test_per_class = " << c.toy_test_per_class << "\n";
  return os.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

ExperimentConfig source_only_variant(ExperimentConfig c) {
  c.w.lambda0 = 0;
  c.w.lambda1 = 0;
  c.w.lambda2 = 0;
  c.w.lambda3 = 0;
  c.eval_route = EvalRoute::source;
  return c;
}

}  // namespace xdom::train
