#include "xdom/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <optional>
#include <sstream>

#include "xdom/data/dataset.hpp"
#include "xdom/error.hpp"
#include "xdom/metrics/metrics.hpp"
#include "xdom/train/trainer.hpp"

namespace xdom::cli {

namespace fs = std::filesystem;

const char* objective_name(SearchObjective o) {
  return o == SearchObjective::target_accuracy ? "target_accuracy" : "mmd_descent_stability";
}

// ------------------------------------------------------------- plan files ----

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_searchable(const std::string& p) {
  return p == "dz" || p == "sigma" || p == "lambda0" || p == "lambda1" || p == "lambda2" ||
         p == "lambda3" || p == "lambda4";
}

double parse_number(const std::string& parameter, const std::string& token) {
  const char* s = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v)) {
    throw ConfigError(msg(parameter, ": candidate '", token, "' is not a number"));
  }
  return v;
}

SearchStage parse_stage(const std::string& value) {
  // <parameter> | <candidates...> | <objective>
  std::vector<std::string> parts;
  size_t start = 0;
  for (size_t i = 0; i <= value.size(); ++i) {
    if (i == value.size() || value[i] == '|') {
      parts.push_back(trim(value.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (parts.size() != 3) {
    throw ConfigError("stage: expected '<parameter> | <candidates> | <objective>'");
  }
  SearchStage st;
  st.parameter = parts[0];
  if (!is_searchable(st.parameter)) {
    throw ConfigError(msg("stage: '", st.parameter, "' is not a searchable parameter"));
  }
  st.candidates = split_ws(parts[1]);
  if (st.candidates.empty()) throw ConfigError(msg(st.parameter, ": empty candidate list"));
  for (const std::string& c : st.candidates) parse_number(st.parameter, c);
  if (parts[2] == "target_accuracy") {
    st.objective = SearchObjective::target_accuracy;
  } else if (parts[2] == "mmd_descent_stability") {
    st.objective = SearchObjective::mmd_descent_stability;
  } else {
    throw ConfigError(msg("stage: unknown objective '", parts[2], "'"));
  }
  return st;
}

}  // namespace

SearchPlan parse_plan(const std::string& text) {
  SearchPlan plan;
  std::istringstream in(text);
  std::string line;
  bool budget_seen = false;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(msg("plan line without '=': ", line));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "budget_iterations") {
      if (budget_seen) throw ConfigError("budget_iterations: duplicate key");
      budget_seen = true;
      const double v = parse_number(key, value);
      if (v < 1 || v != std::floor(v)) {
        throw ConfigError("budget_iterations: must be a positive integer");
      }
      plan.budget_iterations = static_cast<int64_t>(v);
    } else if (key == "stage") {
      SearchStage st = parse_stage(value);
      for (const SearchStage& prev : plan.stages) {
        if (prev.parameter == st.parameter) {
          throw ConfigError(msg(st.parameter, ": parameter searched in two stages"));
        }
      }
      plan.stages.push_back(std::move(st));
    } else {
      throw ConfigError(msg("unknown plan key: ", key));
    }
  }
  if (plan.stages.empty()) throw ConfigError("plan declares no stages");
  return plan;
}

SearchPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IngestionError(msg("cannot open plan file ", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_plan(buf.str());
}

train::ExperimentConfig apply_candidate(train::ExperimentConfig c, const std::string& parameter,
                                        const std::string& token) {
  const double v = parse_number(parameter, token);
  if (parameter == "dz") {
    if (v != std::floor(v)) throw ConfigError(msg("dz: candidate '", token, "' is not an integer"));
    c.dz = static_cast<int64_t>(v);
  } else if (parameter == "sigma") {
    c.sigma = v;
  } else if (parameter == "lambda0") {
    c.w.lambda0 = v;
  } else if (parameter == "lambda1") {
    c.w.lambda1 = v;
  } else if (parameter == "lambda2") {
    c.w.lambda2 = v;
  } else if (parameter == "lambda3") {
    c.w.lambda3 = v;
  } else if (parameter == "lambda4") {
    c.w.lambda4 = v;
  } else {
    throw ConfigError(msg("'", parameter, "' is not a searchable parameter"));
  }
  return c;
}

// ---------------------------------------------------------------- trials ----

namespace {

struct TrialOutcome {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

// Moving-average descent of the latent alignment penalty, read back from the
// trial's metrics.csv: mean over the first 100 steps minus mean over the
// last 100 (positive = the penalty went down).
double mmd_descent(const fs::path& metrics_csv, int64_t budget) {
  std::ifstream in(metrics_csv);
  if (!in.good()) throw IngestionError(msg("cannot open ", metrics_csv.string()));
  const size_t col1 = 1 + static_cast<size_t>(obj::Term::mmd_1);
  const size_t col2 = 1 + static_cast<size_t>(obj::Term::mmd_2);
  std::vector<double> per_step;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    cells.push_back(cur);
    if (cells.size() <= col2 || cells[col1].empty() || cells[col2].empty()) {
      throw DomainError("trial logged no latent alignment penalty (wrong scheme or zero weight)");
    }
    per_step.push_back(std::stod(cells[col1]) + std::stod(cells[col2]));
  }
  if (static_cast<int64_t>(per_step.size()) < budget || budget < 200) {
    throw DomainError("mmd_descent_stability needs a trial of at least 200 logged steps");
  }
  auto mean = [&](size_t from, size_t count) {
    double s = 0;
    for (size_t i = from; i < from + count; ++i) s += per_step[i];
    return s / static_cast<double>(count);
  };
  return mean(0, 100) - mean(per_step.size() - 100, 100);
}

TrialOutcome run_trial(train::ExperimentConfig cfg, SearchObjective obj) {
  TrialOutcome out;
  try {
    train::Trainer t(cfg);
    t.run();
    if (obj == SearchObjective::target_accuracy) {
      const auto best = t.best_target_accuracy();
      if (!best) throw DomainError("trial finished without any evaluation");
      out.value = *best;
    } else {
      out.value = mmd_descent(fs::path(cfg.output_dir) / "metrics.csv", cfg.max_iterations);
    }
  } catch (const Error& e) {
    out.error = e.category() + ": " + e.what();
  } catch (const std::exception& e) {
    out.error = std::string("internal: ") + e.what();
  }
  return out;
}

std::string sanitize_cell(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

SearchResult greedy_search(const SearchPlan& plan, const train::ExperimentConfig& base,
                           bool parallel) {
  if (plan.stages.empty()) throw ConfigError("plan declares no stages");
  SearchResult res;
  res.best = base;
  const fs::path trials_root = fs::path(base.output_dir) / "trials";

  for (size_t si = 0; si < plan.stages.size(); ++si) {
    const SearchStage& st = plan.stages[si];

    std::vector<TrialOutcome> outcomes(st.candidates.size());
    auto launch = [&](size_t ci) {
      train::ExperimentConfig cfg = apply_candidate(res.best, st.parameter, st.candidates[ci]);
      cfg.max_iterations = plan.budget_iterations;
      cfg.checkpoint_every = plan.budget_iterations;
      cfg.output_dir =
          (trials_root / msg("s", si, "_", st.parameter, "_c", ci)).string();
      return run_trial(cfg, st.objective);
    };
    if (parallel) {
      std::vector<std::future<TrialOutcome>> futs;
      futs.reserve(st.candidates.size());
      for (size_t ci = 0; ci < st.candidates.size(); ++ci) {
        futs.push_back(std::async(std::launch::async, launch, ci));
      }
      for (size_t ci = 0; ci < st.candidates.size(); ++ci) outcomes[ci] = futs[ci].get();
    } else {
      for (size_t ci = 0; ci < st.candidates.size(); ++ci) outcomes[ci] = launch(ci);
    }

    // Rank: successes by value descending, failures last; plan order breaks ties.
    std::vector<size_t> order(st.candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      const bool oka = outcomes[a].error.empty(), okb = outcomes[b].error.empty();
      if (oka != okb) return oka;
      if (!oka) return false;
      return outcomes[a].value > outcomes[b].value;
    });

    const bool any_ok = outcomes[order[0]].error.empty();
    for (size_t rank = 0; rank < order.size(); ++rank) {
      const size_t ci = order[rank];
      TrialRow row;
      row.stage = static_cast<int64_t>(si);
      row.parameter = st.parameter;
      row.candidate = st.candidates[ci];
      row.objective = st.objective;
      row.value = outcomes[ci].value;
      row.chosen = any_ok && rank == 0;
      row.error = outcomes[ci].error;
      res.rows.push_back(std::move(row));
    }
    if (any_ok) {
      res.best = apply_candidate(res.best, st.parameter, st.candidates[order[0]]);
    }
  }
  return res;
}

std::string search_table_csv(const std::vector<TrialRow>& rows) {
  std::ostringstream os;
  os << "stage,parameter,candidate,objective,value,chosen,error\n";
  char buf[64];
  for (const TrialRow& r : rows) {
    os << r.stage << ',' << r.parameter << ',' << r.candidate << ','
       << objective_name(r.objective) << ',';
    if (r.error.empty()) {
      std::snprintf(buf, sizeof buf, "%.17g", r.value);
      os << buf;
    }
    os << ',' << (r.chosen ? 1 : 0) << ',' << sanitize_cell(r.error) << '\n';
  }
  return os.str();
}

// -------------------------------------------------------------- CLI proper ----

namespace {

constexpr const char* kUsage =
    "usage: xdom <subcommand> [flags]\n"
    "  train            --config <file> [--data-root <dir>] [--output-dir <dir>]\n"
    "                   [--max-iterations <n>] | --resume <checkpoint>\n"
    "  eval             --checkpoint <file> [--pair <name>] [--data-root <dir>]\n"
    "  search           --plan <file> --config <file> [--data-root <dir>]\n"
    "                   [--output-dir <dir>] [--parallel]\n"
    "  metrics-selftest\n"
    "  export-toy       --out <dir> [--per-class <n>] [--seed <n>]\n";

struct Args {
  std::string config, plan, data_root, output_dir, resume, checkpoint, pair, out;
  int64_t max_iterations = 0;
  int64_t per_class = 200;
  uint64_t seed = 1;
  bool parallel = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int64_t arg_int(const std::string& flag, const std::string& v) {
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || n < 0) {
    throw UsageError(msg(flag, " expects a non-negative integer, got '", v, "'"));
  }
  return static_cast<int64_t>(n);
}

Args parse_args(int argc, const char* const* argv, int from) {
  Args a;
  for (int i = from; i < argc; ++i) {
    const std::string flag = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) throw UsageError(msg(flag, " expects a value"));
      return argv[++i];
    };
    if (flag == "--config") a.config = value();
    else if (flag == "--plan") a.plan = value();
    else if (flag == "--data-root") a.data_root = value();
    else if (flag == "--output-dir") a.output_dir = value();
    else if (flag == "--resume") a.resume = value();
    else if (flag == "--checkpoint") a.checkpoint = value();
    else if (flag == "--pair") a.pair = value();
    else if (flag == "--out") a.out = value();
    else if (flag == "--max-iterations") a.max_iterations = arg_int(flag, value());
    else if (flag == "--per-class") a.per_class = arg_int(flag, value());
    else if (flag == "--seed") a.seed = static_cast<uint64_t>(arg_int(flag, value()));
    else if (flag == "--parallel") a.parallel = true;
    else throw UsageError(msg("unknown flag '", flag, "'"));
  }
  return a;
}

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError(msg(flag, " is required"));
  if (!fs::exists(path)) throw UsageError(msg(flag, ": no such file '", path, "'"));
}

// --data-root wins; otherwise the XDOMAIN_DATA_ROOT environment variable;
// otherwise empty (keep whatever the config or checkpoint says).
std::string resolve_data_root(const Args& a) {
  if (!a.data_root.empty()) return a.data_root;
  const char* env = std::getenv("XDOMAIN_DATA_ROOT");
  return env ? env : "";
}

// Accepts both the config spelling ("mnist2usps") and a src:tgt form
// ("mnist:usps").
train::Pair parse_pair_flag(const std::string& s) {
  if (s == "toy" || s == "toy:toy") return train::Pair::toy;
  if (s == "mnist2usps" || s == "mnist:usps") return train::Pair::mnist2usps;
  if (s == "usps2mnist" || s == "usps:mnist") return train::Pair::usps2mnist;
  if (s == "svhn2mnist" || s == "svhn:mnist") return train::Pair::svhn2mnist;
  throw UsageError(msg("--pair: unknown pair '", s, "'"));
}

void print_eval(const eval::EvalResult& r) {
  std::printf("pair=%s step=%lld target_accuracy=%.6f source_accuracy=%.6f n=%lld\n",
              r.pair.c_str(), static_cast<long long>(r.step), r.target_accuracy,
              r.source_accuracy, static_cast<long long>(r.n_evaluated));
}

int cmd_train(const Args& a) {
  std::unique_ptr<train::Trainer> t;
  const std::string data_root = resolve_data_root(a);
  if (!a.resume.empty()) {
    require_file("--resume", a.resume);
    t = train::Trainer::from_checkpoint(a.resume, data_root, a.output_dir, a.max_iterations);
  } else {
    require_file("--config", a.config);
    train::ExperimentConfig cfg = train::load_config(a.config);
    if (!data_root.empty()) cfg.data_root = data_root;
    if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
    if (a.max_iterations > 0) cfg.max_iterations = a.max_iterations;
    t = std::make_unique<train::Trainer>(cfg);
  }
  t->run();
  std::printf("trained %s to step %lld (%s)\n", pair_name(t->config().pair),
              static_cast<long long>(t->step()), t->config().output_dir.c_str());
  if (t->best_target_accuracy()) {
    std::printf("best target accuracy %.6f\n", *t->best_target_accuracy());
  }
  return 0;
}

int cmd_eval(const Args& a) {
  require_file("--checkpoint", a.checkpoint);
  auto t = train::Trainer::from_checkpoint(a.checkpoint, resolve_data_root(a));
  if (!a.pair.empty()) {
    const train::Pair want = parse_pair_flag(a.pair);
    if (want != t->config().pair) {
      throw ConfigError(msg("checkpoint was trained on pair ", pair_name(t->config().pair),
                            ", not ", pair_name(want)));
    }
  }
  const eval::EvalResult r = t->evaluate();
  t->append_eval_row(r);
  print_eval(r);
  return 0;
}

int cmd_search(const Args& a) {
  require_file("--plan", a.plan);
  require_file("--config", a.config);
  const SearchPlan plan = load_plan(a.plan);
  train::ExperimentConfig base = train::load_config(a.config);
  const std::string data_root = resolve_data_root(a);
  if (!data_root.empty()) base.data_root = data_root;
  if (!a.output_dir.empty()) base.output_dir = a.output_dir;

  const SearchResult res = greedy_search(plan, base, a.parallel);

  std::printf("%-6s %-10s %-12s %-22s %-22s %s\n", "stage", "parameter", "candidate",
              "objective", "value", "chosen");
  for (const TrialRow& r : res.rows) {
    std::printf("%-6lld %-10s %-12s %-22s %-22s %s\n", static_cast<long long>(r.stage),
                r.parameter.c_str(), r.candidate.c_str(), objective_name(r.objective),
                r.error.empty() ? msg(r.value).c_str() : ("failed: " + r.error).c_str(),
                r.chosen ? "*" : "");
  }

  fs::create_directories(base.output_dir);
  {
    std::ofstream csv(fs::path(base.output_dir) / "search_table.csv",
                      std::ios::binary | std::ios::trunc);
    csv << search_table_csv(res.rows);
  }
  {
    std::ofstream best(fs::path(base.output_dir) / "best.cfg",
                       std::ios::binary | std::ios::trunc);
    best << train::serialize_config(res.best);
  }
  std::printf("table: %s\nbest config: %s\n",
              (fs::path(base.output_dir) / "search_table.csv").string().c_str(),
              (fs::path(base.output_dir) / "best.cfg").string().c_str());
  return 0;
}

int cmd_metrics_selftest() {
  std::string report;
  const bool ok = metrics::run_selftest(report);
  std::fputs(report.c_str(), stdout);
  return ok ? 0 : 1;
}

int cmd_export_toy(const Args& a) {
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.per_class < 10) throw UsageError("--per-class must be at least 10");
  auto [src, tgt] = data::make_toy_domains(a.per_class, a.seed);
  data::export_images(src, fs::path(a.out) / "source");
  data::export_images(tgt, fs::path(a.out) / "target");
  std::printf("wrote %lld + %lld images under %s\n", static_cast<long long>(src.size()),
              static_cast<long long>(tgt.size()), a.out.c_str());
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    if (argc < 2) throw UsageError("missing subcommand");
    const std::string cmd = argv[1];
    const Args a = parse_args(argc, argv, 2);
    if (cmd == "train") return cmd_train(a);
    if (cmd == "eval") return cmd_eval(a);
    if (cmd == "search") return cmd_search(a);
    if (cmd == "metrics-selftest") return cmd_metrics_selftest();
    if (cmd == "export-toy") return cmd_export_toy(a);
    throw UsageError(msg("unknown subcommand '", cmd, "'"));
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: usage: %s\n%s", e.what(), kUsage);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.formatted().c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
}

}  // namespace xdom::cli
