#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdom/train/config.hpp"

namespace xdom::cli {

// What a search stage optimizes. `target_accuracy` is the best evaluated
// target-domain accuracy of the trial; `mmd_descent_stability` is how far
// the latent alignment penalty descended over the trial (100-step moving
// average at the start minus at the end, higher is better), which is the
// criterion used before a reliable classifier exists.
enum class SearchObjective { target_accuracy, mmd_descent_stability };
const char* objective_name(SearchObjective o);

// One greedy stage: a single parameter, the candidate values to try, and
// the objective that ranks them. Candidates keep their literal spelling so
// tables echo exactly what the plan said.
struct SearchStage {
  std::string parameter;
  std::vector<std::string> candidates;
  SearchObjective objective = SearchObjective::target_accuracy;
};

// Ordered plan: parameters are searched one at a time, in file order, each
// holding every other parameter fixed at its current best.
struct SearchPlan {
  int64_t budget_iterations = 1000;
  std::vector<SearchStage> stages;
};

// Plan files are flat "key = value" text like configs. `budget_iterations`
// plus one `stage` line per stage:
//   stage = <parameter> | <candidate> <candidate> ... | <objective>
// Parameters: dz, sigma, lambda0..lambda4. A parameter may appear in only
// one stage. Unknown keys, malformed stages, or non-numeric candidates are
// config errors.
SearchPlan parse_plan(const std::string& text);
SearchPlan load_plan(const std::string& path);

// Returns `c` with one searchable parameter replaced by the candidate value.
train::ExperimentConfig apply_candidate(train::ExperimentConfig c,
                                        const std::string& parameter,
                                        const std::string& token);

// One row of the trial table. Rows are ranked within each stage: successful
// trials by objective value (descending), then failed trials, both keeping
// plan order among ties. `value` is NaN and `error` non-empty for failures.
struct TrialRow {
  int64_t stage = 0;
  std::string parameter;
  std::string candidate;
  SearchObjective objective = SearchObjective::target_accuracy;
  double value = 0.0;
  bool chosen = false;
  std::string error;
};

struct SearchResult {
  std::vector<TrialRow> rows;
  train::ExperimentConfig best;  // base config with every chosen candidate applied
};

// Runs the greedy search. Every candidate of every stage is trained for
// plan.budget_iterations in its own directory under <base.output_dir>/trials;
// a failed trial is recorded and skipped. With `parallel` the candidates of
// a stage run concurrently (they share no state); the result is identical
// to sequential execution.
SearchResult greedy_search(const SearchPlan& plan, const train::ExperimentConfig& base,
                           bool parallel = false);

std::string search_table_csv(const std::vector<TrialRow>& rows);

// Entry point behind the `xdom` binary: train / eval / search /
// metrics-selftest / export-toy. Returns 0 on success, 2 for usage errors
// (bad flags, missing subcommand, nonexistent input paths), 1 for runtime
// failures, printing "error: <category>: <message>" on stderr.
int cli_main(int argc, const char* const* argv);

}  // namespace xdom::cli
