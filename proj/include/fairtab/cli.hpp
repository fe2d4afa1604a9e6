#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairtab/dataset.hpp"
#include "fairtab/fair_metric.hpp"
#include "fairtab/fairness_eval.hpp"
#include "fairtab/ifgb.hpp"
#include "fairtab/models.hpp"
#include "fairtab/sensr.hpp"

namespace fairtab {

struct EvalConfig {
    std::size_t epsilon_count = 20;
    std::size_t pair_budget = kDefaultPairBudget;
    double lipschitz_l = 1.0;
    double threshold = 0.5;
    std::size_t roc_thresholds = 200;
    std::uint64_t seed = 0;  // materialized from RunConfig::seed
};

// One config file drives the whole pipeline. Unknown keys are rejected and
// every stage seed is materialized from the master seed at load time, so a
// persisted config pins the run completely.
struct RunConfig {
    std::string data_csv;
    std::string output_dir;
    std::string label_column = "label";
    std::string sensitive_column = "gender";
    std::uint64_t seed = 0;
    SplitSpec split;
    MetricOptions metric;
    TrainConfig baseline_nn;
    SensrConfig sensr;          // train fields default to baseline_nn's
    TrainConfig baseline_gbt;
    IfgbConfig ifgb;            // train fields default to baseline_gbt's
    EvalConfig evaluate;
};

// Parses and validates; fills stage seeds via finalize_seeds.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Derives per-stage seeds from cfg.seed. sensr shares baseline_nn's seed and
// ifgb shares baseline_gbt's so the degenerate-adversary identities hold.
void finalize_seeds(RunConfig& cfg);

// Canonical JSON echo of a materialized config; its checksum goes into every
// artifact's provenance block.
std::string run_config_to_json(const RunConfig& cfg);

// Subcommand bodies. Each throws on failure (ConfigError -> exit 2,
// DataError family -> 3, IsolationError -> 4) and writes its artifacts
// atomically into cfg.output_dir.
void cmd_split(const RunConfig& cfg, bool force);
void cmd_learn_metric(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg, const std::string& method);
void cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& methods);

extern const std::vector<std::string> kMethods;  // baseline-nn, sensr, baseline-gbt, ifgb

int run_cli(int argc, const char* const* argv);

}  // namespace fairtab
