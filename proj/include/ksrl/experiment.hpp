#ifndef KSRL_EXPERIMENT_HPP
#define KSRL_EXPERIMENT_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "ksrl/dataset.hpp"
#include "ksrl/env.hpp"
#include "ksrl/training.hpp"

namespace ksrl {

enum class ExperimentMode {
  kGenData,
  kPretrain,
  kL2s,
  kL2sr,
  kBaselineDense,
  kBaselineRandom,
  kGreedyOracle,
  kEval,
  kOracleCheck,
};

// Process exit codes, one per failure class.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitDiverged = 3,
  kExitAuditFailure = 4,
};

// Strict config parsing: unknown keys are config errors.
EnvConfig parse_env_config(const nlohmann::json& j);
TrainConfig parse_train_config(const nlohmann::json& j);
PhantomConfig parse_phantom_config(const nlohmann::json& j);
MetricConfig parse_metric_config(const nlohmann::json& j);

nlohmann::json default_config();

// Applies one "dotted.path=value" override in place.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Greedy-oracle evaluation needs a per-image policy, so it cannot reuse the
// generic evaluate() loop directly.
EvalSummary evaluate_greedy_oracle(const Reconstructor& recon,
                                   const std::vector<RealImage>& images,
                                   const EnvConfig& env_cfg);

// Runs the configured experiment, writing results.json, summary.txt and any
// checkpoints under the configured output directory. Returns an ExitCode and
// never throws for the mapped failure classes.
int run_experiment(nlohmann::json config, std::string* error_message = nullptr);

int run_from_file(const std::string& config_path, const std::vector<std::string>& overrides,
                  std::string* error_message = nullptr);

enum class PlotKind { kHistogram, kRoundCurve, kAblation };

// Turns results documents into plain CSV for external plotting.
void emit_plot_data(const std::vector<nlohmann::json>& results, PlotKind kind,
                    const std::string& out_path);

// Serialization helpers shared by run_experiment and the tests.
nlohmann::json eval_summary_to_json(const EvalSummary& s);
nlohmann::json train_report_to_json(const TrainReport& r);

}  // namespace ksrl

#endif  // KSRL_EXPERIMENT_HPP
