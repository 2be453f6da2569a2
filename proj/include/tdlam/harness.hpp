#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdlam/lambda_greedy.hpp"

namespace tdlam {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum class ErrorMetric { mean_abs, msve_d_weighted };
enum class FeatureMode { tabular, aliased };

/// Declarative description of one ring-world experiment.
struct ExperimentConfig {
    std::string name = "experiment";
    int chain_length = 10;
    Regime regime = Regime::on_policy;
    double mu_right = 0.95;  // behavior policy's right probability (off-policy)
    double gamma = 0.99;
    LambdaSchedule schedule = LambdaSchedule::fixed(0.0);
    double alpha = 0.1;
    double eta = 1.0;  // alpha_h = alpha * eta
    FeatureMode feature_mode = FeatureMode::tabular;
    std::vector<std::pair<int, int>> alias_pairs;
    long n_steps = 0;  // 0 -> chain_length * 100
    int n_runs = 100;
    std::uint64_t base_seed = 1234;
    ErrorMetric error_metric = ErrorMetric::mean_abs;
    std::optional<double> initial_lambda;  // lambda_t for the first transition
    bool off_policy_squared_init = true;   // w_sq = (r_max/(1-gamma))^2 vs linear
    double r_max = 1.0;

    long resolved_steps() const {
        return n_steps > 0 ? n_steps : 100L * chain_length;
    }
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Immutable per-config pieces shared by every run.
struct ExperimentContext {
    MDPModel model;
    Policy target;
    Policy behavior;
    StateFn gamma;
    FeatureMap features;
    std::vector<Vec> x;  // cached feature row per state
    Vec true_v;
    Vec d;
    std::optional<ExactMoments> oracle_moments;  // oracle schedule only
    std::vector<int> nonterminal;
};

ExperimentContext make_context(const ExperimentConfig& config);

/// Per-step error and lambda series of a single seeded run.
struct RunResult {
    std::vector<double> error_series;
    std::vector<double> lambda_series;
    Vec final_lambda_per_state;
    bool diverged = false;
    long diverged_step = -1;
};

struct AveragedResult {
    std::vector<double> mean_error;
    std::vector<double> stderr_error;
    std::vector<double> mean_lambda;
    Vec final_lambda_per_state;  // mean over completed runs
    int n_runs = 0;
    int n_diverged = 0;
};

struct SweepCell {
    double alpha = 0.0;
    double eta = 0.0;
    double mean_error = 0.0;  // area under the error curve; +inf when diverged
    bool diverged = false;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    int best_index = -1;

    const SweepCell& best() const { return cells[best_index]; }
};

/// Runs one seeded trajectory (seed = base_seed + run_index). Learner
/// divergence is contained: the result carries the flag and step, the
/// series stop there.
RunResult run_one(const ExperimentConfig& config, int run_index);
RunResult run_one(const ExperimentConfig& config, const ExperimentContext& ctx,
                  int run_index);

/// Pointwise mean and standard error over n_runs independent runs;
/// diverged runs are counted and excluded from the averages. jobs > 1
/// runs in a thread pool with a fixed reduction order, so output is
/// independent of jobs.
AveragedResult run_averaged(const ExperimentConfig& config, int jobs = 1);
AveragedResult aggregate_runs(const std::vector<RunResult>& runs, long n_steps,
                              int n_states);

/// Evaluates run_averaged on each (alpha, eta) cell and selects the
/// minimum mean area-under-error-curve. Throws when every cell diverged.
SweepResult sweep(const ExperimentConfig& config_template,
                  const std::vector<double>& alpha_grid,
                  const std::vector<double>& eta_grid, int jobs = 1);

std::vector<double> default_alpha_grid();  // 0.1 * 2^j, j = -6..6
std::vector<double> default_eta_grid();    // 2^j, 11 symmetric exponents

/// The experiment matrix: on-policy at each size (gamma = 0.99),
/// off-policy at size 10 with mu(right) in off_policy_mus (gamma = 0.95);
/// schedules = greedy, oracle, fixed 0..1 step 0.1, decay(10), decay(100).
/// Step-sizes, run counts and seeds are taken from defaults.
std::vector<ExperimentConfig> ringworld_suite(
    const ExperimentConfig& defaults, const std::vector<int>& sizes = {10, 25, 50},
    const std::vector<double>& off_policy_mus = {0.85, 0.75});

/// Writes curves.csv (step,mean_error,stderr_error,mean_lambda),
/// final_lambda.csv (state,final_lambda) and manifest.json under dir.
/// Byte-stable for identical inputs.
void write_results(const ExperimentConfig& config, const AveragedResult& result,
                   const std::string& dir);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace tdlam
