#pragma once

#include "tdlam/exact.hpp"
#include "tdlam/gtd.hpp"
#include "tdlam/vtd.hpp"

namespace tdlam {

/// Closed-form per-step trace parameter: err_sq / (var_g + err_sq),
/// 0 when both are zero (any value is then equivalent; 0 minimizes the
/// future trace magnitude). Inputs must be nonnegative.
double lambda_from_bias_variance(double err_sq, double var_g);

/// State of the trace adapter: a GTD(lambda=1) estimator of the expected
/// return (w_err, trace z_g) and a VTD(lambda=1, lambda_bar=1) estimator
/// of its second moment (w_sq, trace z_bar). Both share the main
/// learner's step-size by default.
struct LambdaGreedyState {
    GtdState err;   // err.w is w_err, err.e is z_g; alpha_h = 0
    VtdState vtd;   // vtd.w_sq is w_sq
    double prev_gamma_bar = 0.0;
    double initial_lambda = 1.0;  // lambda_t for the first transition of a run

    const Vec& w_err() const { return err.w; }
    const Vec& w_sq() const { return vtd.w_sq; }
};

enum class Regime { on_policy, off_policy };

/// Initialization regimes. On-policy starts optimistic about error
/// (w_err = r_max / (1 - gamma), w_sq = 0), so early lambdas are high.
/// Off-policy starts the opposite way: w_err = 0 and a large prior
/// second moment, so early lambdas are near zero. squared_sq_init picks
/// between (r_max/(1-gamma))^2 (default) and r_max/(1-gamma) for the
/// off-policy w_sq magnitude.
LambdaGreedyState init_lambda_greedy(int n_features, Regime regime,
                                     double gamma_const, double r_max, double alpha,
                                     bool squared_sq_init = true);

/// One adapter step (Algorithm-2 ordering): update w_err by GTD(1),
/// update w_sq by VTD(1,1) on the bar-reward built from the pre-update
/// g_bar = x_next'w_err, then emit
///   lambda_next = errsq / (varg + errsq)
/// with errsq = (g_bar - x_next'w_main)^2 and
/// varg = max(0, x_next'w_sq - g_bar^2).
/// Called once per transition, before the main GTD update.
double lambda_greedy_step(LambdaGreedyState& state, const Vec& w_main, const Vec& x_t,
                          const Vec& x_next, double reward, double rho_t,
                          double gamma_t, double gamma_next);

enum class ScheduleKind { greedy, fixed, decay, oracle };

/// How lambda_t is produced during a run.
struct LambdaSchedule {
    ScheduleKind kind = ScheduleKind::fixed;
    double fixed_c = 0.0;  // fixed: lambda == c
    double decay_k = 10.0; // decay: lambda_t = k / (k + t)

    void validate() const;
    static LambdaSchedule greedy() { return {ScheduleKind::greedy, 0.0, 0.0}; }
    static LambdaSchedule fixed(double c) { return {ScheduleKind::fixed, c, 0.0}; }
    static LambdaSchedule decay(double k) { return {ScheduleKind::decay, 0.0, k}; }
    static LambdaSchedule oracle() { return {ScheduleKind::oracle, 0.0, 0.0}; }
};

/// Everything the greedy schedule needs to advance on one transition.
struct GreedyStepContext {
    LambdaGreedyState* state = nullptr;
    const Vec* w_main = nullptr;
    const Vec* x_t = nullptr;
    const Vec* x_next = nullptr;
    double reward = 0.0;
    double rho = 1.0;
    double gamma_t = 0.0;
    double gamma_next = 0.0;
};

/// Exact moments backing the oracle schedule.
struct OracleContext {
    const ExactMoments* exact = nullptr;
    const FeatureMap* features = nullptr;
    const Vec* w_main = nullptr;
};

/// Dispatches on the schedule kind; t is the time index of the emitted
/// lambda. greedy/oracle require their context and throw otherwise.
double schedule_lambda(const LambdaSchedule& schedule, long t, int s_next,
                       GreedyStepContext* greedy, const OracleContext* oracle);

}  // namespace tdlam
