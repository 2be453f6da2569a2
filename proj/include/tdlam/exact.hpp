#pragma once

#include <utility>

#include "tdlam/mdp.hpp"

namespace tdlam {

/// State-to-state view of an MDP under a fixed policy: transition matrix,
/// expected one-step reward per state, and a visit distribution.
struct MarkovChainView {
    Mat p_pi;  // n x n, rows sum to 1
    Vec r_pi;  // expected one-step reward per state
    Vec d;     // stationary/visit distribution (teleport-augmented chain)
};

/// Squared-return chain: entries p_bar(s,s') = sum_a P(s,a,s') mu(s,a)
/// rho(s,a)^2 gamma(s')^2 lambda(s')^2, the expected squared-return
/// reward r_bar, and the diagonal of the meta trace parameter.
struct SquaredReturnModel {
    Mat p_bar;
    Vec r_bar;
    Vec lambda_bar_diag;
};

/// Closed-form first and second moments of the return, per state.
struct ExactMoments {
    Vec v;         // E[G]
    Vec m2;        // E[G^2]
    Vec variance;  // m2 - v^2, clamped at 0 when reported

    double clamped_variance(int s) const { return variance[s] < 0.0 ? 0.0 : variance[s]; }
};

/// Solves v(s) = sum_{s'} P_pi(s,s') [ r(s,s') + gamma(s') v(s') ].
/// Residual of the fixed point is checked to 1e-10 in max norm.
Vec true_values(const MDPModel& model, const Policy& policy, const StateFn& gamma);

/// Expected lambda-return from each state for a given weight vector:
/// g(s) = sum_a pi(s,a) sum_{s'} P [ R + gamma(s')((1-lambda(s')) x(s')'w
///        + lambda(s') g(s')) ].
/// With lambda == 1 this reduces to true_values.
Vec lambda_return_values(const MDPModel& model, const Policy& target,
                         const StateFn& gamma, const StateFn& lambda,
                         const Vec& w, const FeatureMap& features);

/// Stationary distribution of the teleport-augmented chain (terminal
/// rows replaced by a deterministic move to restart_state), by power
/// iteration to 1e-12.
Vec stationary_distribution(const MDPModel& model, const Policy& policy);

MarkovChainView chain_view(const MDPModel& model, const Policy& policy);

/// Builds the squared-return chain for the lambda-return defined by
/// (gamma, lambda, w), behavior mu and target pi.
///
/// w_values carries the per-state bootstrap x(s)'w of the lambda-return
/// weights (the weight vector itself under tabular features; unused when
/// lambda == 1). v_first must carry E[G^lambda | s] for the same
/// (gamma, lambda, w) — true_values for lambda == 1,
/// lambda_return_values otherwise.
SquaredReturnModel squared_return_model(const MDPModel& model, const Policy& target,
                                        const Policy& behavior, const StateFn& gamma,
                                        const StateFn& lambda, const Vec& w_values,
                                        const Vec& v_first,
                                        const StateFn& lambda_bar);

/// sigma_max(P_bar Lambda_bar) and whether it certifies a contraction.
/// sigma_max < 1 is sufficient for the squared-return fixed point to
/// exist; it is not necessary.
std::pair<bool, double> finite_variance_check(const SquaredReturnModel& sq);

/// Spectral radius of P_bar Lambda_bar; the Neumann series
/// sum_t (P_bar Lambda_bar)^t converges iff this is < 1.
double squared_return_spectral_radius(const SquaredReturnModel& sq);

enum class VarianceGate {
    singular_value,   // require sigma_max(P_bar Lambda_bar) < 1
    spectral_radius,  // require rho(P_bar Lambda_bar) < 1
};

/// m2 = (I - P_bar)^{-1} r_bar, residual-checked to 1e-10. Throws
/// InfiniteVarianceError when the selected gate fails.
Vec second_moment(const SquaredReturnModel& sq,
                  VarianceGate gate = VarianceGate::singular_value);

/// v, m2 and variance for the Monte-Carlo (lambda == 1) return, the
/// quantities the oracle lambda-greedy consumes.
ExactMoments exact_moments(const MDPModel& model, const Policy& target,
                           const Policy& behavior, const StateFn& gamma,
                           VarianceGate gate = VarianceGate::singular_value);

/// Eq-2 lambda from exact moments: err = v(s_next) - x(s_next)'w,
/// returns err^2 / (var(s_next) + err^2), or 0 when both vanish.
double oracle_lambda(int s_next, const Vec& w, const ExactMoments& exact,
                     const FeatureMap& features);

/// Brute-force moment oracle: importance-weighted rollouts under the
/// behavior policy, G accumulated by the recursion G <- rho (R + gamma' G).
/// Rollouts stop at terminal entry or after horizon steps.
std::pair<double, double> mc_moments(const MDPModel& model, const Policy& target,
                                     const Policy& behavior, const StateFn& gamma,
                                     int state, long n_rollouts, int horizon,
                                     RandomStream& rng);

}  // namespace tdlam
