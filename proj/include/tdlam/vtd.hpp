#pragma once

#include "tdlam/exact.hpp"
#include "tdlam/mdp.hpp"

namespace tdlam {

/// Per-transition quantities of the squared-return recursion:
///   G_bar = R + gamma_next (1 - lambda_next) x_next'w
///   r_bar = rho^2 G_bar^2 + 2 rho^2 gamma_next lambda_next G_bar g_bar_next
///   gamma_bar = rho^2 gamma_next^2 lambda_next^2
struct BarQuantities {
    double g_bar = 0.0;
    double r_bar = 0.0;
    double gamma_bar = 0.0;
};

/// g_bar_next is the current first-moment estimate x_next'w_err (or the
/// exact E[G^lambda | s_next] when available).
BarQuantities bar_quantities(double rho, double gamma_next, double lambda_next,
                             double reward, const Vec& x_next, const Vec& w_main,
                             double g_bar_next);

/// VTD learner state: second-moment weights w_sq (the paper's h^var),
/// correction weights h_sq (only read when lambda_bar < 1), and the
/// trace z_bar.
struct VtdState {
    Vec w_sq;
    Vec h_sq;
    Vec z_bar;
    double alpha_bar = 0.0;
    long step = 0;

    static VtdState zeros(int n_features, double alpha_bar);
};

/// One VTD update. gamma_bar is the current transition's, gamma_bar_prev
/// the one computed on the previous transition: the trace decays by the
/// previous gamma_bar (Corollary-1 convention), then adds x_t.
///   z_bar <- x_t + gamma_bar_prev lambda_bar_t z_bar
///   delta_bar = r_bar + gamma_bar x_next'w_sq - x_t'w_sq
///   w_sq += alpha_bar (delta_bar z_bar
///           - gamma_bar (1 - lambda_bar_next) (z_bar'h_sq) x_next)
///   h_sq += alpha_bar (delta_bar z_bar - (x_t'h_sq) x_t)
/// Returns delta_bar.
double vtd_step(VtdState& state, const Vec& x_t, const Vec& x_next, double r_bar,
                double gamma_bar, double gamma_bar_prev, double lambda_bar_t,
                double lambda_bar_next);

/// max(0, x'w_sq - (x'w_err)^2): the variance estimate, capped at zero
/// until the second moment overtakes the squared first moment.
double var_estimate(const Vec& w_sq, const Vec& w_err, const Vec& x);

/// Backward-view traces of the forward-backward reward equivalence:
///   z_bar_t = x_t + gamma_bar_t lambda_bar_t z_bar_{t-1}
///   z_r_t   = rho_t gamma_t lambda_t (R_t rho_{t-1}^2 z_bar_{t-1} + z_r_{t-1})
///   Z_x_t   = rho_t gamma_t lambda_t (gamma_t (1 - lambda_t) rho_{t-1}^2
///             z_bar_{t-1} x_t' + Z_x_{t-1})
/// The rho_{t-1}^2 factors follow the proof rather than the displayed
/// statement. Z_x is O(n_features^2) and is materialized only when
/// track_matrix is set (with lambda == 1 it is identically zero).
struct Theorem2Traces {
    Vec z_bar;
    Vec z_r;
    Mat z_x;
    bool track_matrix = false;
    double prev_rho_sq = 1.0;

    static Theorem2Traces zeros(int n_features, bool track_matrix);
};

void theorem2_traces_step(Theorem2Traces& tr, double rho_t, double gamma_t,
                          double lambda_t, double reward_t, const Vec& x_t,
                          double gamma_bar_t, double lambda_bar_t);

/// Exact expectation pieces for Var-MSPBE diagnostics: the squared-return
/// chain, the visit distribution and the feature matrix.
struct VtdExpectation {
    Mat p_bar;
    Vec r_bar;
    Vec lambda_bar;
    Vec d;
    Mat features;  // n_states x n_features
};

VtdExpectation make_vtd_expectation(const SquaredReturnModel& sq, const Vec& d,
                                    const FeatureMap& features);

/// Expected lambda_bar-squared-return per state for given w_sq:
/// v_bar = (I - P_bar Lambda_bar)^{-1} (r_bar + P_bar (I - Lambda_bar) X w_sq).
Vec expected_lambda_bar_squared_return(const VtdExpectation& ctx, const Vec& w_sq);

/// E[delta_bar^lambda x] computed from the model.
Vec expected_delta_feature(const VtdExpectation& ctx, const Vec& w_sq);

/// Var-MSPBE(w_sq) = E[d x]' E[x x']^{-1} E[d x] with d the forward-view
/// squared-return error. Nonnegative; zero at the fixed point.
double var_mspbe(const VtdExpectation& ctx, const Vec& w_sq);

/// The paper's -1/2 gradient of Var-MSPBE, from exact expectations.
Vec var_mspbe_half_neg_gradient(const VtdExpectation& ctx, const Vec& w_sq);

}  // namespace tdlam
