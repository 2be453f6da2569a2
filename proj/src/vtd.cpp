#include "tdlam/vtd.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "tdlam/errors.hpp"

namespace tdlam {

BarQuantities bar_quantities(double rho, double gamma_next, double lambda_next,
                             double reward, const Vec& x_next, const Vec& w_main,
                             double g_bar_next) {
    double rho_sq = rho * rho;
    double g_bar = reward + gamma_next * (1.0 - lambda_next) * x_next.dot(w_main);
    double r_bar = rho_sq * g_bar * g_bar +
                   2.0 * rho_sq * gamma_next * lambda_next * g_bar * g_bar_next;
    double gamma_bar = rho_sq * gamma_next * gamma_next * lambda_next * lambda_next;
    return BarQuantities{g_bar, r_bar, gamma_bar};
}

VtdState VtdState::zeros(int n_features, double alpha_bar) {
    VtdState s;
    s.w_sq = Vec::Zero(n_features);
    s.h_sq = Vec::Zero(n_features);
    s.z_bar = Vec::Zero(n_features);
    s.alpha_bar = alpha_bar;
    return s;
}

double vtd_step(VtdState& state, const Vec& x_t, const Vec& x_next, double r_bar,
                double gamma_bar, double gamma_bar_prev, double lambda_bar_t,
                double lambda_bar_next) {
    state.z_bar = x_t + gamma_bar_prev * lambda_bar_t * state.z_bar;
    double delta_bar = r_bar + gamma_bar * state.w_sq.dot(x_next) - state.w_sq.dot(x_t);
    double z_dot_h = state.z_bar.dot(state.h_sq);
    double x_dot_h = state.h_sq.dot(x_t);

    state.w_sq += state.alpha_bar *
                  (delta_bar * state.z_bar -
                   gamma_bar * (1.0 - lambda_bar_next) * z_dot_h * x_next);
    state.h_sq += state.alpha_bar * (delta_bar * state.z_bar - x_dot_h * x_t);
    ++state.step;

    if (!std::isfinite(delta_bar) || !state.w_sq.allFinite() ||
        !state.h_sq.allFinite() || !state.z_bar.allFinite())
        throw DivergenceError("vtd_step: non-finite learner state", state.step);
    return delta_bar;
}

double var_estimate(const Vec& w_sq, const Vec& w_err, const Vec& x) {
    double g = x.dot(w_err);
    double v = x.dot(w_sq) - g * g;
    return v > 0.0 ? v : 0.0;
}

Theorem2Traces Theorem2Traces::zeros(int n_features, bool track_matrix) {
    Theorem2Traces tr;
    tr.z_bar = Vec::Zero(n_features);
    tr.z_r = Vec::Zero(n_features);
    if (track_matrix) tr.z_x = Mat::Zero(n_features, n_features);
    tr.track_matrix = track_matrix;
    return tr;
}

void theorem2_traces_step(Theorem2Traces& tr, double rho_t, double gamma_t,
                          double lambda_t, double reward_t, const Vec& x_t,
                          double gamma_bar_t, double lambda_bar_t) {
    double decay = rho_t * gamma_t * lambda_t;
    Vec z_prev = tr.z_bar;  // traces read the pre-update z_bar

    tr.z_r = decay * (reward_t * tr.prev_rho_sq * z_prev + tr.z_r);
    if (tr.track_matrix)
        tr.z_x = decay * (gamma_t * (1.0 - lambda_t) * tr.prev_rho_sq * z_prev *
                              x_t.transpose() +
                          tr.z_x);
    tr.z_bar = x_t + gamma_bar_t * lambda_bar_t * z_prev;
    tr.prev_rho_sq = rho_t * rho_t;
}

VtdExpectation make_vtd_expectation(const SquaredReturnModel& sq, const Vec& d,
                                    const FeatureMap& features) {
    return VtdExpectation{sq.p_bar, sq.r_bar, sq.lambda_bar_diag, d, features.rows};
}

Vec expected_lambda_bar_squared_return(const VtdExpectation& ctx, const Vec& w_sq) {
    int n = static_cast<int>(ctx.d.size());
    Mat lambda_bar = ctx.lambda_bar.asDiagonal();
    Mat lhs = Mat::Identity(n, n) - ctx.p_bar * lambda_bar;
    Vec rhs = ctx.r_bar +
              ctx.p_bar * ((Vec::Ones(n) - ctx.lambda_bar).asDiagonal() *
                           (ctx.features * w_sq));
    Eigen::PartialPivLU<Mat> lu(lhs);
    Vec v_bar = lu.solve(rhs);
    if (!v_bar.allFinite() || (lhs * v_bar - rhs).cwiseAbs().maxCoeff() > 1e-9)
        throw NumericalError("expected_lambda_bar_squared_return: solve failed");
    return v_bar;
}

Vec expected_delta_feature(const VtdExpectation& ctx, const Vec& w_sq) {
    Vec v_bar = expected_lambda_bar_squared_return(ctx, w_sq);
    Vec residual = v_bar - ctx.features * w_sq;
    return ctx.features.transpose() * ctx.d.asDiagonal() * residual;
}

namespace {

// Solves C y = e on the support of the feature covariance (components
// with no visit mass are identically zero on both sides); throws when
// the support submatrix is singular.
Vec solve_feature_covariance(const VtdExpectation& ctx, const Vec& e) {
    Mat c = ctx.features.transpose() * ctx.d.asDiagonal() * ctx.features;
    int n = static_cast<int>(c.rows());
    std::vector<int> support;
    for (int i = 0; i < n; ++i)
        if (c.col(i).cwiseAbs().maxCoeff() > 1e-12) support.push_back(i);

    int k = static_cast<int>(support.size());
    Mat c_s(k, k);
    Vec e_s(k);
    for (int i = 0; i < k; ++i) {
        e_s[i] = e[support[i]];
        for (int j = 0; j < k; ++j) c_s(i, j) = c(support[i], support[j]);
    }
    Eigen::FullPivLU<Mat> lu(c_s);
    if (k == 0 || !lu.isInvertible())
        throw NumericalError("var_mspbe: singular feature covariance");
    Vec y_s = lu.solve(e_s);

    Vec y = Vec::Zero(n);
    for (int i = 0; i < k; ++i) y[support[i]] = y_s[i];
    return y;
}

// Unnormalized expected trace per state: Z(:,s) = E[z_bar_t 1{S_t = s}],
// the fixed point Z' = (I - Lambda_bar P_bar')^{-1} D X.
Mat expected_trace_by_state(const VtdExpectation& ctx) {
    int n = static_cast<int>(ctx.d.size());
    Mat lambda_bar = ctx.lambda_bar.asDiagonal();
    Mat lhs = Mat::Identity(n, n) - lambda_bar * ctx.p_bar.transpose();
    Mat rhs = ctx.d.asDiagonal() * ctx.features;
    Mat z_t = Eigen::PartialPivLU<Mat>(lhs).solve(rhs);  // n_states x n_features
    if (!z_t.allFinite())
        throw NumericalError("var_mspbe: expected-trace solve failed");
    return z_t.transpose();  // n_features x n_states
}

}  // namespace

double var_mspbe(const VtdExpectation& ctx, const Vec& w_sq) {
    Vec e = expected_delta_feature(ctx, w_sq);
    return e.dot(solve_feature_covariance(ctx, e));
}

Vec var_mspbe_half_neg_gradient(const VtdExpectation& ctx, const Vec& w_sq) {
    Vec e = expected_delta_feature(ctx, w_sq);
    Vec c_inv_e = solve_feature_covariance(ctx, e);

    // M = E[gamma_bar_{t+1} (1 - lambda_bar_{t+1}) x_{t+1} z_bar_t']
    Mat z = expected_trace_by_state(ctx);  // n_features x n_states
    Mat zp = z * ctx.p_bar;                // column s' sums P_bar(s,s') Z(:,s)
    Mat m = ctx.features.transpose() *
            (Vec::Ones(ctx.d.size()) - ctx.lambda_bar).asDiagonal() * zp.transpose();

    return e - m * c_inv_e;
}

}  // namespace tdlam
