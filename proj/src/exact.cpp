#include "tdlam/exact.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <string>
#include <vector>

#include "tdlam/errors.hpp"

namespace tdlam {

namespace {

// P_pi(s,s') = sum_a pi(s,a) P(s,a,s'); r_pi(s) = expected one-step reward.
void policy_chain(const MDPModel& model, const Policy& policy, Mat& p_pi, Vec& r_pi) {
    int n = model.n_states;
    p_pi = Mat::Zero(n, n);
    r_pi = Vec::Zero(n);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < model.n_actions; ++a) {
            double pa = policy(s, a);
            if (pa == 0.0) continue;
            for (int t = 0; t < n; ++t) {
                double p = model.transition[s](a, t);
                if (p == 0.0) continue;
                p_pi(s, t) += pa * p;
                r_pi[s] += pa * p * model.reward[s](a, t);
            }
        }
}

Vec solve_with_residual(const Mat& lhs, const Vec& rhs, const char* what) {
    Eigen::PartialPivLU<Mat> lu(lhs);
    Vec x = lu.solve(rhs);
    double residual = (lhs * x - rhs).cwiseAbs().maxCoeff();
    if (!x.allFinite() || residual > 1e-10)
        throw NumericalError(std::string(what) + ": fixed-point residual " +
                             std::to_string(residual));
    return x;
}

}  // namespace

Vec true_values(const MDPModel& model, const Policy& policy, const StateFn& gamma) {
    int n = model.n_states;
    Mat p_pi;
    Vec r_pi;
    policy_chain(model, policy, p_pi, r_pi);
    // (I - P_pi diag(gamma(s'))) v = r_pi
    Mat lhs = Mat::Identity(n, n) - p_pi * gamma.values().asDiagonal();
    return solve_with_residual(lhs, r_pi, "true_values");
}

Vec lambda_return_values(const MDPModel& model, const Policy& target,
                         const StateFn& gamma, const StateFn& lambda,
                         const Vec& w, const FeatureMap& features) {
    int n = model.n_states;
    Mat p_pi;
    Vec r_pi;
    policy_chain(model, target, p_pi, r_pi);
    Vec xw(n);
    for (int s = 0; s < n; ++s) xw[s] = features.row(s).dot(w);

    Mat lhs = Mat::Identity(n, n);
    Vec rhs = r_pi;
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) {
            if (p_pi(s, t) == 0.0) continue;
            double g = gamma(t);
            lhs(s, t) -= p_pi(s, t) * g * lambda(t);
            rhs[s] += p_pi(s, t) * g * (1.0 - lambda(t)) * xw[t];
        }
    return solve_with_residual(lhs, rhs, "lambda_return_values");
}

Vec stationary_distribution(const MDPModel& model, const Policy& policy) {
    int n = model.n_states;
    Mat p_pi;
    Vec r_pi;
    policy_chain(model, policy, p_pi, r_pi);
    // teleport augmentation: terminal -> restart with probability 1
    for (int s = 0; s < n; ++s)
        if (model.is_terminal(s)) {
            p_pi.row(s).setZero();
            p_pi(s, model.restart_state) = 1.0;
        }

    Vec d = Vec::Constant(n, 1.0 / n);
    constexpr long kMaxIters = 2'000'000;
    for (long it = 0; it < kMaxIters; ++it) {
        Vec next = (d.transpose() * p_pi).transpose();
        next /= next.sum();
        double delta = (next - d).cwiseAbs().maxCoeff();
        d = next;
        if (delta < 1e-12) return d;
    }
    throw NumericalError("stationary_distribution: power iteration did not converge");
}

MarkovChainView chain_view(const MDPModel& model, const Policy& policy) {
    MarkovChainView view;
    policy_chain(model, policy, view.p_pi, view.r_pi);
    view.d = stationary_distribution(model, policy);
    return view;
}

SquaredReturnModel squared_return_model(const MDPModel& model, const Policy& target,
                                        const Policy& behavior, const StateFn& gamma,
                                        const StateFn& lambda, const Vec& w_values,
                                        const Vec& v_first,
                                        const StateFn& lambda_bar) {
    int n = model.n_states;
    Mat p_bar = Mat::Zero(n, n);
    Vec r_bar = Vec::Zero(n);

    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < model.n_actions; ++a) {
            double mu = behavior(s, a);
            if (mu == 0.0) {
                if (target(s, a) > 0.0)
                    throw CoverageError("squared_return_model: coverage violation at (" +
                                        std::to_string(s) + "," + std::to_string(a) + ")");
                continue;
            }
            double rho = target(s, a) / mu;
            double rho_sq = rho * rho;
            for (int t = 0; t < n; ++t) {
                double p = model.transition[s](a, t);
                if (p == 0.0) continue;
                double g = gamma(t);
                double lam = lambda(t);
                p_bar(s, t) += p * mu * rho_sq * g * g * lam * lam;
                double g_bar = model.reward[s](a, t) + g * (1.0 - lam) * w_values[t];
                r_bar[s] += p * mu * rho_sq *
                            (g_bar * g_bar + 2.0 * g * lam * g_bar * v_first[t]);
            }
        }
    }
    return SquaredReturnModel{std::move(p_bar), std::move(r_bar), lambda_bar.values()};
}

std::pair<bool, double> finite_variance_check(const SquaredReturnModel& sq) {
    Mat m = sq.p_bar * sq.lambda_bar_diag.asDiagonal();
    Eigen::JacobiSVD<Mat> svd(m);
    double sigma_max = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
    return {sigma_max < 1.0, sigma_max};
}

double squared_return_spectral_radius(const SquaredReturnModel& sq) {
    Mat m = sq.p_bar * sq.lambda_bar_diag.asDiagonal();
    Eigen::EigenSolver<Mat> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Vec second_moment(const SquaredReturnModel& sq, VarianceGate gate) {
    if (gate == VarianceGate::singular_value) {
        auto [passes, sigma_max] = finite_variance_check(sq);
        if (!passes)
            throw InfiniteVarianceError(
                "second_moment: sigma_max(P_bar Lambda_bar) = " +
                std::to_string(sigma_max) + " >= 1");
    } else {
        double rho = squared_return_spectral_radius(sq);
        if (rho >= 1.0)
            throw InfiniteVarianceError(
                "second_moment: spectral radius " + std::to_string(rho) + " >= 1");
    }
    int n = static_cast<int>(sq.r_bar.size());
    Mat lhs = Mat::Identity(n, n) - sq.p_bar;
    return solve_with_residual(lhs, sq.r_bar, "second_moment");
}

ExactMoments exact_moments(const MDPModel& model, const Policy& target,
                           const Policy& behavior, const StateFn& gamma,
                           VarianceGate gate) {
    Vec v = true_values(model, target, gamma);
    StateFn ones = constant_fn(model.n_states, 1.0);
    // lambda == 1: the bootstrap never enters G_bar, pass zeros
    SquaredReturnModel sq = squared_return_model(
        model, target, behavior, gamma, ones, Vec::Zero(model.n_states), v, ones);
    Vec m2 = second_moment(sq, gate);
    ExactMoments out;
    out.v = std::move(v);
    out.m2 = std::move(m2);
    out.variance = out.m2 - out.v.cwiseProduct(out.v);
    if (out.variance.minCoeff() < -1e-9)
        throw NumericalError("exact_moments: variance below -1e-9");
    return out;
}

double oracle_lambda(int s_next, const Vec& w, const ExactMoments& exact,
                     const FeatureMap& features) {
    double err = exact.v[s_next] - features.row(s_next).dot(w);
    double err_sq = err * err;
    double var = exact.clamped_variance(s_next);
    double denom = var + err_sq;
    if (denom == 0.0) return 0.0;
    return err_sq / denom;
}

std::pair<double, double> mc_moments(const MDPModel& model, const Policy& target,
                                     const Policy& behavior, const StateFn& gamma,
                                     int state, long n_rollouts, int horizon,
                                     RandomStream& rng) {
    if (model.is_terminal(state)) return {0.0, 0.0};

    double sum_g = 0.0;
    double sum_g_sq = 0.0;
    std::vector<double> action_probs(model.n_actions);
    std::vector<double> next_probs(model.n_states);

    for (long r = 0; r < n_rollouts; ++r) {
        double g = 0.0;
        double weight = 1.0;  // prod rho * prod gamma so far
        int s = state;
        for (int step = 0; step < horizon; ++step) {
            for (int a = 0; a < model.n_actions; ++a) action_probs[a] = behavior(s, a);
            int a = rng.categorical(action_probs);
            for (int t = 0; t < model.n_states; ++t)
                next_probs[t] = model.transition[s](a, t);
            int s_next = rng.categorical(next_probs);

            weight *= importance_ratio(target, behavior, s, a);
            g += weight * model.reward[s](a, s_next);
            weight *= gamma(s_next);
            if (model.is_terminal(s_next) || weight == 0.0) break;
            s = s_next;
        }
        sum_g += g;
        sum_g_sq += g * g;
    }
    return {sum_g / static_cast<double>(n_rollouts),
            sum_g_sq / static_cast<double>(n_rollouts)};
}

}  // namespace tdlam
