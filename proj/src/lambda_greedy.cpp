#include "tdlam/lambda_greedy.hpp"

#include <cmath>

#include "tdlam/errors.hpp"

namespace tdlam {

double lambda_from_bias_variance(double err_sq, double var_g) {
    if (err_sq < 0.0 || var_g < 0.0)
        throw ContractError("lambda_from_bias_variance: negative input");
    double denom = err_sq + var_g;
    if (denom == 0.0) return 0.0;
    return err_sq / denom;
}

LambdaGreedyState init_lambda_greedy(int n_features, Regime regime,
                                     double gamma_const, double r_max, double alpha,
                                     bool squared_sq_init) {
    if (gamma_const >= 1.0)
        throw ContractError("init_lambda_greedy: gamma must be < 1");
    double scale = r_max / (1.0 - gamma_const);

    LambdaGreedyState s;
    s.err = GtdState::zeros(n_features, alpha, 0.0);
    s.vtd = VtdState::zeros(n_features, alpha);
    if (regime == Regime::on_policy) {
        s.err.w.setConstant(scale);
        s.initial_lambda = 1.0;
    } else {
        s.vtd.w_sq.setConstant(squared_sq_init ? scale * scale : scale);
        // errsq from the zero initial weights is 0, so Eq-2 starts at 0
        s.initial_lambda = 0.0;
    }
    return s;
}

double lambda_greedy_step(LambdaGreedyState& state, const Vec& w_main, const Vec& x_t,
                          const Vec& x_next, double reward, double rho_t,
                          double gamma_t, double gamma_next) {
    double g_bar = x_next.dot(state.err.w);  // before the w_err update

    // w_err: GTD with lambda == 1 (the correction term vanishes, h unused)
    gtd_step(state.err, x_t, x_next, reward, rho_t, gamma_t, gamma_next, 1.0, 1.0);

    // w_sq: VTD with lambda == lambda_bar == 1
    BarQuantities bar =
        bar_quantities(rho_t, gamma_next, 1.0, reward, x_next, w_main, g_bar);
    vtd_step(state.vtd, x_t, x_next, bar.r_bar, bar.gamma_bar, state.prev_gamma_bar,
             1.0, 1.0);
    state.prev_gamma_bar = bar.gamma_bar;

    double err = g_bar - x_next.dot(w_main);
    double err_sq = err * err;
    double var_g = x_next.dot(state.vtd.w_sq) - g_bar * g_bar;
    if (var_g < 0.0) var_g = 0.0;
    if (!std::isfinite(err_sq) || !std::isfinite(var_g))
        throw DivergenceError("lambda_greedy_step: non-finite estimate",
                              state.err.step);
    return lambda_from_bias_variance(err_sq, var_g);
}

void LambdaSchedule::validate() const {
    if (kind == ScheduleKind::fixed && (fixed_c < 0.0 || fixed_c > 1.0))
        throw ContractError("LambdaSchedule: fixed value outside [0,1]");
    if (kind == ScheduleKind::decay && decay_k <= 0.0)
        throw ContractError("LambdaSchedule: decay constant must be > 0");
}

double schedule_lambda(const LambdaSchedule& schedule, long t, int s_next,
                       GreedyStepContext* greedy, const OracleContext* oracle) {
    switch (schedule.kind) {
        case ScheduleKind::fixed:
            return schedule.fixed_c;
        case ScheduleKind::decay:
            return schedule.decay_k / (schedule.decay_k + static_cast<double>(t));
        case ScheduleKind::greedy: {
            if (!greedy || !greedy->state)
                throw ContractError("schedule_lambda: greedy schedule needs context");
            return lambda_greedy_step(*greedy->state, *greedy->w_main, *greedy->x_t,
                                      *greedy->x_next, greedy->reward, greedy->rho,
                                      greedy->gamma_t, greedy->gamma_next);
        }
        case ScheduleKind::oracle: {
            if (!oracle || !oracle->exact)
                throw ContractError("schedule_lambda: oracle schedule needs context");
            return oracle_lambda(s_next, *oracle->w_main, *oracle->exact,
                                 *oracle->features);
        }
    }
    throw ContractError("schedule_lambda: unknown schedule kind");
}

}  // namespace tdlam
