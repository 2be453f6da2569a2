#include "tdlam/gtd.hpp"

#include <cmath>

#include "tdlam/errors.hpp"

namespace tdlam {

GtdState GtdState::zeros(int n_features, double alpha, double alpha_h) {
    GtdState s;
    s.w = Vec::Zero(n_features);
    s.h = Vec::Zero(n_features);
    s.e = Vec::Zero(n_features);
    s.alpha = alpha;
    s.alpha_h = alpha_h;
    return s;
}

double gtd_step(GtdState& state, const Vec& x_t, const Vec& x_next, double reward,
                double rho_t, double gamma_t, double gamma_next, double lambda_t,
                double lambda_next) {
    state.e = rho_t * (gamma_t * lambda_t * state.e + x_t);
    double delta = reward + gamma_next * state.w.dot(x_next) - state.w.dot(x_t);
    double e_dot_h = state.e.dot(state.h);
    double x_dot_h = state.h.dot(x_t);

    state.w += state.alpha *
               (delta * state.e - gamma_next * (1.0 - lambda_next) * e_dot_h * x_next);
    state.h += state.alpha_h * (delta * state.e - x_dot_h * x_t);
    ++state.step;

    if (!std::isfinite(delta) || !state.w.allFinite() || !state.h.allFinite() ||
        !state.e.allFinite())
        throw DivergenceError("gtd_step: non-finite learner state", state.step);
    return delta;
}

void reset_trace(GtdState& state) { state.e.setZero(); }

}  // namespace tdlam
