#pragma once

#include "tdlam/mdp.hpp"

namespace tdlam {

/// GTD(lambda) learner state: value weights w, auxiliary weights h for
/// off-policy stability, and the eligibility trace e.
struct GtdState {
    Vec w;
    Vec h;
    Vec e;
    double alpha = 0.0;
    double alpha_h = 0.0;
    long step = 0;

    static GtdState zeros(int n_features, double alpha, double alpha_h);
};

/// One GTD(lambda) update on the transition (x_t, reward, x_next) with
/// importance ratio rho_t and state-based discount/trace parameters.
/// All quantities are computed from the pre-update state (simultaneous
/// semantics for w and h), then:
///   e <- rho_t (gamma_t lambda_t e + x_t)
///   delta = R + gamma_next x_next'w - x_t'w
///   w += alpha (delta e - gamma_next (1 - lambda_next) (e'h) x_next)
///   h += alpha_h (delta e - (x_t'h) x_t)
/// Returns delta. Throws DivergenceError if the result is non-finite.
double gtd_step(GtdState& state, const Vec& x_t, const Vec& x_next, double reward,
                double rho_t, double gamma_t, double gamma_next, double lambda_t,
                double lambda_next);

inline double predict(const Vec& w, const Vec& x) {
    if (w.size() != x.size()) throw ContractError("predict: length mismatch");
    return w.dot(x);
}

/// Clears the eligibility trace; weights are untouched. The teleport
/// protocol does not need this (gamma(terminal) = 0 already cuts the
/// trace on the teleport step); it exists for experimentation.
void reset_trace(GtdState& state);

}  // namespace tdlam
