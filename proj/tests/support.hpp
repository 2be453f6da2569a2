// Shared builders for small hand-made chains used across the test suites.
#pragma once

#include <vector>

#include "tdlam/exact.hpp"
#include "tdlam/mdp.hpp"

namespace tdlam::testing {

// Single-action chain from a state-to-state transition matrix and a
// matching reward matrix.
inline MDPModel chain_from_matrix(const Mat& p, const Mat& r,
                                  std::vector<bool> terminal = {}, int restart = 0) {
    int n = static_cast<int>(p.rows());
    MDPModel m;
    m.n_states = n;
    m.n_actions = 1;
    m.transition.assign(n, Mat::Zero(1, n));
    m.reward.assign(n, Mat::Zero(1, n));
    m.terminal = terminal.empty() ? std::vector<bool>(n, false) : std::move(terminal);
    m.restart_state = restart;
    for (int s = 0; s < n; ++s) {
        m.transition[s].row(0) = p.row(s);
        m.reward[s].row(0) = r.row(s);
    }
    m.validate();
    return m;
}

inline Policy single_action_policy(int n_states) {
    return Policy{Mat::Ones(n_states, 1)};
}

// Two-action, fully supported chain with no terminal states; mild enough
// off-policy mismatch keeps the squared-return chain contractive.
inline MDPModel three_state_chain() {
    int n = 3;
    MDPModel m;
    m.n_states = n;
    m.n_actions = 2;
    m.transition.assign(n, Mat::Zero(2, n));
    m.reward.assign(n, Mat::Zero(2, n));
    m.terminal.assign(n, false);
    m.restart_state = 0;

    auto set_row = [&](int s, int a, double p0, double p1, double p2) {
        m.transition[s](a, 0) = p0;
        m.transition[s](a, 1) = p1;
        m.transition[s](a, 2) = p2;
    };
    set_row(0, 0, 0.1, 0.7, 0.2);
    set_row(0, 1, 0.5, 0.2, 0.3);
    set_row(1, 0, 0.3, 0.1, 0.6);
    set_row(1, 1, 0.2, 0.5, 0.3);
    set_row(2, 0, 0.6, 0.2, 0.2);
    set_row(2, 1, 0.1, 0.3, 0.6);

    for (int s = 0; s < n; ++s)
        for (int a = 0; a < 2; ++a)
            for (int t = 0; t < n; ++t)
                m.reward[s](a, t) = 0.25 * (s + 1) - 0.4 * t + 0.3 * a;
    m.validate();
    return m;
}

inline Policy two_action_policy(int n_states, double p_first) {
    Mat probs(n_states, 2);
    probs.col(0).setConstant(p_first);
    probs.col(1).setConstant(1.0 - p_first);
    return Policy{probs};
}

// Truncated power-sum oracle for the squared-return chain: advances
// sum_{t<=T} (P_bar Lambda_bar)^t r_bar and reports whether the terms
// vanished (convergent series) by T.
inline bool power_sums_converge(const SquaredReturnModel& sq, int T = 200) {
    Mat m = sq.p_bar * sq.lambda_bar_diag.asDiagonal();
    Vec term = sq.r_bar;
    double scale = std::max(1.0, sq.r_bar.cwiseAbs().maxCoeff());
    for (int t = 1; t <= T; ++t) {
        term = m * term;
        if (!term.allFinite() || term.cwiseAbs().maxCoeff() > 1e12 * scale) return false;
    }
    return term.cwiseAbs().maxCoeff() < 1e-6 * scale;
}

// Continuing stream with explicit teleport steps (terminal -> restart,
// reward 0, rho 1). state has length T+1, the other arrays length T.
struct SimStream {
    std::vector<int> state;
    std::vector<double> reward;
    std::vector<double> rho;
};

inline SimStream simulate_stream(const MDPModel& model, const Policy& target,
                                 const Policy& behavior, long T, std::uint64_t seed) {
    SimStream st;
    st.state.reserve(T + 1);
    st.reward.reserve(T);
    st.rho.reserve(T);
    RandomStream rng(seed);
    int s = model.restart_state;
    st.state.push_back(s);
    for (long t = 0; t < T; ++t) {
        if (model.is_terminal(s)) {
            s = model.restart_state;
            st.reward.push_back(0.0);
            st.rho.push_back(1.0);
        } else {
            Transition tr = sample_step(model, behavior, s, rng);
            st.reward.push_back(tr.reward);
            st.rho.push_back(importance_ratio(target, behavior, s, tr.a));
            s = tr.s_next;
        }
        st.state.push_back(s);
    }
    return st;
}

// max relative component difference between two vectors, ignoring
// components where both sides are negligible
inline double max_component_rel_diff(const Vec& a, const Vec& b, double floor = 1e-9) {
    double worst = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        double denom = std::max(std::abs(a[i]), std::abs(b[i]));
        if (denom < floor) continue;
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace tdlam::testing
