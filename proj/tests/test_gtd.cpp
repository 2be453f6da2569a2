#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "tdlam/exact.hpp"
#include "tdlam/gtd.hpp"

using namespace tdlam;
using namespace tdlam::testing;

namespace {

struct Stream {
    std::vector<Vec> x_t, x_next;
    std::vector<double> reward, rho, gamma_t, gamma_next;
};

// continuing ring-world stream with the teleport step included
Stream ring_stream(int n, double gamma_c, long steps, std::uint64_t seed,
                   double mu_right = -1.0) {
    RingWorld rw = build_ringworld(n);
    Policy behavior = mu_right < 0.0 ? rw.target : make_ring_policy(n, mu_right);
    StateFn gamma = terminal_cut_fn(rw.model, gamma_c);
    FeatureMap f = tabular_features(n);
    zero_terminal_rows(f, rw.model);
    RandomStream rng(seed);

    Stream st;
    int s = rw.model.restart_state;
    for (long t = 0; t < steps; ++t) {
        Transition tr;
        double rho = 1.0;
        if (rw.model.is_terminal(s)) {
            tr = Transition{s, 0, rw.model.restart_state, 0.0, false};
        } else {
            tr = sample_step(rw.model, behavior, s, rng);
            rho = importance_ratio(rw.target, behavior, s, tr.a);
        }
        st.x_t.push_back(f.row(s));
        st.x_next.push_back(f.row(tr.s_next));
        st.reward.push_back(tr.reward);
        st.rho.push_back(rho);
        st.gamma_t.push_back(gamma(s));
        st.gamma_next.push_back(gamma(tr.s_next));
        s = tr.s_next;
    }
    return st;
}

}  // namespace

TEST_CASE("lambda == 0 reduces to linear TD(0) bit-for-bit") {
    Stream st = ring_stream(6, 0.9, 5000, 11);
    GtdState gtd = GtdState::zeros(6, 0.05, 0.0);
    Vec w_td0 = Vec::Zero(6);

    for (size_t t = 0; t < st.x_t.size(); ++t) {
        gtd_step(gtd, st.x_t[t], st.x_next[t], st.reward[t], st.rho[t], st.gamma_t[t],
                 st.gamma_next[t], 0.0, 0.0);
        // plain TD(0): w += alpha delta rho x_t
        double delta =
            st.reward[t] + st.gamma_next[t] * w_td0.dot(st.x_next[t]) - w_td0.dot(st.x_t[t]);
        w_td0 += 0.05 * delta * st.rho[t] * st.x_t[t];
        REQUIRE((gtd.w - w_td0).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("rho == 0 clears the trace and leaves w alone") {
    GtdState s = GtdState::zeros(3, 0.1, 0.05);
    s.w << 1.0, 2.0, 3.0;
    s.h << 0.5, -0.5, 0.25;
    s.e << 0.2, 0.2, 0.2;
    Vec x_t(3), x_next(3);
    x_t << 1.0, 0.0, 0.0;
    x_next << 0.0, 1.0, 0.0;

    Vec w_before = s.w;
    Vec h_before = s.h;
    gtd_step(s, x_t, x_next, 1.0, 0.0, 0.9, 0.9, 0.8, 0.8);

    CHECK(s.e.cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.w - w_before).cwiseAbs().maxCoeff() == 0.0);
    // h keeps only its LMS decay term -alpha_h (x'h) x
    Vec h_expected = h_before - 0.05 * h_before.dot(x_t) * x_t;
    CHECK((s.h - h_expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("on-policy GTD converges to the exact values on ring-5") {
    RingWorld rw = build_ringworld(5);
    StateFn gamma = terminal_cut_fn(rw.model, 0.9);
    Vec v = true_values(rw.model, rw.target, gamma);

    Stream st = ring_stream(5, 0.9, 100'000, 21);
    GtdState learner = GtdState::zeros(5, 0.01, 0.01);
    for (size_t t = 0; t < st.x_t.size(); ++t)
        gtd_step(learner, st.x_t[t], st.x_next[t], st.reward[t], st.rho[t],
                 st.gamma_t[t], st.gamma_next[t], 0.8, 0.8);

    for (int s = 1; s <= 3; ++s)
        CHECK(std::abs(learner.w[s] - v[s]) < 0.05);
}

TEST_CASE("predict") {
    Vec w = Vec::Zero(4);
    Vec x = Vec::Ones(4);
    CHECK(predict(w, x) == 0.0);

    w << 1.0, 2.0, 3.0, 4.0;
    Vec one_hot = Vec::Zero(4);
    one_hot[2] = 1.0;
    CHECK(predict(w, one_hot) == 3.0);

    FeatureMap f = aliased_features(5, {{1, 3}});
    CHECK(predict(Vec::Ones(4).eval(), f.row(1)) == predict(Vec::Ones(4).eval(), f.row(3)));

    CHECK_THROWS_AS(predict(Vec::Zero(3).eval(), Vec::Zero(4).eval()), ContractError);
}

TEST_CASE("reset_trace clears e only and is idempotent") {
    GtdState s = GtdState::zeros(3, 0.1, 0.1);
    s.w << 1.0, 1.0, 1.0;
    s.h << 2.0, 2.0, 2.0;
    s.e << 0.3, 0.4, 0.5;
    reset_trace(s);
    CHECK(s.e.cwiseAbs().maxCoeff() == 0.0);
    reset_trace(s);
    CHECK(s.e.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.w.sum() == 3.0);
    CHECK(s.h.sum() == 6.0);

    Vec x_t = Vec::Zero(3), x_next = Vec::Zero(3);
    x_t[0] = 1.0;
    x_next[1] = 1.0;
    gtd_step(s, x_t, x_next, 0.0, 0.7, 0.9, 0.9, 1.0, 1.0);
    CHECK((s.e - 0.7 * x_t).cwiseAbs().maxCoeff() == 0.0);  // e = rho x_t after reset
}

TEST_CASE("terminal transitions cut the lambda-return") {
    // gamma(terminal) = 0 and zero terminal features: delta there is
    // exactly R - w'x_t, and the teleport step zeroes the trace
    RingWorld rw = build_ringworld(5);
    StateFn gamma = terminal_cut_fn(rw.model, 0.9);
    FeatureMap f = tabular_features(5);
    zero_terminal_rows(f, rw.model);

    GtdState s = GtdState::zeros(5, 0.1, 0.0);
    s.w << 0.0, 0.1, 0.2, 0.3, 0.0;
    s.e << 0.0, 0.5, 0.5, 0.5, 0.0;

    // transition 3 -> 4 (+1 terminal)
    double delta = gtd_step(s, f.row(3), f.row(4), 1.0, 1.0, gamma(3), gamma(4), 0.9, 0.9);
    CHECK(delta == doctest::Approx(1.0 - 0.3));

    // teleport step 4 -> 2: current state is terminal, trace dies
    gtd_step(s, f.row(4), f.row(2), 0.0, 1.0, gamma(4), gamma(2), 0.9, 0.9);
    CHECK(s.e.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero step-sizes never move the weights") {
    Stream st = ring_stream(6, 0.95, 2000, 33, 0.85);
    GtdState s = GtdState::zeros(6, 0.0, 0.0);
    s.w.setConstant(0.7);
    s.h.setConstant(-0.2);
    for (size_t t = 0; t < st.x_t.size(); ++t)
        gtd_step(s, st.x_t[t], st.x_next[t], st.reward[t], st.rho[t], st.gamma_t[t],
                 st.gamma_next[t], 1.0, 1.0);
    CHECK((s.w.array() == 0.7).all());
    CHECK((s.h.array() == -0.2).all());
}

TEST_CASE("divergence raises with the step index") {
    Stream st = ring_stream(6, 0.95, 50'000, 44);
    GtdState s = GtdState::zeros(6, 1e6, 1e6);  // absurd step-size
    bool threw = false;
    for (size_t t = 0; t < st.x_t.size() && !threw; ++t) {
        try {
            gtd_step(s, st.x_t[t], st.x_next[t], st.reward[t], st.rho[t], st.gamma_t[t],
                     st.gamma_next[t], 1.0, 1.0);
        } catch (const DivergenceError& e) {
            threw = true;
            CHECK(e.step() > 0);
        }
    }
    CHECK(threw);
}
