#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tdlam/exact.hpp"
#include "tdlam/mdp.hpp"

using namespace tdlam;

TEST_CASE("ring-world structure") {
    RingWorld rw = build_ringworld(10);
    const MDPModel& m = rw.model;
    CHECK(m.n_states == 10);
    CHECK(m.n_actions == 2);

    int n_terminal = 0;
    for (int s = 0; s < 10; ++s) n_terminal += m.is_terminal(s) ? 1 : 0;
    CHECK(n_terminal == 2);
    CHECK(m.is_terminal(0));
    CHECK(m.is_terminal(9));
    CHECK(m.restart_state == 4);

    for (int s = 0; s < 10; ++s) {
        CHECK(rw.target(s, kRight) == doctest::Approx(0.95));
        CHECK(rw.target(s, kLeft) == doctest::Approx(0.05));
    }
    // rewards sit on terminal entry only
    CHECK(m.reward[8](kRight, 9) == doctest::Approx(1.0));
    CHECK(m.reward[1](kLeft, 0) == doctest::Approx(-1.0));
    CHECK(m.reward[4](kRight, 5) == doctest::Approx(0.0));
}

TEST_CASE("smallest legal ring still normalizes") {
    RingWorld rw = build_ringworld(4);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(rw.model.transition[s].row(a).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(build_ringworld(3), ContractError);
}

TEST_CASE("always-right walk from restart hits the +1 terminal first") {
    RingWorld rw = build_ringworld(10);
    Policy always_right = make_ring_policy(10, 1.0);
    RandomStream rng(7);
    int s = rw.model.restart_state;
    double first_reward = 0.0;
    for (int t = 0; t < 20; ++t) {
        Transition tr = sample_step(rw.model, always_right, s, rng);
        if (tr.reward != 0.0) {
            first_reward = tr.reward;
            break;
        }
        s = tr.s_next;
    }
    CHECK(first_reward == doctest::Approx(1.0));
}

TEST_CASE("sample_step is deterministic given the stream state") {
    RingWorld rw = build_ringworld(10);
    Policy right = make_ring_policy(10, 1.0);
    RandomStream rng(3);
    Transition tr = sample_step(rw.model, right, 4, rng);
    CHECK(tr.s_next == 5);
    CHECK_FALSE(tr.terminated);

    RandomStream a(42), b(42);
    Transition ta = sample_step(rw.model, rw.target, 4, a);
    Transition tb = sample_step(rw.model, rw.target, 4, b);
    CHECK(ta.a == tb.a);
    CHECK(ta.s_next == tb.s_next);
    CHECK(ta.reward == tb.reward);

    CHECK_THROWS_AS(sample_step(rw.model, rw.target, 0, a), ContractError);
}

TEST_CASE("empirical action frequency matches the policy") {
    RingWorld rw = build_ringworld(10);
    RandomStream rng(1234);
    const long n = 1'000'000;
    long right_count = 0;
    for (long i = 0; i < n; ++i) {
        Transition tr = sample_step(rw.model, rw.target, 4, rng);
        if (tr.a == kRight) ++right_count;
    }
    double freq = static_cast<double>(right_count) / n;
    CHECK(freq == doctest::Approx(0.95).epsilon(0.0022));
}

TEST_CASE("importance ratios") {
    Policy target = make_ring_policy(10, 0.95);
    Policy mu085 = make_ring_policy(10, 0.85);
    Policy mu075 = make_ring_policy(10, 0.75);

    CHECK(importance_ratio(target, mu085, 3, kRight) == doctest::Approx(0.95 / 0.85));
    CHECK(importance_ratio(target, mu075, 3, kLeft) == doctest::Approx(0.2));
    for (int a : {kLeft, kRight})
        CHECK(importance_ratio(target, target, 5, a) == doctest::Approx(1.0));

    Mat probs(2, 2);
    probs << 1.0, 0.0, 0.5, 0.5;
    Policy degenerate{probs};
    CHECK_THROWS_AS(importance_ratio(target, degenerate, 0, 1), CoverageError);
}

TEST_CASE("importance ratio reciprocal under swapped policies") {
    RandomStream rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        double p = 0.05 + 0.9 * rng.uniform();
        double q = 0.05 + 0.9 * rng.uniform();
        Policy a = make_ring_policy(6, p);
        Policy b = make_ring_policy(6, q);
        for (int action : {kLeft, kRight}) {
            double fwd = importance_ratio(a, b, 2, action);
            double rev = importance_ratio(b, a, 2, action);
            CHECK(fwd * rev == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("tabular features") {
    FeatureMap f = tabular_features(3);
    CHECK(f.n_features == 3);
    CHECK(f.row(1)[0] == 0.0);
    CHECK(f.row(1)[1] == 1.0);
    CHECK(f.row(1)[2] == 0.0);
    for (int s = 0; s < 3; ++s) CHECK(f.row(s).sum() == doctest::Approx(1.0));
    CHECK(f.row(0).dot(f.row(2)) == 0.0);
}

TEST_CASE("aliased features share one row") {
    FeatureMap f = aliased_features(10, {{3, 9}});
    CHECK(f.n_features == 9);
    CHECK((f.row(3) - f.row(9)).cwiseAbs().maxCoeff() == 0.0);

    // aliased states agree under every weight vector
    RandomStream rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Vec w(9);
        for (int i = 0; i < 9; ++i) w[i] = rng.uniform() * 10.0 - 5.0;
        CHECK(f.row(3).dot(w) == f.row(9).dot(w));
    }

    FeatureMap plain = aliased_features(4, {});
    CHECK((plain.rows - tabular_features(4).rows).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(aliased_features(10, {{3, 9}, {9, 5}}), ContractError);
    CHECK_THROWS_AS(aliased_features(10, {{3, 12}}), ContractError);
}

TEST_CASE("empirical transition frequencies match P within 3 standard errors") {
    RingWorld rw = build_ringworld(6);
    RandomStream rng(99);
    const long n = 200'000;
    // from a fixed state under the target policy
    std::vector<long> counts(6, 0);
    for (long i = 0; i < n; ++i) {
        Transition tr = sample_step(rw.model, rw.target, 2, rng);
        ++counts[tr.s_next];
    }
    for (int t = 0; t < 6; ++t) {
        double p = 0.0;
        for (int a = 0; a < 2; ++a) p += rw.target(2, a) * rw.model.transition[2](a, t);
        double freq = static_cast<double>(counts[t]) / n;
        double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(freq - p) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("trajectories only visit reachable states and teleport to restart") {
    RingWorld rw = build_ringworld(8);
    RandomStream rng(17);
    int s = rw.model.restart_state;
    bool saw_teleport = false;
    for (long t = 0; t < 20'000; ++t) {
        if (rw.model.is_terminal(s)) {
            s = rw.model.restart_state;  // teleport protocol
            saw_teleport = true;
            continue;
        }
        Transition tr = sample_step(rw.model, rw.target, s, rng);
        CHECK(tr.terminated == rw.model.is_terminal(tr.s_next));
        // ring moves are single steps
        int diff = (tr.s_next - tr.s + 8) % 8;
        CHECK((diff == 1 || diff == 7));
        s = tr.s_next;
    }
    CHECK(saw_teleport);
}

TEST_CASE("state functions validate their range") {
    CHECK_THROWS_AS(StateFn(Vec::Constant(3, 1.5)), ContractError);
    RingWorld rw = build_ringworld(6);
    StateFn gamma = terminal_cut_fn(rw.model, 0.95);
    CHECK(gamma(0) == 0.0);
    CHECK(gamma(5) == 0.0);
    CHECK(gamma(3) == doctest::Approx(0.95));
}

TEST_CASE("zero_terminal_rows clears terminal features") {
    RingWorld rw = build_ringworld(6);
    FeatureMap f = tabular_features(6);
    zero_terminal_rows(f, rw.model);
    CHECK(f.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.row(5).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.row(2).sum() == doctest::Approx(1.0));
}
