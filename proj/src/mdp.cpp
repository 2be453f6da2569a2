#include "tdlam/mdp.hpp"

#include <cmath>
#include <set>
#include <string>

#include "tdlam/errors.hpp"

namespace tdlam {

void MDPModel::validate() const {
    if (n_states < 1 || n_actions < 1)
        throw ContractError("MDPModel: need at least one state and action");
    if (static_cast<int>(transition.size()) != n_states ||
        static_cast<int>(reward.size()) != n_states ||
        static_cast<int>(terminal.size()) != n_states)
        throw ContractError("MDPModel: tensor sizes disagree with n_states");
    for (int s = 0; s < n_states; ++s) {
        if (transition[s].rows() != n_actions || transition[s].cols() != n_states ||
            reward[s].rows() != n_actions || reward[s].cols() != n_states)
            throw ContractError("MDPModel: bad tensor shape at state " + std::to_string(s));
        for (int a = 0; a < n_actions; ++a) {
            double row_sum = 0.0;
            for (int t = 0; t < n_states; ++t) {
                double p = transition[s](a, t);
                if (p < 0.0 || p > 1.0)
                    throw ContractError("MDPModel: probability outside [0,1]");
                if (!std::isfinite(reward[s](a, t)))
                    throw ContractError("MDPModel: non-finite reward");
                row_sum += p;
            }
            if (std::abs(row_sum - 1.0) > 1e-12)
                throw ContractError("MDPModel: transition row (" + std::to_string(s) +
                                    "," + std::to_string(a) + ") sums to " +
                                    std::to_string(row_sum));
        }
    }
    if (restart_state < 0 || restart_state >= n_states || terminal[restart_state])
        throw ContractError("MDPModel: restart_state must be a valid non-terminal state");
}

StateFn::StateFn(Vec values) : values_(std::move(values)) {
    for (int i = 0; i < values_.size(); ++i)
        if (!(values_[i] >= 0.0 && values_[i] <= 1.0))
            throw ContractError("StateFn: entry outside [0,1]");
}

StateFn constant_fn(int n_states, double c) {
    return StateFn(Vec::Constant(n_states, c));
}

StateFn terminal_cut_fn(const MDPModel& model, double c) {
    Vec v = Vec::Constant(model.n_states, c);
    for (int s = 0; s < model.n_states; ++s)
        if (model.is_terminal(s)) v[s] = 0.0;
    return StateFn(std::move(v));
}

void Policy::validate() const {
    for (int s = 0; s < probs.rows(); ++s) {
        double row_sum = 0.0;
        for (int a = 0; a < probs.cols(); ++a) {
            if (probs(s, a) < 0.0 || probs(s, a) > 1.0)
                throw ContractError("Policy: probability outside [0,1]");
            row_sum += probs(s, a);
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            throw ContractError("Policy: row " + std::to_string(s) + " sums to " +
                                std::to_string(row_sum));
    }
}

RingWorld build_ringworld(int n) {
    if (n < 4) throw ContractError("build_ringworld: need n >= 4");

    MDPModel m;
    m.n_states = n;
    m.n_actions = 2;
    m.transition.assign(n, Mat::Zero(2, n));
    m.reward.assign(n, Mat::Zero(2, n));
    m.terminal.assign(n, false);
    m.terminal[0] = true;      // -1, entered leftward from state 1
    m.terminal[n - 1] = true;  // +1, entered rightward from state n-2
    m.restart_state = (n - 1) / 2;

    for (int s = 0; s < n; ++s) {
        if (m.terminal[s]) {
            // absorbing; the sampling protocol teleports instead of
            // ever drawing from these rows
            m.transition[s](kLeft, s) = 1.0;
            m.transition[s](kRight, s) = 1.0;
            continue;
        }
        int right = (s + 1) % n;
        int left = (s - 1 + n) % n;
        m.transition[s](kRight, right) = 1.0;
        m.transition[s](kLeft, left) = 1.0;
        if (right == n - 1) m.reward[s](kRight, right) = 1.0;
        if (left == 0) m.reward[s](kLeft, left) = -1.0;
    }
    m.validate();

    RingWorld rw{std::move(m), make_ring_policy(n, 0.95)};
    return rw;
}

Policy make_ring_policy(int n_states, double p_right) {
    if (p_right < 0.0 || p_right > 1.0)
        throw ContractError("make_ring_policy: p_right outside [0,1]");
    Mat probs(n_states, 2);
    probs.col(kLeft).setConstant(1.0 - p_right);
    probs.col(kRight).setConstant(p_right);
    Policy p{std::move(probs)};
    p.validate();
    return p;
}

Transition sample_step(const MDPModel& model, const Policy& policy, int s,
                       RandomStream& rng) {
    if (s < 0 || s >= model.n_states)
        throw ContractError("sample_step: state out of range");
    if (model.is_terminal(s))
        throw ContractError("sample_step: called on terminal state " + std::to_string(s));

    std::vector<double> action_probs(model.n_actions);
    for (int a = 0; a < model.n_actions; ++a) action_probs[a] = policy(s, a);
    int a = rng.categorical(action_probs);

    std::vector<double> next_probs(model.n_states);
    for (int t = 0; t < model.n_states; ++t) next_probs[t] = model.transition[s](a, t);
    int s_next = rng.categorical(next_probs);

    return Transition{s, a, s_next, model.reward[s](a, s_next),
                      model.is_terminal(s_next)};
}

double importance_ratio(const Policy& target, const Policy& behavior, int s, int a) {
    double mu = behavior(s, a);
    if (mu <= 0.0)
        throw CoverageError("importance_ratio: behavior policy gives zero probability");
    return target(s, a) / mu;
}

FeatureMap tabular_features(int n_states) {
    if (n_states < 1) throw ContractError("tabular_features: need n_states >= 1");
    return FeatureMap{n_states, Mat::Identity(n_states, n_states)};
}

FeatureMap aliased_features(int n_states,
                            const std::vector<std::pair<int, int>>& alias_pairs) {
    if (n_states < 1) throw ContractError("aliased_features: need n_states >= 1");
    std::set<int> seen;
    std::vector<int> partner(n_states, -1);
    for (auto [a, b] : alias_pairs) {
        if (a < 0 || a >= n_states || b < 0 || b >= n_states || a == b)
            throw ContractError("aliased_features: invalid pair");
        if (seen.count(a) || seen.count(b))
            throw ContractError("aliased_features: overlapping pairs");
        seen.insert(a);
        seen.insert(b);
        partner[b] = a;  // b reuses a's feature
    }

    int n_features = n_states - static_cast<int>(alias_pairs.size());
    Mat rows = Mat::Zero(n_states, n_features);
    std::vector<int> feature_of(n_states, -1);
    int next_feature = 0;
    for (int s = 0; s < n_states; ++s) {
        if (partner[s] >= 0) continue;
        feature_of[s] = next_feature++;
    }
    for (int s = 0; s < n_states; ++s) {
        int f = partner[s] >= 0 ? feature_of[partner[s]] : feature_of[s];
        rows(s, f) = 1.0;
    }
    return FeatureMap{n_features, std::move(rows)};
}

void zero_terminal_rows(FeatureMap& features, const MDPModel& model) {
    for (int s = 0; s < model.n_states; ++s)
        if (model.is_terminal(s)) features.rows.row(s).setZero();
}

}  // namespace tdlam
