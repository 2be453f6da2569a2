#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "tdlam/rng.hpp"

namespace tdlam {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tabular MDP: transition tensor P[s][a][s'], reward tensor R[s][a][s'],
/// terminal markers, and the state the stream restarts from after a
/// termination. Terminal states are stored as absorbing self-loops with
/// zero reward; the teleport to restart_state is part of the sampling
/// protocol, not of the stored dynamics (the stationary distribution is
/// the one place that augments the chain with the teleport).
struct MDPModel {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Mat> transition;  // per state: n_actions x n_states
    std::vector<Mat> reward;      // per state: n_actions x n_states
    std::vector<bool> terminal;
    int restart_state = 0;

    bool is_terminal(int s) const { return terminal[static_cast<size_t>(s)]; }

    /// Throws ContractError if rows do not sum to 1 (1e-12), probabilities
    /// leave [0,1], or restart_state is invalid or terminal.
    void validate() const;
};

/// Real-valued function of state with range [0,1]; used for the
/// state-based discount and trace parameters.
class StateFn {
public:
    StateFn() = default;
    explicit StateFn(Vec values);

    double operator()(int s) const { return values_[s]; }
    int size() const { return static_cast<int>(values_.size()); }
    const Vec& values() const { return values_; }

private:
    Vec values_;
};

/// Constant function c over n states.
StateFn constant_fn(int n_states, double c);

/// Constant gamma over non-terminal states, zero at terminals. This is
/// the episodes-as-continuing encoding: the stream is never broken, the
/// discount of a terminal state cuts the return (and the traces) there.
StateFn terminal_cut_fn(const MDPModel& model, double c);

/// Stochastic policy over a finite action set.
struct Policy {
    Mat probs;  // n_states x n_actions, rows sum to 1

    double operator()(int s, int a) const { return probs(s, a); }
    void validate() const;
};

/// Linear features: one row per state. Rows of aliased states are
/// identical; terminal rows may be zeroed so the bootstrapped value
/// there is exactly 0.
struct FeatureMap {
    int n_features = 0;
    Mat rows;  // n_states x n_features

    Vec row(int s) const { return rows.row(s).transpose(); }
    int n_states() const { return static_cast<int>(rows.rows()); }
};

/// One sampled step of the stream.
struct Transition {
    int s = 0;
    int a = 0;
    int s_next = 0;
    double reward = 0.0;
    bool terminated = false;
};

/// Ring of n states with two adjoining terminal states: index 0 pays -1
/// when entered leftward, index n-1 pays +1 when entered rightward. All
/// other rewards are zero. The restart state is the middle of the
/// non-terminal arc, (n-1)/2. Target policy: right with probability
/// 0.95 in every state.
struct RingWorld {
    MDPModel model;
    Policy target;
};

inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;

RingWorld build_ringworld(int n);

/// Ring policy taking "right" with probability p_right in every state.
Policy make_ring_policy(int n_states, double p_right);

/// Draws a from policy[s] and s' from P[s][a]. s must be non-terminal;
/// after a terminated transition the caller teleports to restart_state
/// before sampling again.
Transition sample_step(const MDPModel& model, const Policy& policy, int s,
                       RandomStream& rng);

/// pi(s,a) / mu(s,a). Throws CoverageError when mu(s,a) = 0.
double importance_ratio(const Policy& target, const Policy& behavior, int s, int a);

/// One-hot identity encoding, n_features = n_states.
FeatureMap tabular_features(int n_states);

/// One-hot encoding where each (a,b) pair shares a single row;
/// n_features = n_states - #pairs. Throws on overlapping pairs.
FeatureMap aliased_features(int n_states,
                            const std::vector<std::pair<int, int>>& alias_pairs);

/// Zeroes the rows of terminal states in place so terminal predictions
/// are exactly 0.
void zero_terminal_rows(FeatureMap& features, const MDPModel& model);

}  // namespace tdlam
