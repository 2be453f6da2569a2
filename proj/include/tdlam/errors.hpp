#pragma once

#include <stdexcept>
#include <string>

namespace tdlam {

/// Violated precondition or malformed input (invalid sizes, bad
/// probabilities, overlapping alias pairs, ...).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Behavior policy assigns zero probability to an action the target
/// policy can take.
class CoverageError : public std::runtime_error {
public:
    explicit CoverageError(const std::string& what) : std::runtime_error(what) {}
};

/// A linear solve or iteration failed to reach its tolerance, or the
/// requested fixed point does not exist.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The second-moment operator failed the finite-variance condition.
class InfiniteVarianceError : public NumericalError {
public:
    explicit InfiniteVarianceError(const std::string& what) : NumericalError(what) {}
};

/// An incremental learner produced a non-finite quantity. Carries the
/// step index at which the blow-up was detected.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long step)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

}  // namespace tdlam
