#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "tdlam/errors.hpp"

namespace tdlam {

/// Seedable stream of pseudo-random numbers.
///
/// Wraps std::mt19937_64 (whose raw output sequence is fixed by the
/// standard) but performs all mappings to doubles and categorical draws
/// itself, so results are bit-identical across platforms and standard
/// library implementations. Per-run streams are derived as
/// base_seed + run_index.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Index drawn from an unnormalized-tolerant categorical distribution
    /// (probs are assumed to sum to ~1; the last positive entry absorbs
    /// rounding slack).
    int categorical(std::span<const double> probs) {
        double u = uniform();
        double acc = 0.0;
        int last_positive = -1;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            acc += probs[i];
            if (u < acc) return i;
        }
        if (last_positive < 0) throw ContractError("categorical: all-zero weights");
        return last_positive;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace tdlam
