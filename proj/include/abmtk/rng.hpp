#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "abmtk/rational.hpp"

namespace abmtk {

// All randomness in the toolkit flows through RandomStream so that a trace is
// reproducible bit for bit from (base seed, run index) on any platform. The
// std distributions are implementation-defined, so the mappings from raw
// 64-bit draws to bernoulli outcomes, bounded integers and permutations are
// spelled out here and must not change.

uint64_t splitmix64(uint64_t x);

// Seed for run k of a plan: splitmix64(base + GOLDEN * (k + 1)). Run index 0
// therefore never reuses the base seed itself.
uint64_t derive_run_seed(uint64_t base_seed, uint64_t run_index);

class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, n) via rejection sampling on the top range.
    uint64_t uniform_below(uint64_t n);

    // True with probability num/den. Consumes exactly one draw: compares the
    // raw 64-bit value against floor(2^64 * num / den) computed exactly.
    bool bernoulli(const Rational& p);

    // Fisher-Yates shuffle of 0..n-1, consuming n-1 uniform_below draws.
    std::vector<int> permutation(int n);

private:
    std::mt19937_64 gen_;
};

} // namespace abmtk
