#pragma once

#include "abmtk/trace.hpp"

namespace abmtk {

// Every stochastic decision the engine makes flows through this interface,
// so a seeded generator and an exhaustive path enumerator drive the same
// stepping code. choose(n) is a uniform pick below n; flip(p) is true with
// probability p. Permutations are built from n-1 choose() calls
// (Fisher-Yates, highest index first), matching RandomStream::permutation.
struct StochasticSource {
    virtual ~StochasticSource() = default;
    virtual uint64_t choose(uint64_t n) = 0;
    virtual bool flip(const Rational& p) = 0;
};

std::vector<int> source_permutation(StochasticSource& src, int n);

// Executes one simulation against an explicit decision source. params must
// bind every declared parameter (resolve_params). The returned trace has
// seed 0; run_model fills it.
//
// Decision consumption order, which reproducibility rests on:
//   1. initializers, instance 0..N-1, each type's declaration order
//      (random inits and choice lists decide; expression inits do not)
//   2. per step: the agent permutation (async-random only), then bernoulli
//      flips lazily as rule conditions reach them, in processing order with
//      and/or short-circuiting
//
// Synchronous steps read the pre-step state and buffer writes; two rules
// writing the same slot in one synchronous step is a runtime error. Async
// steps read and write the live state, visiting agents in index order
// (async-fixed) or a fresh permutation (async-random).
Trace execute_model(const ModelSpec& spec, const Layout& layout,
                    const std::map<std::string, Value>& params, int horizon,
                    StochasticSource& src);

// The standard entry point: decisions drawn from RandomStream(seed).
// Deterministic, and byte-identical across platforms once serialized.
Trace run_model(const ModelSpec& spec, const Layout& layout,
                const std::map<std::string, Value>& params, uint64_t seed, int horizon);

} // namespace abmtk
