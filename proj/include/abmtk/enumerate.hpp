#pragma once

#include <map>
#include <string>
#include <vector>

#include "abmtk/engine.hpp"

namespace abmtk {

// One reachable system: a complete parameter binding plus a full trace,
// weighted by the exact probability of reaching it. Weights over all
// systems of an enumeration sum to 1.
struct SystemInstance {
    std::map<std::string, Value> params;
    Trace trace;
    Rational weight;
};

struct EnumerationResult {
    std::vector<SystemInstance> systems; // distinct traces, discovery order
    uint64_t executions = 0;             // raw paths explored before dedup
};

// Walks every stochastic decision path of the model: each unbound parameter
// ranges over its whole domain (uniformly weighted), random initializers
// over their domains, async-random steps over all agent orders, and
// bernoulli conditions over both outcomes. Paths whose parameter binding,
// initial state and event sequence coincide are merged, their weights
// summed.
//
// The decision tree can explode, so `bound` caps it twice over: a lower
// bound on the number of paths (parameter and initializer cardinalities
// times the orderings an async-random schedule admits) is computed before
// any execution, and the count of explored paths is checked as the walk
// proceeds. Either trip raises RuntimeError.
EnumerationResult enumerate_systems(const ModelSpec& spec, const Layout& layout,
                                    const std::map<std::string, Value>& overrides, int horizon,
                                    uint64_t bound);

} // namespace abmtk
