#pragma once

#include "abmtk/pattern.hpp"
#include "abmtk/trace.hpp"

namespace abmtk {

// Outcome of matching a pattern against a state or a trace. instantiations
// counts distinct embeddings: for state patterns, assignments of agents to
// slots and values to captures; for complex patterns, sets of event
// positions. Enumeration stops once the cap is exceeded, in which case
// exact is false and instantiations reports the cap as a lower bound.
// matched is always exact: the search only stops after finding something.
struct MatchResult {
    bool matched = false;
    uint64_t instantiations = 0;
    bool exact = true;
    std::string witness; // first embedding found, empty when unmatched
};

inline constexpr uint64_t kDefaultEmbeddingCap = 1000000;

MatchResult match_state(const StatePattern& p, const ModelSpec& spec, const Layout& layout,
                        const State& state, uint64_t cap = kDefaultEmbeddingCap);

bool match_event(const EventPattern& p, const ModelSpec& spec, const Layout& layout,
                 const Event& e);

// Matches a complex pattern against a whole trace. References resolve
// through file; implicit patterns evaluate their macro series over the
// trace. Embeddings of structural patterns are sets of event indices.
MatchResult match_trace(const ComplexPattern& p, const PatternFile& file, const ModelSpec& spec,
                        const Layout& layout, const Trace& trace,
                        uint64_t cap = kDefaultEmbeddingCap);

// Instantiation count of a state pattern at every step, length horizon + 1.
std::vector<uint64_t> state_count_series(const StatePattern& p, const ModelSpec& spec,
                                         const Layout& layout, const Trace& trace,
                                         uint64_t cap = kDefaultEmbeddingCap);

// Follows Ref chains to the pattern they name; throws RuntimeError on an
// unknown name or a reference to a state pattern.
const ComplexPattern& resolve_pattern(const ComplexPattern& p, const PatternFile& file);

} // namespace abmtk
