#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "abmtk/state.hpp"

namespace abmtk {

// A recorded rule firing. The source map holds the acting agent's own
// variables the rule actually read (condition and assignment values, in
// evaluation-reachable order) plus the old values of everything it wrote;
// the target map holds the new values of the written variables. Both are in
// variable declaration order. Readings of globals, parameters or neighbour
// variables influence whether the rule fires but are not part of the agent's
// own substate and are not recorded.
struct Event {
    int step = 0;    // 1-based
    int ordinal = 0; // 1-based, strictly increasing within a step
    int instance = 0;
    std::string rule;
    std::vector<std::pair<std::string, Value>> source;
    std::vector<std::pair<std::string, Value>> target;
};

struct Trace {
    std::string model_name;
    uint64_t hash = 0; // model_hash of the generating spec
    std::map<std::string, Value> params;
    uint64_t seed = 0;
    ScheduleKind schedule = ScheduleKind::Synchronous;
    FiringMode firing = FiringMode::FirstMatch;
    int horizon = 0;
    State initial;
    std::vector<Event> events;
};

// Bit-exact text form. Identical traces serialize identically on every
// platform: integers in decimal, rationals at their domain precision, hash in
// fixed-width hex.
std::string serialize_trace(const ModelSpec& spec, const Layout& layout, const Trace& trace);

// Rejects traces whose embedded hash does not match the spec (stale
// artifact). Returns nullopt and fills diags on any problem.
std::optional<Trace> parse_trace(const ModelSpec& spec, const Layout& layout,
                                 const std::string& text, Diagnostics& diags);

Trace load_trace_file(const ModelSpec& spec, const Layout& layout, const std::string& path);

// State after step t by replaying events; t = 0 is the initial state.
// Throws on t outside [0, horizon].
State state_at(const ModelSpec& spec, const Layout& layout, const Trace& trace, int t);

} // namespace abmtk
