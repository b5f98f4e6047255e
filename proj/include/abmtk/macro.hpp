#pragma once

#include "abmtk/trace.hpp"

namespace abmtk {

// System-level aggregate over the regular agent population, evaluated per
// step. mean/sum range over every agent whose type declares the named
// numeric variable; the -where forms count agents satisfying a predicate
// written in the rule expression language (quantifiers allowed, draws not).
// Agents whose type cannot host the variable or predicate are outside the
// aggregation population.
struct MacroDef {
    enum class Agg { Mean, Sum, CountWhere, ProportionWhere };

    std::string name;
    Agg agg = Agg::Mean;
    std::string var;   // Mean, Sum
    ExprPtr condition; // CountWhere, ProportionWhere
    int line = 0;
};

// Type indices (regular only) participating in the aggregation.
std::vector<int> macro_population(const ModelSpec& spec, const MacroDef& def);

// Empty iff the definition resolves against the spec and at least one agent
// participates.
Diagnostics validate_macro(const ModelSpec& spec, const MacroDef& def);

// series[t] = the aggregate applied to state_at(trace, t); exact rationals,
// length horizon + 1.
std::vector<Rational> aggregate_series(const ModelSpec& spec, const Layout& layout,
                                       const Trace& trace, const MacroDef& def);

std::string print_macro(const MacroDef& def);

} // namespace abmtk
