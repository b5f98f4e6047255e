#pragma once

#include <optional>
#include <string>
#include <vector>

#include "abmtk/macro.hpp"

namespace abmtk {

// Observation patterns over three strata: state patterns describe a system
// state at one instant, event patterns describe single rule firings, and
// complex patterns describe structures of firings across a whole trace.
// All three are immutable values parsed from the block DSL documented in
// docs/pattern-dsl.md; printing is canonical, so
// parse_pattern_file(print_pattern_file(f)) reproduces f.

enum class CmpOp { Lt, Le, Eq, Ne, Ge, Gt };

bool eval_cmp(const Rational& lhs, CmpOp op, const Rational& rhs);
std::string cmp_text(CmpOp op);

// What a leaf requires of one variable's value. NotNull reads "anything but
// the domain's lowest value": domains model optional references by
// reserving their first value as the absent marker (0 in int[0,n] id
// domains, false for booleans).
struct ValueRange {
    enum class Kind { Interval, NotNull, EqLiteral, EqBinding };

    Kind kind = Kind::NotNull;
    Value lo, hi;        // Interval, closed, numeric
    Value literal;       // EqLiteral
    std::string binding; // EqBinding, without the $ sigil
};

// One variable requirement. Leaves naming the same @slot must bind the same
// agent; "as $name" exposes the matched value to later leaves' EqBinding
// ranges, which is how identity reaches across agent boundaries.
struct StateLeaf {
    std::string type_name; // optional agent type qualifier
    std::string slot;      // optional @slot agent binding
    std::string var;
    ValueRange range;
    std::string capture; // optional value capture name, without the sigil
};

struct StatePattern {
    enum class Kind { Leaf, Compose, Subset };

    Kind kind = Kind::Leaf;
    StateLeaf leaf;                      // Kind::Leaf
    std::vector<StatePattern> children;  // Compose: all jointly; Subset: any
    int line = 0;
};

// Event class: which rules may produce the event, plus constraints on the
// recorded source and target substates. An absent constraint is vacuous.
// observe restricts the visible substate before the constraints apply.
struct EventPattern {
    std::vector<std::string> rules; // empty: any rule
    std::optional<StatePattern> from, to;
    std::vector<std::string> observe;
    int line = 0;
};

// Implicit complex pattern: a predicate over a macro's aggregate series.
// ever: some step satisfies it; final: the last step does; delta: the net
// change over the run does.
struct ImplicitSpec {
    enum class Series { Ever, Final, Delta };

    std::string macro;
    Series series = Series::Ever;
    CmpOp op = CmpOp::Gt;
    Rational threshold;
};

struct ComplexPattern {
    enum class Kind { Event, Ref, Seq, All, Any, Implicit };

    Kind kind = Kind::Event;
    EventPattern event;                   // Event
    std::string ref;                      // Ref: name of an earlier set/cet
    std::vector<ComplexPattern> children; // Seq, All, Any
    std::optional<int> window;            // Seq, All: max steps spanned
    ImplicitSpec implicit;                // Implicit
    int line = 0;
};

struct PatternDecl {
    enum class Kind { Sst, Set, Cet };

    Kind kind = Kind::Sst;
    std::string name;
    StatePattern state;  // Sst
    ComplexPattern body; // Set (Kind::Event), Cet
    int line = 0;
};

// One pattern source file: macros plus named patterns, in declaration
// order. References inside cets resolve only backwards.
struct PatternFile {
    std::vector<MacroDef> macros;
    std::vector<PatternDecl> patterns;

    const PatternDecl* find(const std::string& name) const;
    const MacroDef* find_macro(const std::string& name) const;
};

std::optional<PatternFile> parse_pattern_file(const std::string& text, Diagnostics& diags);
std::string print_pattern_file(const PatternFile& file);

// Semantic validation against a model: variable, rule and macro resolution,
// range containment and orientation, capture declaration order, window
// positivity, reference resolution.
Diagnostics check_patterns(const PatternFile& file, const ModelSpec& spec);

// Variables the transition constraint mentions, in first-use order.
std::vector<std::string> referenced_vars(const EventPattern& p);

// Coarsens an event pattern to the given variables: constraints touching
// dropped variables are relaxed to always-true, never tightened, so every
// event the input matches is still matched. vars must be a subset of
// referenced_vars(p); throws RuntimeError otherwise.
EventPattern project_event(const EventPattern& p, const std::vector<std::string>& vars);

// Read + parse + check against the model; throws RuntimeError carrying the
// formatted diagnostics.
PatternFile load_pattern_file(const std::string& path, const ModelSpec& spec);
PatternFile parse_patterns_checked(const std::string& text, const ModelSpec& spec);

} // namespace abmtk
