#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abmtk/expr.hpp"
#include "abmtk/value.hpp"

namespace abmtk {

// In-memory form of a model definition. Everything the engine, the
// enumerator and the samplers do is driven from this structure; the text
// format is just its serialization (see parse_model / print_model_spec).

struct VarDecl {
    enum class Init { Expr, Random, Choice };

    std::string name;
    ValueDomain domain;
    Init init = Init::Expr;
    ExprPtr init_expr;          // Init::Expr
    std::vector<Value> choices; // Init::Choice, uniform over the list
    int line = 0;
};

struct Assignment {
    std::string var;
    ExprPtr value;
};

// State transition rule: when the condition holds, the writes are applied to
// the agent's own variables. Conditions may draw randomness (bernoulli) and
// inspect neighbours; assignment values may inspect neighbours but never
// draw.
struct Rule {
    std::string id;
    ExprPtr condition;
    std::vector<Assignment> writes;
    int line = 0;
};

struct AgentType {
    std::string name;
    std::vector<VarDecl> vars;
    std::vector<Rule> rules;
    int count = 1;          // instances, from the population section
    bool is_global = false; // the singleton "globals" block

    const VarDecl* find_var(const std::string& name) const;
    int var_index(const std::string& name) const; // -1 when absent
};

struct ParamDecl {
    std::string name;
    ValueDomain domain;
    std::optional<Value> value; // nullopt: declared free, must be bound later
    int line = 0;
};

enum class ScheduleKind { Synchronous, AsyncRandom, AsyncFixed };
enum class FiringMode { FirstMatch, AllMatching };

struct Topology {
    enum class Kind { Complete, Grid, Edges };

    Kind kind = Kind::Complete;
    int grid_width = 0;
    int grid_height = 0;
    bool moore = false; // else von Neumann
    bool wrap = false;
    // Resolved to global instance indices; normalized to (low, high), sorted,
    // deduplicated.
    std::vector<std::pair<int, int>> edges;
};

struct ModelSpec {
    std::string name;
    // When a globals block exists it is types[0] with is_global set; regular
    // agent types follow in declaration order.
    std::vector<AgentType> types;
    Topology topology;
    ScheduleKind schedule = ScheduleKind::Synchronous;
    FiringMode firing = FiringMode::FirstMatch;
    int horizon = 1;
    std::vector<ParamDecl> params;

    int type_index(const std::string& name) const; // -1 when absent
    const ParamDecl* find_param(const std::string& name) const;
    bool has_globals() const { return !types.empty() && types[0].is_global; }
};

// Flattened instance table. Instance 0 is the globals singleton when the
// model has one; regular instances follow in type declaration order. The
// globals instance never has neighbours and does not occupy a grid cell.
struct Layout {
    int total = 0;
    std::vector<int> type_of;
    std::vector<int> ordinal_of;
    std::vector<int> first_instance;         // per type
    std::vector<std::vector<int>> adjacency; // sorted neighbour lists

    int instance_of(int type_index, int ordinal) const {
        return first_instance[type_index] + ordinal;
    }
};

// Requires a structurally valid spec (see validate_model).
Layout build_layout(const ModelSpec& spec);

// Name resolution for agent-local expressions of one type: own variables
// shadow globals shadow parameters; neigh.* resolves across every regular
// agent type (nullopt when two types disagree on a name's type). Quantifiers
// are allowed by default, bernoulli is not.
class AgentScope : public TypeScope {
public:
    AgentScope(const ModelSpec& spec, const AgentType& type);

    std::optional<ExprType> lookup(const std::string& name) const override;
    std::optional<ExprType> lookup_neighbor(const std::string& name) const override;

private:
    const ModelSpec& spec_;
    const AgentType& type_;
};

// "Node[3]", or "globals" for the singleton.
std::string instance_label(const ModelSpec& spec, const Layout& layout, int instance);

Diagnostics validate_model(const ModelSpec& spec);

// Canonical text form; parse_model(print_model_spec(m)) reproduces m.
std::string print_model_spec(const ModelSpec& spec);

// FNV-1a 64 over the canonical text; traces and tables embed it so stale
// artifacts are detectable.
uint64_t model_hash(const ModelSpec& spec);
uint64_t fnv1a64(const std::string& text);

// Final parameter values for a run: declared defaults overlaid with command
// line overrides. Throws RuntimeError on unknown names, out-of-domain values
// or params left free.
std::map<std::string, Value> resolve_params(const ModelSpec& spec,
                                            const std::map<std::string, Value>& overrides);

// Param names with no default and no override, in declaration order.
std::vector<std::string> unbound_params(const ModelSpec& spec,
                                        const std::map<std::string, Value>& overrides);

} // namespace abmtk
