#include "abmtk/engine.hpp"

#include <algorithm>
#include <numeric>

#include "abmtk/rng.hpp"

namespace abmtk {

namespace {

struct EngineEnv : EvalEnv {
    const ModelSpec& spec;
    const Layout& layout;
    const std::map<std::string, Value>& params;
    const State* read_state = nullptr;
    StochasticSource* src = nullptr; // null where drawing is illegal (initializers)
    int self = 0;
    const AgentType* self_type = nullptr;
    int selected = -1;
    std::vector<bool>* reads = nullptr; // own-var read markers for the event source map

    EngineEnv(const ModelSpec& s, const Layout& l, const std::map<std::string, Value>& p)
        : spec(s), layout(l), params(p) {}

    void focus(int instance) {
        self = instance;
        self_type = &spec.types[layout.type_of[instance]];
    }

    Value read(const std::string& name) override {
        int vi = self_type->var_index(name);
        if (vi >= 0) {
            if (reads) (*reads)[vi] = true;
            return read_state->get(self, vi);
        }
        if (name == "index") return Value::of_int(layout.ordinal_of[self]);
        if (spec.has_globals()) {
            int gi = spec.types[0].var_index(name);
            if (gi >= 0) return read_state->get(0, gi);
        }
        auto it = params.find(name);
        if (it != params.end()) return it->second;
        throw RuntimeError("unresolved name '" + name + "'");
    }

    Value read_neighbor(const std::string& name) override {
        int nb = layout.adjacency[self][selected];
        int vi = spec.types[layout.type_of[nb]].var_index(name);
        if (vi < 0) throw RuntimeError("neighbour lacks variable '" + name + "'");
        return read_state->get(nb, vi);
    }

    int neighbor_count() override { return static_cast<int>(layout.adjacency[self].size()); }
    void select_neighbor(int k) override { selected = k; }

    bool neighbor_declares(const std::string& name) override {
        int nb = layout.adjacency[self][selected];
        return spec.types[layout.type_of[nb]].find_var(name) != nullptr;
    }

    bool draw_bernoulli(const Rational& p) override {
        if (!src) throw RuntimeError("bernoulli() reached outside a rule condition");
        return src->flip(p);
    }
};

State initial_state(const ModelSpec& spec, const Layout& layout,
                    const std::map<std::string, Value>& params, StochasticSource& src) {
    State state = empty_state(spec, layout);
    EngineEnv env(spec, layout, params);
    env.read_state = &state; // globals are instance 0, ready before agents init
    for (int i = 0; i < layout.total; ++i) {
        const AgentType& type = spec.types[layout.type_of[i]];
        env.focus(i);
        for (size_t v = 0; v < type.vars.size(); ++v) {
            const VarDecl& decl = type.vars[v];
            Value val;
            switch (decl.init) {
            case VarDecl::Init::Random:
                val = decl.domain.value_at(src.choose(*decl.domain.cardinality()));
                break;
            case VarDecl::Init::Choice:
                val = decl.choices[src.choose(decl.choices.size())];
                break;
            case VarDecl::Init::Expr:
                val = eval_expr(*decl.init_expr, env);
                if (!decl.domain.contains(val))
                    throw RuntimeError("init of " + instance_label(spec, layout, i) + "." +
                                       decl.name + ": value " + val.to_string() +
                                       " outside " + decl.domain.describe());
                break;
            }
            state.set(i, static_cast<int>(v), val);
        }
    }
    return state;
}

// Adapts the seeded stream. Draw for draw this matches what the engine
// consumed before decisions were abstracted, so serialized traces for a
// given seed are unchanged.
struct RngSource : StochasticSource {
    RandomStream rng;
    explicit RngSource(uint64_t seed) : rng(seed) {}
    uint64_t choose(uint64_t n) override { return rng.uniform_below(n); }
    bool flip(const Rational& p) override { return rng.bernoulli(p); }
};

} // namespace

std::vector<int> source_permutation(StochasticSource& src, int n) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(src.choose(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

Trace execute_model(const ModelSpec& spec, const Layout& layout,
                    const std::map<std::string, Value>& params, int horizon,
                    StochasticSource& src) {
    if (horizon < 0) throw RuntimeError("horizon cannot be negative");

    Trace trace;
    trace.model_name = spec.name;
    trace.hash = model_hash(spec);
    trace.params = params;
    trace.seed = 0;
    trace.schedule = spec.schedule;
    trace.firing = spec.firing;
    trace.horizon = horizon;
    trace.initial = initial_state(spec, layout, params, src);

    const bool sync = spec.schedule == ScheduleKind::Synchronous;
    State current = trace.initial;
    EngineEnv env(spec, layout, params);
    env.src = &src;

    std::vector<int> order(layout.total);
    std::iota(order.begin(), order.end(), 0);

    for (int step = 1; step <= horizon; ++step) {
        if (spec.schedule == ScheduleKind::AsyncRandom)
            order = source_permutation(src, layout.total);
        State snapshot;
        if (sync) snapshot = current;
        env.read_state = sync ? &snapshot : &current;

        // Buffered synchronous writes with the rule that produced each, for
        // conflict reporting.
        std::vector<std::tuple<int, int, Value, const Rule*>> pending;
        int ordinal = 1;

        for (int agent : order) {
            const AgentType& type = spec.types[layout.type_of[agent]];
            env.focus(agent);
            for (const Rule& rule : type.rules) {
                std::vector<bool> reads(type.vars.size(), false);
                env.reads = &reads;
                bool fired;
                try {
                    fired = eval_expr(*rule.condition, env).flag;
                } catch (const RuntimeError& e) {
                    throw RuntimeError("step " + std::to_string(step) + ", " +
                                       instance_label(spec, layout, agent) + ", rule " +
                                       rule.id + ": " + e.what());
                }
                if (!fired) {
                    env.reads = nullptr;
                    continue;
                }

                std::vector<std::pair<int, Value>> writes;
                for (const Assignment& a : rule.writes) {
                    int vi = type.var_index(a.var);
                    Value val;
                    try {
                        val = eval_expr(*a.value, env);
                    } catch (const RuntimeError& e) {
                        throw RuntimeError("step " + std::to_string(step) + ", " +
                                           instance_label(spec, layout, agent) + ", rule " +
                                           rule.id + ": " + e.what());
                    }
                    if (!type.vars[vi].domain.contains(val))
                        throw RuntimeError(
                            "step " + std::to_string(step) + ", " +
                            instance_label(spec, layout, agent) + ", rule " + rule.id + ": " +
                            a.var + " := " + val.to_string() + " outside " +
                            type.vars[vi].domain.describe());
                    writes.emplace_back(vi, val);
                }
                env.reads = nullptr;
                std::sort(writes.begin(), writes.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });

                Event ev;
                ev.step = step;
                ev.ordinal = ordinal++;
                ev.instance = agent;
                ev.rule = rule.id;
                for (size_t v = 0; v < type.vars.size(); ++v) {
                    bool written = false;
                    for (const auto& [vi, val] : writes) written |= vi == static_cast<int>(v);
                    if (reads[v] || written)
                        ev.source.emplace_back(type.vars[v].name,
                                               env.read_state->get(agent, static_cast<int>(v)));
                }
                for (const auto& [vi, val] : writes)
                    ev.target.emplace_back(type.vars[vi].name, val);
                trace.events.push_back(std::move(ev));

                if (sync) {
                    for (const auto& [vi, val] : writes) {
                        for (const auto& [pi, pvi, pval, prule] : pending)
                            if (pi == agent && pvi == vi)
                                throw RuntimeError(
                                    "step " + std::to_string(step) + ", " +
                                    instance_label(spec, layout, agent) + "." + type.vars[vi].name +
                                    ": write conflict between rules " + prule->id + " and " +
                                    rule.id);
                        pending.emplace_back(agent, vi, val, &rule);
                    }
                } else {
                    for (const auto& [vi, val] : writes) current.set(agent, vi, val);
                }

                if (spec.firing == FiringMode::FirstMatch) break;
            }
        }
        if (sync)
            for (const auto& [i, vi, val, rule] : pending) current.set(i, vi, val);
    }
    return trace;
}

Trace run_model(const ModelSpec& spec, const Layout& layout,
                const std::map<std::string, Value>& params, uint64_t seed, int horizon) {
    RngSource src(seed);
    Trace trace = execute_model(spec, layout, params, horizon, src);
    trace.seed = seed;
    return trace;
}

} // namespace abmtk
