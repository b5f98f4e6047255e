#include "abmtk/macro.hpp"

namespace abmtk {

namespace {

// Read-only view of a State for evaluating agent-local predicates.
struct StateEnv : EvalEnv {
    const ModelSpec& spec;
    const Layout& layout;
    const std::map<std::string, Value>& params;
    const State& state;
    int self = 0;
    const AgentType* self_type = nullptr;
    int selected = -1;

    StateEnv(const ModelSpec& s, const Layout& l, const std::map<std::string, Value>& p,
             const State& st)
        : spec(s), layout(l), params(p), state(st) {}

    void focus(int instance) {
        self = instance;
        self_type = &spec.types[layout.type_of[instance]];
    }

    Value read(const std::string& name) override {
        int vi = self_type->var_index(name);
        if (vi >= 0) return state.get(self, vi);
        if (name == "index") return Value::of_int(layout.ordinal_of[self]);
        if (spec.has_globals()) {
            int gi = spec.types[0].var_index(name);
            if (gi >= 0) return state.get(0, gi);
        }
        auto it = params.find(name);
        if (it != params.end()) return it->second;
        throw RuntimeError("unresolved name '" + name + "'");
    }
    Value read_neighbor(const std::string& name) override {
        int nb = layout.adjacency[self][selected];
        int vi = spec.types[layout.type_of[nb]].var_index(name);
        if (vi < 0) throw RuntimeError("neighbour lacks variable '" + name + "'");
        return state.get(nb, vi);
    }
    int neighbor_count() override { return static_cast<int>(layout.adjacency[self].size()); }
    void select_neighbor(int k) override { selected = k; }
    bool neighbor_declares(const std::string& name) override {
        int nb = layout.adjacency[self][selected];
        return spec.types[layout.type_of[nb]].find_var(name) != nullptr;
    }
    bool draw_bernoulli(const Rational&) override {
        throw RuntimeError("aggregation predicates cannot draw randomness");
    }
};

} // namespace

std::vector<int> macro_population(const ModelSpec& spec, const MacroDef& def) {
    std::vector<int> out;
    for (size_t t = 0; t < spec.types.size(); ++t) {
        const AgentType& type = spec.types[t];
        if (type.is_global) continue;
        if (def.agg == MacroDef::Agg::Mean || def.agg == MacroDef::Agg::Sum) {
            const VarDecl* v = type.find_var(def.var);
            if (v && v->domain.kind != ValueDomain::Kind::Boolean)
                out.push_back(static_cast<int>(t));
        } else {
            AgentScope scope(spec, type);
            Diagnostics scratch;
            auto et = check_expr(*def.condition, scope, scratch);
            if (scratch.empty() && et == ExprType::Bool) out.push_back(static_cast<int>(t));
        }
    }
    return out;
}

Diagnostics validate_macro(const ModelSpec& spec, const MacroDef& def) {
    Diagnostics diags;
    bool where = def.agg == MacroDef::Agg::CountWhere || def.agg == MacroDef::Agg::ProportionWhere;
    if (where && !def.condition) {
        diags.push_back({def.line, 0, "macro " + def.name + ": missing predicate"});
        return diags;
    }
    if (macro_population(spec, def).empty()) {
        if (where)
            diags.push_back({def.line, 0, "macro " + def.name +
                                              ": predicate resolves for no agent type"});
        else
            diags.push_back({def.line, 0, "macro " + def.name + ": no agent type declares a " +
                                              "numeric variable '" + def.var + "'"});
    }
    return diags;
}

std::vector<Rational> aggregate_series(const ModelSpec& spec, const Layout& layout,
                                       const Trace& trace, const MacroDef& def) {
    std::vector<int> types = macro_population(spec, def);
    std::vector<bool> in_population(spec.types.size(), false);
    for (int t : types) in_population[t] = true;

    State state = trace.initial;

    auto measure = [&](const State& s) -> Rational {
        StateEnv view(spec, layout, trace.params, s);
        Rational sum(0);
        long long population = 0;
        long long matched = 0;
        for (int i = 0; i < layout.total; ++i) {
            int t = layout.type_of[i];
            if (!in_population[t]) continue;
            ++population;
            if (def.agg == MacroDef::Agg::Mean || def.agg == MacroDef::Agg::Sum) {
                sum = sum + s.get(i, spec.types[t].var_index(def.var)).number;
            } else {
                view.focus(i);
                if (eval_expr(*def.condition, view).flag) ++matched;
            }
        }
        if (population == 0) throw RuntimeError("macro " + def.name + ": empty population");
        switch (def.agg) {
        case MacroDef::Agg::Mean: return sum / Rational(population);
        case MacroDef::Agg::Sum: return sum;
        case MacroDef::Agg::CountWhere: return Rational(matched);
        case MacroDef::Agg::ProportionWhere: return Rational(matched, population);
        }
        return Rational(0);
    };

    std::vector<Rational> series;
    series.reserve(trace.horizon + 1);
    series.push_back(measure(state));
    size_t ei = 0;
    for (int t = 1; t <= trace.horizon; ++t) {
        while (ei < trace.events.size() && trace.events[ei].step <= t) {
            const Event& e = trace.events[ei];
            const AgentType& type = spec.types[layout.type_of[e.instance]];
            for (const auto& [var, val] : e.target) state.set(e.instance, type.var_index(var), val);
            ++ei;
        }
        series.push_back(measure(state));
    }
    return series;
}

std::string print_macro(const MacroDef& def) {
    std::string body;
    switch (def.agg) {
    case MacroDef::Agg::Mean: body = "mean(" + def.var + ")"; break;
    case MacroDef::Agg::Sum: body = "sum(" + def.var + ")"; break;
    case MacroDef::Agg::CountWhere: body = "count-where(" + print_expr(*def.condition) + ")"; break;
    case MacroDef::Agg::ProportionWhere:
        body = "proportion-where(" + print_expr(*def.condition) + ")";
        break;
    }
    return "macro " + def.name + " = " + body;
}

} // namespace abmtk
