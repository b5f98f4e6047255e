#include "abmtk/matcher.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace abmtk {

namespace {

// Bindings accumulated while embedding a state pattern: @slots name agents,
// $captures name values. Leaves without either assert pure existence.
struct Env {
    std::map<std::string, int> slots;
    std::map<std::string, Value> caps;
};

bool value_less(const Value& a, const Value& b) {
    if (a.boolean != b.boolean) return b.boolean;
    if (a.boolean) return !a.flag && b.flag;
    return a.number < b.number;
}

bool caps_less(const std::map<std::string, Value>& a, const std::map<std::string, Value>& b) {
    auto ai = a.begin();
    auto bi = b.begin();
    for (; ai != a.end() && bi != b.end(); ++ai, ++bi) {
        if (ai->first != bi->first) return ai->first < bi->first;
        if (ai->second != bi->second) return value_less(ai->second, bi->second);
    }
    return bi != b.end();
}

bool range_satisfied(const ValueRange& r, const Value& v, const ValueDomain& domain,
                     const std::map<std::string, Value>& caps) {
    switch (r.kind) {
    case ValueRange::Kind::NotNull:
        return v != domain.value_at(0);
    case ValueRange::Kind::EqLiteral:
        return v == r.literal;
    case ValueRange::Kind::EqBinding: {
        auto it = caps.find(r.binding);
        return it != caps.end() && it->second == v;
    }
    case ValueRange::Kind::Interval:
        return !v.boolean && !(v.number < r.lo.number) && !(r.hi.number < v.number);
    }
    return false;
}

struct StateWalker {
    const ModelSpec& spec;
    const Layout& layout;
    const State& state;

    using Sink = std::function<bool(const Env&)>;

    // Feeds every extension of env satisfying the node to out; a false
    // return from out aborts the walk.
    bool walk(const StatePattern& p, const Env& env, const Sink& out) {
        switch (p.kind) {
        case StatePattern::Kind::Leaf:
            return walk_leaf(p.leaf, env, out);
        case StatePattern::Kind::Compose:
            return walk_chain(p.children, 0, env, out);
        case StatePattern::Kind::Subset:
            for (const auto& c : p.children)
                if (!walk(c, env, out)) return false;
            return true;
        }
        return true;
    }

    bool walk_chain(const std::vector<StatePattern>& children, size_t idx, const Env& env,
                    const Sink& out) {
        if (idx == children.size()) return out(env);
        return walk(children[idx], env, [&](const Env& e) {
            return walk_chain(children, idx + 1, e, out);
        });
    }

    bool walk_leaf(const StateLeaf& leaf, const Env& env, const Sink& out) {
        int want_type = leaf.type_name.empty() ? -1 : spec.type_index(leaf.type_name);
        int lo = 0, hi = layout.total;
        if (!leaf.slot.empty()) {
            auto it = env.slots.find(leaf.slot);
            if (it != env.slots.end()) {
                lo = it->second;
                hi = lo + 1;
            }
        }
        bool anonymous = leaf.slot.empty() && leaf.capture.empty();
        for (int i = lo; i < hi; ++i) {
            const AgentType& type = spec.types[layout.type_of[i]];
            if (want_type >= 0 && layout.type_of[i] != want_type) continue;
            int vi = type.var_index(leaf.var);
            if (vi < 0) continue;
            const Value& v = state.get(i, vi);
            if (!range_satisfied(leaf.range, v, type.vars[vi].domain, env.caps)) continue;
            Env ext = env;
            if (!leaf.slot.empty()) ext.slots[leaf.slot] = i;
            if (!leaf.capture.empty()) {
                auto it = ext.caps.find(leaf.capture);
                if (it != ext.caps.end()) {
                    if (it->second != v) continue;
                } else {
                    ext.caps.emplace(leaf.capture, v);
                }
            }
            if (!out(ext)) return false;
            // Without bindings one satisfying agent settles existence.
            if (anonymous) return true;
        }
        return true;
    }
};

std::string render_env(const ModelSpec& spec, const Layout& layout, const Env& env) {
    std::string out;
    for (const auto& [slot, agent] : env.slots) {
        if (!out.empty()) out += ", ";
        out += "@" + slot + "=" + instance_label(spec, layout, agent);
    }
    for (const auto& [cap, v] : env.caps) {
        if (!out.empty()) out += ", ";
        out += "$" + cap + "=" + v.to_string();
    }
    return out.empty() ? "(no bindings)" : out;
}

} // namespace

MatchResult match_state(const StatePattern& p, const ModelSpec& spec, const Layout& layout,
                        const State& state, uint64_t cap) {
    StateWalker walker{spec, layout, state};
    struct EnvLess {
        bool operator()(const Env& a, const Env& b) const {
            if (a.slots != b.slots) return a.slots < b.slots;
            return caps_less(a.caps, b.caps);
        }
    };
    std::set<Env, EnvLess> seen;
    MatchResult result;
    walker.walk(p, Env{}, [&](const Env& env) {
        if (seen.insert(env).second && result.witness.empty())
            result.witness = render_env(spec, layout, env);
        if (seen.size() > cap) {
            result.exact = false;
            return false;
        }
        return true;
    });
    result.matched = !seen.empty();
    result.instantiations = result.exact ? seen.size() : cap;
    if (!result.matched) result.witness.clear();
    return result;
}

namespace {

using Substate = std::vector<std::pair<std::string, Value>>;

Substate restrict_to(const Substate& sub, const std::vector<std::string>& observe) {
    if (observe.empty()) return sub;
    Substate out;
    for (const auto& entry : sub)
        if (std::find(observe.begin(), observe.end(), entry.first) != observe.end())
            out.push_back(entry);
    return out;
}

const Value* find_var(const Substate& sub, const std::string& name) {
    for (const auto& [var, v] : sub)
        if (var == name) return &v;
    return nullptr;
}

// Evaluates a constraint tree over one substate, threading capture
// environments from the source constraint into the target constraint.
std::vector<std::map<std::string, Value>> eval_constraint(
    const StatePattern& p, const Substate& sub, const AgentType& type,
    const std::vector<std::map<std::string, Value>>& envs) {
    std::vector<std::map<std::string, Value>> out;
    switch (p.kind) {
    case StatePattern::Kind::Leaf: {
        const Value* v = find_var(sub, p.leaf.var);
        if (!v) return out;
        int vi = type.var_index(p.leaf.var);
        if (vi < 0) return out;
        for (const auto& env : envs) {
            if (!range_satisfied(p.leaf.range, *v, type.vars[vi].domain, env)) continue;
            auto ext = env;
            if (!p.leaf.capture.empty()) {
                auto it = ext.find(p.leaf.capture);
                if (it != ext.end()) {
                    if (it->second != *v) continue;
                } else {
                    ext.emplace(p.leaf.capture, *v);
                }
            }
            out.push_back(std::move(ext));
        }
        return out;
    }
    case StatePattern::Kind::Compose: {
        auto cur = envs;
        for (const auto& c : p.children) {
            cur = eval_constraint(c, sub, type, cur);
            if (cur.empty()) break;
        }
        return cur;
    }
    case StatePattern::Kind::Subset: {
        for (const auto& c : p.children) {
            auto part = eval_constraint(c, sub, type, envs);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }
    }
    return out;
}

} // namespace

bool match_event(const EventPattern& p, const ModelSpec& spec, const Layout& layout,
                 const Event& e) {
    if (!p.rules.empty() &&
        std::find(p.rules.begin(), p.rules.end(), e.rule) == p.rules.end())
        return false;
    const AgentType& type = spec.types[layout.type_of[e.instance]];
    std::vector<std::map<std::string, Value>> envs{{}};
    if (p.from) {
        envs = eval_constraint(*p.from, restrict_to(e.source, p.observe), type, envs);
        if (envs.empty()) return false;
    }
    if (p.to) {
        envs = eval_constraint(*p.to, restrict_to(e.target, p.observe), type, envs);
        if (envs.empty()) return false;
    }
    return true;
}

const ComplexPattern& resolve_pattern(const ComplexPattern& p, const PatternFile& file) {
    const ComplexPattern* cur = &p;
    while (cur->kind == ComplexPattern::Kind::Ref) {
        const PatternDecl* d = file.find(cur->ref);
        if (!d) throw RuntimeError("unknown pattern '" + cur->ref + "'");
        if (d->kind == PatternDecl::Kind::Sst)
            throw RuntimeError("pattern '" + cur->ref + "' matches states, not events");
        cur = &d->body;
    }
    return *cur;
}

namespace {

struct TraceWalker {
    const PatternFile& file;
    const ModelSpec& spec;
    const Layout& layout;
    const Trace& trace;

    using Sink = std::function<bool(const std::vector<int>&)>;

    // Embeddings are sorted index sets into trace.events; every index is
    // at least min_idx, which is how seq enforces ordering.
    bool walk(const ComplexPattern& raw, int min_idx, const Sink& out) {
        const ComplexPattern& p = resolve_pattern(raw, file);
        switch (p.kind) {
        case ComplexPattern::Kind::Event:
            for (int i = min_idx; i < static_cast<int>(trace.events.size()); ++i)
                if (match_event(p.event, spec, layout, trace.events[i]))
                    if (!out(std::vector<int>{i})) return false;
            return true;
        case ComplexPattern::Kind::Seq:
            return walk_seq(p, 0, min_idx, {}, out);
        case ComplexPattern::Kind::All:
            return walk_all(p, 0, min_idx, {}, out);
        case ComplexPattern::Kind::Any:
            for (const auto& c : p.children)
                if (!walk(c, min_idx, out)) return false;
            return true;
        case ComplexPattern::Kind::Implicit:
            throw RuntimeError("implicit pattern inside a structural pattern");
        case ComplexPattern::Kind::Ref:
            break; // resolved above
        }
        return true;
    }

    bool emit(const ComplexPattern& p, std::vector<int> acc, const Sink& out) {
        std::sort(acc.begin(), acc.end());
        acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
        if (p.window) {
            int span = trace.events[acc.back()].step - trace.events[acc.front()].step + 1;
            if (span > *p.window) return true;
        }
        return out(acc);
    }

    // Children occupy fully separated index ranges, left to right.
    bool walk_seq(const ComplexPattern& p, size_t idx, int min_idx, std::vector<int> acc,
                  const Sink& out) {
        if (idx == p.children.size()) return emit(p, std::move(acc), out);
        return walk(p.children[idx], min_idx, [&](const std::vector<int>& e) {
            std::vector<int> next = acc;
            next.insert(next.end(), e.begin(), e.end());
            int bound = e.empty() ? min_idx : *std::max_element(e.begin(), e.end()) + 1;
            return walk_seq(p, idx + 1, bound, std::move(next), out);
        });
    }

    bool walk_all(const ComplexPattern& p, size_t idx, int min_idx, std::vector<int> acc,
                  const Sink& out) {
        if (idx == p.children.size()) return emit(p, std::move(acc), out);
        return walk(p.children[idx], min_idx, [&](const std::vector<int>& e) {
            std::vector<int> next = acc;
            next.insert(next.end(), e.begin(), e.end());
            return walk_all(p, idx + 1, min_idx, std::move(next), out);
        });
    }
};

std::string render_embedding(const ModelSpec& spec, const Layout& layout, const Trace& trace,
                             const std::vector<int>& idxs) {
    std::string out;
    for (int i : idxs) {
        const Event& e = trace.events[i];
        if (!out.empty()) out += "; ";
        out += "step " + std::to_string(e.step) + " #" + std::to_string(e.ordinal) + " " +
               instance_label(spec, layout, e.instance) + " " + e.rule;
    }
    return out;
}

MatchResult match_implicit(const ImplicitSpec& im, const PatternFile& file, const ModelSpec& spec,
                           const Layout& layout, const Trace& trace) {
    const MacroDef* def = file.find_macro(im.macro);
    if (!def) throw RuntimeError("unknown macro '" + im.macro + "'");
    std::vector<Rational> series = aggregate_series(spec, layout, trace, *def);
    MatchResult r;
    switch (im.series) {
    case ImplicitSpec::Series::Ever:
        for (size_t t = 0; t < series.size(); ++t) {
            if (eval_cmp(series[t], im.op, im.threshold)) {
                r.matched = true;
                r.witness = "step " + std::to_string(t) + ": " + im.macro + " = " +
                            series[t].to_literal_string();
                break;
            }
        }
        break;
    case ImplicitSpec::Series::Final:
        r.matched = eval_cmp(series.back(), im.op, im.threshold);
        if (r.matched)
            r.witness = "final " + im.macro + " = " + series.back().to_literal_string();
        break;
    case ImplicitSpec::Series::Delta: {
        Rational delta = series.back() - series.front();
        r.matched = eval_cmp(delta, im.op, im.threshold);
        if (r.matched) r.witness = im.macro + " delta = " + delta.to_literal_string();
        break;
    }
    }
    r.instantiations = r.matched ? 1 : 0;
    return r;
}

} // namespace

MatchResult match_trace(const ComplexPattern& p, const PatternFile& file, const ModelSpec& spec,
                        const Layout& layout, const Trace& trace, uint64_t cap) {
    const ComplexPattern& root = resolve_pattern(p, file);
    if (root.kind == ComplexPattern::Kind::Implicit)
        return match_implicit(root.implicit, file, spec, layout, trace);

    TraceWalker walker{file, spec, layout, trace};
    std::set<std::vector<int>> seen;
    MatchResult result;
    walker.walk(root, 0, [&](const std::vector<int>& e) {
        if (seen.insert(e).second && result.witness.empty())
            result.witness = render_embedding(spec, layout, trace, e);
        if (seen.size() > cap) {
            result.exact = false;
            return false;
        }
        return true;
    });
    result.matched = !seen.empty();
    result.instantiations = result.exact ? seen.size() : cap;
    if (!result.matched) result.witness.clear();
    return result;
}

std::vector<uint64_t> state_count_series(const StatePattern& p, const ModelSpec& spec,
                                         const Layout& layout, const Trace& trace, uint64_t cap) {
    State state = trace.initial;
    std::vector<uint64_t> series;
    series.reserve(trace.horizon + 1);
    series.push_back(match_state(p, spec, layout, state, cap).instantiations);
    size_t ei = 0;
    for (int t = 1; t <= trace.horizon; ++t) {
        while (ei < trace.events.size() && trace.events[ei].step <= t) {
            const Event& e = trace.events[ei];
            const AgentType& type = spec.types[layout.type_of[e.instance]];
            for (const auto& [var, val] : e.target) state.set(e.instance, type.var_index(var), val);
            ++ei;
        }
        series.push_back(match_state(p, spec, layout, state, cap).instantiations);
    }
    return series;
}

} // namespace abmtk
