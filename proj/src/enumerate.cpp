#include "abmtk/enumerate.hpp"

#include <algorithm>

namespace abmtk {

namespace {

using u128 = unsigned __int128;

constexpr u128 kSaturated = ~static_cast<u128>(0);

u128 sat_mul(u128 a, u128 b) {
    if (a == 0 || b == 0) return 0;
    if (a > kSaturated / b) return kSaturated;
    return a * b;
}

u128 sat_pow(u128 base, int exp) {
    u128 r = 1;
    for (int i = 0; i < exp; ++i) r = sat_mul(r, base);
    return r;
}

std::string u128_to_string(u128 v) {
    if (v == 0) return "0";
    std::string out;
    while (v > 0) {
        out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

// One node of the decision path. Picks range chosen over [0, options);
// flips keep p so leaf probabilities can be recomputed. A flip with p at 0
// or 1 has a single option whose forced outcome sits in chosen.
struct Decision {
    bool is_flip = false;
    uint64_t chosen = 0;
    uint64_t options = 0;
    Rational p;
};

// Feeds execute_model from a recorded decision path: replays the prefix
// that backtracking kept, then extends depth-first with the first untried
// alternative (0 for picks, false for flips). Execution is a deterministic
// function of the decisions, so a kind or arity mismatch during replay can
// only mean the engine and the enumerator disagree.
struct PathSource : StochasticSource {
    std::vector<Decision> path;
    size_t pos = 0;

    uint64_t choose(uint64_t n) override {
        if (pos < path.size()) {
            const Decision& d = path[pos];
            if (d.is_flip || d.options != n)
                throw RuntimeError("enumeration decision mismatch on replay");
            ++pos;
            return d.chosen;
        }
        path.push_back({false, 0, n, Rational(0)});
        ++pos;
        return 0;
    }

    bool flip(const Rational& p) override {
        bool degenerate = p.num <= 0 || p.num >= p.den;
        uint64_t options = degenerate ? 1 : 2;
        if (pos < path.size()) {
            const Decision& d = path[pos];
            if (!d.is_flip || d.options != options)
                throw RuntimeError("enumeration decision mismatch on replay");
            ++pos;
            return d.chosen == 1;
        }
        uint64_t chosen = degenerate && p.num >= p.den ? 1 : 0;
        path.push_back({true, chosen, options, p});
        ++pos;
        return chosen == 1;
    }

    // Probability of the path just executed.
    Rational weight() const {
        Rational w(1);
        for (const Decision& d : path) {
            if (d.options == 1) continue;
            if (d.is_flip)
                w = w * (d.chosen == 1 ? d.p : Rational(1) - d.p);
            else
                w = w / Rational(static_cast<long long>(d.options));
        }
        return w;
    }

    // Moves to the next untried branch; false once the tree is exhausted.
    bool advance() {
        while (!path.empty()) {
            Decision& d = path.back();
            if (d.chosen + 1 < d.options) {
                ++d.chosen;
                pos = 0;
                return true;
            }
            path.pop_back();
        }
        return false;
    }
};

// Lower bound on the number of decision paths, ignoring bernoulli branching
// (which depends on reached states and is counted while walking). Saturates
// instead of overflowing.
u128 static_paths(const ModelSpec& spec, const Layout& layout,
                  const std::vector<const ParamDecl*>& axis, int horizon) {
    u128 total = 1;
    for (const ParamDecl* p : axis) {
        auto card = p->domain.cardinality();
        if (!card) return kSaturated;
        total = sat_mul(total, *card);
    }
    for (const AgentType& type : spec.types) {
        for (const VarDecl& v : type.vars) {
            u128 per = 1;
            if (v.init == VarDecl::Init::Random) {
                auto card = v.domain.cardinality();
                if (!card) return kSaturated;
                per = *card;
            } else if (v.init == VarDecl::Init::Choice) {
                per = v.choices.size();
            } else {
                continue;
            }
            total = sat_mul(total, sat_pow(per, type.count));
        }
    }
    if (spec.schedule == ScheduleKind::AsyncRandom && horizon > 0) {
        u128 orderings = 1;
        for (int i = 2; i <= layout.total; ++i) orderings = sat_mul(orderings, i);
        total = sat_mul(total, sat_pow(orderings, horizon));
    }
    return total;
}

} // namespace

EnumerationResult enumerate_systems(const ModelSpec& spec, const Layout& layout,
                                    const std::map<std::string, Value>& overrides, int horizon,
                                    uint64_t bound) {
    if (horizon < 0) throw RuntimeError("horizon cannot be negative");

    // Same override handling as resolve_params, except unbound parameters
    // are legal here: they become the leading enumeration axis, one uniform
    // pick over the domain per parameter, in declaration order.
    for (const auto& [name, value] : overrides) {
        const ParamDecl* decl = spec.find_param(name);
        if (!decl) throw RuntimeError("unknown parameter '" + name + "'");
        if (!decl->domain.contains(value))
            throw RuntimeError("parameter " + name + ": value " + value.to_string() +
                               " outside " + decl->domain.describe());
    }
    std::map<std::string, Value> fixed;
    std::vector<const ParamDecl*> axis;
    for (const ParamDecl& p : spec.params) {
        auto it = overrides.find(p.name);
        if (it != overrides.end())
            fixed[p.name] = it->second;
        else if (p.value)
            fixed[p.name] = *p.value;
        else
            axis.push_back(&p);
    }

    u128 minimum = static_paths(spec, layout, axis, horizon);
    if (minimum > static_cast<u128>(bound))
        throw RuntimeError(
            "enumeration needs at least " +
            (minimum == kSaturated ? std::string("2^128") : u128_to_string(minimum)) +
            " executions, over the bound of " + std::to_string(bound));

    EnumerationResult result;
    std::map<std::string, size_t> seen; // canonical trace text -> systems index
    PathSource src;
    for (;;) {
        std::map<std::string, Value> params = fixed;
        for (const ParamDecl* p : axis)
            params[p->name] = p->domain.value_at(src.choose(*p->domain.cardinality()));
        Trace trace = execute_model(spec, layout, params, horizon, src);
        ++result.executions;
        if (result.executions > bound)
            throw RuntimeError("enumeration explored more than " + std::to_string(bound) +
                               " executions; raise the bound or simplify the model");

        Rational w = src.weight();
        std::string key = serialize_trace(spec, layout, trace);
        auto [it, fresh] = seen.emplace(std::move(key), result.systems.size());
        if (fresh)
            result.systems.push_back({std::move(params), std::move(trace), w});
        else
            result.systems[it->second].weight = result.systems[it->second].weight + w;

        if (!src.advance()) break;
    }
    return result;
}

} // namespace abmtk
