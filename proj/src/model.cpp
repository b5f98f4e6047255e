#include "abmtk/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace abmtk {

const VarDecl* AgentType::find_var(const std::string& name) const {
    for (const auto& v : vars)
        if (v.name == name) return &v;
    return nullptr;
}

int AgentType::var_index(const std::string& name) const {
    for (size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return static_cast<int>(i);
    return -1;
}

int ModelSpec::type_index(const std::string& name) const {
    for (size_t i = 0; i < types.size(); ++i)
        if (types[i].name == name) return static_cast<int>(i);
    return -1;
}

const ParamDecl* ModelSpec::find_param(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return &p;
    return nullptr;
}

Layout build_layout(const ModelSpec& spec) {
    Layout lay;
    lay.first_instance.resize(spec.types.size());
    for (size_t t = 0; t < spec.types.size(); ++t) {
        lay.first_instance[t] = lay.total;
        for (int k = 0; k < spec.types[t].count; ++k) {
            lay.type_of.push_back(static_cast<int>(t));
            lay.ordinal_of.push_back(k);
            ++lay.total;
        }
    }
    lay.adjacency.assign(lay.total, {});

    std::vector<int> cells; // non-global instances, grid/complete order
    for (int i = 0; i < lay.total; ++i)
        if (!spec.types[lay.type_of[i]].is_global) cells.push_back(i);

    switch (spec.topology.kind) {
    case Topology::Kind::Complete:
        for (size_t a = 0; a < cells.size(); ++a)
            for (size_t b = a + 1; b < cells.size(); ++b) {
                lay.adjacency[cells[a]].push_back(cells[b]);
                lay.adjacency[cells[b]].push_back(cells[a]);
            }
        break;
    case Topology::Kind::Grid: {
        int w = spec.topology.grid_width;
        int h = spec.topology.grid_height;
        auto at = [&](int r, int c) { return cells[static_cast<size_t>(r) * w + c]; };
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                std::set<int> nbrs;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        if (!spec.topology.moore && dr != 0 && dc != 0) continue;
                        int rr = r + dr;
                        int cc = c + dc;
                        if (spec.topology.wrap) {
                            rr = (rr + h) % h;
                            cc = (cc + w) % w;
                        } else if (rr < 0 || rr >= h || cc < 0 || cc >= w) {
                            continue;
                        }
                        int other = at(rr, cc);
                        if (other != at(r, c)) nbrs.insert(other);
                    }
                lay.adjacency[at(r, c)].assign(nbrs.begin(), nbrs.end());
            }
        break;
    }
    case Topology::Kind::Edges:
        for (auto [a, b] : spec.topology.edges) {
            lay.adjacency[a].push_back(b);
            lay.adjacency[b].push_back(a);
        }
        break;
    }
    for (auto& row : lay.adjacency) std::sort(row.begin(), row.end());
    return lay;
}

std::string instance_label(const ModelSpec& spec, const Layout& layout, int instance) {
    const AgentType& type = spec.types[layout.type_of[instance]];
    if (type.is_global) return "globals";
    return type.name + "[" + std::to_string(layout.ordinal_of[instance]) + "]";
}

// --- validation ---

namespace {

ExprType domain_type(const ValueDomain& d) {
    return d.kind == ValueDomain::Kind::Boolean ? ExprType::Bool : ExprType::Number;
}

// Initializer scope: parameters, plus global variables for regular agent
// types. Globals initialize before any agent, so the order is well defined.
struct InitScope : TypeScope {
    const ModelSpec& spec;
    bool in_globals;

    InitScope(const ModelSpec& s, bool g) : spec(s), in_globals(g) {}

    std::optional<ExprType> lookup(const std::string& name) const override {
        if (name == "index") return ExprType::Number; // agent's ordinal within its type
        if (!in_globals && spec.has_globals())
            if (const VarDecl* v = spec.types[0].find_var(name)) return domain_type(v->domain);
        if (const ParamDecl* p = spec.find_param(name)) return domain_type(p->domain);
        return std::nullopt;
    }
    std::optional<ExprType> lookup_neighbor(const std::string&) const override {
        return std::nullopt;
    }
};

void check_domain(const ValueDomain& d, const std::string& where, int line, Diagnostics& diags) {
    if (d.kind == ValueDomain::Kind::Boolean) return;
    if (d.kind == ValueDomain::Kind::Decimal && (d.digits < 1 || d.digits > 9))
        diags.push_back({line, 0, where + ": decimal precision must be 1..9 digits"});
    if (d.hi < d.lo) diags.push_back({line, 0, where + ": empty range"});
    int digits = d.kind == ValueDomain::Kind::Decimal ? d.digits : 0;
    if (!d.lo.scaled(digits) || !d.hi.scaled(digits))
        diags.push_back({line, 0, where + ": bounds not representable in the domain"});
}

} // namespace

AgentScope::AgentScope(const ModelSpec& spec, const AgentType& type) : spec_(spec), type_(type) {
    allow_quantifiers = true;
}

std::optional<ExprType> AgentScope::lookup(const std::string& name) const {
    if (name == "index") return ExprType::Number;
    if (const VarDecl* v = type_.find_var(name)) return domain_type(v->domain);
    if (spec_.has_globals())
        if (const VarDecl* v = spec_.types[0].find_var(name)) return domain_type(v->domain);
    if (const ParamDecl* p = spec_.find_param(name)) return domain_type(p->domain);
    return std::nullopt;
}

std::optional<ExprType> AgentScope::lookup_neighbor(const std::string& name) const {
    std::optional<ExprType> found;
    for (const auto& t : spec_.types) {
        if (t.is_global) continue;
        const VarDecl* v = t.find_var(name);
        if (!v) continue;
        ExprType et = domain_type(v->domain);
        if (found && *found != et) return std::nullopt;
        found = et;
    }
    return found;
}

Diagnostics validate_model(const ModelSpec& spec) {
    Diagnostics diags;
    auto err = [&](int line, const std::string& msg) { diags.push_back({line, 0, msg}); };

    int regular = 0;
    std::set<std::string> type_names;
    std::set<std::string> rule_ids;
    std::set<std::string> all_var_names;
    for (const auto& t : spec.types) {
        if (!t.is_global) ++regular;
        if (!type_names.insert(t.name).second) err(0, "duplicate agent type '" + t.name + "'");
        if (t.count < 1) err(0, "agent type '" + t.name + "' needs a positive population");
        if (t.is_global && t.count != 1) err(0, "globals is a singleton");

        std::set<std::string> var_names;
        for (const auto& v : t.vars) {
            if (v.name == "index")
                err(v.line, t.name + ": 'index' is reserved (the agent's ordinal)");
            if (!var_names.insert(v.name).second)
                err(v.line, t.name + ": duplicate variable '" + v.name + "'");
            all_var_names.insert(v.name);
            check_domain(v.domain, t.name + "." + v.name, v.line, diags);

            if (v.init == VarDecl::Init::Random) {
                if (!v.domain.cardinality())
                    err(v.line, t.name + "." + v.name + ": domain too large for random init");
            } else if (v.init == VarDecl::Init::Choice) {
                if (v.choices.empty())
                    err(v.line, t.name + "." + v.name + ": empty choice list");
                for (const auto& c : v.choices)
                    if (!v.domain.contains(c))
                        err(v.line, t.name + "." + v.name + ": choice " + c.to_string() +
                                        " outside domain " + v.domain.describe());
            } else if (v.init_expr) {
                InitScope scope(spec, t.is_global);
                auto et = check_expr(*v.init_expr, scope, diags);
                if (et && *et != domain_type(v.domain))
                    err(v.line, t.name + "." + v.name + ": initializer type does not match " +
                                    v.domain.describe());
            } else {
                err(v.line, t.name + "." + v.name + ": missing initializer");
            }
        }

        for (const auto& r : t.rules) {
            if (!rule_ids.insert(r.id).second)
                err(r.line, "duplicate rule id '" + r.id + "' (ids are global)");
            AgentScope cond_scope(spec, t);
            cond_scope.allow_bernoulli = true;
            auto ct = r.condition ? check_expr(*r.condition, cond_scope, diags)
                                  : std::optional<ExprType>();
            if (ct && *ct != ExprType::Bool)
                err(r.line, "rule '" + r.id + "': condition must be boolean");

            std::set<std::string> written;
            if (r.writes.empty()) err(r.line, "rule '" + r.id + "': no assignments");
            for (const auto& w : r.writes) {
                const VarDecl* v = t.find_var(w.var);
                if (!v) {
                    err(r.line, "rule '" + r.id + "': '" + w.var + "' is not a variable of " +
                                    t.name);
                    continue;
                }
                if (!written.insert(w.var).second)
                    err(r.line, "rule '" + r.id + "': '" + w.var + "' assigned twice");
                AgentScope val_scope(spec, t);
                auto vt = check_expr(*w.value, val_scope, diags);
                if (vt && *vt != domain_type(v->domain))
                    err(r.line, "rule '" + r.id + "': value type does not match " + w.var +
                                    " : " + v->domain.describe());
            }
        }
    }
    if (regular == 0) err(0, "model needs at least one agent type");

    std::set<std::string> param_names;
    for (const auto& p : spec.params) {
        if (!param_names.insert(p.name).second) err(p.line, "duplicate param '" + p.name + "'");
        if (p.name == "index") err(p.line, "'index' is reserved (the agent's ordinal)");
        if (all_var_names.count(p.name))
            err(p.line, "param '" + p.name + "' collides with a variable name");
        check_domain(p.domain, "param " + p.name, p.line, diags);
        if (p.value && !p.domain.contains(*p.value))
            err(p.line, "param '" + p.name + "': default " + p.value->to_string() +
                            " outside domain " + p.domain.describe());
    }

    int non_global = 0;
    for (const auto& t : spec.types)
        if (!t.is_global) non_global += t.count;

    if (spec.topology.kind == Topology::Kind::Grid) {
        long long cells = static_cast<long long>(spec.topology.grid_width) *
                          spec.topology.grid_height;
        if (spec.topology.grid_width < 1 || spec.topology.grid_height < 1)
            err(0, "grid dimensions must be positive");
        else if (cells != non_global)
            err(0, "grid has " + std::to_string(cells) + " cells but the population totals " +
                       std::to_string(non_global));
    }
    if (spec.horizon < 0) err(0, "horizon cannot be negative");
    return diags;
}

// --- canonical printing ---

namespace {

std::string schedule_word(ScheduleKind k) {
    switch (k) {
    case ScheduleKind::Synchronous: return "synchronous";
    case ScheduleKind::AsyncRandom: return "async-random";
    case ScheduleKind::AsyncFixed: return "async-fixed";
    }
    return "?";
}

void print_type_body(const AgentType& t, std::ostream& out) {
    for (const auto& v : t.vars) {
        out << "  var " << v.name << " : " << v.domain.describe() << " = ";
        switch (v.init) {
        case VarDecl::Init::Random:
            out << "random";
            break;
        case VarDecl::Init::Choice: {
            out << "{ ";
            for (size_t i = 0; i < v.choices.size(); ++i) {
                if (i) out << ", ";
                out << v.domain.render(v.choices[i]);
            }
            out << " }";
            break;
        }
        case VarDecl::Init::Expr:
            out << print_expr(*v.init_expr);
            break;
        }
        out << "\n";
    }
    for (const auto& r : t.rules) {
        out << "  rule " << r.id << ": when " << print_expr(*r.condition) << " -> ";
        for (size_t i = 0; i < r.writes.size(); ++i) {
            if (i) out << ", ";
            out << r.writes[i].var << " := " << print_expr(*r.writes[i].value);
        }
        out << "\n";
    }
}

} // namespace

std::string print_model_spec(const ModelSpec& spec) {
    std::ostringstream out;
    out << "model " << spec.name << "\n";

    for (const auto& t : spec.types) {
        out << "\n" << (t.is_global ? "globals" : "agent " + t.name) << "\n";
        print_type_body(t, out);
        out << "end\n";
    }

    out << "\npopulation\n";
    for (const auto& t : spec.types)
        if (!t.is_global) out << "  " << t.name << " = " << t.count << "\n";
    out << "end\n";

    out << "\ntopology\n";
    switch (spec.topology.kind) {
    case Topology::Kind::Complete:
        out << "  complete\n";
        break;
    case Topology::Kind::Grid:
        out << "  grid " << spec.topology.grid_width << " " << spec.topology.grid_height << " "
            << (spec.topology.moore ? "moore" : "vonNeumann")
            << (spec.topology.wrap ? " wrap" : "") << "\n";
        break;
    case Topology::Kind::Edges: {
        Layout lay = build_layout(spec);
        for (auto [a, b] : spec.topology.edges)
            out << "  edge " << instance_label(spec, lay, a) << " "
                << instance_label(spec, lay, b) << "\n";
        break;
    }
    }
    out << "end\n";

    out << "\nschedule\n";
    out << "  order " << schedule_word(spec.schedule) << "\n";
    out << "  firing " << (spec.firing == FiringMode::FirstMatch ? "first-match" : "all-matching")
        << "\n";
    out << "  horizon " << spec.horizon << "\n";
    out << "end\n";

    if (!spec.params.empty()) {
        out << "\nparams\n";
        for (const auto& p : spec.params) {
            out << "  " << p.name << " : " << p.domain.describe() << " = ";
            out << (p.value ? p.domain.render(*p.value) : "free") << "\n";
        }
        out << "end\n";
    }
    return out.str();
}

uint64_t fnv1a64(const std::string& text) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t model_hash(const ModelSpec& spec) { return fnv1a64(print_model_spec(spec)); }

std::map<std::string, Value> resolve_params(const ModelSpec& spec,
                                            const std::map<std::string, Value>& overrides) {
    std::map<std::string, Value> out;
    for (const auto& [name, value] : overrides) {
        const ParamDecl* p = spec.find_param(name);
        if (!p) throw RuntimeError("unknown param '" + name + "'");
        if (!p->domain.contains(value))
            throw RuntimeError("param '" + name + "': value " + value.to_string() +
                               " outside domain " + p->domain.describe());
        out[name] = value;
    }
    std::string missing;
    for (const auto& p : spec.params) {
        if (out.count(p.name)) continue;
        if (p.value) {
            out[p.name] = *p.value;
        } else {
            if (!missing.empty()) missing += ", ";
            missing += p.name;
        }
    }
    if (!missing.empty()) throw RuntimeError("unbound params: " + missing);
    return out;
}

std::vector<std::string> unbound_params(const ModelSpec& spec,
                                        const std::map<std::string, Value>& overrides) {
    std::vector<std::string> out;
    for (const auto& p : spec.params)
        if (!p.value && !overrides.count(p.name)) out.push_back(p.name);
    return out;
}

} // namespace abmtk
