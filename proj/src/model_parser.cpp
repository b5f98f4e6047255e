#include "abmtk/model_parser.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

namespace abmtk {

namespace {

std::optional<Rational> parse_signed_rational(Tokenizer& toks, Diagnostics& diags) {
    bool neg = toks.accept_symbol("-");
    const Token t = toks.peek();
    if (t.kind != Token::Kind::Number) {
        diags.push_back({t.line, t.col, "expected a number"});
        return std::nullopt;
    }
    toks.next();
    auto r = parse_rational(t.text);
    if (!r) {
        diags.push_back({t.line, t.col, "bad number '" + t.text + "'"});
        return std::nullopt;
    }
    return neg ? -*r : *r;
}

std::optional<Value> parse_literal_value(Tokenizer& toks, Diagnostics& diags) {
    if (toks.accept_ident("true")) return Value::of_bool(true);
    if (toks.accept_ident("false")) return Value::of_bool(false);
    auto r = parse_signed_rational(toks, diags);
    if (!r) return std::nullopt;
    return Value::of_number(*r);
}

// Idents like async-random span a '-' symbol; reassemble them.
std::optional<std::string> parse_dashed_word(Tokenizer& toks, Diagnostics& diags,
                                             const std::string& what) {
    auto word = toks.expect_ident(diags, what);
    if (!word) return std::nullopt;
    while (toks.peek().kind == Token::Kind::Symbol && toks.peek().text == "-" &&
           toks.peek2().kind == Token::Kind::Ident) {
        toks.next();
        *word += "-" + toks.next().text;
    }
    return word;
}

struct RawEdge {
    std::string type_a, type_b;
    long long ord_a = 0, ord_b = 0;
    int line = 0;
};

struct ParserState {
    ModelSpec spec;
    std::vector<AgentType> agents;
    std::optional<AgentType> globals;
    std::vector<std::tuple<std::string, long long, int>> population; // name, count, line
    std::vector<RawEdge> raw_edges;

    AgentType pending;
    bool in_type = false;

    enum class Section { None, Type, Population, Topology, Schedule, Params };
    Section section = Section::None;

    bool seen_model = false;
    bool seen_population = false, seen_topology = false, seen_schedule = false,
         seen_params = false;
    bool seen_topology_kind = false;
};

void parse_var_line(ParserState& st, Tokenizer& toks, Diagnostics& diags) {
    VarDecl v;
    v.line = toks.peek().line;
    toks.next(); // 'var'
    auto name = toks.expect_ident(diags, "a variable name");
    if (!name) return;
    v.name = *name;
    if (!toks.expect_symbol(":", diags)) return;
    auto dom = parse_domain(toks, diags);
    if (!dom) return;
    v.domain = *dom;
    if (!toks.expect_symbol("=", diags)) return;

    if (toks.accept_ident("random")) {
        v.init = VarDecl::Init::Random;
    } else if (toks.accept_symbol("{")) {
        v.init = VarDecl::Init::Choice;
        do {
            auto val = parse_literal_value(toks, diags);
            if (!val) return;
            v.choices.push_back(*val);
        } while (toks.accept_symbol(","));
        if (!toks.expect_symbol("}", diags)) return;
    } else {
        v.init = VarDecl::Init::Expr;
        v.init_expr = parse_expr(toks, diags);
        if (!v.init_expr) return;
    }
    if (!toks.at_end()) {
        diags.push_back({toks.peek().line, toks.peek().col,
                         "unexpected '" + toks.peek().text + "' after variable declaration"});
        return;
    }
    st.pending.vars.push_back(std::move(v));
}

void parse_rule_line(ParserState& st, Tokenizer& toks, Diagnostics& diags) {
    Rule r;
    r.line = toks.peek().line;
    toks.next(); // 'rule'
    auto id = toks.expect_ident(diags, "a rule id");
    if (!id) return;
    r.id = *id;
    if (!toks.expect_symbol(":", diags)) return;
    if (!toks.accept_ident("when")) {
        diags.push_back({toks.peek().line, toks.peek().col, "expected 'when'"});
        return;
    }
    r.condition = parse_expr(toks, diags);
    if (!r.condition) return;
    if (!toks.expect_symbol("->", diags)) return;
    do {
        Assignment a;
        auto var = toks.expect_ident(diags, "a variable name");
        if (!var) return;
        a.var = *var;
        if (!toks.expect_symbol(":=", diags)) return;
        a.value = parse_expr(toks, diags);
        if (!a.value) return;
        r.writes.push_back(std::move(a));
    } while (toks.accept_symbol(","));
    if (!toks.at_end()) {
        diags.push_back({toks.peek().line, toks.peek().col,
                         "unexpected '" + toks.peek().text + "' after rule"});
        return;
    }
    st.pending.rules.push_back(std::move(r));
}

void parse_topology_line(ParserState& st, Tokenizer& toks, Diagnostics& diags) {
    const Token head = toks.peek();
    if (toks.accept_ident("complete")) {
        if (st.seen_topology_kind)
            diags.push_back({head.line, head.col, "topology already declared"});
        st.seen_topology_kind = true;
        st.spec.topology.kind = Topology::Kind::Complete;
        return;
    }
    if (toks.accept_ident("grid")) {
        if (st.seen_topology_kind)
            diags.push_back({head.line, head.col, "topology already declared"});
        st.seen_topology_kind = true;
        st.spec.topology.kind = Topology::Kind::Grid;
        auto w = parse_signed_rational(toks, diags);
        std::optional<Rational> h;
        if (w) h = parse_signed_rational(toks, diags);
        if (!w || !h || !w->is_integer() || !h->is_integer()) {
            diags.push_back({head.line, head.col, "grid needs integer width and height"});
            return;
        }
        st.spec.topology.grid_width = static_cast<int>(w->num);
        st.spec.topology.grid_height = static_cast<int>(h->num);
        if (toks.accept_ident("moore")) {
            st.spec.topology.moore = true;
        } else if (toks.accept_ident("vonNeumann")) {
            st.spec.topology.moore = false;
        } else {
            diags.push_back(
                {toks.peek().line, toks.peek().col, "expected 'vonNeumann' or 'moore'"});
            return;
        }
        st.spec.topology.wrap = toks.accept_ident("wrap");
        return;
    }
    if (toks.accept_ident("edge")) {
        if (st.seen_topology_kind && st.spec.topology.kind != Topology::Kind::Edges)
            diags.push_back({head.line, head.col, "topology already declared"});
        st.seen_topology_kind = true;
        st.spec.topology.kind = Topology::Kind::Edges;
        RawEdge e;
        e.line = head.line;
        for (int side = 0; side < 2; ++side) {
            auto name = toks.expect_ident(diags, "an agent type");
            if (!name) return;
            if (!toks.expect_symbol("[", diags)) return;
            auto idx = parse_signed_rational(toks, diags);
            if (!idx || !idx->is_integer() || idx->num < 0) {
                diags.push_back({head.line, head.col, "edge index must be a nonnegative integer"});
                return;
            }
            if (!toks.expect_symbol("]", diags)) return;
            (side == 0 ? e.type_a : e.type_b) = *name;
            (side == 0 ? e.ord_a : e.ord_b) = idx->num;
        }
        st.raw_edges.push_back(e);
        return;
    }
    diags.push_back({head.line, head.col, "expected 'complete', 'grid' or 'edge'"});
}

void parse_schedule_line(ParserState& st, Tokenizer& toks, Diagnostics& diags) {
    const Token head = toks.peek();
    if (toks.accept_ident("order")) {
        auto word = parse_dashed_word(toks, diags, "a schedule order");
        if (!word) return;
        if (*word == "synchronous") st.spec.schedule = ScheduleKind::Synchronous;
        else if (*word == "async-random") st.spec.schedule = ScheduleKind::AsyncRandom;
        else if (*word == "async-fixed") st.spec.schedule = ScheduleKind::AsyncFixed;
        else diags.push_back({head.line, head.col, "unknown order '" + *word + "'"});
        return;
    }
    if (toks.accept_ident("firing")) {
        auto word = parse_dashed_word(toks, diags, "a firing mode");
        if (!word) return;
        if (*word == "first-match") st.spec.firing = FiringMode::FirstMatch;
        else if (*word == "all-matching") st.spec.firing = FiringMode::AllMatching;
        else diags.push_back({head.line, head.col, "unknown firing mode '" + *word + "'"});
        return;
    }
    if (toks.accept_ident("horizon")) {
        auto n = parse_signed_rational(toks, diags);
        if (!n || !n->is_integer() || n->num < 0 || n->num > 1000000) {
            diags.push_back({head.line, head.col, "horizon must be an integer in [0, 1000000]"});
            return;
        }
        st.spec.horizon = static_cast<int>(n->num);
        return;
    }
    diags.push_back({head.line, head.col, "expected 'order', 'firing' or 'horizon'"});
}

void parse_param_line(ParserState& st, Tokenizer& toks, Diagnostics& diags) {
    ParamDecl p;
    p.line = toks.peek().line;
    auto name = toks.expect_ident(diags, "a param name");
    if (!name) return;
    p.name = *name;
    if (!toks.expect_symbol(":", diags)) return;
    auto dom = parse_domain(toks, diags);
    if (!dom) return;
    p.domain = *dom;
    if (!toks.expect_symbol("=", diags)) return;
    if (!toks.accept_ident("free")) {
        auto val = parse_literal_value(toks, diags);
        if (!val) return;
        p.value = *val;
    }
    st.spec.params.push_back(std::move(p));
}

void parse_population_line(ParserState& st, Tokenizer& toks, Diagnostics& diags) {
    int line = toks.peek().line;
    auto name = toks.expect_ident(diags, "an agent type");
    if (!name) return;
    if (!toks.expect_symbol("=", diags)) return;
    auto n = parse_signed_rational(toks, diags);
    if (!n || !n->is_integer() || n->num < 1 || n->num > 100000) {
        diags.push_back({line, 0, "population must be an integer in [1, 100000]"});
        return;
    }
    st.population.emplace_back(*name, n->num, line);
}

} // namespace

std::optional<ValueDomain> parse_domain(Tokenizer& toks, Diagnostics& diags) {
    const Token head = toks.peek();
    if (toks.accept_ident("bool")) return ValueDomain::boolean();
    bool dec = false;
    if (toks.accept_ident("dec")) dec = true;
    else if (!toks.accept_ident("int")) {
        diags.push_back({head.line, head.col, "expected a domain: bool, int[lo,hi] or dec[lo,hi]@digits"});
        return std::nullopt;
    }
    if (!toks.expect_symbol("[", diags)) return std::nullopt;
    auto lo = parse_signed_rational(toks, diags);
    if (!lo) return std::nullopt;
    if (!toks.expect_symbol(",", diags)) return std::nullopt;
    auto hi = parse_signed_rational(toks, diags);
    if (!hi) return std::nullopt;
    if (!toks.expect_symbol("]", diags)) return std::nullopt;
    if (!dec) {
        if (!lo->is_integer() || !hi->is_integer()) {
            diags.push_back({head.line, head.col, "int domain bounds must be integers"});
            return std::nullopt;
        }
        return ValueDomain::int_range(lo->num, hi->num);
    }
    if (!toks.expect_symbol("@", diags)) return std::nullopt;
    auto d = parse_signed_rational(toks, diags);
    if (!d || !d->is_integer() || d->num < 1 || d->num > 9) {
        diags.push_back({head.line, head.col, "decimal precision must be 1..9"});
        return std::nullopt;
    }
    return ValueDomain::decimal(*lo, *hi, static_cast<int>(d->num));
}

std::optional<ModelSpec> parse_model(const std::string& text, Diagnostics& diags) {
    ParserState st;
    st.spec.horizon = 1;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    using Section = ParserState::Section;

    while (std::getline(in, raw)) {
        ++line_no;
        Tokenizer toks(raw, line_no);
        if (toks.at_end()) continue;
        const Token head = toks.peek();
        const std::string& word = head.text;
        auto open_section = [&](Section s, bool& seen, const char* name) {
            if (st.section != Section::None)
                diags.push_back({head.line, head.col, "missing 'end' before '" + word + "'"});
            if (seen) diags.push_back({head.line, head.col, std::string(name) + " declared twice"});
            seen = true;
            st.section = s;
        };

        if (head.kind == Token::Kind::Ident && word == "model" && st.section == Section::None) {
            toks.next();
            if (st.seen_model) diags.push_back({head.line, head.col, "model declared twice"});
            st.seen_model = true;
            auto name = toks.expect_ident(diags, "a model name");
            if (name) st.spec.name = *name;
            continue;
        }
        if (head.kind == Token::Kind::Ident && word == "agent" && st.section == Section::None) {
            toks.next();
            st.section = Section::Type;
            st.in_type = true;
            st.pending = AgentType{};
            auto name = toks.expect_ident(diags, "an agent type name");
            if (name) st.pending.name = *name;
            continue;
        }
        if (head.kind == Token::Kind::Ident && word == "globals" && st.section == Section::None) {
            toks.next();
            if (st.globals) diags.push_back({head.line, head.col, "globals declared twice"});
            st.section = Section::Type;
            st.in_type = true;
            st.pending = AgentType{};
            st.pending.name = "globals";
            st.pending.is_global = true;
            continue;
        }
        if (head.kind == Token::Kind::Ident && st.section == Section::None) {
            if (word == "population") { toks.next(); open_section(Section::Population, st.seen_population, "population"); continue; }
            if (word == "topology") { toks.next(); open_section(Section::Topology, st.seen_topology, "topology"); continue; }
            if (word == "schedule") { toks.next(); open_section(Section::Schedule, st.seen_schedule, "schedule"); continue; }
            if (word == "params") { toks.next(); open_section(Section::Params, st.seen_params, "params"); continue; }
        }
        if (head.kind == Token::Kind::Ident && word == "end") {
            if (st.section == Section::None) {
                diags.push_back({head.line, head.col, "'end' without an open section"});
                continue;
            }
            if (st.section == Section::Type) {
                if (st.pending.is_global) st.globals = std::move(st.pending);
                else st.agents.push_back(std::move(st.pending));
                st.in_type = false;
            }
            st.section = Section::None;
            continue;
        }

        switch (st.section) {
        case Section::None:
            diags.push_back({head.line, head.col, "unexpected '" + word + "' outside any section"});
            break;
        case Section::Type:
            if (word == "var") parse_var_line(st, toks, diags);
            else if (word == "rule") parse_rule_line(st, toks, diags);
            else diags.push_back({head.line, head.col, "expected 'var' or 'rule'"});
            break;
        case Section::Population:
            parse_population_line(st, toks, diags);
            break;
        case Section::Topology:
            parse_topology_line(st, toks, diags);
            break;
        case Section::Schedule:
            parse_schedule_line(st, toks, diags);
            break;
        case Section::Params:
            parse_param_line(st, toks, diags);
            break;
        }
    }
    if (st.section != Section::None) diags.push_back({line_no, 0, "missing 'end' at end of file"});
    if (!st.seen_model) diags.push_back({0, 0, "missing 'model <name>' header"});

    if (st.globals) st.spec.types.push_back(std::move(*st.globals));
    for (auto& a : st.agents) st.spec.types.push_back(std::move(a));

    for (auto& [name, count, line] : st.population) {
        int t = st.spec.type_index(name);
        if (t < 0 || st.spec.types[t].is_global) {
            diags.push_back({line, 0, "population: unknown agent type '" + name + "'"});
            continue;
        }
        st.spec.types[t].count = static_cast<int>(count);
    }

    if (!st.raw_edges.empty()) {
        std::vector<int> first(st.spec.types.size(), 0);
        int total = 0;
        for (size_t t = 0; t < st.spec.types.size(); ++t) {
            first[t] = total;
            total += st.spec.types[t].count;
        }
        for (const auto& e : st.raw_edges) {
            int ta = st.spec.type_index(e.type_a);
            int tb = st.spec.type_index(e.type_b);
            bool ok = true;
            for (auto [t, ord, nm] : {std::tuple<int, long long, const std::string*>{ta, e.ord_a, &e.type_a},
                                      {tb, e.ord_b, &e.type_b}}) {
                if (t < 0 || st.spec.types[t].is_global) {
                    diags.push_back({e.line, 0, "edge: unknown agent type '" + *nm + "'"});
                    ok = false;
                } else if (ord >= st.spec.types[t].count) {
                    diags.push_back({e.line, 0, "edge: index " + std::to_string(ord) +
                                                    " out of range for " + *nm});
                    ok = false;
                }
            }
            if (!ok) continue;
            int a = first[ta] + static_cast<int>(e.ord_a);
            int b = first[tb] + static_cast<int>(e.ord_b);
            if (a == b) {
                diags.push_back({e.line, 0, "edge: self loops are not allowed"});
                continue;
            }
            st.spec.topology.edges.emplace_back(std::min(a, b), std::max(a, b));
        }
        std::sort(st.spec.topology.edges.begin(), st.spec.topology.edges.end());
        st.spec.topology.edges.erase(
            std::unique(st.spec.topology.edges.begin(), st.spec.topology.edges.end()),
            st.spec.topology.edges.end());
    }

    if (!diags.empty()) return std::nullopt;
    return st.spec;
}

ModelSpec load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    Diagnostics diags;
    auto spec = parse_model(buf.str(), diags);
    if (spec) {
        Diagnostics sem = validate_model(*spec);
        diags.insert(diags.end(), sem.begin(), sem.end());
    }
    if (!diags.empty())
        throw RuntimeError(path + ": model problems:\n" + format_diagnostics(diags));
    return *spec;
}

} // namespace abmtk
