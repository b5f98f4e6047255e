#include "abmtk/pattern.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace abmtk {

bool eval_cmp(const Rational& lhs, CmpOp op, const Rational& rhs) {
    switch (op) {
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ne: return lhs != rhs;
    case CmpOp::Ge: return lhs >= rhs;
    case CmpOp::Gt: return lhs > rhs;
    }
    return false;
}

std::string cmp_text(CmpOp op) {
    switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Ge: return ">=";
    case CmpOp::Gt: return ">";
    }
    return "?";
}

const PatternDecl* PatternFile::find(const std::string& name) const {
    for (const auto& d : patterns)
        if (d.name == name) return &d;
    return nullptr;
}

const MacroDef* PatternFile::find_macro(const std::string& name) const {
    for (const auto& m : macros)
        if (m.name == name) return &m;
    return nullptr;
}

namespace {

// Same reassembly the model parser uses for words like count-where.
std::optional<std::string> dashed_word(Tokenizer& toks, Diagnostics& diags,
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

std::optional<Rational> signed_rational(Tokenizer& toks, Diagnostics& diags) {
    bool neg = toks.accept_symbol("-");
    if (toks.peek().kind != Token::Kind::Number) {
        diags.push_back({toks.peek().line, toks.peek().col, "expected a number"});
        return std::nullopt;
    }
    Token t = toks.next();
    auto r = parse_rational(t.text);
    if (!r) {
        diags.push_back({t.line, t.col, "malformed number '" + t.text + "'"});
        return std::nullopt;
    }
    return neg ? -*r : *r;
}

std::optional<Value> literal_value(Tokenizer& toks, Diagnostics& diags) {
    if (toks.accept_ident("true")) return Value::of_bool(true);
    if (toks.accept_ident("false")) return Value::of_bool(false);
    auto r = signed_rational(toks, diags);
    if (!r) return std::nullopt;
    return Value::of_number(*r);
}

std::optional<CmpOp> accept_cmp_op(Tokenizer& toks) {
    if (toks.accept_symbol("<=")) return CmpOp::Le;
    if (toks.accept_symbol(">=")) return CmpOp::Ge;
    if (toks.accept_symbol("!=")) return CmpOp::Ne;
    if (toks.accept_symbol("<")) return CmpOp::Lt;
    if (toks.accept_symbol(">")) return CmpOp::Gt;
    if (toks.accept_symbol("=")) return CmpOp::Eq;
    return std::nullopt;
}

bool line_done(Tokenizer& toks, Diagnostics& diags) {
    if (toks.at_end()) return true;
    diags.push_back({toks.peek().line, toks.peek().col,
                     "unexpected '" + toks.peek().text + "' at end of line"});
    return false;
}

// Hands out one tokenized line at a time, skipping blank and comment lines.
struct Cursor {
    std::vector<std::string> lines;
    size_t next = 0;

    explicit Cursor(const std::string& text) {
        std::string cur;
        for (char c : text) {
            if (c == '\n') {
                lines.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) lines.push_back(cur);
    }

    std::optional<Tokenizer> take() {
        while (next < lines.size()) {
            Tokenizer t(lines[next], static_cast<int>(next + 1));
            ++next;
            if (!t.at_end()) return t;
        }
        return std::nullopt;
    }
};

bool peek_ident(const Tokenizer& toks, const std::string& word) {
    return toks.peek().kind == Token::Kind::Ident && toks.peek().text == word;
}

std::optional<StateLeaf> parse_leaf(Tokenizer& toks, Diagnostics& diags) {
    StateLeaf leaf;
    if (toks.accept_symbol("@")) {
        auto slot = toks.expect_ident(diags, "a slot name");
        if (!slot) return std::nullopt;
        leaf.slot = *slot;
        if (!toks.expect_symbol(".", diags)) return std::nullopt;
        auto var = toks.expect_ident(diags, "a variable name");
        if (!var) return std::nullopt;
        leaf.var = *var;
    } else {
        auto head = toks.expect_ident(diags, "a variable or agent type");
        if (!head) return std::nullopt;
        if (toks.accept_symbol("@")) {
            leaf.type_name = *head;
            auto slot = toks.expect_ident(diags, "a slot name");
            if (!slot) return std::nullopt;
            leaf.slot = *slot;
            if (!toks.expect_symbol(".", diags)) return std::nullopt;
            auto var = toks.expect_ident(diags, "a variable name");
            if (!var) return std::nullopt;
            leaf.var = *var;
        } else if (toks.accept_symbol(".")) {
            leaf.type_name = *head;
            auto var = toks.expect_ident(diags, "a variable name");
            if (!var) return std::nullopt;
            leaf.var = *var;
        } else {
            leaf.var = *head;
        }
    }

    if (peek_ident(toks, "not")) {
        auto word = dashed_word(toks, diags, "a range");
        if (!word) return std::nullopt;
        if (*word != "not-null") {
            diags.push_back({toks.peek().line, toks.peek().col, "unknown range '" + *word + "'"});
            return std::nullopt;
        }
        leaf.range.kind = ValueRange::Kind::NotNull;
    } else if (toks.accept_ident("in")) {
        leaf.range.kind = ValueRange::Kind::Interval;
        if (!toks.expect_symbol("[", diags)) return std::nullopt;
        auto lo = literal_value(toks, diags);
        if (!lo) return std::nullopt;
        if (!toks.expect_symbol(",", diags)) return std::nullopt;
        auto hi = literal_value(toks, diags);
        if (!hi) return std::nullopt;
        if (!toks.expect_symbol("]", diags)) return std::nullopt;
        leaf.range.lo = *lo;
        leaf.range.hi = *hi;
    } else if (toks.accept_symbol("=")) {
        if (toks.accept_symbol("$")) {
            leaf.range.kind = ValueRange::Kind::EqBinding;
            auto b = toks.expect_ident(diags, "a binding name");
            if (!b) return std::nullopt;
            leaf.range.binding = *b;
        } else {
            leaf.range.kind = ValueRange::Kind::EqLiteral;
            auto v = literal_value(toks, diags);
            if (!v) return std::nullopt;
            leaf.range.literal = *v;
        }
    } else {
        diags.push_back({toks.peek().line, toks.peek().col,
                         "expected a range: 'not-null', '= value', '= $name' or 'in [lo, hi]'"});
        return std::nullopt;
    }

    if (toks.accept_ident("as")) {
        if (!toks.expect_symbol("$", diags)) return std::nullopt;
        auto cap = toks.expect_ident(diags, "a capture name");
        if (!cap) return std::nullopt;
        leaf.capture = *cap;
    }
    return leaf;
}

std::optional<StatePattern> parse_state_node(Tokenizer toks, Cursor& cur, Diagnostics& diags) {
    StatePattern node;
    node.line = toks.peek().line;
    if (peek_ident(toks, "compose") || peek_ident(toks, "subset")) {
        node.kind = toks.peek().text == "compose" ? StatePattern::Kind::Compose
                                                  : StatePattern::Kind::Subset;
        toks.next();
        if (!line_done(toks, diags)) return std::nullopt;
        for (;;) {
            auto line = cur.take();
            if (!line) {
                diags.push_back({node.line, 0, "unterminated compose/subset block"});
                return std::nullopt;
            }
            if (line->accept_ident("end")) {
                if (!line_done(*line, diags)) return std::nullopt;
                break;
            }
            auto child = parse_state_node(std::move(*line), cur, diags);
            if (!child) return std::nullopt;
            node.children.push_back(std::move(*child));
        }
        return node;
    }
    node.kind = StatePattern::Kind::Leaf;
    auto leaf = parse_leaf(toks, diags);
    if (!leaf) return std::nullopt;
    node.leaf = std::move(*leaf);
    if (!line_done(toks, diags)) return std::nullopt;
    return node;
}

// "from <leaf>" inline, or a bare "from" opening a block of state nodes
// (an implicit compose; a single child collapses to itself).
std::optional<StatePattern> parse_constraint(Tokenizer& line, Cursor& cur, Diagnostics& diags,
                                             int ln) {
    if (!line.at_end()) {
        StatePattern leaf;
        leaf.kind = StatePattern::Kind::Leaf;
        leaf.line = ln;
        auto l = parse_leaf(line, diags);
        if (!l) return std::nullopt;
        leaf.leaf = std::move(*l);
        if (!line_done(line, diags)) return std::nullopt;
        return leaf;
    }
    StatePattern node;
    node.kind = StatePattern::Kind::Compose;
    node.line = ln;
    for (;;) {
        auto next = cur.take();
        if (!next) {
            diags.push_back({ln, 0, "unterminated from/to block"});
            return std::nullopt;
        }
        if (next->accept_ident("end")) {
            if (!line_done(*next, diags)) return std::nullopt;
            break;
        }
        auto child = parse_state_node(std::move(*next), cur, diags);
        if (!child) return std::nullopt;
        node.children.push_back(std::move(*child));
    }
    if (node.children.size() == 1) return std::move(node.children[0]);
    return node;
}

std::optional<EventPattern> parse_set_body(Cursor& cur, Diagnostics& diags, int decl_line) {
    EventPattern ev;
    ev.line = decl_line;
    bool saw_rules = false, saw_from = false, saw_to = false, saw_observe = false;
    for (;;) {
        auto line = cur.take();
        if (!line) {
            diags.push_back({decl_line, 0, "unterminated set block"});
            return std::nullopt;
        }
        int ln = line->peek().line;
        if (line->accept_ident("end")) {
            if (!line_done(*line, diags)) return std::nullopt;
            break;
        }
        if (line->accept_ident("rules")) {
            if (saw_rules) diags.push_back({ln, 0, "duplicate rules line"});
            saw_rules = true;
            if (!line->accept_symbol("*")) {
                do {
                    auto id = line->expect_ident(diags, "a rule id");
                    if (!id) return std::nullopt;
                    ev.rules.push_back(*id);
                } while (line->accept_symbol(","));
            }
            if (!line_done(*line, diags)) return std::nullopt;
        } else if (line->accept_ident("from")) {
            if (saw_from) diags.push_back({ln, 0, "duplicate from constraint"});
            saw_from = true;
            auto c = parse_constraint(*line, cur, diags, ln);
            if (!c) return std::nullopt;
            ev.from = std::move(*c);
        } else if (line->accept_ident("to")) {
            if (saw_to) diags.push_back({ln, 0, "duplicate to constraint"});
            saw_to = true;
            auto c = parse_constraint(*line, cur, diags, ln);
            if (!c) return std::nullopt;
            ev.to = std::move(*c);
        } else if (line->accept_ident("observe")) {
            if (saw_observe) diags.push_back({ln, 0, "duplicate observe line"});
            saw_observe = true;
            do {
                auto v = line->expect_ident(diags, "a variable name");
                if (!v) return std::nullopt;
                ev.observe.push_back(*v);
            } while (line->accept_symbol(","));
            if (!line_done(*line, diags)) return std::nullopt;
        } else {
            diags.push_back({ln, line->peek().col,
                             "expected rules, from, to, observe or end"});
            return std::nullopt;
        }
    }
    return ev;
}

std::optional<ComplexPattern> parse_cet_node(Tokenizer toks, Cursor& cur, Diagnostics& diags) {
    ComplexPattern node;
    node.line = toks.peek().line;
    if (peek_ident(toks, "seq") || peek_ident(toks, "all") || peek_ident(toks, "any")) {
        std::string kw = toks.next().text;
        node.kind = kw == "seq"   ? ComplexPattern::Kind::Seq
                    : kw == "all" ? ComplexPattern::Kind::All
                                  : ComplexPattern::Kind::Any;
        if (node.kind != ComplexPattern::Kind::Any && toks.accept_ident("within")) {
            if (toks.peek().kind != Token::Kind::Number) {
                diags.push_back({toks.peek().line, toks.peek().col, "expected a step count"});
                return std::nullopt;
            }
            Token t = toks.next();
            auto r = parse_rational(t.text);
            if (!r || !r->is_integer()) {
                diags.push_back({t.line, t.col, "window must be a whole number of steps"});
                return std::nullopt;
            }
            node.window = static_cast<int>(r->num);
        }
        if (!line_done(toks, diags)) return std::nullopt;
        for (;;) {
            auto line = cur.take();
            if (!line) {
                diags.push_back({node.line, 0, "unterminated " + kw + " block"});
                return std::nullopt;
            }
            if (line->accept_ident("end")) {
                if (!line_done(*line, diags)) return std::nullopt;
                break;
            }
            auto child = parse_cet_node(std::move(*line), cur, diags);
            if (!child) return std::nullopt;
            node.children.push_back(std::move(*child));
        }
        return node;
    }
    if (toks.accept_ident("implicit")) {
        node.kind = ComplexPattern::Kind::Implicit;
        auto m = dashed_word(toks, diags, "a macro name");
        if (!m) return std::nullopt;
        node.implicit.macro = *m;
        if (toks.accept_ident("ever"))
            node.implicit.series = ImplicitSpec::Series::Ever;
        else if (toks.accept_ident("final"))
            node.implicit.series = ImplicitSpec::Series::Final;
        else if (toks.accept_ident("delta"))
            node.implicit.series = ImplicitSpec::Series::Delta;
        else {
            diags.push_back({toks.peek().line, toks.peek().col,
                             "expected ever, final or delta"});
            return std::nullopt;
        }
        auto op = accept_cmp_op(toks);
        if (!op) {
            diags.push_back({toks.peek().line, toks.peek().col, "expected a comparison"});
            return std::nullopt;
        }
        node.implicit.op = *op;
        auto t = signed_rational(toks, diags);
        if (!t) return std::nullopt;
        node.implicit.threshold = *t;
        if (!line_done(toks, diags)) return std::nullopt;
        return node;
    }
    node.kind = ComplexPattern::Kind::Ref;
    auto name = dashed_word(toks, diags, "a pattern reference");
    if (!name) return std::nullopt;
    node.ref = *name;
    if (!line_done(toks, diags)) return std::nullopt;
    return node;
}

std::optional<MacroDef> parse_macro_line(Tokenizer& toks, Diagnostics& diags, int ln) {
    MacroDef def;
    def.line = ln;
    auto name = dashed_word(toks, diags, "a macro name");
    if (!name) return std::nullopt;
    def.name = *name;
    if (!toks.expect_symbol("=", diags)) return std::nullopt;
    auto agg = dashed_word(toks, diags, "an aggregate");
    if (!agg) return std::nullopt;
    if (*agg == "mean" || *agg == "sum") {
        def.agg = *agg == "mean" ? MacroDef::Agg::Mean : MacroDef::Agg::Sum;
        if (!toks.expect_symbol("(", diags)) return std::nullopt;
        auto var = toks.expect_ident(diags, "a variable name");
        if (!var) return std::nullopt;
        def.var = *var;
        if (!toks.expect_symbol(")", diags)) return std::nullopt;
    } else if (*agg == "count-where" || *agg == "proportion-where") {
        def.agg = *agg == "count-where" ? MacroDef::Agg::CountWhere
                                        : MacroDef::Agg::ProportionWhere;
        if (!toks.expect_symbol("(", diags)) return std::nullopt;
        def.condition = parse_expr(toks, diags);
        if (!def.condition) return std::nullopt;
        if (!toks.expect_symbol(")", diags)) return std::nullopt;
    } else {
        diags.push_back({ln, 0, "unknown aggregate '" + *agg +
                                    "'; expected mean, sum, count-where or proportion-where"});
        return std::nullopt;
    }
    if (!line_done(toks, diags)) return std::nullopt;
    return def;
}

// Reads "<keyword> <name>" then one body node then a closing "end".
std::optional<std::string> decl_name(Tokenizer& toks, Diagnostics& diags) {
    auto name = dashed_word(toks, diags, "a pattern name");
    if (!name) return std::nullopt;
    if (!line_done(toks, diags)) return std::nullopt;
    return name;
}

bool expect_end_line(Cursor& cur, Diagnostics& diags, int decl_line) {
    auto line = cur.take();
    if (!line) {
        diags.push_back({decl_line, 0, "missing 'end' for this declaration"});
        return false;
    }
    if (!line->accept_ident("end")) {
        diags.push_back({line->peek().line, line->peek().col,
                         "expected 'end' to close the declaration"});
        return false;
    }
    return line_done(*line, diags);
}

} // namespace

std::optional<PatternFile> parse_pattern_file(const std::string& text, Diagnostics& diags) {
    PatternFile file;
    size_t before = diags.size();
    Cursor cur(text);
    for (;;) {
        auto line = cur.take();
        if (!line) break;
        int ln = line->peek().line;
        if (line->accept_ident("macro")) {
            auto def = parse_macro_line(*line, diags, ln);
            if (!def) break;
            file.macros.push_back(std::move(*def));
        } else if (line->accept_ident("sst")) {
            PatternDecl d;
            d.kind = PatternDecl::Kind::Sst;
            d.line = ln;
            auto name = decl_name(*line, diags);
            if (!name) break;
            d.name = *name;
            auto body = cur.take();
            if (!body) {
                diags.push_back({ln, 0, "sst declaration has no body"});
                break;
            }
            auto node = parse_state_node(std::move(*body), cur, diags);
            if (!node) break;
            d.state = std::move(*node);
            if (!expect_end_line(cur, diags, ln)) break;
            file.patterns.push_back(std::move(d));
        } else if (line->accept_ident("set")) {
            PatternDecl d;
            d.kind = PatternDecl::Kind::Set;
            d.line = ln;
            auto name = decl_name(*line, diags);
            if (!name) break;
            d.name = *name;
            auto ev = parse_set_body(cur, diags, ln);
            if (!ev) break;
            d.body.kind = ComplexPattern::Kind::Event;
            d.body.line = ln;
            d.body.event = std::move(*ev);
            file.patterns.push_back(std::move(d));
        } else if (line->accept_ident("cet")) {
            PatternDecl d;
            d.kind = PatternDecl::Kind::Cet;
            d.line = ln;
            auto name = decl_name(*line, diags);
            if (!name) break;
            d.name = *name;
            auto body = cur.take();
            if (!body) {
                diags.push_back({ln, 0, "cet declaration has no body"});
                break;
            }
            auto node = parse_cet_node(std::move(*body), cur, diags);
            if (!node) break;
            d.body = std::move(*node);
            if (!expect_end_line(cur, diags, ln)) break;
            file.patterns.push_back(std::move(d));
        } else {
            diags.push_back({ln, line->peek().col,
                             "expected macro, sst, set or cet"});
            break;
        }
    }
    if (diags.size() > before) return std::nullopt;
    return file;
}

namespace {

std::string range_text(const ValueRange& r) {
    switch (r.kind) {
    case ValueRange::Kind::NotNull: return "not-null";
    case ValueRange::Kind::EqLiteral: return "= " + r.literal.to_string();
    case ValueRange::Kind::EqBinding: return "= $" + r.binding;
    case ValueRange::Kind::Interval:
        return "in [" + r.lo.to_string() + ", " + r.hi.to_string() + "]";
    }
    return "?";
}

std::string leaf_text(const StateLeaf& l) {
    std::string out = l.type_name;
    if (!l.slot.empty()) out += "@" + l.slot;
    if (!out.empty()) out += ".";
    out += l.var + " " + range_text(l.range);
    if (!l.capture.empty()) out += " as $" + l.capture;
    return out;
}

void print_state(const StatePattern& p, int indent, std::string& out) {
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    if (p.kind == StatePattern::Kind::Leaf) {
        out += pad + leaf_text(p.leaf) + "\n";
        return;
    }
    out += pad + (p.kind == StatePattern::Kind::Compose ? "compose" : "subset") + "\n";
    for (const auto& c : p.children) print_state(c, indent + 1, out);
    out += pad + "end\n";
}

void print_constraint(const std::string& kw, const StatePattern& p, std::string& out) {
    if (p.kind == StatePattern::Kind::Leaf) {
        out += "  " + kw + " " + leaf_text(p.leaf) + "\n";
        return;
    }
    out += "  " + kw + "\n";
    if (p.kind == StatePattern::Kind::Compose) {
        for (const auto& c : p.children) print_state(c, 2, out);
    } else {
        print_state(p, 2, out);
    }
    out += "  end\n";
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
    return out;
}

void print_event(const EventPattern& ev, std::string& out) {
    if (!ev.rules.empty()) out += "  rules " + join(ev.rules) + "\n";
    if (ev.from) print_constraint("from", *ev.from, out);
    if (ev.to) print_constraint("to", *ev.to, out);
    if (!ev.observe.empty()) out += "  observe " + join(ev.observe) + "\n";
}

void print_cet(const ComplexPattern& p, int indent, std::string& out) {
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    switch (p.kind) {
    case ComplexPattern::Kind::Ref: out += pad + p.ref + "\n"; return;
    case ComplexPattern::Kind::Implicit: {
        const ImplicitSpec& im = p.implicit;
        std::string series = im.series == ImplicitSpec::Series::Ever    ? "ever"
                             : im.series == ImplicitSpec::Series::Final ? "final"
                                                                        : "delta";
        out += pad + "implicit " + im.macro + " " + series + " " + cmp_text(im.op) + " " +
               im.threshold.to_literal_string() + "\n";
        return;
    }
    case ComplexPattern::Kind::Seq:
    case ComplexPattern::Kind::All:
    case ComplexPattern::Kind::Any: {
        std::string kw = p.kind == ComplexPattern::Kind::Seq   ? "seq"
                         : p.kind == ComplexPattern::Kind::All ? "all"
                                                               : "any";
        out += pad + kw;
        if (p.window) out += " within " + std::to_string(*p.window);
        out += "\n";
        for (const auto& c : p.children) print_cet(c, indent + 1, out);
        out += pad + "end\n";
        return;
    }
    case ComplexPattern::Kind::Event:
        // Only reachable for a set declaration body; handled by the caller.
        return;
    }
}

} // namespace

std::string print_pattern_file(const PatternFile& file) {
    std::string out;
    for (const auto& m : file.macros) out += print_macro(m) + "\n";
    bool first = file.macros.empty();
    for (const auto& d : file.patterns) {
        if (!first) out += "\n";
        first = false;
        switch (d.kind) {
        case PatternDecl::Kind::Sst:
            out += "sst " + d.name + "\n";
            print_state(d.state, 1, out);
            out += "end\n";
            break;
        case PatternDecl::Kind::Set:
            out += "set " + d.name + "\n";
            print_event(d.body.event, out);
            out += "end\n";
            break;
        case PatternDecl::Kind::Cet:
            out += "cet " + d.name + "\n";
            print_cet(d.body, 1, out);
            out += "end\n";
            break;
        }
    }
    return out;
}

std::vector<std::string> referenced_vars(const EventPattern& p) {
    std::vector<std::string> out;
    std::function<void(const StatePattern&)> add = [&](const StatePattern& n) {
        if (n.kind == StatePattern::Kind::Leaf) {
            if (std::find(out.begin(), out.end(), n.leaf.var) == out.end())
                out.push_back(n.leaf.var);
            return;
        }
        for (const auto& c : n.children) add(c);
    };
    if (p.from) add(*p.from);
    if (p.to) add(*p.to);
    return out;
}

EventPattern project_event(const EventPattern& p, const std::vector<std::string>& vars) {
    std::vector<std::string> refd = referenced_vars(p);
    for (const auto& v : vars)
        if (std::find(refd.begin(), refd.end(), v) == refd.end())
            throw RuntimeError("projection variable '" + v + "' is not referenced by the pattern");

    auto kept_var = [&](const std::string& v) {
        return std::find(vars.begin(), vars.end(), v) != vars.end();
    };

    // A leaf survives when its variable is kept and, for =$x ranges, the
    // capture it depends on still has a surviving declarer. Captures can
    // only reference earlier leaves, so shrinking to a fixpoint terminates
    // with the right set.
    std::set<std::string> live;
    std::function<void(const StatePattern&, std::set<std::string>&)> collect_caps =
        [&](const StatePattern& n, std::set<std::string>& into) {
            if (n.kind == StatePattern::Kind::Leaf) {
                if (!n.leaf.capture.empty()) into.insert(n.leaf.capture);
                return;
            }
            for (const auto& c : n.children) collect_caps(c, into);
        };
    if (p.from) collect_caps(*p.from, live);
    if (p.to) collect_caps(*p.to, live);

    auto leaf_kept = [&](const StateLeaf& l) {
        if (!kept_var(l.var)) return false;
        if (l.range.kind == ValueRange::Kind::EqBinding && !live.count(l.range.binding))
            return false;
        return true;
    };
    for (;;) {
        std::set<std::string> next;
        std::function<void(const StatePattern&)> scan = [&](const StatePattern& n) {
            if (n.kind == StatePattern::Kind::Leaf) {
                if (leaf_kept(n.leaf) && !n.leaf.capture.empty()) next.insert(n.leaf.capture);
                return;
            }
            for (const auto& c : n.children) scan(c);
        };
        if (p.from) scan(*p.from);
        if (p.to) scan(*p.to);
        if (next == live) break;
        live = std::move(next);
    }

    // nullopt means the subtree became vacuous (always true).
    std::function<std::optional<StatePattern>(const StatePattern&)> prune =
        [&](const StatePattern& n) -> std::optional<StatePattern> {
        if (n.kind == StatePattern::Kind::Leaf)
            return leaf_kept(n.leaf) ? std::optional<StatePattern>(n) : std::nullopt;
        if (n.kind == StatePattern::Kind::Compose) {
            StatePattern out = n;
            out.children.clear();
            for (const auto& c : n.children)
                if (auto pc = prune(c)) out.children.push_back(std::move(*pc));
            if (out.children.empty()) return std::nullopt;
            if (out.children.size() == 1) return std::move(out.children[0]);
            return out;
        }
        // Subset: once any branch is vacuous the disjunction always holds.
        StatePattern out = n;
        out.children.clear();
        for (const auto& c : n.children) {
            auto pc = prune(c);
            if (!pc) return std::nullopt;
            out.children.push_back(std::move(*pc));
        }
        return out;
    };

    EventPattern out;
    out.rules = p.rules;
    out.line = p.line;
    if (p.from) out.from = prune(*p.from);
    if (p.to) out.to = prune(*p.to);
    out.observe = vars;
    return out;
}

namespace {

struct Checker {
    const PatternFile& file;
    const ModelSpec& spec;
    Diagnostics& diags;

    // Domains a variable selector can refer to. Empty means unresolvable.
    std::vector<const ValueDomain*> domains_for(const StateLeaf& leaf, int line) {
        std::vector<const ValueDomain*> out;
        if (!leaf.type_name.empty()) {
            int t = spec.type_index(leaf.type_name);
            if (t < 0) {
                diags.push_back({line, 0, "unknown agent type '" + leaf.type_name + "'"});
                return out;
            }
            const VarDecl* v = spec.types[t].find_var(leaf.var);
            if (!v) {
                diags.push_back({line, 0, "type " + leaf.type_name + " declares no variable '" +
                                              leaf.var + "'"});
                return out;
            }
            out.push_back(&v->domain);
            return out;
        }
        for (const auto& type : spec.types)
            if (const VarDecl* v = type.find_var(leaf.var)) out.push_back(&v->domain);
        if (out.empty())
            diags.push_back({line, 0, "no agent type declares variable '" + leaf.var + "'"});
        return out;
    }

    void check_leaf(const StateLeaf& leaf, int line, bool event_context,
                    std::set<std::string>& captures) {
        if (event_context && (!leaf.type_name.empty() || !leaf.slot.empty()))
            diags.push_back({line, 0,
                             "agent qualifiers and slots have no meaning in event constraints"});
        auto domains = domains_for(leaf, line);
        const ValueRange& r = leaf.range;
        switch (r.kind) {
        case ValueRange::Kind::NotNull:
            break;
        case ValueRange::Kind::EqBinding:
            if (!captures.count(r.binding))
                diags.push_back({line, 0, "binding $" + r.binding +
                                              " is not declared by any earlier leaf"});
            break;
        case ValueRange::Kind::EqLiteral: {
            bool fits = domains.empty();
            for (const ValueDomain* d : domains) fits |= d->contains(r.literal);
            if (!fits)
                diags.push_back({line, 0, "value " + r.literal.to_string() +
                                              " lies outside every declared domain of '" +
                                              leaf.var + "'"});
            break;
        }
        case ValueRange::Kind::Interval: {
            if (r.lo.boolean || r.hi.boolean) {
                diags.push_back({line, 0, "interval bounds must be numeric"});
                break;
            }
            if (r.hi.number < r.lo.number) {
                diags.push_back({line, 0, "empty interval: " + r.lo.to_string() + " > " +
                                              r.hi.to_string()});
                break;
            }
            bool fits = domains.empty();
            for (const ValueDomain* d : domains)
                fits |= d->kind != ValueDomain::Kind::Boolean && d->contains(r.lo) &&
                        d->contains(r.hi);
            if (!fits)
                diags.push_back({line, 0, "interval [" + r.lo.to_string() + ", " +
                                              r.hi.to_string() +
                                              "] lies outside every declared domain of '" +
                                              leaf.var + "'"});
            break;
        }
        }
        if (!leaf.capture.empty()) captures.insert(leaf.capture);
    }

    void check_state(const StatePattern& p, bool event_context, std::set<std::string>& captures) {
        if (p.kind == StatePattern::Kind::Leaf) {
            check_leaf(p.leaf, p.line, event_context, captures);
            return;
        }
        if (p.children.empty()) {
            diags.push_back({p.line, 0, p.kind == StatePattern::Kind::Compose
                                            ? "compose needs at least one child"
                                            : "subset needs at least one child"});
            return;
        }
        for (const auto& c : p.children) check_state(c, event_context, captures);
    }

    void check_event(const EventPattern& ev, int line) {
        for (const auto& id : ev.rules) {
            bool known = false;
            for (const auto& type : spec.types)
                for (const auto& rule : type.rules) known |= rule.id == id;
            if (!known) diags.push_back({line, 0, "unknown rule '" + id + "'"});
        }
        std::set<std::string> captures;
        if (ev.from) check_state(*ev.from, true, captures);
        if (ev.to) check_state(*ev.to, true, captures);

        std::vector<std::string> refd = referenced_vars(ev);
        for (const auto& v : ev.observe)
            if (std::find(refd.begin(), refd.end(), v) == refd.end())
                diags.push_back({line, 0, "observed variable '" + v +
                                              "' is not referenced by the constraints"});
        if (!ev.observe.empty())
            for (const auto& v : refd)
                if (std::find(ev.observe.begin(), ev.observe.end(), v) == ev.observe.end())
                    diags.push_back({line, 0, "constraint references '" + v +
                                                  "' outside the observed set"});
    }

    // Follows reference chains through declarations seen so far.
    const ComplexPattern* resolve(const ComplexPattern& p,
                                  const std::set<std::string>& known) {
        const ComplexPattern* cur = &p;
        while (cur->kind == ComplexPattern::Kind::Ref) {
            if (!known.count(cur->ref)) return nullptr;
            const PatternDecl* d = file.find(cur->ref);
            if (!d || d->kind == PatternDecl::Kind::Sst) return nullptr;
            cur = &d->body;
        }
        return cur;
    }

    void check_cet(const ComplexPattern& p, bool nested, const std::set<std::string>& known) {
        switch (p.kind) {
        case ComplexPattern::Kind::Event:
            check_event(p.event, p.line);
            return;
        case ComplexPattern::Kind::Ref: {
            if (!known.count(p.ref)) {
                diags.push_back({p.line, 0, "unknown pattern '" + p.ref + "'"});
                return;
            }
            const PatternDecl* d = file.find(p.ref);
            if (d && d->kind == PatternDecl::Kind::Sst) {
                diags.push_back({p.line, 0, "'" + p.ref +
                                                "' is a state pattern and cannot be used as an "
                                                "event pattern"});
                return;
            }
            const ComplexPattern* root = resolve(p, known);
            if (nested && root && root->kind == ComplexPattern::Kind::Implicit)
                diags.push_back({p.line, 0, "implicit pattern '" + p.ref +
                                                "' cannot be combined with structural patterns"});
            return;
        }
        case ComplexPattern::Kind::Implicit: {
            if (nested)
                diags.push_back({p.line, 0,
                                 "implicit patterns cannot be combined with structural patterns"});
            if (!file.find_macro(p.implicit.macro))
                diags.push_back({p.line, 0, "unknown macro '" + p.implicit.macro + "'"});
            return;
        }
        case ComplexPattern::Kind::Seq:
        case ComplexPattern::Kind::All:
        case ComplexPattern::Kind::Any: {
            if (p.children.empty())
                diags.push_back({p.line, 0, "structural pattern needs at least one child"});
            if (p.window && *p.window <= 0)
                diags.push_back({p.line, 0, "window must be positive"});
            for (const auto& c : p.children) check_cet(c, true, known);
            return;
        }
        }
    }
};

} // namespace

Diagnostics check_patterns(const PatternFile& file, const ModelSpec& spec) {
    Diagnostics diags;
    Checker ck{file, spec, diags};

    std::set<std::string> macro_names;
    for (const auto& m : file.macros) {
        if (!macro_names.insert(m.name).second)
            diags.push_back({m.line, 0, "duplicate macro '" + m.name + "'"});
        for (const auto& d : validate_macro(spec, m)) diags.push_back(d);
    }

    std::set<std::string> known;
    for (const auto& d : file.patterns) {
        if (known.count(d.name))
            diags.push_back({d.line, 0, "duplicate pattern '" + d.name + "'"});
        switch (d.kind) {
        case PatternDecl::Kind::Sst: {
            std::set<std::string> captures;
            ck.check_state(d.state, false, captures);
            break;
        }
        case PatternDecl::Kind::Set:
            ck.check_event(d.body.event, d.line);
            break;
        case PatternDecl::Kind::Cet:
            ck.check_cet(d.body, false, known);
            break;
        }
        known.insert(d.name);
    }
    return diags;
}

PatternFile parse_patterns_checked(const std::string& text, const ModelSpec& spec) {
    Diagnostics diags;
    auto file = parse_pattern_file(text, diags);
    if (!file) throw RuntimeError("pattern parse failed:\n" + format_diagnostics(diags));
    Diagnostics sem = check_patterns(*file, spec);
    if (!sem.empty()) throw RuntimeError("pattern check failed:\n" + format_diagnostics(sem));
    return *file;
}

PatternFile load_pattern_file(const std::string& path, const ModelSpec& spec) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open pattern file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_patterns_checked(buf.str(), spec);
    } catch (const RuntimeError& e) {
        throw RuntimeError(path + ": " + e.what());
    }
}

} // namespace abmtk
