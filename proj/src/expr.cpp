#include "abmtk/expr.hpp"

#include <cctype>
#include <sstream>

namespace abmtk {

ExprPtr make_literal(Value v) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Literal;
    e->literal = v;
    return e;
}

ExprPtr make_name(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Name;
    e->name = std::move(name);
    return e;
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.name != b.name || a.op != b.op) return false;
    if (a.kind == Expr::Kind::Literal && !(a.literal == b.literal)) return false;
    if (a.kids.size() != b.kids.size()) return false;
    for (size_t i = 0; i < a.kids.size(); ++i)
        if (!expr_equal(*a.kids[i], *b.kids[i])) return false;
    return true;
}

// --- printing ---

namespace {

int op_precedence(const std::string& op) {
    if (op == "or") return 1;
    if (op == "and") return 2;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/") return 6;
    return 4; // comparisons
}

int node_precedence(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Binary: return op_precedence(e.op);
    case Expr::Kind::Not: return 3;
    case Expr::Kind::Neg: return 7;
    default: return 8;
    }
}

void print_rec(const Expr& e, int min_prec, std::ostream& out) {
    int prec = node_precedence(e);
    bool parens = prec < min_prec;
    if (parens) out << '(';
    switch (e.kind) {
    case Expr::Kind::Literal:
        out << e.literal.to_string();
        break;
    case Expr::Kind::Name:
        out << e.name;
        break;
    case Expr::Kind::NeighVar:
        out << "neigh." << e.name;
        break;
    case Expr::Kind::Not:
        out << "not ";
        print_rec(*e.kids[0], 3, out);
        break;
    case Expr::Kind::Neg:
        out << '-';
        print_rec(*e.kids[0], 7, out);
        break;
    case Expr::Kind::Binary:
        // Left-associative chains reprint without parens; the right operand
        // is demoted one level so (a - b) - c and a - (b - c) stay distinct.
        print_rec(*e.kids[0], prec, out);
        out << ' ' << e.op << ' ';
        print_rec(*e.kids[1], prec + 1, out);
        break;
    case Expr::Kind::Any:
        out << "any(";
        print_rec(*e.kids[0], 0, out);
        out << ')';
        break;
    case Expr::Kind::All:
        out << "all(";
        print_rec(*e.kids[0], 0, out);
        out << ')';
        break;
    case Expr::Kind::Bernoulli:
        out << "bernoulli(";
        print_rec(*e.kids[0], 0, out);
        out << ')';
        break;
    }
    if (parens) out << ')';
}

} // namespace

std::string print_expr(const Expr& e) {
    std::ostringstream out;
    print_rec(e, 0, out);
    return out.str();
}

// --- static checking ---

namespace {

void type_error(const Expr& e, const std::string& msg, Diagnostics& diags) {
    diags.push_back({e.line, e.col, msg});
}

std::optional<ExprType> check_rec(const Expr& e, const TypeScope& scope, bool in_quant,
                                  Diagnostics& diags) {
    using K = Expr::Kind;
    switch (e.kind) {
    case K::Literal:
        return e.literal.boolean ? ExprType::Bool : ExprType::Number;
    case K::Name: {
        auto t = scope.lookup(e.name);
        if (!t) type_error(e, "undeclared name '" + e.name + "'", diags);
        return t;
    }
    case K::NeighVar: {
        if (!in_quant) {
            type_error(e, "neigh." + e.name + " is only valid inside any()/all()", diags);
            return std::nullopt;
        }
        auto t = scope.lookup_neighbor(e.name);
        if (!t) type_error(e, "no neighbour variable named '" + e.name + "'", diags);
        return t;
    }
    case K::Not: {
        auto t = check_rec(*e.kids[0], scope, in_quant, diags);
        if (t && *t != ExprType::Bool) type_error(e, "'not' needs a boolean operand", diags);
        return t ? std::optional<ExprType>(ExprType::Bool) : std::nullopt;
    }
    case K::Neg: {
        auto t = check_rec(*e.kids[0], scope, in_quant, diags);
        if (t && *t != ExprType::Number) type_error(e, "'-' needs a numeric operand", diags);
        return t ? std::optional<ExprType>(ExprType::Number) : std::nullopt;
    }
    case K::Binary: {
        auto lt = check_rec(*e.kids[0], scope, in_quant, diags);
        auto rt = check_rec(*e.kids[1], scope, in_quant, diags);
        if (!lt || !rt) return std::nullopt;
        if (e.op == "and" || e.op == "or") {
            if (*lt != ExprType::Bool || *rt != ExprType::Bool)
                type_error(e, "'" + e.op + "' needs boolean operands", diags);
            return ExprType::Bool;
        }
        if (e.op == "=" || e.op == "!=") {
            if (*lt != *rt)
                type_error(e, "'" + e.op + "' compares values of the same type", diags);
            return ExprType::Bool;
        }
        if (e.op == "<" || e.op == "<=" || e.op == ">" || e.op == ">=") {
            if (*lt != ExprType::Number || *rt != ExprType::Number)
                type_error(e, "'" + e.op + "' needs numeric operands", diags);
            return ExprType::Bool;
        }
        if (*lt != ExprType::Number || *rt != ExprType::Number)
            type_error(e, "'" + e.op + "' needs numeric operands", diags);
        return ExprType::Number;
    }
    case K::Any:
    case K::All: {
        const char* which = e.kind == K::Any ? "any" : "all";
        if (!scope.allow_quantifiers) {
            type_error(e, std::string(which) + "() is not allowed here", diags);
            return std::nullopt;
        }
        if (in_quant) {
            type_error(e, "quantifiers cannot be nested", diags);
            return std::nullopt;
        }
        auto t = check_rec(*e.kids[0], scope, true, diags);
        if (t && *t != ExprType::Bool)
            type_error(e, std::string(which) + "() needs a boolean body", diags);
        return ExprType::Bool;
    }
    case K::Bernoulli: {
        if (!scope.allow_bernoulli) {
            type_error(e, "bernoulli() is only allowed in rule conditions", diags);
            return std::nullopt;
        }
        if (in_quant) {
            type_error(e, "bernoulli() cannot appear inside any()/all()", diags);
            return std::nullopt;
        }
        auto t = check_rec(*e.kids[0], scope, in_quant, diags);
        if (t && *t != ExprType::Number)
            type_error(e, "bernoulli() needs a numeric probability", diags);
        return ExprType::Bool;
    }
    }
    return std::nullopt;
}

} // namespace

std::optional<ExprType> check_expr(const Expr& e, const TypeScope& scope, Diagnostics& diags) {
    return check_rec(e, scope, false, diags);
}

// --- evaluation ---

Value eval_expr(const Expr& e, EvalEnv& env) {
    using K = Expr::Kind;
    switch (e.kind) {
    case K::Literal:
        return e.literal;
    case K::Name:
        return env.read(e.name);
    case K::NeighVar:
        return env.read_neighbor(e.name);
    case K::Not:
        return Value::of_bool(!eval_expr(*e.kids[0], env).flag);
    case K::Neg:
        return Value::of_number(Rational(0) - eval_expr(*e.kids[0], env).number);
    case K::Binary: {
        const std::string& op = e.op;
        if (op == "and") {
            if (!eval_expr(*e.kids[0], env).flag) return Value::of_bool(false);
            return eval_expr(*e.kids[1], env);
        }
        if (op == "or") {
            if (eval_expr(*e.kids[0], env).flag) return Value::of_bool(true);
            return eval_expr(*e.kids[1], env);
        }
        Value a = eval_expr(*e.kids[0], env);
        Value b = eval_expr(*e.kids[1], env);
        if (op == "=") return Value::of_bool(a == b);
        if (op == "!=") return Value::of_bool(!(a == b));
        if (op == "<") return Value::of_bool(a.number < b.number);
        if (op == "<=") return Value::of_bool(a.number <= b.number);
        if (op == ">") return Value::of_bool(b.number < a.number);
        if (op == ">=") return Value::of_bool(b.number <= a.number);
        if (op == "+") return Value::of_number(a.number + b.number);
        if (op == "-") return Value::of_number(a.number - b.number);
        if (op == "*") return Value::of_number(a.number * b.number);
        if (op == "/") {
            if (b.number.num == 0) throw RuntimeError("division by zero");
            return Value::of_number(a.number / b.number);
        }
        throw RuntimeError("unknown operator '" + op + "'");
    }
    case K::Any:
    case K::All: {
        const bool is_any = e.kind == K::Any;
        std::vector<std::string> needed = collect_neigh_names(*e.kids[0]);
        int n = env.neighbor_count();
        for (int k = 0; k < n; ++k) {
            env.select_neighbor(k);
            bool usable = true;
            for (const auto& name : needed)
                if (!env.neighbor_declares(name)) {
                    usable = false;
                    break;
                }
            if (!usable) continue;
            if (eval_expr(*e.kids[0], env).flag == is_any) return Value::of_bool(is_any);
        }
        return Value::of_bool(!is_any);
    }
    case K::Bernoulli: {
        Rational p = eval_expr(*e.kids[0], env).number;
        if (p < Rational(0) || Rational(1) < p)
            throw RuntimeError("bernoulli probability " + p.to_string() + " outside [0,1]");
        return Value::of_bool(env.draw_bernoulli(p));
    }
    }
    throw RuntimeError("unreachable expression kind");
}

namespace {

void collect_neigh_rec(const Expr& e, std::vector<std::string>& out) {
    if (e.kind == Expr::Kind::NeighVar) {
        for (const auto& s : out)
            if (s == e.name) return;
        out.push_back(e.name);
        return;
    }
    for (const auto& k : e.kids) collect_neigh_rec(*k, out);
}

} // namespace

std::vector<std::string> collect_neigh_names(const Expr& e) {
    std::vector<std::string> out;
    collect_neigh_rec(e, out);
    return out;
}

// --- tokenizer ---

Tokenizer::Tokenizer(const std::string& text, int line) {
    int col = 1;
    size_t i = 0;
    auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < text.size()) {
        char c = text[i];
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++col;
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        Token t;
        t.line = line;
        t.col = col;
        if (is_ident_start(c)) {
            size_t j = i;
            while (j < text.size() && is_ident(text[j])) ++j;
            t.kind = Token::Kind::Ident;
            t.text = text.substr(i, j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size() && text[j] == '.' && j + 1 < text.size() &&
                std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                ++j;
                while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            }
            t.kind = Token::Kind::Number;
            t.text = text.substr(i, j - i);
        } else {
            static const char* two[] = {":=", "->", "!=", "<=", ">=", "..", "--"};
            t.kind = Token::Kind::Symbol;
            t.text = std::string(1, c);
            if (i + 1 < text.size()) {
                std::string pair = text.substr(i, 2);
                for (const char* s : two)
                    if (pair == s) t.text = pair;
            }
        }
        col += static_cast<int>(t.text.size());
        i += t.text.size();
        tokens_.push_back(std::move(t));
    }
    Token end;
    end.kind = Token::Kind::End;
    end.line = line;
    end.col = col;
    tokens_.push_back(end);
}

bool Tokenizer::accept_symbol(const std::string& s) {
    if (peek().kind == Token::Kind::Symbol && peek().text == s) {
        next();
        return true;
    }
    return false;
}

bool Tokenizer::accept_ident(const std::string& s) {
    if (peek().kind == Token::Kind::Ident && peek().text == s) {
        next();
        return true;
    }
    return false;
}

bool Tokenizer::expect_symbol(const std::string& s, Diagnostics& diags) {
    if (accept_symbol(s)) return true;
    diags.push_back({peek().line, peek().col,
                     "expected '" + s + "', found '" + (at_end() ? "end" : peek().text) + "'"});
    return false;
}

std::optional<std::string> Tokenizer::expect_ident(Diagnostics& diags, const std::string& what) {
    if (peek().kind == Token::Kind::Ident) return next().text;
    diags.push_back({peek().line, peek().col,
                     "expected " + what + ", found '" + (at_end() ? "end" : peek().text) + "'"});
    return std::nullopt;
}

// --- parsing ---

namespace {

ExprPtr parse_or(Tokenizer& toks, Diagnostics& diags);

ExprPtr node_at(const Token& t, Expr::Kind kind) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->line = t.line;
    e->col = t.col;
    return e;
}

ExprPtr parse_call(Tokenizer& toks, Diagnostics& diags, const Token& head, Expr::Kind kind) {
    if (!toks.expect_symbol("(", diags)) return nullptr;
    ExprPtr body = parse_or(toks, diags);
    if (!body) return nullptr;
    if (!toks.expect_symbol(")", diags)) return nullptr;
    auto e = node_at(head, kind);
    std::const_pointer_cast<Expr>(e)->kids.push_back(body);
    return e;
}

ExprPtr parse_primary(Tokenizer& toks, Diagnostics& diags) {
    const Token t = toks.peek();
    if (t.kind == Token::Kind::Number) {
        toks.next();
        auto r = parse_rational(t.text);
        if (!r) {
            diags.push_back({t.line, t.col, "bad number '" + t.text + "'"});
            return nullptr;
        }
        auto e = node_at(t, Expr::Kind::Literal);
        std::const_pointer_cast<Expr>(e)->literal = Value::of_number(*r);
        return e;
    }
    if (t.kind == Token::Kind::Ident) {
        if (t.text == "true" || t.text == "false") {
            toks.next();
            auto e = node_at(t, Expr::Kind::Literal);
            std::const_pointer_cast<Expr>(e)->literal = Value::of_bool(t.text == "true");
            return e;
        }
        if (t.text == "any" || t.text == "all" || t.text == "bernoulli") {
            toks.next();
            Expr::Kind k = t.text == "any"   ? Expr::Kind::Any
                           : t.text == "all" ? Expr::Kind::All
                                             : Expr::Kind::Bernoulli;
            return parse_call(toks, diags, t, k);
        }
        if (t.text == "neigh") {
            toks.next();
            if (!toks.expect_symbol(".", diags)) return nullptr;
            auto name = toks.expect_ident(diags, "a variable name after 'neigh.'");
            if (!name) return nullptr;
            auto e = node_at(t, Expr::Kind::NeighVar);
            std::const_pointer_cast<Expr>(e)->name = *name;
            return e;
        }
        toks.next();
        auto e = node_at(t, Expr::Kind::Name);
        std::const_pointer_cast<Expr>(e)->name = t.text;
        return e;
    }
    if (t.kind == Token::Kind::Symbol && t.text == "(") {
        toks.next();
        ExprPtr inner = parse_or(toks, diags);
        if (!inner) return nullptr;
        if (!toks.expect_symbol(")", diags)) return nullptr;
        return inner;
    }
    diags.push_back({t.line, t.col,
                     "expected an expression, found '" + (toks.at_end() ? "end" : t.text) + "'"});
    return nullptr;
}

ExprPtr parse_factor(Tokenizer& toks, Diagnostics& diags) {
    const Token t = toks.peek();
    if (t.kind == Token::Kind::Symbol && t.text == "-") {
        toks.next();
        ExprPtr kid = parse_factor(toks, diags);
        if (!kid) return nullptr;
        // Fold unary minus into numeric literals so -0.5 round-trips as one
        // token.
        if (kid->kind == Expr::Kind::Literal && !kid->literal.boolean) {
            auto e = node_at(t, Expr::Kind::Literal);
            std::const_pointer_cast<Expr>(e)->literal =
                Value::of_number(Rational(0) - kid->literal.number);
            return e;
        }
        auto e = node_at(t, Expr::Kind::Neg);
        std::const_pointer_cast<Expr>(e)->kids.push_back(kid);
        return e;
    }
    return parse_primary(toks, diags);
}

ExprPtr binary(const Token& at, const std::string& op, ExprPtr a, ExprPtr b) {
    auto e = node_at(at, Expr::Kind::Binary);
    auto m = std::const_pointer_cast<Expr>(e);
    m->op = op;
    m->kids = {std::move(a), std::move(b)};
    return e;
}

ExprPtr parse_term(Tokenizer& toks, Diagnostics& diags) {
    ExprPtr e = parse_factor(toks, diags);
    while (e && toks.peek().kind == Token::Kind::Symbol &&
           (toks.peek().text == "*" || toks.peek().text == "/")) {
        Token op = toks.next();
        ExprPtr rhs = parse_factor(toks, diags);
        if (!rhs) return nullptr;
        e = binary(op, op.text, e, rhs);
    }
    return e;
}

ExprPtr parse_sum(Tokenizer& toks, Diagnostics& diags) {
    ExprPtr e = parse_term(toks, diags);
    while (e && toks.peek().kind == Token::Kind::Symbol &&
           (toks.peek().text == "+" || toks.peek().text == "-")) {
        Token op = toks.next();
        ExprPtr rhs = parse_term(toks, diags);
        if (!rhs) return nullptr;
        e = binary(op, op.text, e, rhs);
    }
    return e;
}

ExprPtr parse_cmp(Tokenizer& toks, Diagnostics& diags) {
    ExprPtr e = parse_sum(toks, diags);
    if (e && toks.peek().kind == Token::Kind::Symbol) {
        const std::string& s = toks.peek().text;
        if (s == "=" || s == "!=" || s == "<" || s == "<=" || s == ">" || s == ">=") {
            Token op = toks.next();
            ExprPtr rhs = parse_sum(toks, diags);
            if (!rhs) return nullptr;
            e = binary(op, op.text, e, rhs);
        }
    }
    return e;
}

ExprPtr parse_unary(Tokenizer& toks, Diagnostics& diags) {
    const Token t = toks.peek();
    if (t.kind == Token::Kind::Ident && t.text == "not") {
        toks.next();
        ExprPtr kid = parse_unary(toks, diags);
        if (!kid) return nullptr;
        auto e = node_at(t, Expr::Kind::Not);
        std::const_pointer_cast<Expr>(e)->kids.push_back(kid);
        return e;
    }
    return parse_cmp(toks, diags);
}

ExprPtr parse_and(Tokenizer& toks, Diagnostics& diags) {
    ExprPtr e = parse_unary(toks, diags);
    while (e && toks.peek().kind == Token::Kind::Ident && toks.peek().text == "and") {
        Token op = toks.next();
        ExprPtr rhs = parse_unary(toks, diags);
        if (!rhs) return nullptr;
        e = binary(op, "and", e, rhs);
    }
    return e;
}

ExprPtr parse_or(Tokenizer& toks, Diagnostics& diags) {
    ExprPtr e = parse_and(toks, diags);
    while (e && toks.peek().kind == Token::Kind::Ident && toks.peek().text == "or") {
        Token op = toks.next();
        ExprPtr rhs = parse_and(toks, diags);
        if (!rhs) return nullptr;
        e = binary(op, "or", e, rhs);
    }
    return e;
}

} // namespace

ExprPtr parse_expr(Tokenizer& toks, Diagnostics& diags) {
    return parse_or(toks, diags);
}

ExprPtr parse_expr_string(const std::string& text, int line, Diagnostics& diags) {
    Tokenizer toks(text, line);
    ExprPtr e = parse_expr(toks, diags);
    if (e && !toks.at_end()) {
        diags.push_back({toks.peek().line, toks.peek().col,
                         "unexpected '" + toks.peek().text + "' after expression"});
        return nullptr;
    }
    return e;
}

} // namespace abmtk
