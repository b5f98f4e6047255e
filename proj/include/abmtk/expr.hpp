#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abmtk/diagnostics.hpp"
#include "abmtk/value.hpp"

namespace abmtk {

// Expression language shared by rule conditions, rule assignments and
// variable initializers.
//
//   expr    := or-expr
//   or      := and ("or" and)*
//   and     := unary ("and" unary)*
//   unary   := "not" unary | cmp
//   cmp     := sum (("=" | "!=" | "<" | "<=" | ">" | ">=") sum)?
//   sum     := term (("+" | "-") term)*
//   term    := factor (("*" | "/") factor)*
//   factor  := "-" factor | primary
//   primary := literal | name | "neigh" "." name
//            | "any" "(" expr ")" | "all" "(" expr ")"
//            | "bernoulli" "(" expr ")" | "(" expr ")"
//
// "and"/"or" short-circuit, and "any"/"all" stop at the first neighbour that
// decides the result. Evaluation order is part of the reproducibility
// contract because bernoulli() consumes a generator draw when reached.

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Literal, Name, NeighVar, Not, Neg, Binary, Any, All, Bernoulli };

    Kind kind = Kind::Literal;
    Value literal;                // Literal
    std::string name;             // Name, NeighVar
    std::string op;               // Binary
    std::vector<ExprPtr> kids;    // operands / quantifier body / probability
    int line = 0;
    int col = 0;
};

ExprPtr make_literal(Value v);
ExprPtr make_name(std::string name);

bool expr_equal(const Expr& a, const Expr& b);

// Canonical form, re-parseable; parentheses appear only where precedence
// requires them.
std::string print_expr(const Expr& e);

enum class ExprType { Bool, Number };

// Name resolution and feature gates for static checking. lookup returns the
// type of a bare identifier (own variable, global, or parameter), or nullopt
// if undeclared.
struct TypeScope {
    virtual ~TypeScope() = default;
    virtual std::optional<ExprType> lookup(const std::string& name) const = 0;
    virtual std::optional<ExprType> lookup_neighbor(const std::string& name) const = 0;
    bool allow_quantifiers = false;
    bool allow_bernoulli = false;
};

// Appends problems to diags; returns nullopt when the expression is
// ill-typed. Enforces: no nested quantifiers, neigh.* only inside a
// quantifier body, bernoulli never inside a quantifier body.
std::optional<ExprType> check_expr(const Expr& e, const TypeScope& scope, Diagnostics& diags);

// Runtime hooks for evaluation. Quantifier bodies are evaluated once per
// neighbour after select_neighbor(k); nesting is rejected statically so a
// single selection slot suffices. Neighbours whose type lacks one of the
// neigh.* variables the body mentions are skipped: any() never considers
// them, all() is not constrained by them.
struct EvalEnv {
    virtual ~EvalEnv() = default;
    virtual Value read(const std::string& name) = 0;
    virtual Value read_neighbor(const std::string& name) = 0;
    virtual int neighbor_count() = 0;
    virtual void select_neighbor(int k) = 0;
    virtual bool neighbor_declares(const std::string& name) = 0;
    virtual bool draw_bernoulli(const Rational& p) = 0;
};

Value eval_expr(const Expr& e, EvalEnv& env);

// Distinct neigh.* names mentioned in the subtree, in first-mention order.
std::vector<std::string> collect_neigh_names(const Expr& e);

// --- Tokenizer, shared with the model and pattern readers ---

struct Token {
    enum class Kind { Ident, Number, Symbol, End };
    Kind kind = Kind::End;
    std::string text;
    int line = 0;
    int col = 0;
};

class Tokenizer {
public:
    Tokenizer(const std::string& text, int line);

    const Token& peek() const { return tokens_[pos_]; }
    const Token& peek2() const { return tokens_[std::min(pos_ + 1, tokens_.size() - 1)]; }
    Token next() { return tokens_[pos_ == tokens_.size() - 1 ? pos_ : pos_++]; }
    bool at_end() const { return peek().kind == Token::Kind::End; }

    bool accept_symbol(const std::string& s);
    bool accept_ident(const std::string& s);
    // Consume the expected token or record a diagnostic and return false.
    bool expect_symbol(const std::string& s, Diagnostics& diags);
    std::optional<std::string> expect_ident(Diagnostics& diags, const std::string& what);

private:
    std::vector<Token> tokens_;
    size_t pos_ = 0;
};

// Parses a full expression from the tokenizer. Returns nullptr after
// recording a diagnostic on malformed input.
ExprPtr parse_expr(Tokenizer& toks, Diagnostics& diags);

// Convenience: parse a whole string as one expression; trailing tokens are an
// error.
ExprPtr parse_expr_string(const std::string& text, int line, Diagnostics& diags);

} // namespace abmtk
