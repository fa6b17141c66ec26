#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace levyexit {

/// Parameter bindings for drift evaluation, e.g. {"beta" -> 1.5}.
using ParamEnv = std::map<std::string, double>;

/// Parse failure with the offending position (0-based byte offset) and a
/// description of what was expected there.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t position, std::string expected)
        : std::runtime_error("parse error at position " + std::to_string(position) +
                             ": expected " + expected),
          position_(position), expected_(std::move(expected)) {}
    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnboundParameterError : public EvalError {
public:
    explicit UnboundParameterError(std::string name)
        : EvalError("unbound parameter '" + name + "'"), name_(std::move(name)) {}
    const std::string& parameter() const noexcept { return name_; }

private:
    std::string name_;
};

namespace detail {

struct ExprNode;
using ExprNodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { literal, var_x, param, add, sub, mul, div, neg, pow };
    Kind kind{Kind::literal};
    double value = 0.0;        // literal
    std::string name{};        // param
    int exponent = 0;          // pow
    ExprNodePtr lhs{}, rhs{};  // operands (neg and pow use lhs only)
};

} // namespace detail

/// An immutable drift expression f(params, x) over the grammar
///   literals, x, named parameters, + - * /, unary -, ^ with a non-negative
///   integer exponent, parentheses.
/// Trees are shared on copy and safe to use from multiple threads.
class DriftExpr {
public:
    DriftExpr() = default;
    explicit DriftExpr(detail::ExprNodePtr root) : root_(std::move(root)) {}
    const detail::ExprNode& root() const {
        if (!root_) throw std::logic_error("empty DriftExpr");
        return *root_;
    }
    bool empty() const noexcept { return root_ == nullptr; }

private:
    detail::ExprNodePtr root_;
};

namespace detail {

class DriftLexer {
public:
    enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, end };

    explicit DriftLexer(std::string_view text) : text_(text) { advance(); }

    Tok kind() const noexcept { return kind_; }
    std::size_t pos() const noexcept { return tok_pos_; }
    double number() const noexcept { return number_; }
    bool number_is_integer() const noexcept { return number_is_integer_; }
    const std::string& ident() const noexcept { return ident_; }

    void advance() {
        while (cursor_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[cursor_])))
            ++cursor_;
        tok_pos_ = cursor_;
        if (cursor_ >= text_.size()) {
            kind_ = Tok::end;
            return;
        }
        const char c = text_[cursor_];
        switch (c) {
        case '+': kind_ = Tok::plus; ++cursor_; return;
        case '-': kind_ = Tok::minus; ++cursor_; return;
        case '*': kind_ = Tok::star; ++cursor_; return;
        case '/': kind_ = Tok::slash; ++cursor_; return;
        case '^': kind_ = Tok::caret; ++cursor_; return;
        case '(': kind_ = Tok::lparen; ++cursor_; return;
        case ')': kind_ = Tok::rparen; ++cursor_; return;
        default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = cursor_;
            while (cursor_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[cursor_])) || text_[cursor_] == '_'))
                ++cursor_;
            ident_.assign(text_.substr(start, cursor_ - start));
            kind_ = Tok::ident;
            return;
        }
        throw ParseError(cursor_, "a number, name, operator or parenthesis (found '" +
                                      std::string(1, c) + "')");
    }

private:
    void lex_number() {
        const std::size_t start = cursor_;
        bool has_dot = false, has_exp = false;
        while (cursor_ < text_.size()) {
            const char c = text_[cursor_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                ++cursor_;
            } else if (c == '.' && !has_dot && !has_exp) {
                has_dot = true;
                ++cursor_;
            } else if ((c == 'e' || c == 'E') && !has_exp && cursor_ > start &&
                       std::isdigit(static_cast<unsigned char>(text_[cursor_ - 1]))) {
                // exponent needs at least one digit, optionally signed
                std::size_t peek = cursor_ + 1;
                if (peek < text_.size() && (text_[peek] == '+' || text_[peek] == '-')) ++peek;
                if (peek < text_.size() && std::isdigit(static_cast<unsigned char>(text_[peek]))) {
                    has_exp = true;
                    cursor_ = peek + 1;
                    while (cursor_ < text_.size() &&
                           std::isdigit(static_cast<unsigned char>(text_[cursor_])))
                        ++cursor_;
                } else {
                    break;
                }
            } else {
                break;
            }
        }
        const std::string_view body = text_.substr(start, cursor_ - start);
        if (body == ".") throw ParseError(start, "digits in numeric literal");
        double v = 0.0;
        const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
        if (res.ec != std::errc{} || res.ptr != body.data() + body.size())
            throw ParseError(start, "a valid numeric literal (got '" + std::string(body) + "')");
        number_ = v;
        number_is_integer_ = !has_dot && !has_exp;
        kind_ = Tok::number;
    }

    std::string_view text_;
    std::size_t cursor_ = 0;
    std::size_t tok_pos_ = 0;
    Tok kind_ = Tok::end;
    double number_ = 0.0;
    bool number_is_integer_ = false;
    std::string ident_;
};

// Grammar (precedence low to high, binary operators left-associative):
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' non-negative-integer-literal)*
//   atom   := number | 'x' | identifier | '(' expr ')'
class DriftParser {
public:
    explicit DriftParser(std::string_view text) : lex_(text) {}

    ExprNodePtr parse() {
        ExprNodePtr e = parse_expr();
        if (lex_.kind() != DriftLexer::Tok::end)
            throw ParseError(lex_.pos(), "end of expression or an operator");
        return e;
    }

private:
    using Tok = DriftLexer::Tok;

    static ExprNodePtr make(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

    ExprNodePtr parse_expr() {
        ExprNodePtr lhs = parse_term();
        while (lex_.kind() == Tok::plus || lex_.kind() == Tok::minus) {
            const auto op = lex_.kind() == Tok::plus ? ExprNode::Kind::add : ExprNode::Kind::sub;
            lex_.advance();
            ExprNodePtr rhs = parse_term();
            lhs = make({.kind = op, .lhs = lhs, .rhs = rhs});
        }
        return lhs;
    }

    ExprNodePtr parse_term() {
        ExprNodePtr lhs = parse_unary();
        while (lex_.kind() == Tok::star || lex_.kind() == Tok::slash) {
            const auto op = lex_.kind() == Tok::star ? ExprNode::Kind::mul : ExprNode::Kind::div;
            lex_.advance();
            ExprNodePtr rhs = parse_unary();
            lhs = make({.kind = op, .lhs = lhs, .rhs = rhs});
        }
        return lhs;
    }

    ExprNodePtr parse_unary() {
        if (lex_.kind() == Tok::minus) {
            lex_.advance();
            return make({.kind = ExprNode::Kind::neg, .lhs = parse_unary()});
        }
        return parse_power();
    }

    ExprNodePtr parse_power() {
        ExprNodePtr base = parse_atom();
        while (lex_.kind() == Tok::caret) {
            lex_.advance();
            if (lex_.kind() != Tok::number || !lex_.number_is_integer())
                throw ParseError(lex_.pos(), "a non-negative integer exponent");
            const double v = lex_.number();
            if (v > 1e9) throw ParseError(lex_.pos(), "an exponent no larger than 1e9");
            lex_.advance();
            base = make({.kind = ExprNode::Kind::pow, .exponent = static_cast<int>(v), .lhs = base});
        }
        return base;
    }

    ExprNodePtr parse_atom() {
        switch (lex_.kind()) {
        case Tok::number: {
            ExprNodePtr n = make({.kind = ExprNode::Kind::literal, .value = lex_.number()});
            lex_.advance();
            return n;
        }
        case Tok::ident: {
            ExprNodePtr n = lex_.ident() == "x"
                                ? make({.kind = ExprNode::Kind::var_x})
                                : make({.kind = ExprNode::Kind::param, .name = lex_.ident()});
            lex_.advance();
            return n;
        }
        case Tok::lparen: {
            lex_.advance();
            ExprNodePtr e = parse_expr();
            if (lex_.kind() != Tok::rparen) throw ParseError(lex_.pos(), "')'");
            lex_.advance();
            return e;
        }
        default:
            throw ParseError(lex_.pos(), "a number, name or '('");
        }
    }

    DriftLexer lex_;
};

inline double int_pow(double base, int n) {
    double r = 1.0, b = base;
    for (int e = n; e > 0; e >>= 1) {
        if (e & 1) r *= b;
        b *= b;
    }
    return r;
}

inline double eval_node(const ExprNode& n, const ParamEnv& env, double x) {
    switch (n.kind) {
    case ExprNode::Kind::literal: return n.value;
    case ExprNode::Kind::var_x: return x;
    case ExprNode::Kind::param: {
        const auto it = env.find(n.name);
        if (it == env.end()) throw UnboundParameterError(n.name);
        return it->second;
    }
    case ExprNode::Kind::add: return eval_node(*n.lhs, env, x) + eval_node(*n.rhs, env, x);
    case ExprNode::Kind::sub: return eval_node(*n.lhs, env, x) - eval_node(*n.rhs, env, x);
    case ExprNode::Kind::mul: return eval_node(*n.lhs, env, x) * eval_node(*n.rhs, env, x);
    case ExprNode::Kind::div: return eval_node(*n.lhs, env, x) / eval_node(*n.rhs, env, x);
    case ExprNode::Kind::neg: return -eval_node(*n.lhs, env, x);
    case ExprNode::Kind::pow: return int_pow(eval_node(*n.lhs, env, x), n.exponent);
    }
    throw std::logic_error("corrupt expression node");
}

inline void collect_params(const ExprNode& n, std::vector<std::string>& out) {
    switch (n.kind) {
    case ExprNode::Kind::param:
        for (const auto& s : out)
            if (s == n.name) return;
        out.push_back(n.name);
        return;
    case ExprNode::Kind::literal:
    case ExprNode::Kind::var_x:
        return;
    default:
        if (n.lhs) collect_params(*n.lhs, out);
        if (n.rhs) collect_params(*n.rhs, out);
    }
}

inline int precedence(ExprNode::Kind k) {
    switch (k) {
    case ExprNode::Kind::add:
    case ExprNode::Kind::sub: return 1;
    case ExprNode::Kind::mul:
    case ExprNode::Kind::div: return 2;
    case ExprNode::Kind::neg: return 3;
    case ExprNode::Kind::pow: return 4;
    default: return 5;
    }
}

inline std::string format_literal(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void print_node(const ExprNode& n, std::string& out) {
    const int prec = precedence(n.kind);
    const auto child = [&](const ExprNode& c, bool needs_paren) {
        if (needs_paren) out += '(';
        print_node(c, out);
        if (needs_paren) out += ')';
    };
    switch (n.kind) {
    case ExprNode::Kind::literal: out += format_literal(n.value); return;
    case ExprNode::Kind::var_x: out += 'x'; return;
    case ExprNode::Kind::param: out += n.name; return;
    case ExprNode::Kind::neg:
        out += '-';
        child(*n.lhs, precedence(n.lhs->kind) < prec);
        return;
    case ExprNode::Kind::pow:
        child(*n.lhs, precedence(n.lhs->kind) < prec);
        out += '^';
        out += std::to_string(n.exponent);
        return;
    default: {
        child(*n.lhs, precedence(n.lhs->kind) < prec);
        switch (n.kind) {
        case ExprNode::Kind::add: out += " + "; break;
        case ExprNode::Kind::sub: out += " - "; break;
        case ExprNode::Kind::mul: out += "*"; break;
        case ExprNode::Kind::div: out += "/"; break;
        default: throw std::logic_error("corrupt expression node");
        }
        // right operand of a left-associative operator needs parentheses at
        // equal precedence
        child(*n.rhs, precedence(n.rhs->kind) <= prec);
        return;
    }
    }
}

} // namespace detail

/// Parse an infix drift expression such as "-x" or "x - beta*x^3".
/// Throws ParseError with position and expectation on malformed input.
inline DriftExpr parse_drift(std::string_view text) {
    if (text.empty()) throw ParseError(0, "a non-empty expression");
    detail::DriftParser parser(text);
    return DriftExpr(parser.parse());
}

/// Evaluate f(env, x). Throws UnboundParameterError for missing parameters
/// and EvalError when the result is not finite (e.g. division by zero).
inline double eval_drift(const DriftExpr& expr, const ParamEnv& env, double x) {
    const double v = detail::eval_node(expr.root(), env, x);
    if (!std::isfinite(v))
        throw EvalError("drift evaluation produced a non-finite value at x = " +
                        std::to_string(x));
    return v;
}

/// Named parameters of the expression in first-appearance order ('x' excluded).
inline std::vector<std::string> free_parameters(const DriftExpr& expr) {
    std::vector<std::string> out;
    if (!expr.empty()) detail::collect_params(expr.root(), out);
    return out;
}

/// Render the tree back to source form; parse(to_string(e)) reproduces the
/// tree structurally.
inline std::string to_string(const DriftExpr& expr) {
    std::string out;
    detail::print_node(expr.root(), out);
    return out;
}

} // namespace levyexit
