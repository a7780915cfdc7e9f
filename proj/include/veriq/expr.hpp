#pragma once

#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "veriq/claims.hpp"
#include "veriq/oracle.hpp"
#include "veriq/value.hpp"

namespace veriq {

enum class ValueKind { Bool, Int, Real, Text, Categorical, Enum };

struct ValueType {
    ValueKind kind = ValueKind::Bool;
    std::vector<std::string> labels;  // Enum only

    bool numeric() const { return kind == ValueKind::Int || kind == ValueKind::Real; }
    bool stringish() const {
        return kind == ValueKind::Text || kind == ValueKind::Categorical || kind == ValueKind::Enum;
    }
    friend bool operator==(const ValueType&, const ValueType&) = default;

    static ValueType from_attr(AttrType t) {
        switch (t) {
            case AttrType::Text: return {ValueKind::Text, {}};
            case AttrType::Int: return {ValueKind::Int, {}};
            case AttrType::Real: return {ValueKind::Real, {}};
            case AttrType::Bool: return {ValueKind::Bool, {}};
            case AttrType::Categorical: return {ValueKind::Categorical, {}};
        }
        return {};
    }
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Expression AST for the query language. Nodes are immutable and shared;
// source positions are carried for error messages and ignored by equality.
struct Expr {
    enum class Kind { Column, Literal, Compare, And, Or, Not, Prompt };

    Kind kind = Kind::Column;
    std::string name;               // Column
    AttrValue literal;              // Literal
    CompareOp cmp_op = CompareOp::EQ;
    ExprPtr lhs, rhs;               // Compare; Not uses lhs
    std::vector<ExprPtr> children;  // And / Or
    std::string template_str;       // Prompt
    ReturnSpec ret;                 // Prompt
    int line = 0, col = 0;
};

inline ExprPtr make_column(std::string name, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Column;
    e->name = std::move(name);
    e->line = line;
    e->col = col;
    return e;
}

inline ExprPtr make_literal(AttrValue v, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Literal;
    e->literal = std::move(v);
    e->line = line;
    e->col = col;
    return e;
}

inline ExprPtr make_compare(ExprPtr lhs, CompareOp op, ExprPtr rhs) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Compare;
    e->cmp_op = op;
    e->line = lhs->line;
    e->col = lhs->col;
    e->lhs = std::move(lhs);
    e->rhs = std::move(rhs);
    return e;
}

// And/Or are n-ary; nested same-kind children flatten so that the printed
// form and the reparsed form share one canonical AST.
inline ExprPtr make_bool_chain(Expr::Kind kind, std::vector<ExprPtr> children) {
    if (children.size() == 1) return children[0];
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    if (!children.empty()) {
        e->line = children[0]->line;
        e->col = children[0]->col;
    }
    for (auto& c : children) {
        if (c->kind == kind)
            for (const auto& gc : c->children) e->children.push_back(gc);
        else
            e->children.push_back(std::move(c));
    }
    return e;
}

inline ExprPtr make_and(std::vector<ExprPtr> children) {
    return make_bool_chain(Expr::Kind::And, std::move(children));
}
inline ExprPtr make_or(std::vector<ExprPtr> children) {
    return make_bool_chain(Expr::Kind::Or, std::move(children));
}

inline ExprPtr make_not(ExprPtr child) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Not;
    e->line = child->line;
    e->col = child->col;
    e->lhs = std::move(child);
    return e;
}

inline ExprPtr make_prompt(std::string template_str, ReturnSpec ret, int line = 0, int col = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Prompt;
    e->template_str = std::move(template_str);
    e->ret = std::move(ret);
    e->line = line;
    e->col = col;
    return e;
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case Expr::Kind::Column: return a->name == b->name;
        case Expr::Kind::Literal: return a->literal.type() == b->literal.type() && a->literal == b->literal;
        case Expr::Kind::Compare:
            return a->cmp_op == b->cmp_op && expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
        case Expr::Kind::And:
        case Expr::Kind::Or: {
            if (a->children.size() != b->children.size()) return false;
            for (size_t i = 0; i < a->children.size(); ++i)
                if (!expr_equal(a->children[i], b->children[i])) return false;
            return true;
        }
        case Expr::Kind::Not: return expr_equal(a->lhs, b->lhs);
        case Expr::Kind::Prompt: return a->template_str == b->template_str && a->ret == b->ret;
    }
    return false;
}

// ---- printing ----------------------------------------------------------------

inline std::string escape_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out += "\"";
    return out;
}

inline std::string print_literal(const AttrValue& v) {
    switch (v.type()) {
        case AttrType::Text:
        case AttrType::Categorical: return escape_string(v.as_string());
        case AttrType::Bool: return v.as_bool() ? "true" : "false";
        case AttrType::Int: return std::to_string(v.as_int());
        case AttrType::Real: {
            std::ostringstream os;
            os.precision(17);
            os << v.as_real();
            std::string s = os.str();
            if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
                s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
                s += ".0";
            return s;
        }
    }
    return "?";
}

inline std::string print_return_spec(const ReturnSpec& r) {
    switch (r.type) {
        case ReturnType::Bool: return "bool";
        case ReturnType::Int: return "int";
        case ReturnType::Real: return "real";
        case ReturnType::Enum: {
            std::string out = "enum(";
            for (size_t i = 0; i < r.labels.size(); ++i) {
                if (i) out += ", ";
                out += r.labels[i];
            }
            return out + ")";
        }
        case ReturnType::Text: return "text";
    }
    return "?";
}

inline std::string print_expr(const ExprPtr& e);

namespace detail {
inline bool atomic_expr(const ExprPtr& e) {
    return e->kind == Expr::Kind::Column || e->kind == Expr::Kind::Literal ||
           e->kind == Expr::Kind::Prompt;
}
inline std::string print_child(const ExprPtr& e) {
    if (atomic_expr(e)) return print_expr(e);
    return "(" + print_expr(e) + ")";
}
}  // namespace detail

inline std::string print_expr(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Column: return "col(" + escape_string(e->name) + ")";
        case Expr::Kind::Literal: return print_literal(e->literal);
        case Expr::Kind::Compare:
            return detail::print_child(e->lhs) + " " + compare_op_name(e->cmp_op) + " " +
                   detail::print_child(e->rhs);
        case Expr::Kind::And:
        case Expr::Kind::Or: {
            std::string sep = e->kind == Expr::Kind::And ? " and " : " or ";
            std::string out;
            for (size_t i = 0; i < e->children.size(); ++i) {
                if (i) out += sep;
                out += detail::print_child(e->children[i]);
            }
            return out;
        }
        case Expr::Kind::Not: return "not " + detail::print_child(e->lhs);
        case Expr::Kind::Prompt:
            return "prompt(" + escape_string(e->template_str) + ", " + print_return_spec(e->ret) +
                   ")";
    }
    return "?";
}

// ---- typing --------------------------------------------------------------------

using TypeScope = std::map<std::string, ValueType>;

struct TypeError : Error {
    TypeError(const std::string& msg, int line, int col)
        : Error("type error at " + std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
          line(line),
          col(col) {}
    int line, col;
};

inline std::vector<std::string> prompt_placeholders(const std::string& template_str) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < template_str.size()) {
        if (template_str[i] == '{') {
            size_t j = template_str.find('}', i + 1);
            if (j == std::string::npos) break;
            out.push_back(template_str.substr(i + 1, j - i - 1));
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

inline ValueType type_expr(const ExprPtr& e, const TypeScope& scope) {
    switch (e->kind) {
        case Expr::Kind::Column: {
            auto it = scope.find(e->name);
            if (it == scope.end())
                throw TypeError("unknown attribute '" + e->name + "'", e->line, e->col);
            return it->second;
        }
        case Expr::Kind::Literal:
            switch (e->literal.type()) {
                case AttrType::Text: return {ValueKind::Text, {}};
                case AttrType::Categorical: return {ValueKind::Categorical, {}};
                case AttrType::Int: return {ValueKind::Int, {}};
                case AttrType::Real: return {ValueKind::Real, {}};
                case AttrType::Bool: return {ValueKind::Bool, {}};
            }
            return {};
        case Expr::Kind::Compare: {
            ValueType lt = type_expr(e->lhs, scope);
            ValueType rt = type_expr(e->rhs, scope);
            bool ordering = e->cmp_op != CompareOp::EQ && e->cmp_op != CompareOp::NE;
            if (lt.numeric() && rt.numeric()) return {ValueKind::Bool, {}};
            if (ordering)
                throw TypeError(std::string("operator '") + compare_op_name(e->cmp_op) +
                                    "' needs numeric operands",
                                e->line, e->col);
            if (lt.stringish() && rt.stringish()) {
                // enum labels are validated when one side is a literal
                if (lt.kind == ValueKind::Enum && e->rhs->kind == Expr::Kind::Literal) {
                    const std::string& lab = e->rhs->literal.as_string();
                    bool ok = false;
                    for (const auto& l : lt.labels) ok = ok || l == lab;
                    if (!ok)
                        throw TypeError("'" + lab + "' is not a label of the enum attribute",
                                        e->rhs->line, e->rhs->col);
                }
                return {ValueKind::Bool, {}};
            }
            if (lt.kind == ValueKind::Bool && rt.kind == ValueKind::Bool) return {ValueKind::Bool, {}};
            throw TypeError("incompatible comparison operand types", e->line, e->col);
        }
        case Expr::Kind::And:
        case Expr::Kind::Or:
            for (const auto& c : e->children)
                if (type_expr(c, scope).kind != ValueKind::Bool)
                    throw TypeError("boolean operator needs boolean operands", c->line, c->col);
            return {ValueKind::Bool, {}};
        case Expr::Kind::Not:
            if (type_expr(e->lhs, scope).kind != ValueKind::Bool)
                throw TypeError("'not' needs a boolean operand", e->lhs->line, e->lhs->col);
            return {ValueKind::Bool, {}};
        case Expr::Kind::Prompt: {
            for (const auto& ph : prompt_placeholders(e->template_str)) {
                if (scope.find(ph) == scope.end())
                    throw TypeError("prompt placeholder '{" + ph + "}' names no attribute", e->line,
                                    e->col);
            }
            switch (e->ret.type) {
                case ReturnType::Bool: return {ValueKind::Bool, {}};
                case ReturnType::Int: return {ValueKind::Int, {}};
                case ReturnType::Real: return {ValueKind::Real, {}};
                case ReturnType::Enum: return {ValueKind::Enum, e->ret.labels};
                case ReturnType::Text: return {ValueKind::Text, {}};
            }
            return {};
        }
    }
    throw TypeError("malformed expression", e->line, e->col);
}

inline bool expr_contains_prompt(const ExprPtr& e) {
    if (!e) return false;
    if (e->kind == Expr::Kind::Prompt) return true;
    if (e->lhs && expr_contains_prompt(e->lhs)) return true;
    if (e->rhs && expr_contains_prompt(e->rhs)) return true;
    for (const auto& c : e->children)
        if (expr_contains_prompt(c)) return true;
    return false;
}

inline void collect_columns(const ExprPtr& e, std::vector<std::string>& out) {
    if (!e) return;
    if (e->kind == Expr::Kind::Column) out.push_back(e->name);
    if (e->lhs) collect_columns(e->lhs, out);
    if (e->rhs) collect_columns(e->rhs, out);
    for (const auto& c : e->children) collect_columns(c, out);
}

}  // namespace veriq
