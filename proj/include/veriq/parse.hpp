#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "veriq/plan.hpp"

namespace veriq {

struct ParseError : Error {
    ParseError(const std::string& msg, int line, int col)
        : Error("parse error at " + std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
          line(line),
          col(col) {}
    int line, col;
};

namespace dsl {

struct Token {
    enum class Kind { Ident, String, Int, Real, Symbol, End };
    Kind kind = Kind::End;
    std::string text;      // Ident / Symbol text
    std::string str;       // String value (unescaped, adjacent literals joined)
    std::int64_t int_val = 0;
    double real_val = 0.0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            Token t = next();
            bool end = t.kind == Token::Kind::End;
            // adjacent string literals concatenate, as in the host-language style
            if (t.kind == Token::Kind::String && !out.empty() &&
                out.back().kind == Token::Kind::String) {
                out.back().str += t.str;
            } else {
                out.push_back(std::move(t));
            }
            if (end) break;
        }
        return out;
    }

private:
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    char peek2() const { return pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0'; }

    void advance() {
        if (pos_ < src_.size()) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = peek();
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '#') {
                while (pos_ < src_.size() && peek() != '\n') advance();
            } else {
                break;
            }
        }
    }

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) return t;
        char c = peek();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string ident;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
                ident.push_back(peek());
                advance();
            }
            t.kind = Token::Kind::Ident;
            t.text = std::move(ident);
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && std::isdigit(static_cast<unsigned char>(peek2())))) {
            std::string num;
            if (c == '-') {
                num.push_back(c);
                advance();
            }
            bool real = false;
            while (pos_ < src_.size()) {
                char d = peek();
                if (std::isdigit(static_cast<unsigned char>(d))) {
                    num.push_back(d);
                    advance();
                } else if (d == '.' && std::isdigit(static_cast<unsigned char>(peek2()))) {
                    real = true;
                    num.push_back(d);
                    advance();
                } else if ((d == 'e' || d == 'E') && !num.empty() &&
                           std::isdigit(static_cast<unsigned char>(num.back()))) {
                    real = true;
                    num.push_back(d);
                    advance();
                    if (peek() == '+' || peek() == '-') {
                        num.push_back(peek());
                        advance();
                    }
                } else {
                    break;
                }
            }
            if (real) {
                t.kind = Token::Kind::Real;
                t.real_val = std::stod(num);
            } else {
                t.kind = Token::Kind::Int;
                t.int_val = std::stoll(num);
            }
            return t;
        }
        if (c == '"') {
            advance();
            std::string s;
            while (pos_ < src_.size() && peek() != '"') {
                char d = peek();
                if (d == '\\') {
                    advance();
                    char e = peek();
                    switch (e) {
                        case 'n': s.push_back('\n'); break;
                        case 't': s.push_back('\t'); break;
                        case '"': s.push_back('"'); break;
                        case '\\': s.push_back('\\'); break;
                        default: s.push_back(e); break;
                    }
                    advance();
                } else {
                    s.push_back(d);
                    advance();
                }
            }
            if (pos_ >= src_.size()) throw ParseError("unterminated string literal", t.line, t.col);
            advance();  // closing quote
            t.kind = Token::Kind::String;
            t.str = std::move(s);
            return t;
        }
        // symbols, longest first
        static const char* two[] = {">=", "<=", "==", "!="};
        for (const char* s : two) {
            if (c == s[0] && peek2() == s[1]) {
                advance();
                advance();
                t.kind = Token::Kind::Symbol;
                t.text = s;
                return t;
            }
        }
        static const std::string one = ".,()[]<>=";
        if (one.find(c) != std::string::npos) {
            advance();
            t.kind = Token::Kind::Symbol;
            t.text = std::string(1, c);
            return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.col);
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

    PlanPtr program() {
        const Token& head = peek();
        if (!is_ident("df"))
            throw ParseError("program must start with 'df' (the scan of the input relation)",
                             head.line, head.col);
        bump();
        PlanPtr plan = make_scan();
        bool saw_check = false;
        while (is_symbol(".")) {
            bump();
            const Token& name_tok = peek();
            std::string name = expect_ident("operator name");
            if (name == "collect") {
                expect_symbol("(");
                expect_symbol(")");
                break;  // execution trigger, not an operator
            }
            if (saw_check)
                throw ParseError("check must be the final operator", name_tok.line, name_tok.col);
            if (name == "filter") {
                expect_symbol("(");
                ExprPtr e = expr();
                expect_symbol(")");
                plan = make_filter(plan, std::move(e));
            } else if (name == "map") {
                expect_symbol("(");
                auto [e, alias] = aliased_expr("map");
                expect_symbol(")");
                plan = make_map(plan, std::move(e), std::move(alias));
            } else if (name == "aggregate") {
                expect_symbol("(");
                expect_symbol("[");
                std::vector<AggExpr> aggs;
                while (true) {
                    aggs.push_back(agg_expr());
                    if (is_symbol(",")) {
                        bump();
                        continue;
                    }
                    break;
                }
                expect_symbol("]");
                std::vector<std::string> group_by;
                if (is_symbol(",")) {
                    bump();
                    const Token& kw = peek();
                    if (expect_ident("group_by") != "group_by")
                        throw ParseError("expected group_by=", kw.line, kw.col);
                    expect_symbol("=");
                    expect_symbol("[");
                    while (true) {
                        expect_ident_exact("col");
                        expect_symbol("(");
                        group_by.push_back(expect_string("attribute name"));
                        expect_symbol(")");
                        if (is_symbol(",")) {
                            bump();
                            continue;
                        }
                        break;
                    }
                    expect_symbol("]");
                }
                expect_symbol(")");
                plan = make_aggregate(plan, std::move(aggs), std::move(group_by));
            } else if (name == "with_rank") {
                expect_symbol("(");
                ExprPtr e = expr();
                bool descending = true;
                if (is_symbol(",")) {
                    bump();
                    const Token& kw = peek();
                    if (expect_ident("descending") != "descending")
                        throw ParseError("expected descending=", kw.line, kw.col);
                    expect_symbol("=");
                    const Token& val = peek();
                    std::string b = expect_ident("true or false");
                    if (b == "true") descending = true;
                    else if (b == "false") descending = false;
                    else throw ParseError("expected true or false", val.line, val.col);
                }
                expect_symbol(")");
                plan = make_with_rank(plan, std::move(e), descending);
            } else if (name == "check") {
                expect_symbol("(");
                ExprPtr e = expr();
                expect_symbol(")");
                plan = make_check(plan, std::move(e));
                saw_check = true;
            } else {
                throw ParseError("unknown operator '" + name + "'", name_tok.line, name_tok.col);
            }
        }
        const Token& t = peek();
        if (t.kind != Token::Kind::End)
            throw ParseError("unexpected trailing input '" + (t.text.empty() ? t.str : t.text) + "'",
                             t.line, t.col);
        if (!saw_check) throw ParseError("program must end with check(...)", t.line, t.col);
        return plan;
    }

private:
    // expression grammar
    ExprPtr expr() { return or_expr(); }

    ExprPtr or_expr() {
        std::vector<ExprPtr> terms{and_expr()};
        while (is_ident("or")) {
            bump();
            terms.push_back(and_expr());
        }
        return terms.size() == 1 ? terms[0] : make_or(std::move(terms));
    }

    ExprPtr and_expr() {
        std::vector<ExprPtr> terms{unary_expr()};
        while (is_ident("and")) {
            bump();
            terms.push_back(unary_expr());
        }
        return terms.size() == 1 ? terms[0] : make_and(std::move(terms));
    }

    ExprPtr unary_expr() {
        if (is_ident("not")) {
            bump();
            return make_not(unary_expr());
        }
        return cmp_expr();
    }

    ExprPtr cmp_expr() {
        ExprPtr lhs = postfix_expr();
        for (const auto& [sym, op] : cmp_ops()) {
            if (is_symbol(sym)) {
                bump();
                ExprPtr rhs = postfix_expr();
                return make_compare(std::move(lhs), op, std::move(rhs));
            }
        }
        return lhs;
    }

    static const std::vector<std::pair<const char*, CompareOp>>& cmp_ops() {
        static const std::vector<std::pair<const char*, CompareOp>> ops = {
            {">=", CompareOp::GE}, {"<=", CompareOp::LE}, {"==", CompareOp::EQ},
            {"!=", CompareOp::NE}, {">", CompareOp::GT},  {"<", CompareOp::LT}};
        return ops;
    }

    ExprPtr postfix_expr() {
        ExprPtr e = primary_expr();
        while (is_symbol(".")) {
            size_t save = pos_;
            bump();
            if (is_ident("eq")) {
                bump();
                expect_symbol("(");
                ExprPtr rhs = expr();
                expect_symbol(")");
                e = make_compare(std::move(e), CompareOp::EQ, std::move(rhs));
            } else {
                pos_ = save;  // `.alias(...)` or the next operator; caller handles
                break;
            }
        }
        return e;
    }

    ExprPtr primary_expr() {
        const Token& t = peek();
        if (is_symbol("(")) {
            bump();
            ExprPtr e = expr();
            expect_symbol(")");
            return e;
        }
        if (is_ident("col")) {
            bump();
            expect_symbol("(");
            std::string name = expect_string("attribute name");
            expect_symbol(")");
            return make_column(std::move(name), t.line, t.col);
        }
        if (is_ident("prompt")) {
            bump();
            expect_symbol("(");
            std::string tmpl = expect_string("prompt template");
            ReturnSpec ret;  // defaults to bool, matching semantic filters
            if (is_symbol(",")) {
                bump();
                ret = return_spec();
            }
            expect_symbol(")");
            return make_prompt(std::move(tmpl), std::move(ret), t.line, t.col);
        }
        if (is_ident("true") || is_ident("false")) {
            bool v = t.text == "true";
            bump();
            return make_literal(AttrValue::boolean(v), t.line, t.col);
        }
        if (t.kind == Token::Kind::String) {
            std::string s = t.str;
            bump();
            return make_literal(AttrValue::text(std::move(s)), t.line, t.col);
        }
        if (t.kind == Token::Kind::Int) {
            std::int64_t v = t.int_val;
            bump();
            return make_literal(AttrValue::integer(v), t.line, t.col);
        }
        if (t.kind == Token::Kind::Real) {
            double v = t.real_val;
            bump();
            return make_literal(AttrValue::real(v), t.line, t.col);
        }
        throw ParseError("expected an expression", t.line, t.col);
    }

    ReturnSpec return_spec() {
        const Token& t = peek();
        std::string name = expect_ident("return type");
        ReturnSpec r;
        if (name == "bool") r.type = ReturnType::Bool;
        else if (name == "int") r.type = ReturnType::Int;
        else if (name == "real") r.type = ReturnType::Real;
        else if (name == "enum") {
            r.type = ReturnType::Enum;
            expect_symbol("(");
            while (true) {
                r.labels.push_back(expect_ident("enum label"));
                if (is_symbol(",")) {
                    bump();
                    continue;
                }
                break;
            }
            expect_symbol(")");
        } else {
            throw ParseError("unknown return type '" + name + "'", t.line, t.col);
        }
        return r;
    }

    AggExpr agg_expr() {
        const Token& t = peek();
        std::string fname = expect_ident("aggregation function");
        AggExpr a;
        if (fname == "bool_or") a.fn = AggFn::BoolOr;
        else if (fname == "bool_and") a.fn = AggFn::BoolAnd;
        else if (fname == "count_if") a.fn = AggFn::CountIf;
        else if (fname == "proportion") a.fn = AggFn::Proportion;
        else throw ParseError("unknown aggregation function '" + fname + "'", t.line, t.col);
        expect_symbol("(");
        a.arg = expr();
        expect_symbol(")");
        expect_symbol(".");
        expect_ident_exact("alias");
        expect_symbol("(");
        a.out_name = expect_string("alias name");
        expect_symbol(")");
        return a;
    }

    std::pair<ExprPtr, std::string> aliased_expr(const char* where) {
        ExprPtr e = expr();
        const Token& t = peek();
        if (!is_symbol("."))
            throw ParseError(std::string(where) + " expression needs .alias(\"name\")", t.line,
                             t.col);
        bump();
        expect_ident_exact("alias");
        expect_symbol("(");
        std::string alias = expect_string("alias name");
        expect_symbol(")");
        return {std::move(e), std::move(alias)};
    }

    // token plumbing
    const Token& peek() const { return toks_[pos_]; }
    void bump() {
        if (pos_ + 1 < toks_.size()) ++pos_;
    }
    bool is_ident(const char* s) const {
        return peek().kind == Token::Kind::Ident && peek().text == s;
    }
    bool is_symbol(const char* s) const {
        return peek().kind == Token::Kind::Symbol && peek().text == s;
    }
    std::string expect_ident(const char* what) {
        const Token& t = peek();
        if (t.kind != Token::Kind::Ident)
            throw ParseError(std::string("expected ") + what, t.line, t.col);
        std::string s = t.text;
        bump();
        return s;
    }
    void expect_ident_exact(const char* name) {
        const Token& t = peek();
        if (t.kind != Token::Kind::Ident || t.text != name)
            throw ParseError(std::string("expected '") + name + "'", t.line, t.col);
        bump();
    }
    void expect_symbol(const char* s) {
        const Token& t = peek();
        if (t.kind != Token::Kind::Symbol || t.text != s)
            throw ParseError(std::string("expected '") + s + "'", t.line, t.col);
        bump();
    }
    std::string expect_string(const char* what) {
        const Token& t = peek();
        if (t.kind != Token::Kind::String)
            throw ParseError(std::string("expected string: ") + what, t.line, t.col);
        std::string s = t.str;
        bump();
        return s;
    }

    std::vector<Token> toks_;
    size_t pos_ = 0;
};

}  // namespace dsl

// Parses a query program into its logical plan and type-checks it against the
// schema. parse -> print -> parse is the identity on the AST.
inline PlanPtr parse(std::string_view program, const Schema& schema) {
    dsl::Parser p(program);
    PlanPtr plan = p.program();
    type_plan(plan, schema);
    return plan;
}

// Grammar-only parse, used where no schema is available yet.
inline PlanPtr parse_untyped(std::string_view program) {
    dsl::Parser p(program);
    return p.program();
}

}  // namespace veriq
