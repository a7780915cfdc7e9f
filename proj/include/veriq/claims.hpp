#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "veriq/oracle.hpp"
#include "veriq/text.hpp"
#include "veriq/value.hpp"

namespace veriq {

enum class CompareOp { GE, GT, LE, LT, EQ, NE };

inline const char* compare_op_name(CompareOp op) {
    switch (op) {
        case CompareOp::GE: return ">=";
        case CompareOp::GT: return ">";
        case CompareOp::LE: return "<=";
        case CompareOp::LT: return "<";
        case CompareOp::EQ: return "==";
        case CompareOp::NE: return "!=";
    }
    return "?";
}

inline bool compare_reals(double lhs, CompareOp op, double rhs) {
    switch (op) {
        case CompareOp::GE: return lhs >= rhs;
        case CompareOp::GT: return lhs > rhs;
        case CompareOp::LE: return lhs <= rhs;
        case CompareOp::LT: return lhs < rhs;
        case CompareOp::EQ: return lhs == rhs;
        case CompareOp::NE: return lhs != rhs;
    }
    return false;
}

// A threshold comparison; the threshold is a count k or a proportion p
// depending on the quantifier carrying it. Comparisons are evaluated in real
// arithmetic (proportional normalization can produce fractional counts).
struct Comparison {
    CompareOp op = CompareOp::GE;
    double threshold = 0.0;

    bool eval(double lhs) const { return compare_reals(lhs, op, threshold); }
    friend bool operator==(const Comparison&, const Comparison&) = default;
};

enum class QuantKind { Exists, Forall, Cardinal, Proportional };

struct Quantifier {
    QuantKind kind = QuantKind::Exists;
    Comparison cmp;  // Cardinal: over counts; Proportional: over proportions

    static Quantifier exists() { return {QuantKind::Exists, {}}; }
    static Quantifier forall() { return {QuantKind::Forall, {}}; }
    static Quantifier cardinal(CompareOp op, double k) { return {QuantKind::Cardinal, {op, k}}; }
    static Quantifier proportional(CompareOp op, double p) {
        return {QuantKind::Proportional, {op, p}};
    }

    friend bool operator==(const Quantifier&, const Quantifier&) = default;
};

// Reduces any quantifier to a cardinal one over a known input size n.
// Proportional thresholds scale to exact real counts; no rounding happens
// here, comparisons downstream use real arithmetic.
inline Quantifier normalize(const Quantifier& q, std::int64_t n) {
    switch (q.kind) {
        case QuantKind::Exists: return Quantifier::cardinal(CompareOp::GE, 1.0);
        case QuantKind::Forall: return Quantifier::cardinal(CompareOp::EQ, static_cast<double>(n));
        case QuantKind::Proportional:
            return Quantifier::cardinal(q.cmp.op, q.cmp.threshold * static_cast<double>(n));
        case QuantKind::Cardinal: return q;
    }
    return q;
}

// Direct truth evaluation of a quantifier over a boolean column.
inline bool eval_quantifier(const Quantifier& q, const std::vector<bool>& column) {
    std::int64_t n = static_cast<std::int64_t>(column.size());
    std::int64_t count = 0;
    for (bool b : column) count += b ? 1 : 0;
    switch (q.kind) {
        case QuantKind::Exists: return count >= 1;
        case QuantKind::Forall: return count == n;
        case QuantKind::Cardinal: return q.cmp.eval(static_cast<double>(count));
        case QuantKind::Proportional:
            if (n == 0) return false;  // empty-scope proportion: false by convention
            return q.cmp.eval(static_cast<double>(count) / static_cast<double>(n));
    }
    return false;
}

// ---- claim IR --------------------------------------------------------------

enum class ClaimKind { Simple, Ordinal, Nested };

struct OrdinalSpec {
    std::vector<std::string> group_keys;
    bool aggregate_is_proportion = true;  // else: count
    std::string target_attr;
    std::string target_value;
    std::int64_t target_rank = 1;
    bool descending = true;
};

struct NestedSpec {
    Quantifier outer;
    std::vector<std::string> group_keys;
    Quantifier inner;
};

struct Claim {
    std::string text;
    std::optional<std::string> scope;           // free-text scope note, if any
    std::optional<std::string> formula_prompt;  // per-tuple predicate, when known
    ClaimKind kind = ClaimKind::Simple;
    Quantifier quantifier;          // Simple
    std::optional<OrdinalSpec> ordinal;
    std::optional<NestedSpec> nested;
    std::optional<bool> grounded;   // harness ground-truth label
    std::optional<std::string> aggregation_prompt;
};

// ---- vague quantity hints ---------------------------------------------------

// Mapping from vague quantity words to thresholds, rendered into the claim
// compilation prompt so the compiling model resolves them consistently.
struct VagueQuantityHints {
    struct Hint {
        std::string word;
        std::string meaning;
    };
    std::vector<Hint> hints = {
        {"some", "at least 1"},
        {"multiple", "at least 2"},
        {"a handful", "5"},
        {"common", "at least 10% of the claim's scope"},
        {"majority", "more than 50%"},
    };

    std::string render() const {
        std::string out;
        for (const auto& h : hints) {
            if (!out.empty()) out += "; ";
            out += h.word + " -> " + h.meaning;
        }
        return out;
    }
};

// ---- claim decomposition ----------------------------------------------------

namespace prompts {

inline constexpr const char* kDecomposeTemplate =
    "Break the following sentence from a summary into a list of standalone factual claims, "
    "one per line. Sentence: {sentence}\nFull summary for context: {response}";

inline constexpr const char* kResolveTemplate =
    "Rewrite the claim so that vague references (pronouns, partial names, unnamed entities) are "
    "resolved using the context. Reply with the rewritten claim only.\nClaim: {claim}\nContext: "
    "{response}";

}  // namespace prompts

inline OracleRequest make_completion_request(const std::string& model, const char* template_id,
                                             std::map<std::string, std::string> fields) {
    OracleRequest req;
    req.model = model;
    std::string rendered = template_id;
    for (const auto& [name, value] : fields) {
        std::string ph = "{" + name + "}";
        size_t pos;
        while ((pos = rendered.find(ph)) != std::string::npos)
            rendered.replace(pos, ph.size(), value);
    }
    req.rendered_prompt = rendered;
    PromptPart part;
    part.key = "a1";
    part.template_id = template_id;
    part.fields = std::move(fields);
    part.ret.type = ReturnType::Text;
    req.parts.push_back(std::move(part));
    return req;
}

// Splits an aggregate response into claims (one oracle pass per sentence),
// then resolves vague references per claim using the full response as
// context. Output order follows sentence order.
inline std::vector<std::string> decompose(const std::string& aggregate_response, Oracle& oracle,
                                          const std::string& model) {
    std::vector<std::string> claims;
    for (const auto& sentence : segment_sentences(aggregate_response)) {
        auto rsp = oracle.evaluate_one(make_completion_request(
            model, prompts::kDecomposeTemplate,
            {{"sentence", sentence}, {"response", aggregate_response}}));
        std::vector<std::string> raw_claims;
        {
            std::string cur;
            for (char c : rsp.raw) {
                if (c == '\n') {
                    std::string t = trim(cur);
                    if (!t.empty()) raw_claims.push_back(t);
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
            std::string t = trim(cur);
            if (!t.empty()) raw_claims.push_back(t);
        }
        for (const auto& raw : raw_claims) {
            auto resolved = oracle.evaluate_one(make_completion_request(
                model, prompts::kResolveTemplate,
                {{"claim", raw}, {"response", aggregate_response}}));
            std::string r = trim(resolved.raw);
            if (r.empty())
                throw Error("decompose: resolver returned empty output for claim: " + raw);
            claims.push_back(r);
        }
    }
    return claims;
}

}  // namespace veriq
