#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "veriq/claims.hpp"

namespace veriq {

// A provenance token asserts one evaluated fact: phi(row) was true (positive)
// or false (negative).
struct ProvToken {
    std::int64_t row_id = 0;
    std::string formula_id;
    bool positive = true;

    friend bool operator==(const ProvToken&, const ProvToken&) = default;
    friend bool operator<(const ProvToken& a, const ProvToken& b) {
        if (a.row_id != b.row_id) return a.row_id < b.row_id;
        if (a.positive != b.positive) return a.positive < b.positive;
        return a.formula_id < b.formula_id;
    }
};

inline std::vector<ProvToken> dedup_tokens(std::vector<ProvToken> tokens) {
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

// Smallest integer count satisfying an at-least comparison; thresholds may be
// fractional after proportional scaling.
inline std::int64_t needed_positives(CompareOp op, double k) {
    double v = op == CompareOp::GE ? std::ceil(k) : std::floor(k) + 1.0;
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(v));
}

// ---- token assembly ----------------------------------------------------------

// What one accumulator saw, in consumption order. `prop_denominator` is the
// count proportional thresholds scale by: the full population when it was
// consumed or known, otherwise the number of processed tuples.
struct AccCapture {
    std::vector<ProvToken> tokens;
    std::int64_t positives = 0;
    std::int64_t seen = 0;
    double prop_denominator = 0.0;
    bool exhausted = false;
};

namespace prov_detail {

inline std::vector<ProvToken> first_with_polarity(const AccCapture& cap, bool polarity,
                                                  std::int64_t n) {
    std::vector<ProvToken> out;
    for (const auto& t : cap.tokens) {
        if (static_cast<std::int64_t>(out.size()) >= n) break;
        if (t.positive == polarity) out.push_back(t);
    }
    return out;
}

inline std::vector<ProvToken> cardinal_tokens(const Comparison& cmp, const AccCapture& cap,
                                              bool verdict) {
    switch (cmp.op) {
        case CompareOp::GE:
        case CompareOp::GT:
            if (verdict)
                return first_with_polarity(cap, true, needed_positives(cmp.op, cmp.threshold));
            return cap.tokens;
        case CompareOp::LE:
        case CompareOp::LT: {
            if (verdict) return cap.tokens;
            CompareOp neg = cmp.op == CompareOp::LE ? CompareOp::GT : CompareOp::GE;
            return first_with_polarity(cap, true, needed_positives(neg, cmp.threshold));
        }
        case CompareOp::EQ:
        case CompareOp::NE:
            return cap.tokens;
    }
    return cap.tokens;
}

}  // namespace prov_detail

// Token set for a simple claim per its quantifier, validity and the processed
// prefix (everything the accumulator consumed).
inline std::vector<ProvToken> assemble_simple(const Quantifier& q, const AccCapture& cap,
                                              bool verdict) {
    using namespace prov_detail;
    switch (q.kind) {
        case QuantKind::Exists:
            return verdict ? first_with_polarity(cap, true, 1) : cap.tokens;
        case QuantKind::Forall:
            return verdict ? cap.tokens : first_with_polarity(cap, false, 1);
        case QuantKind::Cardinal:
            return cardinal_tokens(q.cmp, cap, verdict);
        case QuantKind::Proportional:
            return cardinal_tokens({q.cmp.op, q.cmp.threshold * cap.prop_denominator}, cap,
                                   verdict);
    }
    return cap.tokens;
}

// One processed group of a nested claim: its inner verdict and its inner
// token set (already assembled by the inner claim's rules).
struct GroupTokens {
    bool inner_verdict = false;
    std::vector<ProvToken> tokens;
};

// Combines per-group inner token sets by the outer quantifier's rules; groups
// play the role tuples play in simple claims.
inline std::vector<ProvToken> assemble_nested(const Quantifier& outer,
                                              const std::vector<GroupTokens>& groups, bool verdict,
                                              double outer_prop_denominator) {
    auto union_all = [&]() {
        std::vector<ProvToken> out;
        for (const auto& g : groups) out.insert(out.end(), g.tokens.begin(), g.tokens.end());
        return dedup_tokens(std::move(out));
    };
    auto first_satisfying = [&](std::int64_t n) {
        std::vector<ProvToken> out;
        std::int64_t taken = 0;
        for (const auto& g : groups) {
            if (taken >= n) break;
            if (g.inner_verdict) {
                out.insert(out.end(), g.tokens.begin(), g.tokens.end());
                ++taken;
            }
        }
        return dedup_tokens(std::move(out));
    };
    auto first_failing = [&]() {
        for (const auto& g : groups)
            if (!g.inner_verdict) return g.tokens;
        return std::vector<ProvToken>{};
    };

    Quantifier q = outer;
    if (q.kind == QuantKind::Proportional)
        q = Quantifier::cardinal(q.cmp.op, q.cmp.threshold * outer_prop_denominator);

    switch (q.kind) {
        case QuantKind::Exists:
            return verdict ? first_satisfying(1) : union_all();
        case QuantKind::Forall:
            return verdict ? union_all() : first_failing();
        case QuantKind::Cardinal:
            switch (q.cmp.op) {
                case CompareOp::GE:
                case CompareOp::GT:
                    return verdict ? first_satisfying(needed_positives(q.cmp.op, q.cmp.threshold))
                                   : union_all();
                case CompareOp::LE:
                case CompareOp::LT: {
                    if (verdict) return union_all();
                    CompareOp neg = q.cmp.op == CompareOp::LE ? CompareOp::GT : CompareOp::GE;
                    return first_satisfying(needed_positives(neg, q.cmp.threshold));
                }
                case CompareOp::EQ:
                case CompareOp::NE:
                    return union_all();
            }
            return union_all();
        default:
            return union_all();
    }
}

// One group feeding an ordinal claim: its processed capture plus the exact
// positive count and denominator behind its aggregate value. The aggregate is
// positives (count) or positives/denominator (proportion).
struct OrdinalGroupCapture {
    AccCapture cap;
    std::int64_t positives = 0;
    std::int64_t denominator = 1;
};

// Pairwise ordinal provenance: the target group is compared against every
// other group; each pair contributes the token sets of the corresponding true
// at-least / at-most / equality claims, and the union is deduplicated.
// Comparisons and scaled thresholds use exact integer arithmetic.
inline std::vector<ProvToken> assemble_ordinal(const std::vector<OrdinalGroupCapture>& groups,
                                               size_t target_idx, bool proportion) {
    using namespace prov_detail;
    std::vector<ProvToken> out;
    const auto& tg = groups[target_idx];
    for (size_t j = 0; j < groups.size(); ++j) {
        if (j == target_idx) continue;
        const auto& gj = groups[j];
        // f_t vs f_j by cross-multiplication (denominators are 1 for counts)
        std::int64_t lhs = proportion ? tg.positives * gj.denominator : tg.positives;
        std::int64_t rhs = proportion ? gj.positives * tg.denominator : gj.positives;
        if (lhs > rhs) {
            // target: true "> f_j" claim; other: true "< f_t" claim (all tokens)
            std::int64_t needed =
                proportion ? gj.positives * tg.denominator / gj.denominator + 1 : gj.positives + 1;
            auto t1 = first_with_polarity(tg.cap, true, needed);
            out.insert(out.end(), t1.begin(), t1.end());
            out.insert(out.end(), gj.cap.tokens.begin(), gj.cap.tokens.end());
        } else if (lhs < rhs) {
            std::int64_t needed =
                proportion ? tg.positives * gj.denominator / tg.denominator + 1 : tg.positives + 1;
            auto t1 = first_with_polarity(gj.cap, true, needed);
            out.insert(out.end(), t1.begin(), t1.end());
            out.insert(out.end(), tg.cap.tokens.begin(), tg.cap.tokens.end());
        } else {
            out.insert(out.end(), tg.cap.tokens.begin(), tg.cap.tokens.end());
            out.insert(out.end(), gj.cap.tokens.begin(), gj.cap.tokens.end());
        }
    }
    return dedup_tokens(std::move(out));
}

// ---- dual-indeterminate semiring oracle (test support) -------------------------

// Exact provenance polynomials for small relations, built from the inductive
// interpretation of first-order formulas in the dual-indeterminate semiring:
// positive atoms track phi(t) = true, negative atoms phi(t) = false, and any
// monomial containing both signs of a row is dropped (p * pbar = 0). Not used
// on production paths; deliberately brute force.
using ProvAtom = std::pair<std::int64_t, int>;  // (row_id, +1 | -1)
using Monomial = std::set<ProvAtom>;

struct Polynomial {
    std::vector<Monomial> ms;  // sorted, deduplicated

    static Polynomial zero() { return {}; }
    static Polynomial one() { return {{Monomial{}}}; }
    bool is_zero() const { return ms.empty(); }

    void normalize() {
        std::sort(ms.begin(), ms.end());
        ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    }
};

inline Polynomial poly_add(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    out.ms = a.ms;
    out.ms.insert(out.ms.end(), b.ms.begin(), b.ms.end());
    out.normalize();
    return out;
}

inline Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& ma : a.ms) {
        for (const auto& mb : b.ms) {
            Monomial m = ma;
            bool contradiction = false;
            for (const auto& atom : mb) {
                if (m.count({atom.first, -atom.second})) {
                    contradiction = true;  // p * pbar = 0
                    break;
                }
                m.insert(atom);
            }
            if (!contradiction) out.ms.push_back(std::move(m));
        }
    }
    out.normalize();
    return out;
}

// An item is anything quantified over: a tuple (singleton polynomials) or a
// whole group (its inner claim's polynomial and that claim's negation).
struct ProvItem {
    Polynomial pos;  // nonempty iff the item satisfies
    Polynomial neg;  // nonempty iff it does not
};

inline ProvItem tuple_item(std::int64_t row_id, bool value) {
    ProvItem it;
    if (value)
        it.pos.ms.push_back({{row_id, +1}});
    else
        it.neg.ms.push_back({{row_id, -1}});
    return it;
}

namespace prov_detail {

inline void subsets_of_size(size_t n, size_t k, std::vector<size_t>& cur,
                            const std::vector<size_t>& pool,
                            const std::function<void(const std::vector<size_t>&)>& emit,
                            size_t start = 0) {
    if (cur.size() == k) {
        emit(cur);
        return;
    }
    for (size_t i = start; i < pool.size(); ++i) {
        if (pool.size() - i < k - cur.size()) break;
        cur.push_back(pool[i]);
        subsets_of_size(n, k, cur, pool, emit, i + 1);
        cur.pop_back();
    }
}

}  // namespace prov_detail

// At-least form: sum over needed-subsets of satisfying items of the product
// of their positive polynomials (no negative factors).
inline Polynomial poly_at_least(const std::vector<ProvItem>& items, std::int64_t needed) {
    if (needed <= 0) return Polynomial::one();
    std::vector<size_t> sat;
    for (size_t i = 0; i < items.size(); ++i)
        if (!items[i].pos.is_zero()) sat.push_back(i);
    if (static_cast<std::int64_t>(sat.size()) < needed) return Polynomial::zero();
    Polynomial out;
    std::vector<size_t> cur;
    prov_detail::subsets_of_size(
        items.size(), static_cast<size_t>(needed), cur, sat,
        [&](const std::vector<size_t>& w) {
            Polynomial prod = Polynomial::one();
            for (size_t i : w) prod = poly_mul(prod, items[i].pos);
            out.ms.insert(out.ms.end(), prod.ms.begin(), prod.ms.end());
        });
    out.normalize();
    return out;
}

// Exact-assignment form shared by <=, <, ==, !=: only the true satisfying
// set survives, contributing every item's polynomial, positive or negative.
inline Polynomial poly_exact_form(const std::vector<ProvItem>& items, CompareOp op, double k) {
    std::int64_t sat = 0;
    for (const auto& it : items) sat += it.pos.is_zero() ? 0 : 1;
    if (!compare_reals(static_cast<double>(sat), op, k)) return Polynomial::zero();
    Polynomial prod = Polynomial::one();
    for (const auto& it : items) prod = poly_mul(prod, it.pos.is_zero() ? it.neg : it.pos);
    return prod;
}

inline Polynomial poly_quantifier(const Quantifier& q, const std::vector<ProvItem>& items) {
    auto card = [&](const Comparison& cmp) -> Polynomial {
        switch (cmp.op) {
            case CompareOp::GE:
            case CompareOp::GT:
                return poly_at_least(items, needed_positives(cmp.op, cmp.threshold));
            default:
                return poly_exact_form(items, cmp.op, cmp.threshold);
        }
    };
    switch (q.kind) {
        case QuantKind::Exists: {
            Polynomial out;
            for (const auto& it : items) out = poly_add(out, it.pos);
            return out;
        }
        case QuantKind::Forall: {
            Polynomial out = Polynomial::one();
            for (const auto& it : items) out = poly_mul(out, it.pos);
            return out;
        }
        case QuantKind::Cardinal:
            return card(q.cmp);
        case QuantKind::Proportional:
            return card({q.cmp.op, q.cmp.threshold * static_cast<double>(items.size())});
    }
    return Polynomial::zero();
}

// Polynomial of the claim's negation (negation normal form): existential and
// universal quantifiers swap with item polarity flipped; comparisons map to
// their complements.
inline Polynomial poly_negation(const Quantifier& q, const std::vector<ProvItem>& items) {
    switch (q.kind) {
        case QuantKind::Exists: {  // not exists = forall not
            Polynomial out = Polynomial::one();
            for (const auto& it : items) out = poly_mul(out, it.neg);
            return out;
        }
        case QuantKind::Forall: {  // not forall = exists not
            Polynomial out;
            for (const auto& it : items) out = poly_add(out, it.neg);
            return out;
        }
        case QuantKind::Cardinal:
        case QuantKind::Proportional: {
            CompareOp neg_op;
            switch (q.cmp.op) {
                case CompareOp::GE: neg_op = CompareOp::LT; break;
                case CompareOp::GT: neg_op = CompareOp::LE; break;
                case CompareOp::LE: neg_op = CompareOp::GT; break;
                case CompareOp::LT: neg_op = CompareOp::GE; break;
                case CompareOp::EQ: neg_op = CompareOp::NE; break;
                default: neg_op = CompareOp::EQ; break;
            }
            Quantifier nq = q;
            nq.cmp.op = neg_op;
            return poly_quantifier(nq, items);
        }
    }
    return Polynomial::zero();
}

inline constexpr size_t kBruteForceLimit = 16;

inline std::vector<ProvItem> tuple_items(const std::vector<std::pair<std::int64_t, bool>>& column) {
    std::vector<ProvItem> items;
    for (const auto& [row, v] : column) items.push_back(tuple_item(row, v));
    return items;
}

// Simple claim over one boolean column of (row_id, phi value) pairs.
inline Polynomial brute_polynomial(const Quantifier& q,
                                   const std::vector<std::pair<std::int64_t, bool>>& column,
                                   bool negated = false) {
    if (column.size() > kBruteForceLimit)
        throw Error("brute_polynomial: relation too large for exact computation");
    auto items = tuple_items(column);
    return negated ? poly_negation(q, items) : poly_quantifier(q, items);
}

// Nested claim: groups become items whose polynomials are the inner claim's.
inline Polynomial brute_polynomial_nested(
    const Quantifier& outer, const Quantifier& inner,
    const std::vector<std::vector<std::pair<std::int64_t, bool>>>& groups, bool negated = false) {
    size_t total = 0;
    for (const auto& g : groups) total += g.size();
    if (total > kBruteForceLimit)
        throw Error("brute_polynomial: relation too large for exact computation");
    std::vector<ProvItem> items;
    for (const auto& g : groups) {
        auto tuple_level = tuple_items(g);
        ProvItem it;
        it.pos = poly_quantifier(inner, tuple_level);
        it.neg = poly_negation(inner, tuple_level);
        items.push_back(std::move(it));
    }
    return negated ? poly_negation(outer, items) : poly_quantifier(outer, items);
}

// Ordinal claim: the product over pairwise comparison polynomials between the
// target group and every other group, mirroring the pairwise token rules. The
// actual pairwise relations are explained, whatever rank they imply.
inline Polynomial brute_polynomial_ordinal(
    const std::vector<std::vector<std::pair<std::int64_t, bool>>>& groups, size_t target_idx,
    bool proportion) {
    size_t total = 0;
    for (const auto& g : groups) total += g.size();
    if (total > kBruteForceLimit)
        throw Error("brute_polynomial: relation too large for exact computation");

    auto positives = [](const std::vector<std::pair<std::int64_t, bool>>& g) {
        std::int64_t n = 0;
        for (const auto& [_, v] : g) n += v ? 1 : 0;
        return n;
    };

    const auto& tg = groups[target_idx];
    std::int64_t pt = positives(tg);
    std::int64_t dt = static_cast<std::int64_t>(tg.size());
    Polynomial out = Polynomial::one();
    for (size_t j = 0; j < groups.size(); ++j) {
        if (j == target_idx) continue;
        const auto& gj = groups[j];
        std::int64_t pj = positives(gj);
        std::int64_t dj = static_cast<std::int64_t>(gj.size());
        std::int64_t lhs = proportion ? pt * dj : pt;
        std::int64_t rhs = proportion ? pj * dt : pj;
        auto t_items = tuple_items(tg);
        auto j_items = tuple_items(gj);
        Polynomial pair;
        if (lhs > rhs) {
            std::int64_t needed = proportion ? pj * dt / dj + 1 : pj + 1;
            pair = poly_mul(poly_at_least(t_items, needed),
                            poly_exact_form(j_items, CompareOp::LT,
                                            proportion ? static_cast<double>(pt) * dj / dt
                                                       : static_cast<double>(pt)));
        } else if (lhs < rhs) {
            std::int64_t needed = proportion ? pt * dj / dt + 1 : pt + 1;
            pair = poly_mul(poly_at_least(j_items, needed),
                            poly_exact_form(t_items, CompareOp::LT,
                                            proportion ? static_cast<double>(pj) * dt / dj
                                                       : static_cast<double>(pj)));
        } else {
            pair = poly_mul(poly_exact_form(t_items, CompareOp::EQ, static_cast<double>(pt)),
                            poly_exact_form(j_items, CompareOp::EQ, static_cast<double>(pj)));
        }
        out = poly_mul(out, pair);
    }
    return out;
}

// A token set passes iff it is exactly one monomial of the polynomial (the
// claim's own polynomial for true verdicts, the negation's for false ones;
// truncated executions check against polynomials built over the processed
// subset with thresholds scaled accordingly).
inline bool check_minimal(const std::vector<ProvToken>& tokens, const Polynomial& poly) {
    Monomial m;
    for (const auto& t : tokens) m.insert({t.row_id, t.positive ? +1 : -1});
    for (const auto& cand : poly.ms)
        if (cand == m) return true;
    return false;
}

}  // namespace veriq
