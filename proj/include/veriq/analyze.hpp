#pragma once

#include <optional>
#include <string>
#include <vector>

#include "veriq/plan.hpp"

namespace veriq {

struct UnsupportedShape : Error {
    explicit UnsupportedShape(const std::string& what) : Error("unsupported shape: " + what) {}
};

// The logical classification the optimizer and provenance assembly work from.
struct ClaimShape {
    ClaimKind kind = ClaimKind::Simple;

    Quantifier outer;  // Simple: the quantifier; Nested: the outer quantifier
    Quantifier inner;  // Nested only
    std::vector<std::string> group_keys;

    AggFn inner_fn = AggFn::BoolOr;  // innermost aggregate function
    AggFn outer_fn = AggFn::BoolOr;  // Nested only

    // Ordinal
    bool ordinal_proportion = true;
    std::string target_attr;
    AttrValue target_value;
    std::int64_t target_rank = 1;
    bool rank_descending = true;

    // The per-tuple formula phi: the innermost aggregate argument with map
    // outputs substituted back to their defining expressions.
    ExprPtr formula;
    std::string formula_id;
};

namespace detail {

// Replaces references to map outputs with the defining map expression so the
// formula reads in terms of base attributes and prompts.
inline ExprPtr trace_expr(const ExprPtr& e,
                          const std::map<std::string, ExprPtr>& map_defs) {
    if (!e) return e;
    switch (e->kind) {
        case Expr::Kind::Column: {
            auto it = map_defs.find(e->name);
            if (it != map_defs.end()) return trace_expr(it->second, map_defs);
            return e;
        }
        case Expr::Kind::Compare:
            return make_compare(trace_expr(e->lhs, map_defs), e->cmp_op,
                                trace_expr(e->rhs, map_defs));
        case Expr::Kind::Not: return make_not(trace_expr(e->lhs, map_defs));
        case Expr::Kind::And:
        case Expr::Kind::Or: {
            std::vector<ExprPtr> kids;
            for (const auto& c : e->children) kids.push_back(trace_expr(c, map_defs));
            return make_bool_chain(e->kind, std::move(kids));
        }
        default: return e;
    }
}

inline std::optional<double> numeric_literal(const ExprPtr& e) {
    if (e->kind != Expr::Kind::Literal) return std::nullopt;
    if (!e->literal.is_numeric()) return std::nullopt;
    return e->literal.as_real();
}

// col(out) or col(out) <op> <numeric literal>; `== true` normalizes to the
// bare column.
struct CheckPattern {
    std::string column;
    std::optional<Comparison> cmp;
};

inline std::optional<CheckPattern> match_check(const ExprPtr& e) {
    if (e->kind == Expr::Kind::Column) return CheckPattern{e->name, std::nullopt};
    if (e->kind == Expr::Kind::Compare && e->lhs->kind == Expr::Kind::Column) {
        if (e->rhs->kind == Expr::Kind::Literal && e->rhs->literal.type() == AttrType::Bool) {
            if (e->cmp_op == CompareOp::EQ && e->rhs->literal.as_bool())
                return CheckPattern{e->lhs->name, std::nullopt};
            return std::nullopt;
        }
        auto lit = numeric_literal(e->rhs);
        if (!lit) return std::nullopt;
        return CheckPattern{e->lhs->name, Comparison{e->cmp_op, *lit}};
    }
    return std::nullopt;
}

inline Quantifier quantifier_from(AggFn fn, const std::optional<Comparison>& cmp,
                                  const char* where) {
    switch (fn) {
        case AggFn::BoolOr:
            if (cmp) throw UnsupportedShape(std::string(where) + ": bool_or takes no comparison");
            return Quantifier::exists();
        case AggFn::BoolAnd:
            if (cmp) throw UnsupportedShape(std::string(where) + ": bool_and takes no comparison");
            return Quantifier::forall();
        case AggFn::CountIf:
            if (!cmp)
                throw UnsupportedShape(std::string(where) + ": count_if needs a comparison");
            return Quantifier::cardinal(cmp->op, cmp->threshold);
        case AggFn::Proportion:
            if (!cmp)
                throw UnsupportedShape(std::string(where) + ": proportion needs a comparison");
            return Quantifier::proportional(cmp->op, cmp->threshold);
    }
    throw UnsupportedShape("unknown aggregate function");
}

}  // namespace detail

// Pattern-matches a well-typed plan back to its logical claim structure:
// Simple (one ungrouped aggregate), Nested (grouped then ungrouped aggregate)
// or Ordinal (grouped aggregate, rank, target filter). Anything else raises
// UnsupportedShape naming the unmatched node.
inline ClaimShape claim_structure_of(const PlanPtr& root) {
    validate_plan(root);
    auto chain = plan_chain(root);

    std::map<std::string, ExprPtr> map_defs;
    std::vector<const PlanNode*> aggs;
    const PlanNode* rank_node = nullptr;
    const PlanNode* post_rank_filter = nullptr;
    const PlanNode* check_node = chain.back();

    bool before_first_agg = true;
    for (const PlanNode* n : chain) {
        switch (n->kind) {
            case PlanNode::Kind::Scan: break;
            case PlanNode::Kind::Map:
                if (!before_first_agg)
                    throw UnsupportedShape("map above an aggregate");
                map_defs[n->out_name] = n->expr;
                break;
            case PlanNode::Kind::Filter:
                if (!before_first_agg) {
                    if (rank_node == nullptr)
                        throw UnsupportedShape("filter between aggregates");
                    if (post_rank_filter) throw UnsupportedShape("second filter above with_rank");
                    post_rank_filter = n;
                }
                break;
            case PlanNode::Kind::Aggregate:
                before_first_agg = false;
                aggs.push_back(n);
                break;
            case PlanNode::Kind::WithRank:
                if (rank_node) throw UnsupportedShape("second with_rank");
                rank_node = n;
                break;
            case PlanNode::Kind::Check: break;
        }
    }

    if (aggs.empty()) throw UnsupportedShape("no aggregate in plan");
    if (aggs.size() > 2) throw UnsupportedShape("more than two aggregates");
    for (const PlanNode* a : aggs)
        if (a->aggs.size() != 1)
            throw UnsupportedShape("aggregate with multiple aggregation expressions");

    auto checkp = detail::match_check(check_node->expr);
    if (!checkp) throw UnsupportedShape("check predicate is not a threshold test of one column");

    ClaimShape shape;
    const AggExpr& inner_agg = aggs.front()->aggs[0];
    shape.inner_fn = inner_agg.fn;
    shape.formula = detail::trace_expr(inner_agg.arg, map_defs);
    shape.formula_id = print_expr(shape.formula);

    if (rank_node) {
        // Ordinal: grouped aggregate -> with_rank -> target filter -> check(rank == r)
        if (aggs.size() != 1 || aggs.front()->group_by.empty())
            throw UnsupportedShape("with_rank without a grouped aggregate below");
        if (inner_agg.fn != AggFn::CountIf && inner_agg.fn != AggFn::Proportion)
            throw UnsupportedShape("rank aggregate must be count_if or proportion");
        if (rank_node->expr->kind != Expr::Kind::Column ||
            rank_node->expr->name != inner_agg.out_name)
            throw UnsupportedShape("with_rank must rank the aggregate output");
        if (!post_rank_filter) throw UnsupportedShape("ordinal plan needs a target filter");
        const ExprPtr& f = post_rank_filter->expr;
        if (f->kind != Expr::Kind::Compare || f->cmp_op != CompareOp::EQ ||
            f->lhs->kind != Expr::Kind::Column || f->rhs->kind != Expr::Kind::Literal)
            throw UnsupportedShape("target filter must be col(group_key) == literal");
        bool is_key = false;
        for (const auto& k : aggs.front()->group_by) is_key = is_key || k == f->lhs->name;
        if (!is_key) throw UnsupportedShape("target filter column is not a group key");
        if (checkp->column != "rank" || !checkp->cmp || checkp->cmp->op != CompareOp::EQ)
            throw UnsupportedShape("ordinal check must be col(\"rank\") == r");
        double r = checkp->cmp->threshold;
        if (r < 1 || r != static_cast<std::int64_t>(r))
            throw UnsupportedShape("target rank must be an integer >= 1");

        shape.kind = ClaimKind::Ordinal;
        shape.group_keys = aggs.front()->group_by;
        shape.ordinal_proportion = inner_agg.fn == AggFn::Proportion;
        shape.target_attr = f->lhs->name;
        shape.target_value = f->rhs->literal;
        shape.target_rank = static_cast<std::int64_t>(r);
        shape.rank_descending = rank_node->descending;
        return shape;
    }

    if (aggs.size() == 1) {
        if (!aggs.front()->group_by.empty())
            throw UnsupportedShape("grouped aggregate feeding check directly");
        if (checkp->column != inner_agg.out_name)
            throw UnsupportedShape("check does not test the aggregate output");
        shape.kind = ClaimKind::Simple;
        shape.outer = detail::quantifier_from(inner_agg.fn, checkp->cmp, "check");
        return shape;
    }

    // Nested: grouped inner aggregate, ungrouped outer aggregate.
    const PlanNode* inner_node = aggs[0];
    const PlanNode* outer_node = aggs[1];
    if (inner_node->group_by.empty() || !outer_node->group_by.empty())
        throw UnsupportedShape("nested plan needs grouped inner and ungrouped outer aggregate");
    const AggExpr& outer_agg = outer_node->aggs[0];
    auto inner_ref = detail::match_check(outer_agg.arg);
    if (!inner_ref || inner_ref->column != inner_agg.out_name)
        throw UnsupportedShape("outer aggregate must test the inner aggregate output");
    if (checkp->column != outer_agg.out_name)
        throw UnsupportedShape("check does not test the outer aggregate output");

    shape.kind = ClaimKind::Nested;
    shape.group_keys = inner_node->group_by;
    shape.outer_fn = outer_agg.fn;
    shape.inner = detail::quantifier_from(inner_agg.fn, inner_ref->cmp, "outer aggregate argument");
    shape.outer = detail::quantifier_from(outer_agg.fn, checkp->cmp, "check");
    return shape;
}

}  // namespace veriq
