#pragma once

#include <memory>
#include <string>
#include <vector>

#include "veriq/expr.hpp"
#include "veriq/relation.hpp"
#include "veriq/stats.hpp"

namespace veriq {

struct AggExpr {
    AggFn fn = AggFn::BoolOr;
    ExprPtr arg;
    std::string out_name;
};

inline bool agg_expr_equal(const AggExpr& a, const AggExpr& b) {
    return a.fn == b.fn && a.out_name == b.out_name && expr_equal(a.arg, b.arg);
}

struct PlanNode;
using PlanPtr = std::shared_ptr<const PlanNode>;

// Logical operator tree. Plans are linear chains: Scan at the leaf, Check at
// the root, everything else in between.
struct PlanNode {
    enum class Kind { Scan, Filter, Map, Aggregate, WithRank, Check };

    Kind kind = Kind::Scan;
    PlanPtr child;

    ExprPtr expr;                       // Filter / Map / WithRank / Check
    std::string out_name;               // Map
    std::vector<AggExpr> aggs;          // Aggregate
    std::vector<std::string> group_by;  // Aggregate
    bool descending = true;             // WithRank
    int line = 0, col = 0;
};

inline PlanPtr make_scan() {
    auto n = std::make_shared<PlanNode>();
    n->kind = PlanNode::Kind::Scan;
    return n;
}

inline PlanPtr make_filter(PlanPtr child, ExprPtr expr) {
    auto n = std::make_shared<PlanNode>();
    n->kind = PlanNode::Kind::Filter;
    n->child = std::move(child);
    n->expr = std::move(expr);
    return n;
}

inline PlanPtr make_map(PlanPtr child, ExprPtr expr, std::string out_name) {
    auto n = std::make_shared<PlanNode>();
    n->kind = PlanNode::Kind::Map;
    n->child = std::move(child);
    n->expr = std::move(expr);
    n->out_name = std::move(out_name);
    return n;
}

inline PlanPtr make_aggregate(PlanPtr child, std::vector<AggExpr> aggs,
                              std::vector<std::string> group_by = {}) {
    auto n = std::make_shared<PlanNode>();
    n->kind = PlanNode::Kind::Aggregate;
    n->child = std::move(child);
    n->aggs = std::move(aggs);
    n->group_by = std::move(group_by);
    return n;
}

inline PlanPtr make_with_rank(PlanPtr child, ExprPtr expr, bool descending = true) {
    auto n = std::make_shared<PlanNode>();
    n->kind = PlanNode::Kind::WithRank;
    n->child = std::move(child);
    n->expr = std::move(expr);
    n->descending = descending;
    return n;
}

inline PlanPtr make_check(PlanPtr child, ExprPtr expr) {
    auto n = std::make_shared<PlanNode>();
    n->kind = PlanNode::Kind::Check;
    n->child = std::move(child);
    n->expr = std::move(expr);
    return n;
}

inline bool plan_equal(const PlanPtr& a, const PlanPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind || a->out_name != b->out_name || a->group_by != b->group_by ||
        a->descending != b->descending)
        return false;
    if ((a->expr == nullptr) != (b->expr == nullptr)) return false;
    if (a->expr && !expr_equal(a->expr, b->expr)) return false;
    if (a->aggs.size() != b->aggs.size()) return false;
    for (size_t i = 0; i < a->aggs.size(); ++i)
        if (!agg_expr_equal(a->aggs[i], b->aggs[i])) return false;
    return plan_equal(a->child, b->child);
}

// Root-to-leaf chain flattened leaf-first.
inline std::vector<const PlanNode*> plan_chain(const PlanPtr& root) {
    std::vector<const PlanNode*> out;
    for (const PlanNode* n = root.get(); n; n = n->child.get()) out.push_back(n);
    std::reverse(out.begin(), out.end());
    return out;
}

// Structural invariants: exactly one Scan at the leaf, exactly one Check at
// the root.
inline void validate_plan(const PlanPtr& root) {
    if (!root) throw Error("plan: empty");
    auto chain = plan_chain(root);
    if (chain.front()->kind != PlanNode::Kind::Scan) throw Error("plan: missing scan at the leaf");
    if (chain.back()->kind != PlanNode::Kind::Check) throw Error("plan: missing check at the root");
    for (size_t i = 0; i < chain.size(); ++i) {
        if (i != 0 && chain[i]->kind == PlanNode::Kind::Scan)
            throw Error("plan: scan must be the unique leaf");
        if (i + 1 != chain.size() && chain[i]->kind == PlanNode::Kind::Check)
            throw Error("plan: check must be the unique root");
    }
}

// Type-checks the plan against a schema and returns the scope visible above
// each node (parallel to plan_chain order, entry i = scope after node i).
inline std::vector<TypeScope> type_plan(const PlanPtr& root, const Schema& schema) {
    validate_plan(root);
    auto chain = plan_chain(root);
    std::vector<TypeScope> scopes;
    TypeScope scope;
    for (const auto& a : schema.attrs) scope[a.name] = ValueType::from_attr(a.type);

    for (const PlanNode* n : chain) {
        switch (n->kind) {
            case PlanNode::Kind::Scan:
                break;
            case PlanNode::Kind::Filter: {
                if (type_expr(n->expr, scope).kind != ValueKind::Bool)
                    throw TypeError("filter predicate must be boolean", n->line, n->col);
                break;
            }
            case PlanNode::Kind::Map: {
                ValueType t = type_expr(n->expr, scope);
                if (scope.count(n->out_name))
                    throw TypeError("map output '" + n->out_name + "' already exists", n->line,
                                    n->col);
                scope[n->out_name] = t;
                break;
            }
            case PlanNode::Kind::Aggregate: {
                if (n->aggs.empty())
                    throw TypeError("aggregate needs at least one aggregation", n->line, n->col);
                TypeScope next;
                for (const auto& g : n->group_by) {
                    auto it = scope.find(g);
                    if (it == scope.end())
                        throw TypeError("unknown group_by attribute '" + g + "'", n->line, n->col);
                    next[g] = it->second;
                }
                for (const auto& agg : n->aggs) {
                    if (type_expr(agg.arg, scope).kind != ValueKind::Bool)
                        throw TypeError(std::string(agg_fn_name(agg.fn)) +
                                            " argument must be boolean",
                                        agg.arg->line, agg.arg->col);
                    if (next.count(agg.out_name))
                        throw TypeError("aggregate output '" + agg.out_name + "' already exists",
                                        n->line, n->col);
                    switch (agg.fn) {
                        case AggFn::BoolOr:
                        case AggFn::BoolAnd: next[agg.out_name] = {ValueKind::Bool, {}}; break;
                        case AggFn::CountIf: next[agg.out_name] = {ValueKind::Int, {}}; break;
                        case AggFn::Proportion: next[agg.out_name] = {ValueKind::Real, {}}; break;
                    }
                }
                scope = std::move(next);
                break;
            }
            case PlanNode::Kind::WithRank: {
                if (!type_expr(n->expr, scope).numeric())
                    throw TypeError("with_rank expression must be numeric", n->line, n->col);
                if (scope.count("rank"))
                    throw TypeError("attribute 'rank' already exists", n->line, n->col);
                scope["rank"] = {ValueKind::Int, {}};
                break;
            }
            case PlanNode::Kind::Check: {
                if (type_expr(n->expr, scope).kind != ValueKind::Bool)
                    throw TypeError("check predicate must be boolean", n->line, n->col);
                break;
            }
        }
        scopes.push_back(scope);
    }
    return scopes;
}

// ---- printing -------------------------------------------------------------------

inline std::string print_agg_expr(const AggExpr& a) {
    return std::string(agg_fn_name(a.fn)) + "(" + print_expr(a.arg) + ").alias(" +
           escape_string(a.out_name) + ")";
}

// Canonical program text: `df` then one operator per line.
inline std::string print_plan(const PlanPtr& root) {
    auto chain = plan_chain(root);
    std::string out = "df";
    for (const PlanNode* n : chain) {
        switch (n->kind) {
            case PlanNode::Kind::Scan:
                break;
            case PlanNode::Kind::Filter:
                out += "\n.filter(" + print_expr(n->expr) + ")";
                break;
            case PlanNode::Kind::Map:
                out += "\n.map(" + print_expr(n->expr) + ".alias(" + escape_string(n->out_name) +
                       "))";
                break;
            case PlanNode::Kind::Aggregate: {
                out += "\n.aggregate([";
                for (size_t i = 0; i < n->aggs.size(); ++i) {
                    if (i) out += ", ";
                    out += print_agg_expr(n->aggs[i]);
                }
                out += "]";
                if (!n->group_by.empty()) {
                    out += ", group_by=[";
                    for (size_t i = 0; i < n->group_by.size(); ++i) {
                        if (i) out += ", ";
                        out += "col(" + escape_string(n->group_by[i]) + ")";
                    }
                    out += "]";
                }
                out += ")";
                break;
            }
            case PlanNode::Kind::WithRank:
                out += "\n.with_rank(" + print_expr(n->expr) +
                       (n->descending ? "" : ", descending=false") + ")";
                break;
            case PlanNode::Kind::Check:
                out += "\n.check(" + print_expr(n->expr) + ")";
                break;
        }
    }
    return out;
}

}  // namespace veriq
