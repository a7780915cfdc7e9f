#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veriq/analyze.hpp"
#include "veriq/physical.hpp"

namespace veriq {

namespace prompts {

inline constexpr const char* kSearchSpecTemplate =
    "You are preparing retrieval guidance for a verification query. Given the semantic "
    "operations below, produce a short semantic search query describing relevant records, a "
    "list of inclusion keywords likely to appear in relevant records, and a list of exclusion "
    "keywords that should not appear in them.\nOperations: {context}\nReply with a JSON object "
    "{\"query\": string, \"inclusion_keywords\": [string], \"exclusion_keywords\": [string]}.";

}  // namespace prompts

// Context an aggregate's relevance signals are generated from: the traced map
// prompt, filter prompts over the same text attribute, and the quantifier.
struct SearchContext {
    std::string map_prompt;
    std::vector<std::string> filter_prompts;
    AggFn fn = AggFn::BoolOr;
    std::optional<Comparison> cmp;

    std::string render() const {
        std::string out = "map: " + map_prompt;
        out += " | filters:";
        if (filter_prompts.empty()) out += " none";
        for (const auto& f : filter_prompts) out += " " + f + ";";
        out += " | aggregate: ";
        out += agg_fn_name(fn);
        if (cmp) {
            out += " ";
            out += compare_op_name(cmp->op);
            out += " " + std::to_string(cmp->threshold);
        }
        return out;
    }
};

// One oracle call turning the aggregate context into a search query plus
// inclusion/exclusion keywords; a second attempt on unparseable output, then
// a fallback spec built from the prompts themselves.
inline SearchSpec build_search_spec(const SearchContext& ctx, Oracle& oracle,
                                    const Embedder& embedder, const EngineConfig& cfg) {
    OracleRequest req = make_completion_request(cfg.opt_model, prompts::kSearchSpecTemplate,
                                                {{"context", ctx.render()}});
    req.temperature = cfg.temperature;
    SearchSpec spec;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto rsp = oracle.evaluate_one(req);
        nlohmann::json j = nlohmann::json::parse(rsp.raw, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("query")) continue;
        spec.query = j.value("query", "");
        spec.inclusion_keywords =
            normalize_keywords(j.value("inclusion_keywords", std::vector<std::string>{}));
        spec.exclusion_keywords =
            normalize_keywords(j.value("exclusion_keywords", std::vector<std::string>{}));
        spec.query_embedding = embedder.embed(spec.query);
        return spec;
    }
    // fallback: concatenated prompts, no keywords
    spec.query = ctx.map_prompt;
    for (const auto& f : ctx.filter_prompts) spec.query += " " + f;
    spec.inclusion_keywords.clear();
    spec.exclusion_keywords.clear();
    spec.query_embedding = embedder.embed(spec.query);
    return spec;
}

namespace opt_detail {

inline const Expr* find_prompt(const ExprPtr& e) {
    if (!e) return nullptr;
    if (e->kind == Expr::Kind::Prompt) return e.get();
    if (e->lhs)
        if (const Expr* p = find_prompt(e->lhs)) return p;
    if (e->rhs)
        if (const Expr* p = find_prompt(e->rhs)) return p;
    for (const auto& c : e->children)
        if (const Expr* p = find_prompt(c)) return p;
    return nullptr;
}

inline std::optional<std::string> traced_text_attr(const ExprPtr& formula, const Schema& schema) {
    const Expr* p = find_prompt(formula);
    if (!p) return std::nullopt;
    for (const auto& ph : prompt_placeholders(p->template_str)) {
        const AttrDecl* d = schema.find(ph);
        if (d && d->type == AttrType::Text) return ph;
    }
    return std::nullopt;
}

inline bool placeholder_hits(const ExprPtr& prompt_expr, const std::string& attr) {
    for (const auto& ph : prompt_placeholders(prompt_expr->template_str))
        if (ph == attr) return true;
    return false;
}

// Eligibility for relevance sorting: the aggregate argument must trace to a
// semantic prompt over a text attribute.
inline bool relevance_eligible(const ClaimShape& shape, const Schema& schema) {
    return traced_text_attr(shape.formula, schema).has_value();
}

struct LogicalPieces {
    std::vector<const PlanNode*> pre_ops;  // filters/maps below the first aggregate
    const PlanNode* agg1 = nullptr;
    const PlanNode* agg2 = nullptr;
    const PlanNode* rank = nullptr;
    const PlanNode* post_filter = nullptr;
    const PlanNode* check = nullptr;
};

inline LogicalPieces split_chain(const PlanPtr& root) {
    LogicalPieces out;
    for (const PlanNode* n : plan_chain(root)) {
        switch (n->kind) {
            case PlanNode::Kind::Scan: break;
            case PlanNode::Kind::Filter:
                if (!out.agg1) out.pre_ops.push_back(n);
                else out.post_filter = n;
                break;
            case PlanNode::Kind::Map:
                out.pre_ops.push_back(n);
                break;
            case PlanNode::Kind::Aggregate:
                (out.agg1 ? out.agg2 : out.agg1) = n;
                break;
            case PlanNode::Kind::WithRank: out.rank = n; break;
            case PlanNode::Kind::Check: out.check = n; break;
        }
    }
    return out;
}

}  // namespace opt_detail

// Rule-based rewrite of a type-checked logical plan into a physical plan:
// comparison pushdown, operator fusion, similarity pre-filters, count scans,
// group sorts, per-aggregate strategy choice, shuffle insertion and error
// budget allocation, honoring the ablation switches.
inline PhysicalPlan optimize(const PlanPtr& logical, const Schema& schema, Oracle& opt_oracle,
                             const Embedder& embedder, const EngineConfig& cfg) {
    PhysicalPlan plan;

    std::optional<ClaimShape> shape;
    try {
        shape = claim_structure_of(logical);
    } catch (const UnsupportedShape& e) {
        plan.warnings.push_back(std::string("optimizer: ") + e.what() +
                                "; executing without verification-aware optimizations");
    }
    plan.shape = shape;

    auto pieces = opt_detail::split_chain(logical);

    // (1) comparison pushdown: hints live on the physical aggregates below
    std::optional<Comparison> inner_hint, outer_hint;
    if (shape) {
        switch (shape->kind) {
            case ClaimKind::Simple:
                if (shape->outer.kind == QuantKind::Cardinal ||
                    shape->outer.kind == QuantKind::Proportional)
                    inner_hint = shape->outer.cmp;
                break;
            case ClaimKind::Nested:
                if (shape->inner.kind == QuantKind::Cardinal ||
                    shape->inner.kind == QuantKind::Proportional)
                    inner_hint = shape->inner.cmp;
                if (shape->outer.kind == QuantKind::Cardinal ||
                    shape->outer.kind == QuantKind::Proportional)
                    outer_hint = shape->outer.cmp;
                break;
            case ClaimKind::Ordinal:
                break;  // ranks need exact or estimated values, not thresholds
        }
    }

    // scan + symbolic pushdown section
    {
        PhysOp scan;
        scan.kind = PhysOp::Kind::Scan;
        plan.ops.push_back(std::move(scan));
    }
    std::vector<const PlanNode*> semantic_ops;
    for (const PlanNode* n : pieces.pre_ops) {
        bool semantic = expr_contains_prompt(n->expr);
        if (!semantic) {
            PhysOp op;
            op.kind = n->kind == PlanNode::Kind::Filter ? PhysOp::Kind::SymbolicFilter
                                                        : PhysOp::Kind::SymbolicMap;
            op.expr = n->expr;
            op.out_name = n->out_name;
            plan.ops.push_back(std::move(op));
        } else {
            semantic_ops.push_back(n);
        }
    }

    // (2) fuse consecutive semantic filter/map chains
    struct Stage {
        bool fused = false;
        std::vector<FusedPart> parts;  // singleton when not fused
    };
    std::vector<Stage> stages;
    if (cfg.fusion) {
        Stage cur;
        std::vector<std::string> produced;  // out_names in the open fusion group
        for (const PlanNode* n : semantic_ops) {
            bool depends = false;
            for (const auto& ph : prompt_placeholders(n->expr->template_str))
                for (const auto& out : produced) depends = depends || ph == out;
            if (depends && !cur.parts.empty()) {
                cur.fused = cur.parts.size() > 1;
                stages.push_back(std::move(cur));
                cur = {};
                produced.clear();
            }
            FusedPart p;
            p.is_filter = n->kind == PlanNode::Kind::Filter;
            p.prompt = n->expr;
            p.out_name = n->out_name;
            if (!p.is_filter) produced.push_back(p.out_name);
            cur.parts.push_back(std::move(p));
        }
        if (!cur.parts.empty()) {
            cur.fused = cur.parts.size() > 1;
            stages.push_back(std::move(cur));
        }
    } else {
        for (const PlanNode* n : semantic_ops) {
            Stage st;
            FusedPart p;
            p.is_filter = n->kind == PlanNode::Kind::Filter;
            p.prompt = n->expr;
            p.out_name = n->out_name;
            st.parts.push_back(std::move(p));
            stages.push_back(std::move(st));
        }
    }

    bool fused_has_filter = false;
    bool any_semantic_filter = false;
    for (const auto& st : stages)
        for (const auto& p : st.parts) {
            any_semantic_filter |= p.is_filter;
            fused_has_filter |= st.fused && p.is_filter;
        }

    // (4) count scan for ungrouped aggregates, unless a fused operator hides
    // a semantic filter behind a single call
    const PlanNode* agg1 = pieces.agg1;
    bool grouped = agg1 && !agg1->group_by.empty();
    bool insert_count_scan = cfg.early_stopping && agg1 && !grouped && !fused_has_filter;
    if (insert_count_scan) {
        PhysOp count;
        count.kind = PhysOp::Kind::CountScan;
        plan.ops.push_back(std::move(count));
    }

    // (5) group sort as low as possible for grouped aggregates
    if (cfg.early_stopping && grouped) {
        PhysOp op;
        op.kind = PhysOp::Kind::GroupSort;
        op.group_by = agg1->group_by;
        plan.ops.push_back(std::move(op));
    }

    // (6) per-aggregate strategy
    Strategy inner_strategy = Strategy::None;
    Strategy outer_strategy = Strategy::None;
    bool relevance_ok = cfg.early_stopping && cfg.relevance_sorting && shape &&
                        opt_detail::relevance_eligible(*shape, schema);
    bool estimation_ok = cfg.early_stopping && cfg.estimation && shape.has_value();
    // count comparisons can only be estimated against an exact population
    bool inner_count_estimable = insert_count_scan ? !any_semantic_filter
                               : (grouped && cfg.early_stopping && !any_semantic_filter);

    if (shape) {
        AggFn fn = shape->inner_fn;
        const Quantifier inner_q = shape->kind == ClaimKind::Nested ? shape->inner : shape->outer;
        auto degenerate_eq = [](const Quantifier& q) {
            return (q.kind == QuantKind::Cardinal || q.kind == QuantKind::Proportional) &&
                   q.cmp.op == CompareOp::EQ && q.cmp.threshold == 0.0;
        };
        if (shape->kind == ClaimKind::Ordinal) {
            // ordinal values come from estimation when the per-group
            // populations support it, otherwise exact evaluation
            bool count_ok = !shape->ordinal_proportion ? !any_semantic_filter : true;
            if (estimation_ok && count_ok) inner_strategy = Strategy::Estimation;
        } else {
            switch (fn) {
                case AggFn::BoolOr:
                    if (relevance_ok) inner_strategy = Strategy::Relevance;
                    break;
                case AggFn::BoolAnd:
                    if (estimation_ok) inner_strategy = Strategy::Estimation;
                    break;
                case AggFn::CountIf: {
                    bool at_least =
                        inner_q.cmp.op == CompareOp::GE || inner_q.cmp.op == CompareOp::GT;
                    if (at_least && relevance_ok &&
                        (inner_q.cmp.threshold <= static_cast<double>(cfg.low_k) ||
                         !inner_count_estimable)) {
                        // low thresholds, and any threshold when no usable
                        // total exists for scaling the CI
                        inner_strategy = Strategy::Relevance;
                    } else if (estimation_ok && inner_count_estimable && !degenerate_eq(inner_q)) {
                        inner_strategy = Strategy::Estimation;
                    } else if (at_least && relevance_ok) {
                        inner_strategy = Strategy::Relevance;
                    }
                    break;
                }
                case AggFn::Proportion:
                    if (estimation_ok && !degenerate_eq(inner_q))
                        inner_strategy = Strategy::Estimation;
                    break;
            }
        }
        if (shape->kind == ClaimKind::Nested) {
            auto outer_degenerate = degenerate_eq(shape->outer);
            if (estimation_ok && !outer_degenerate) outer_strategy = Strategy::Estimation;
        }
    }

    bool any_estimation =
        inner_strategy == Strategy::Estimation || outer_strategy == Strategy::Estimation;

    // shuffle for exchangeability wherever estimation runs
    if (any_estimation) {
        PhysOp op;
        op.kind = PhysOp::Kind::Shuffle;
        op.seed = cfg.shuffle_seed;
        op.hierarchical = grouped;
        op.shuffle_within_blocks = !(grouped && inner_strategy == Strategy::Relevance);
        plan.ops.push_back(std::move(op));
    }

    // relevance sort above the scan (within groups when the aggregate is
    // grouped)
    SearchSpec agg_spec;
    bool have_spec = false;
    auto ensure_spec = [&]() {
        if (have_spec || !shape) return;
        SearchContext ctx;
        const Expr* p = opt_detail::find_prompt(shape->formula);
        ctx.map_prompt = p ? p->template_str : print_expr(shape->formula);
        auto text_attr = opt_detail::traced_text_attr(shape->formula, schema);
        for (const PlanNode* n : semantic_ops)
            if (n->kind == PlanNode::Kind::Filter && text_attr &&
                opt_detail::placeholder_hits(n->expr, *text_attr))
                ctx.filter_prompts.push_back(n->expr->template_str);
        ctx.fn = shape->inner_fn;
        ctx.cmp = inner_hint;
        agg_spec = build_search_spec(ctx, opt_oracle, embedder, cfg);
        have_spec = true;
    };

    if (inner_strategy == Strategy::Relevance) {
        ensure_spec();
        PhysOp op;
        op.kind = PhysOp::Kind::RelevanceSort;
        op.spec = agg_spec;
        op.within_groups = grouped;
        auto text_attr = opt_detail::traced_text_attr(shape->formula, schema);
        op.text_attr = text_attr ? *text_attr : std::string();
        plan.ops.push_back(std::move(op));
    }

    // (3) similarity pre-filter below each remaining semantic filter; fused
    // operators carry their filters internally and get one prefilter keyed on
    // the first fused filter's spec
    if (cfg.similarity_filter) {
        for (const auto& st : stages) {
            const FusedPart* first_filter = nullptr;
            for (const auto& p : st.parts)
                if (p.is_filter && !first_filter) first_filter = &p;
            if (!first_filter) continue;
            SearchContext ctx;
            ctx.map_prompt = first_filter->prompt->template_str;
            ctx.fn = AggFn::BoolOr;
            PhysOp op;
            op.kind = PhysOp::Kind::SimilarityPrefilter;
            op.spec = build_search_spec(ctx, opt_oracle, embedder, cfg);
            op.tau = cfg.tau;
            plan.ops.push_back(std::move(op));
        }
    }

    // semantic stages
    for (const auto& st : stages) {
        PhysOp op;
        if (st.fused) {
            op.kind = PhysOp::Kind::FusedSemantic;
            op.fused = st.parts;
        } else {
            const FusedPart& p = st.parts[0];
            op.kind = p.is_filter ? PhysOp::Kind::SemanticFilter : PhysOp::Kind::SemanticMap;
            op.expr = p.prompt;
            op.out_name = p.out_name;
        }
        plan.ops.push_back(std::move(op));
    }

    // (7) error budgets: one entry per estimating aggregate, innermost first;
    // grouped aggregates take a Bonferroni share once the sort phase reveals
    // the group count, or a geometric share when a semantic filter can still
    // drop whole groups
    std::vector<BudgetPlan::OpBudget> budget_ops;
    int inner_budget = -1, outer_budget = -1;
    if (inner_strategy == Strategy::Estimation) {
        inner_budget = static_cast<int>(budget_ops.size());
        if (grouped) {
            if (any_semantic_filter)
                budget_ops.push_back({1, std::nullopt});  // geometric
            else {
                budget_ops.push_back({1, 1});  // Bonferroni; g patched at run time
                plan.grouped_budget_op = inner_budget;
            }
        } else {
            budget_ops.push_back({1, 1});
        }
    }
    if (outer_strategy == Strategy::Estimation) {
        outer_budget = static_cast<int>(budget_ops.size());
        budget_ops.push_back({1, 1});
    }
    if (!budget_ops.empty()) plan.budget = allocate_budget(cfg.alpha, std::move(budget_ops));

    // aggregates and the rest of the chain
    if (agg1) {
        PhysOp op;
        op.kind = PhysOp::Kind::Aggregate;
        for (size_t i = 0; i < agg1->aggs.size(); ++i) {
            AggPhys ap;
            ap.agg = agg1->aggs[i];
            if (i == 0) {
                ap.hint = inner_hint;
                ap.strategy = inner_strategy;
                ap.budget_op = inner_budget;
            }
            op.aggs.push_back(std::move(ap));
        }
        op.group_by = agg1->group_by;
        plan.ops.push_back(std::move(op));
    }
    if (pieces.agg2) {
        PhysOp op;
        op.kind = PhysOp::Kind::Aggregate;
        for (size_t i = 0; i < pieces.agg2->aggs.size(); ++i) {
            AggPhys ap;
            ap.agg = pieces.agg2->aggs[i];
            if (i == 0) {
                ap.hint = outer_hint;
                ap.strategy = outer_strategy;
                ap.budget_op = outer_budget;
            }
            op.aggs.push_back(std::move(ap));
        }
        plan.ops.push_back(std::move(op));
    }
    if (pieces.rank) {
        PhysOp op;
        op.kind = PhysOp::Kind::WithRank;
        op.expr = pieces.rank->expr;
        op.descending = pieces.rank->descending;
        plan.ops.push_back(std::move(op));
    }
    if (pieces.post_filter) {
        PhysOp op;
        op.kind = PhysOp::Kind::SymbolicFilter;
        op.expr = pieces.post_filter->expr;
        plan.ops.push_back(std::move(op));
    }
    {
        PhysOp op;
        op.kind = PhysOp::Kind::Check;
        op.expr = pieces.check->expr;
        plan.ops.push_back(std::move(op));
    }
    return plan;
}

}  // namespace veriq
