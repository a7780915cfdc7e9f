#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "veriq/analyze.hpp"
#include "veriq/plan.hpp"
#include "veriq/relevance.hpp"
#include "veriq/stats.hpp"

namespace veriq {

enum class Strategy { None, Relevance, Estimation };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::None: return "none";
        case Strategy::Relevance: return "relevance";
        case Strategy::Estimation: return "estimation";
    }
    return "?";
}

// Engine and optimizer configuration, including the leave-one-out ablation
// switches.
struct EngineConfig {
    int batch_size = 32;
    double alpha = 0.05;
    double eps = 0.05;
    double tau = 0.15;
    std::int64_t low_k = 10;
    std::uint64_t shuffle_seed = 1;

    enum class ErrorPolicy { Abort, SkipWithWarning };
    ErrorPolicy error_policy = ErrorPolicy::Abort;

    bool early_stopping = true;
    bool relevance_sorting = true;
    bool estimation = true;
    bool fusion = true;
    bool similarity_filter = true;
    bool caching = true;

    CsKind cs_kind = CsKind::Betting;
    std::string exec_model = "exec-sim";
    std::string opt_model = "opt-sim";
    double temperature = 0.0;

    static EngineConfig all_disabled() {
        EngineConfig cfg;
        cfg.early_stopping = false;
        cfg.relevance_sorting = false;
        cfg.estimation = false;
        cfg.fusion = false;
        cfg.similarity_filter = false;
        cfg.caching = false;
        return cfg;
    }
};

struct FusedPart {
    bool is_filter = false;
    ExprPtr prompt;        // always a PromptExpr
    std::string out_name;  // map output attribute (empty for filters)
};

struct AggPhys {
    AggExpr agg;
    std::optional<Comparison> hint;  // pushed-down comparison in the aggregate's own space
    Strategy strategy = Strategy::None;
    int budget_op = -1;  // index into the budget plan when estimating
};

// One physical operator; the plan is the linear chain leaf -> root.
struct PhysOp {
    enum class Kind {
        Scan,
        SymbolicFilter,
        SymbolicMap,
        CountScan,
        GroupSort,
        Shuffle,
        RelevanceSort,
        SimilarityPrefilter,
        SemanticFilter,
        SemanticMap,
        FusedSemantic,
        Aggregate,
        WithRank,
        Check
    };

    Kind kind = Kind::Scan;
    ExprPtr expr;                       // SymbolicFilter / SemanticFilter / SemanticMap / WithRank / Check
    std::string out_name;               // SemanticMap
    std::vector<FusedPart> fused;       // FusedSemantic
    std::vector<AggPhys> aggs;          // Aggregate
    std::vector<std::string> group_by;  // Aggregate / GroupSort
    bool descending = true;             // WithRank

    SearchSpec spec;  // RelevanceSort / SimilarityPrefilter
    double tau = 0.15;
    std::string text_attr;  // attribute scored by RelevanceSort

    std::uint64_t seed = 0;  // Shuffle
    bool hierarchical = false;
    bool shuffle_within_blocks = true;
    bool within_groups = false;  // RelevanceSort below a grouped aggregate
};

inline const char* phys_op_name(PhysOp::Kind k) {
    switch (k) {
        case PhysOp::Kind::Scan: return "scan";
        case PhysOp::Kind::SymbolicFilter: return "symbolic_filter";
        case PhysOp::Kind::SymbolicMap: return "symbolic_map";
        case PhysOp::Kind::CountScan: return "count_scan";
        case PhysOp::Kind::GroupSort: return "group_sort";
        case PhysOp::Kind::Shuffle: return "shuffle";
        case PhysOp::Kind::RelevanceSort: return "relevance_sort";
        case PhysOp::Kind::SimilarityPrefilter: return "similarity_prefilter";
        case PhysOp::Kind::SemanticFilter: return "semantic_filter";
        case PhysOp::Kind::SemanticMap: return "semantic_map";
        case PhysOp::Kind::FusedSemantic: return "fused_semantic";
        case PhysOp::Kind::Aggregate: return "aggregate";
        case PhysOp::Kind::WithRank: return "with_rank";
        case PhysOp::Kind::Check: return "check";
    }
    return "?";
}

struct PhysicalPlan {
    std::vector<PhysOp> ops;  // leaf -> root
    std::optional<ClaimShape> shape;
    BudgetPlan budget;          // ops empty when nothing estimates
    int grouped_budget_op = -1;  // budget op whose group count is known at sort time
    std::vector<std::string> warnings;

    bool has_op(PhysOp::Kind k) const {
        for (const auto& op : ops)
            if (op.kind == k) return true;
        return false;
    }

    const PhysOp* find_op(PhysOp::Kind k) const {
        for (const auto& op : ops)
            if (op.kind == k) return &op;
        return nullptr;
    }

    std::string describe() const {
        std::string out;
        for (const auto& op : ops) {
            if (!out.empty()) out += " -> ";
            out += phys_op_name(op.kind);
            if (op.kind == PhysOp::Kind::Aggregate) {
                out += "[";
                for (size_t i = 0; i < op.aggs.size(); ++i) {
                    if (i) out += ",";
                    out += agg_fn_name(op.aggs[i].agg.fn);
                    out += ":";
                    out += strategy_name(op.aggs[i].strategy);
                }
                out += "]";
            }
        }
        return out;
    }
};

}  // namespace veriq
