#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "veriq/oracle.hpp"
#include "veriq/physical.hpp"
#include "veriq/provenance.hpp"

namespace veriq {

// ---- execution row -------------------------------------------------------------

// A tuple flowing through the pipeline: the immutable base row plus derived
// attributes added by maps. Aggregate outputs become synthetic rows with no
// base.
struct Row {
    const TupleRow* base = nullptr;
    std::map<std::string, AttrValue> derived;

    std::int64_t row_id() const { return base ? base->row_id : -1; }

    const AttrValue* find(const std::string& name) const {
        auto it = derived.find(name);
        if (it != derived.end()) return &it->second;
        if (base) {
            auto bit = base->attrs.find(name);
            if (bit != base->attrs.end()) return &bit->second;
        }
        return nullptr;
    }

    const AttrValue& get(const std::string& name) const {
        const AttrValue* v = find(name);
        if (!v) throw Error("execution: no attribute '" + name + "' on row");
        return *v;
    }
};

// ---- symbolic evaluation ---------------------------------------------------------

inline bool eval_compare_values(const AttrValue& lhs, CompareOp op, const AttrValue& rhs) {
    if (lhs.is_numeric() && rhs.is_numeric()) {
        double a = lhs.as_real(), b = rhs.as_real();
        // NaN marks an aggregate over empty input: every comparison is false
        if (std::isnan(a) || std::isnan(b)) return false;
        return compare_reals(a, op, b);
    }
    auto stringish = [](const AttrValue& v) {
        return v.type() == AttrType::Text || v.type() == AttrType::Categorical;
    };
    if (stringish(lhs) && stringish(rhs)) {
        bool eq = lhs.as_string() == rhs.as_string();
        if (op == CompareOp::EQ) return eq;
        if (op == CompareOp::NE) return !eq;
        throw Error("execution: ordering comparison on strings");
    }
    if (lhs.type() == AttrType::Bool && rhs.type() == AttrType::Bool) {
        bool eq = lhs.as_bool() == rhs.as_bool();
        if (op == CompareOp::EQ) return eq;
        if (op == CompareOp::NE) return !eq;
        throw Error("execution: ordering comparison on booleans");
    }
    throw Error("execution: incomparable values");
}

// Evaluates a prompt-free expression on a row.
inline AttrValue eval_symbolic(const ExprPtr& e, const Row& row) {
    switch (e->kind) {
        case Expr::Kind::Column: return row.get(e->name);
        case Expr::Kind::Literal: return e->literal;
        case Expr::Kind::Compare:
            return AttrValue::boolean(eval_compare_values(eval_symbolic(e->lhs, row), e->cmp_op,
                                                          eval_symbolic(e->rhs, row)));
        case Expr::Kind::And: {
            for (const auto& c : e->children)
                if (!eval_symbolic(c, row).as_bool()) return AttrValue::boolean(false);
            return AttrValue::boolean(true);
        }
        case Expr::Kind::Or: {
            for (const auto& c : e->children)
                if (eval_symbolic(c, row).as_bool()) return AttrValue::boolean(true);
            return AttrValue::boolean(false);
        }
        case Expr::Kind::Not: return AttrValue::boolean(!eval_symbolic(e->lhs, row).as_bool());
        case Expr::Kind::Prompt:
            throw Error("execution: prompt expression reached symbolic evaluation");
    }
    throw Error("execution: malformed expression");
}

// ---- prompt rendering --------------------------------------------------------------

namespace exec_detail {

inline std::pair<std::string, std::map<std::string, std::string>> substitute_prompt(
    const std::string& template_str, const Row& row) {
    std::map<std::string, std::string> fields;
    std::string out;
    size_t i = 0;
    while (i < template_str.size()) {
        if (template_str[i] == '{') {
            size_t j = template_str.find('}', i + 1);
            if (j == std::string::npos) {
                out += template_str.substr(i);
                break;
            }
            std::string name = template_str.substr(i + 1, j - i - 1);
            std::string value = row.get(name).to_display();
            fields[name] = value;
            out += value;
            i = j + 1;
        } else {
            out.push_back(template_str[i]);
            ++i;
        }
    }
    return {std::move(out), std::move(fields)};
}

inline std::string answer_instruction(const ReturnSpec& ret) {
    switch (ret.type) {
        case ReturnType::Bool: return "Answer strictly true or false.";
        case ReturnType::Int: return "Answer with a single integer.";
        case ReturnType::Real: return "Answer with a single number.";
        case ReturnType::Enum: {
            std::string out = "Answer with exactly one of:";
            for (size_t i = 0; i < ret.labels.size(); ++i)
                out += (i ? ", " : " ") + ret.labels[i];
            out += ".";
            return out;
        }
        case ReturnType::Text: return "";
    }
    return "";
}

struct SemStage {
    enum class Kind { Filter, Map, Fused };
    Kind kind = Kind::Filter;
    ExprPtr prompt;        // Filter / Map
    std::string out_name;  // Map
    std::vector<FusedPart> fused;
};

inline OracleRequest build_stage_request(const SemStage& stage, const Row& row,
                                         const EngineConfig& cfg) {
    OracleRequest req;
    req.model = cfg.exec_model;
    req.temperature = cfg.temperature;
    if (stage.kind != SemStage::Kind::Fused) {
        auto [rendered, fields] = substitute_prompt(stage.prompt->template_str, row);
        PromptPart part;
        part.key = "a1";
        part.template_id = stage.prompt->template_str;
        part.fields = std::move(fields);
        part.ret = stage.prompt->ret;
        req.rendered_prompt = rendered + "\n" + answer_instruction(part.ret);
        req.parts.push_back(std::move(part));
        return req;
    }
    std::string prompt_text = "Answer each question about the record.";
    for (size_t i = 0; i < stage.fused.size(); ++i) {
        auto [rendered, fields] = substitute_prompt(stage.fused[i].prompt->template_str, row);
        PromptPart part;
        part.key = "a" + std::to_string(i + 1);
        part.template_id = stage.fused[i].prompt->template_str;
        part.fields = std::move(fields);
        part.ret = stage.fused[i].prompt->ret;
        prompt_text += "\nQ" + std::to_string(i + 1) + ": " + rendered + " " +
                       answer_instruction(part.ret);
        req.parts.push_back(std::move(part));
    }
    prompt_text += "\nRespond with a JSON object holding one key per question";
    if (!req.parts.empty()) {
        prompt_text += " (";
        for (size_t i = 0; i < req.parts.size(); ++i)
            prompt_text += (i ? ", " : "") + ("\"" + req.parts[i].key + "\"");
        prompt_text += ")";
    }
    prompt_text += ".";
    req.rendered_prompt = prompt_text;
    return req;
}

inline AttrValue oracle_value_to_attr(const OracleValue& v) {
    switch (v.type) {
        case ReturnType::Bool: return AttrValue::boolean(v.b);
        case ReturnType::Int: return AttrValue::integer(v.i);
        case ReturnType::Real: return AttrValue::real(v.r);
        case ReturnType::Enum: return AttrValue::categorical(v.s);
        case ReturnType::Text: return AttrValue::text(v.s);
    }
    return AttrValue::boolean(false);
}

}  // namespace exec_detail

// ---- verdict -------------------------------------------------------------------------

enum class ResolutionKind { Deterministic, Estimated, FullScan };

inline const char* resolution_name(ResolutionKind r) {
    switch (r) {
        case ResolutionKind::Deterministic: return "deterministic";
        case ResolutionKind::Estimated: return "estimated";
        case ResolutionKind::FullScan: return "full_scan";
    }
    return "?";
}

struct ExecStats {
    std::int64_t oracle_calls = 0;
    std::int64_t backend_calls = 0;
    std::int64_t batch_rounds = 0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t tuples_processed = 0;
    double wall_time_s = 0.0;
};

struct Verdict {
    bool value = false;
    std::vector<ProvToken> tokens;
    ExecStats stats;
    ResolutionKind resolution = ResolutionKind::FullScan;
    double alpha_used = 0.0;  // total significance consumed by estimation
    std::vector<std::string> notes;
};

// ---- dense rank ------------------------------------------------------------------------

// rank(v) = |{distinct values better than v}| + 1; ties share ranks, no gaps.
inline std::vector<std::int64_t> dense_rank(const std::vector<double>& values, bool descending) {
    std::vector<double> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::int64_t> ranks(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        std::int64_t better = 0;
        for (double v : distinct) {
            if (descending ? v > values[i] : v < values[i]) ++better;
        }
        ranks[i] = better + 1;
    }
    return ranks;
}

// ---- accumulator --------------------------------------------------------------------------

// Running aggregation state for one accumulator (one agg expression over one
// group). Resolution order: witness/counterexample, running-count hints,
// population bounds, confidence-sequence rules; exhaustion finalizes exactly.
class EngineAccumulator {
public:
    AggFn fn = AggFn::BoolOr;
    std::optional<Comparison> hint;
    std::string formula_id;
    std::optional<std::int64_t> n_exact;  // exact aggregate-input population
    std::optional<std::int64_t> n_upper;  // count-point population (upper bound)
    double eps = 0.05;
    bool es_enabled = true;

    std::int64_t seen = 0;
    std::int64_t positives = 0;
    std::int64_t scan_consumed = 0;  // rows decided at the count point
    std::optional<ConfidenceState> cs;

    bool resolved = false;
    bool result = false;
    bool exhausted = false;
    bool by_cs = false;
    std::vector<ProvToken> tokens;
    std::vector<std::string> notes;

    bool done() const { return resolved; }

    // A row passed the count point. Survivors carry their formula value.
    void row_passed(std::int64_t row_id, std::optional<bool> value) {
        if (resolved) return;
        ++scan_consumed;
        if (value) {
            ++seen;
            positives += *value ? 1 : 0;
            tokens.push_back({row_id, formula_id, *value});
            if (cs && !cs->finalized()) cs->update(*value);
        }
        recheck();
    }

    void finish_stream() {
        if (resolved) return;
        exhausted = true;
        resolved = true;
        result = exact_result();
    }

    AccCapture capture() const {
        AccCapture cap;
        cap.tokens = tokens;
        cap.positives = positives;
        cap.seen = seen;
        cap.exhausted = exhausted;
        if (by_cs || !n_exact)
            cap.prop_denominator = static_cast<double>(seen);
        else
            cap.prop_denominator = static_cast<double>(*n_exact);
        return cap;
    }

private:
    bool exact_result() {
        switch (fn) {
            case AggFn::BoolOr: return positives >= 1;
            case AggFn::BoolAnd:
                if (seen == 0) notes.push_back("universal aggregate over empty input: vacuously true");
                return positives == seen;
            case AggFn::CountIf:
                return hint ? hint->eval(static_cast<double>(positives)) : positives > 0;
            case AggFn::Proportion: {
                if (seen == 0) {
                    notes.push_back("proportion over empty input: comparison evaluates false");
                    return false;
                }
                double v = static_cast<double>(positives) / static_cast<double>(seen);
                return hint ? hint->eval(v) : v > 0;
            }
        }
        return false;
    }

    std::optional<std::int64_t> remaining() const {
        if (n_exact) return *n_exact - seen;
        if (n_upper) return *n_upper - scan_consumed;
        return std::nullopt;
    }

    static std::optional<bool> decide_count_interval(std::int64_t lo, std::int64_t hi,
                                                     const Comparison& cmp) {
        double k = cmp.threshold;
        double dlo = static_cast<double>(lo), dhi = static_cast<double>(hi);
        switch (cmp.op) {
            case CompareOp::GE:
                if (dlo >= k) return true;
                if (dhi < k) return false;
                return std::nullopt;
            case CompareOp::GT:
                if (dlo > k) return true;
                if (dhi <= k) return false;
                return std::nullopt;
            case CompareOp::LE:
                if (dhi <= k) return true;
                if (dlo > k) return false;
                return std::nullopt;
            case CompareOp::LT:
                if (dhi < k) return true;
                if (dlo >= k) return false;
                return std::nullopt;
            case CompareOp::EQ: {
                bool k_reachable = k >= dlo && k <= dhi && std::floor(k) == k;
                if (!k_reachable) return false;
                if (lo == hi && dlo == k) return true;
                return std::nullopt;
            }
            case CompareOp::NE: {
                bool k_reachable = k >= dlo && k <= dhi && std::floor(k) == k;
                if (!k_reachable) return true;
                if (lo == hi && dlo == k) return false;
                return std::nullopt;
            }
        }
        return std::nullopt;
    }

    static std::optional<bool> decide_real_interval(double lo, double hi, const Comparison& cmp) {
        double k = cmp.threshold;
        switch (cmp.op) {
            case CompareOp::GE:
                if (lo >= k) return true;
                if (hi < k) return false;
                return std::nullopt;
            case CompareOp::GT:
                if (lo > k) return true;
                if (hi <= k) return false;
                return std::nullopt;
            case CompareOp::LE:
                if (hi <= k) return true;
                if (lo > k) return false;
                return std::nullopt;
            case CompareOp::LT:
                if (hi < k) return true;
                if (lo >= k) return false;
                return std::nullopt;
            case CompareOp::EQ:
                if (lo == hi && lo == k) return true;
                if (k < lo || k > hi) return false;
                return std::nullopt;
            case CompareOp::NE:
                if (k < lo || k > hi) return true;
                if (lo == hi && lo == k) return false;
                return std::nullopt;
        }
        return std::nullopt;
    }

    void resolve(bool value, bool estimated) {
        resolved = true;
        result = value;
        by_cs = estimated;
        auto rem = remaining();
        if (!estimated && rem && *rem == 0) exhausted = true;  // stream fully decided
    }

    void recheck() {
        if (resolved) return;
        if (es_enabled) {
            // (1) witness / counterexample
            if (fn == AggFn::BoolOr && positives >= 1) return resolve(true, false);
            if (fn == AggFn::BoolAnd && seen > positives) return resolve(false, false);
            // (2) running count meets an at-least hint
            if (fn == AggFn::CountIf && hint &&
                (hint->op == CompareOp::GE || hint->op == CompareOp::GT) &&
                hint->eval(static_cast<double>(positives)))
                return resolve(true, false);
            // (3) population bounds
            auto rem = remaining();
            if (rem && hint && fn == AggFn::CountIf) {
                auto d = decide_count_interval(positives, positives + *rem, *hint);
                if (d) return resolve(*d, false);
            }
            if (rem && hint && fn == AggFn::Proportion) {
                if (n_exact) {
                    double n = static_cast<double>(*n_exact);
                    Comparison count_cmp{hint->op, hint->threshold * n};
                    auto d = decide_count_interval(positives, positives + *rem, count_cmp);
                    if (d) return resolve(*d, false);
                } else if (seen + *rem > 0) {
                    double denom = static_cast<double>(seen + *rem);
                    double lo = static_cast<double>(positives) / denom;
                    double hi = static_cast<double>(positives + *rem) / denom;
                    auto d = decide_real_interval(lo, hi, *hint);
                    if (d) return resolve(*d, false);
                }
            }
            if (rem && fn == AggFn::BoolAnd && *rem == 0 && seen == positives && seen > 0)
                return resolve(true, false);
        }
        // (4) confidence-sequence rules
        if (cs && cs->observations() > 0) {
            // count-space scaling and bool_or need the exact population
            std::optional<std::int64_t> n_for_cs = n_exact;
            if ((fn == AggFn::CountIf || fn == AggFn::BoolOr) && !n_for_cs) return;
            auto r = cs_resolve(*cs, fn, hint, eps, n_for_cs);
            if (r.resolved) return resolve(r.value, true);
        }
    }
};

// ---- prepared input ------------------------------------------------------------------------

namespace exec_detail {

struct PreparedInput {
    std::vector<Row> rows;              // free-prefix output, prefilter applied
    std::vector<size_t> block_offsets;  // block starts plus end (>= 2 entries)
    std::vector<std::string> block_keys;
    std::vector<SemStage> stages;
    bool has_semantic_filter = false;
    bool counted = false;  // a CountScan or GroupSort provided population counts
    std::int64_t prefilter_dropped = 0;
    const PhysOp* aggregate = nullptr;
    std::vector<const PhysOp*> post_ops;  // everything above the first aggregate
    std::vector<std::string> notes;
};

inline std::string group_key_display(const Row& row, const std::vector<std::string>& keys) {
    std::string out;
    for (const auto& k : keys) {
        if (!out.empty()) out += "\x1f";
        out += row.get(k).to_display();
    }
    return out;
}

inline PreparedInput prepare_input(const PhysicalPlan& plan, const Relation& rel,
                                   const EngineConfig& /*cfg*/) {
    PreparedInput in;
    std::vector<size_t>& offsets = in.block_offsets;

    bool past_first_aggregate = false;
    bool grouped = false;
    for (const auto& op : plan.ops) {
        if (past_first_aggregate) {
            in.post_ops.push_back(&op);
            continue;
        }
        switch (op.kind) {
            case PhysOp::Kind::Scan:
                in.rows.reserve(rel.rows.size());
                for (const auto& r : rel.rows) in.rows.push_back(Row{&r, {}});
                break;
            case PhysOp::Kind::SymbolicFilter: {
                std::vector<Row> kept;
                for (auto& r : in.rows)
                    if (eval_symbolic(op.expr, r).as_bool()) kept.push_back(std::move(r));
                in.rows = std::move(kept);
                break;
            }
            case PhysOp::Kind::SymbolicMap:
                for (auto& r : in.rows) r.derived[op.out_name] = eval_symbolic(op.expr, r);
                break;
            case PhysOp::Kind::CountScan:
                in.counted = true;
                break;
            case PhysOp::Kind::GroupSort: {
                grouped = true;
                in.counted = true;
                std::stable_sort(in.rows.begin(), in.rows.end(),
                                 [&](const Row& a, const Row& b) {
                                     return group_key_display(a, op.group_by) <
                                            group_key_display(b, op.group_by);
                                 });
                break;
            }
            case PhysOp::Kind::Shuffle: {
                if (!op.hierarchical) {
                    shuffle_rows(in.rows, op.seed);
                } else {
                    // block boundaries from the group-sorted order
                    std::vector<size_t> offs{0};
                    for (size_t i = 1; i < in.rows.size(); ++i) {
                        if (group_key_display(in.rows[i], plan.find_op(PhysOp::Kind::GroupSort)
                                                              ->group_by) !=
                            group_key_display(in.rows[i - 1],
                                              plan.find_op(PhysOp::Kind::GroupSort)->group_by))
                            offs.push_back(i);
                    }
                    offs.push_back(in.rows.size());
                    if (op.shuffle_within_blocks) {
                        hierarchical_shuffle(in.rows, offs, op.seed);
                    } else {
                        // permute block order only; within-block order is
                        // produced by a relevance sort above
                        std::vector<Row> saved = std::move(in.rows);
                        in.rows.clear();
                        size_t blocks = offs.size() - 1;
                        std::vector<size_t> order(blocks);
                        for (size_t i = 0; i < blocks; ++i) order[i] = i;
                        std::mt19937_64 gen(op.seed);
                        for (size_t i = blocks; i > 1; --i)
                            std::swap(order[i - 1], order[gen() % i]);
                        for (size_t b : order)
                            for (size_t k = offs[b]; k < offs[b + 1]; ++k)
                                in.rows.push_back(std::move(saved[k]));
                    }
                }
                break;
            }
            case PhysOp::Kind::RelevanceSort: {
                auto text_of = [&](const Row& r) -> const std::string& {
                    static const std::string empty;
                    const AttrValue* v = r.find(op.text_attr);
                    return v ? v->as_string() : empty;
                };
                auto sort_range = [&](size_t b, size_t e) {
                    std::vector<Row> slice(std::make_move_iterator(in.rows.begin() + b),
                                           std::make_move_iterator(in.rows.begin() + e));
                    auto order = relevance_order(
                        slice.size(), op.spec,
                        [&](size_t i) -> const std::string& { return text_of(slice[i]); },
                        [&](size_t i) -> const Embedding& { return slice[i].base->doc_embedding; },
                        [&](size_t i) { return slice[i].row_id(); });
                    for (size_t i = 0; i < order.size(); ++i)
                        in.rows[b + i] = std::move(slice[order[i]]);
                };
                if (!op.within_groups) {
                    sort_range(0, in.rows.size());
                } else {
                    const PhysOp* gs = plan.find_op(PhysOp::Kind::GroupSort);
                    size_t start = 0;
                    for (size_t i = 1; i <= in.rows.size(); ++i) {
                        if (i == in.rows.size() ||
                            group_key_display(in.rows[i], gs->group_by) !=
                                group_key_display(in.rows[start], gs->group_by)) {
                            sort_range(start, i);
                            start = i;
                        }
                    }
                }
                break;
            }
            case PhysOp::Kind::SimilarityPrefilter: {
                std::vector<Row> kept;
                for (auto& r : in.rows) {
                    if (similarity_keep(*r.base, op.spec, op.tau)) {
                        kept.push_back(std::move(r));
                    } else {
                        ++in.prefilter_dropped;
                    }
                }
                in.rows = std::move(kept);
                break;
            }
            case PhysOp::Kind::SemanticFilter: {
                SemStage st;
                st.kind = SemStage::Kind::Filter;
                st.prompt = op.expr;
                in.stages.push_back(std::move(st));
                in.has_semantic_filter = true;
                break;
            }
            case PhysOp::Kind::SemanticMap: {
                SemStage st;
                st.kind = SemStage::Kind::Map;
                st.prompt = op.expr;
                st.out_name = op.out_name;
                in.stages.push_back(std::move(st));
                break;
            }
            case PhysOp::Kind::FusedSemantic: {
                SemStage st;
                st.kind = SemStage::Kind::Fused;
                st.fused = op.fused;
                in.stages.push_back(std::move(st));
                for (const auto& p : op.fused) in.has_semantic_filter |= p.is_filter;
                break;
            }
            case PhysOp::Kind::Aggregate:
                in.aggregate = &op;
                past_first_aggregate = true;
                break;
            default:
                in.post_ops.push_back(&op);
                break;
        }
    }

    // block boundaries over the final materialized order; an empty grouped
    // input induces zero groups, not one empty group
    offsets.clear();
    if (grouped && in.aggregate && !in.aggregate->group_by.empty()) {
        const auto& keys = in.aggregate->group_by;
        offsets.push_back(0);
        if (!in.rows.empty()) {
            for (size_t i = 1; i < in.rows.size(); ++i)
                if (group_key_display(in.rows[i], keys) != group_key_display(in.rows[i - 1], keys))
                    offsets.push_back(i);
            offsets.push_back(in.rows.size());
            for (size_t b = 0; b + 1 < offsets.size(); ++b)
                in.block_keys.push_back(group_key_display(in.rows[offsets[b]], keys));
            // streaming aggregation needs group-contiguous input: a key that
            // reappears in a later block is an internal invariant violation
            std::set<std::string> seen_keys;
            for (const auto& k : in.block_keys)
                if (!seen_keys.insert(k).second)
                    throw Error("execution: group key reappears in non-contiguous input: " + k);
        }
    } else {
        offsets = {0, in.rows.size()};
        in.block_keys = {""};
    }
    return in;
}

// Evaluates the semantic stages over a batch of rows; returns the indexes of
// surviving rows (derived attrs filled in place). One oracle request per
// stage per alive row; fused stages are a single request per row.
class StageRunner {
public:
    StageRunner(const std::vector<SemStage>& stages, Oracle& oracle, const EngineConfig& cfg,
                std::vector<std::string>& notes)
        : stages_(stages), oracle_(oracle), cfg_(cfg), notes_(notes) {}

    // rows[i] for i in [from, to) are evaluated; returns surviving indices in
    // stream order.
    std::vector<size_t> run(std::vector<Row>& rows, size_t from, size_t to) {
        std::vector<size_t> alive;
        for (size_t i = from; i < to; ++i) alive.push_back(i);
        for (const auto& stage : stages_) {
            if (alive.empty()) break;
            std::vector<OracleRequest> reqs;
            reqs.reserve(alive.size());
            for (size_t i : alive) reqs.push_back(build_stage_request(stage, rows[i], cfg_));
            auto responses = oracle_.evaluate_batch(reqs);
            std::vector<size_t> next;
            for (size_t k = 0; k < alive.size(); ++k) {
                size_t i = alive[k];
                auto applied = apply_stage(stage, rows[i], reqs[k], responses[k]);
                if (!applied) {
                    // typed-parse failure after retry: per-tuple policy
                    if (cfg_.error_policy == EngineConfig::ErrorPolicy::Abort)
                        throw Error("execution: malformed oracle value for row " +
                                    std::to_string(rows[i].row_id()) + ": " + responses[k].raw);
                    notes_.push_back("skipped row " + std::to_string(rows[i].row_id()) +
                                     ": malformed oracle value");
                    continue;
                }
                if (*applied) next.push_back(i);
            }
            alive = std::move(next);
        }
        return alive;
    }

private:
    // nullopt: malformed; false: filtered out; true: row continues.
    std::optional<bool> apply_stage(const SemStage& stage, Row& row, const OracleRequest& req,
                                    const OracleResponse& rsp0) {
        OracleResponse rsp = rsp0;
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (attempt == 1) rsp = oracle_.evaluate_one_fresh(req);
            if (stage.kind == SemStage::Kind::Fused) {
                auto parsed = parse_fused(rsp.raw, req.parts);
                if (!parsed) continue;
                bool keep = true;
                for (size_t p = 0; p < stage.fused.size(); ++p) {
                    const auto& part = stage.fused[p];
                    const OracleValue& v = parsed->at(req.parts[p].key);
                    if (part.is_filter) {
                        keep = keep && v.b;
                    } else {
                        row.derived[part.out_name] = oracle_value_to_attr(v);
                    }
                }
                return keep;
            }
            auto v = parse_typed(rsp.raw, req.parts[0].ret);
            if (!v) continue;
            if (stage.kind == SemStage::Kind::Filter) return v->b;
            row.derived[stage.out_name] = oracle_value_to_attr(*v);
            return true;
        }
        return std::nullopt;
    }

    const std::vector<SemStage>& stages_;
    Oracle& oracle_;
    const EngineConfig& cfg_;
    std::vector<std::string>& notes_;
};

}  // namespace exec_detail

// ---- executor ---------------------------------------------------------------------------------

namespace exec_detail {

class Executor {
public:
    Executor(const PhysicalPlan& plan, const Relation& rel, Oracle& oracle,
             const EngineConfig& cfg)
        : plan_(plan), rel_(rel), oracle_(oracle), cfg_(cfg) {}

    Verdict run() {
        auto t0 = std::chrono::steady_clock::now();
        auto stats0 = oracle_.stats();
        Verdict v;
        input_ = prepare_input(plan_, rel_, cfg_);
        if (input_.prefilter_dropped > 0)
            input_.notes.push_back("similarity prefilter dropped " +
                                   std::to_string(input_.prefilter_dropped) + " rows");
        budget_rt_ = plan_.budget;
        if (plan_.grouped_budget_op >= 0)
            budget_rt_ = budget_rt_.with_runtime_groups(
                static_cast<size_t>(plan_.grouped_budget_op),
                static_cast<std::int64_t>(block_count()));
        if (!plan_.shape || !cfg_.early_stopping) {
            v = run_generic();
        } else {
            switch (plan_.shape->kind) {
                case ClaimKind::Simple: v = run_simple(); break;
                case ClaimKind::Nested: v = run_nested(); break;
                case ClaimKind::Ordinal: v = run_ordinal(); break;
            }
        }
        for (auto& n : input_.notes) v.notes.push_back(std::move(n));
        auto stats1 = oracle_.stats();
        v.stats.oracle_calls = stats1.oracle_calls - stats0.oracle_calls;
        v.stats.backend_calls = stats1.backend_calls - stats0.backend_calls;
        v.stats.batch_rounds = stats1.batch_rounds - stats0.batch_rounds;
        v.stats.input_tokens = stats1.input_tokens - stats0.input_tokens;
        v.stats.output_tokens = stats1.output_tokens - stats0.output_tokens;
        v.stats.tuples_processed = tuples_processed_;
        v.stats.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return v;
    }

private:
    const PhysicalPlan& plan_;
    const Relation& rel_;
    Oracle& oracle_;
    const EngineConfig& cfg_;
    exec_detail::PreparedInput input_;
    BudgetPlan budget_rt_;
    std::int64_t tuples_processed_ = 0;

    size_t block_count() const { return input_.block_offsets.size() - 1; }
    size_t block_begin(size_t b) const { return input_.block_offsets[b]; }
    size_t block_end(size_t b) const { return input_.block_offsets[b + 1]; }

    const AggPhys& single_agg() const { return input_.aggregate->aggs.at(0); }

    EngineAccumulator make_accumulator(const AggPhys& phys, std::int64_t block_size,
                                       std::optional<double> alpha_alloc) const {
        EngineAccumulator acc;
        acc.fn = phys.agg.fn;
        acc.hint = phys.hint;
        acc.formula_id = plan_.shape ? plan_.shape->formula_id : print_expr(phys.agg.arg);
        acc.eps = cfg_.eps;
        acc.es_enabled = cfg_.early_stopping;
        if (input_.counted) {
            if (input_.has_semantic_filter)
                acc.n_upper = block_size;
            else
                acc.n_exact = block_size;
        }
        if (alpha_alloc) {
            CsMode mode = acc.n_exact ? CsMode::WithoutReplacement : CsMode::WithReplacement;
            acc.cs = ConfidenceState(*alpha_alloc, cfg_.cs_kind, mode, acc.n_exact);
            alpha_used_ += *alpha_alloc;
        }
        return acc;
    }

    // Feeds one block through the semantic stages into an accumulator,
    // batch by batch, stopping as soon as it resolves.
    void drive_block(EngineAccumulator& acc, size_t begin, size_t end) {
        StageRunner runner(input_.stages, oracle_, cfg_, input_.notes);
        const ExprPtr& formula = single_agg().agg.arg;
        size_t cursor = begin;
        while (cursor < end && !acc.done()) {
            size_t batch_end = std::min(end, cursor + static_cast<size_t>(cfg_.batch_size));
            auto survivors = runner.run(input_.rows, cursor, batch_end);
            tuples_processed_ += static_cast<std::int64_t>(batch_end - cursor);
            size_t s = 0;
            for (size_t i = cursor; i < batch_end && !acc.done(); ++i) {
                while (s < survivors.size() && survivors[s] < i) ++s;
                bool survived = s < survivors.size() && survivors[s] == i;
                if (survived) {
                    bool value = eval_symbolic(formula, input_.rows[i]).as_bool();
                    acc.row_passed(input_.rows[i].row_id(), value);
                } else {
                    acc.row_passed(input_.rows[i].row_id(), std::nullopt);
                }
            }
            cursor = batch_end;
        }
        if (cursor >= end && !acc.done()) acc.finish_stream();
    }

    ResolutionKind resolution_of(bool any_cs, bool any_early) const {
        if (any_cs) return ResolutionKind::Estimated;
        if (any_early) return ResolutionKind::Deterministic;
        return ResolutionKind::FullScan;
    }

    mutable double alpha_used_ = 0.0;

    // ---- simple ----
    Verdict run_simple() {
        const AggPhys& phys = single_agg();
        std::optional<double> alpha;
        if (phys.strategy == Strategy::Estimation && cfg_.estimation && phys.budget_op >= 0)
            alpha = budget_rt_.alpha_for(static_cast<size_t>(phys.budget_op), 0, 0);
        EngineAccumulator acc = make_accumulator(
            phys, static_cast<std::int64_t>(input_.rows.size()), alpha);
        drive_block(acc, 0, input_.rows.size());

        Verdict v;
        v.value = acc.result;
        v.alpha_used = alpha_used_;
        v.resolution = resolution_of(acc.by_cs, acc.resolved && !acc.exhausted);
        v.tokens = assemble_simple(plan_.shape->outer, acc.capture(), acc.result);
        for (auto& n : acc.notes) v.notes.push_back(std::move(n));
        return v;
    }

    // ---- nested ----
    Verdict run_nested() {
        const AggPhys& inner_phys = single_agg();
        const PhysOp* outer_op = nullptr;
        for (const auto* op : input_.post_ops)
            if (op->kind == PhysOp::Kind::Aggregate) outer_op = op;
        if (!outer_op) throw Error("execution: nested plan lost its outer aggregate");
        const AggPhys& outer_phys = outer_op->aggs.at(0);

        int inner_budget_op =
            inner_phys.strategy == Strategy::Estimation && cfg_.estimation ? inner_phys.budget_op
                                                                           : -1;
        int outer_budget_op =
            outer_phys.strategy == Strategy::Estimation && cfg_.estimation ? outer_phys.budget_op
                                                                           : -1;

        EngineAccumulator outer;
        outer.fn = outer_phys.agg.fn;
        outer.hint = outer_phys.hint;
        outer.formula_id = plan_.shape->formula_id;
        outer.eps = cfg_.eps;
        outer.es_enabled = cfg_.early_stopping;
        std::int64_t blocks = static_cast<std::int64_t>(block_count());
        if (input_.has_semantic_filter)
            outer.n_upper = blocks;
        else
            outer.n_exact = blocks;
        if (outer_budget_op >= 0 && !budget_rt_.ops.empty()) {
            double a = budget_rt_.alpha_for(static_cast<size_t>(outer_budget_op), 0, 0);
            CsMode mode = outer.n_exact ? CsMode::WithoutReplacement : CsMode::WithReplacement;
            outer.cs = ConfidenceState(a, cfg_.cs_kind, mode, outer.n_exact);
            alpha_used_ += a;
        }

        std::vector<GroupTokens> group_tokens;
        bool any_inner_cs = false, any_inner_early = false;
        for (size_t b = 0; b < block_count() && !outer.done(); ++b) {
            std::optional<double> inner_alpha;
            if (inner_budget_op >= 0 && !budget_rt_.ops.empty())
                inner_alpha = budget_rt_.alpha_for(static_cast<size_t>(inner_budget_op), 0,
                                                   static_cast<std::int64_t>(b));
            EngineAccumulator acc = make_accumulator(
                inner_phys, static_cast<std::int64_t>(block_end(b) - block_begin(b)), inner_alpha);
            drive_block(acc, block_begin(b), block_end(b));
            any_inner_cs |= acc.by_cs;
            any_inner_early |= acc.resolved && !acc.exhausted && !acc.by_cs;

            if (acc.seen == 0 && input_.has_semantic_filter) {
                // every tuple of the group was filtered out: the group does
                // not exist in the aggregate's input
                outer.row_passed(static_cast<std::int64_t>(b), std::nullopt);
                continue;
            }
            bool group_value = acc.result;
            group_tokens.push_back(
                {group_value, assemble_simple(plan_.shape->inner, acc.capture(), group_value)});
            outer.row_passed(static_cast<std::int64_t>(b), group_value);
        }
        if (!outer.done()) outer.finish_stream();

        Verdict v;
        v.value = outer.result;
        v.alpha_used = alpha_used_;
        bool est = outer.by_cs || any_inner_cs;
        bool early = (outer.resolved && !outer.exhausted && !outer.by_cs) || any_inner_early;
        v.resolution = resolution_of(est, early);
        double outer_denom = outer.by_cs || !outer.n_exact
                                 ? static_cast<double>(outer.seen)
                                 : static_cast<double>(*outer.n_exact);
        v.tokens = assemble_nested(plan_.shape->outer, group_tokens, outer.result, outer_denom);
        for (auto& n : outer.notes) v.notes.push_back(std::move(n));
        return v;
    }

    // ---- ordinal ----
    struct OrdinalGroupState {
        size_t begin = 0, end = 0, cursor = 0;
        std::string key;
        EngineAccumulator acc;
        bool exhausted_stream = false;
        bool proportion = true;

        // aggregate-value interval: proportions use the CS directly, counts
        // scale by the group's exact population
        double scale() const {
            if (proportion) return 1.0;
            return acc.n_exact ? static_cast<double>(*acc.n_exact)
                               : static_cast<double>(std::max<std::int64_t>(1, acc.seen));
        }
        double exact_value() const {
            if (!proportion) return static_cast<double>(acc.positives);
            return acc.seen ? static_cast<double>(acc.positives) / acc.seen : 0.0;
        }
        double lo() const {
            if (exhausted_stream) return exact_value();
            return (acc.cs ? acc.cs->lower() : 0.0) * scale();
        }
        double hi() const {
            if (exhausted_stream) return exact_value();
            return (acc.cs ? acc.cs->upper() : 1.0) * scale();
        }
        double value_for_rank() const {
            if (exhausted_stream) return exact_value();
            return (lo() + hi()) / 2.0;
        }
    };

    Verdict run_ordinal() {
        const AggPhys& phys = single_agg();
        bool proportion = plan_.shape->ordinal_proportion;
        bool estimate = phys.strategy == Strategy::Estimation && cfg_.estimation &&
                        phys.budget_op >= 0 && !budget_rt_.ops.empty();

        std::vector<OrdinalGroupState> groups;
        for (size_t b = 0; b < block_count(); ++b) {
            if (block_end(b) == block_begin(b)) continue;
            OrdinalGroupState g;
            g.proportion = proportion;
            g.begin = g.cursor = block_begin(b);
            g.end = block_end(b);
            g.key = input_.block_keys[b];
            std::optional<double> alpha;
            if (estimate)
                alpha = budget_rt_.alpha_for(static_cast<size_t>(phys.budget_op), 0,
                                             static_cast<std::int64_t>(groups.size()));
            g.acc = make_accumulator(phys, static_cast<std::int64_t>(g.end - g.begin), alpha);
            groups.push_back(std::move(g));
        }

        StageRunner runner(input_.stages, oracle_, cfg_, input_.notes);
        auto pump = [&](OrdinalGroupState& g) {
            size_t batch_end = std::min(g.end, g.cursor + static_cast<size_t>(cfg_.batch_size));
            auto survivors = runner.run(input_.rows, g.cursor, batch_end);
            tuples_processed_ += static_cast<std::int64_t>(batch_end - g.cursor);
            size_t s = 0;
            for (size_t i = g.cursor; i < batch_end; ++i) {
                while (s < survivors.size() && survivors[s] < i) ++s;
                bool survived = s < survivors.size() && survivors[s] == i;
                if (survived) {
                    bool value = eval_symbolic(phys.agg.arg, input_.rows[i]).as_bool();
                    g.acc.row_passed(input_.rows[i].row_id(), value);
                } else {
                    g.acc.row_passed(input_.rows[i].row_id(), std::nullopt);
                }
            }
            g.cursor = batch_end;
            if (g.cursor >= g.end) {
                g.exhausted_stream = true;
                if (!g.acc.resolved) g.acc.finish_stream();
            }
        };

        if (!estimate) {
            for (auto& g : groups)
                while (!g.exhausted_stream) pump(g);
        } else {
            // advance groups until every pairwise order is certain: intervals
            // disjoint, or both population streams exhausted (exact values)
            auto pair_unresolved = [&](const OrdinalGroupState& a, const OrdinalGroupState& b) {
                if (a.exhausted_stream && b.exhausted_stream) return false;
                return !(a.hi() < b.lo() || b.hi() < a.lo());
            };
            bool progress = true;
            while (progress) {
                std::vector<bool> need(groups.size(), false);
                for (size_t i = 0; i < groups.size(); ++i)
                    for (size_t j = i + 1; j < groups.size(); ++j)
                        if (pair_unresolved(groups[i], groups[j])) need[i] = need[j] = true;
                progress = false;
                for (size_t i = 0; i < groups.size(); ++i) {
                    if (need[i] && !groups[i].exhausted_stream) {
                        pump(groups[i]);
                        progress = true;
                    }
                }
            }
        }

        // groups whose tuples were all filtered away do not exist downstream
        std::vector<OrdinalGroupState*> live;
        for (auto& g : groups)
            if (!(g.acc.seen == 0 && g.exhausted_stream && input_.has_semantic_filter))
                live.push_back(&g);

        std::vector<double> values;
        values.reserve(live.size());
        for (auto* g : live) values.push_back(g->value_for_rank());
        auto ranks = dense_rank(values, plan_.shape->rank_descending);

        std::string target = plan_.shape->target_value.to_display();
        std::optional<size_t> target_idx;
        for (size_t i = 0; i < live.size(); ++i)
            if (live[i]->key == target) target_idx = i;

        Verdict v;
        v.alpha_used = alpha_used_;
        bool any_cs = false;
        for (auto* g : live) any_cs |= g->acc.by_cs || (g->acc.cs && g->acc.cs->observations() > 0);
        if (!target_idx) {
            v.value = false;
            v.notes.push_back("ordinal target group '" + target + "' is missing from the data");
            std::vector<ProvToken> all;
            for (auto* g : live) {
                auto cap = g->acc.capture();
                all.insert(all.end(), cap.tokens.begin(), cap.tokens.end());
            }
            v.tokens = dedup_tokens(std::move(all));
            v.resolution = any_cs && estimate ? ResolutionKind::Estimated
                                              : ResolutionKind::FullScan;
            return v;
        }
        v.value = ranks[*target_idx] == plan_.shape->target_rank;

        std::vector<OrdinalGroupCapture> captures;
        for (auto* g : live) {
            OrdinalGroupCapture c;
            c.cap = g->acc.capture();
            c.positives = g->acc.positives;
            c.denominator = std::max<std::int64_t>(1, g->acc.seen);
            captures.push_back(std::move(c));
        }
        v.tokens = assemble_ordinal(captures, *target_idx, proportion);
        bool full = true;
        for (auto* g : live) full = full && g->exhausted_stream;
        v.resolution = !full && estimate ? ResolutionKind::Estimated : ResolutionKind::FullScan;
        return v;
    }

    // ---- generic / full scan ----
    Verdict run_generic() {
        StageRunner runner(input_.stages, oracle_, cfg_, input_.notes);
        std::vector<size_t> alive;
        size_t cursor = 0;
        while (cursor < input_.rows.size()) {
            size_t batch_end =
                std::min(input_.rows.size(), cursor + static_cast<size_t>(cfg_.batch_size));
            auto batch_alive = runner.run(input_.rows, cursor, batch_end);
            tuples_processed_ += static_cast<std::int64_t>(batch_end - cursor);
            alive.insert(alive.end(), batch_alive.begin(), batch_alive.end());
            cursor = batch_end;
        }

        Verdict v;
        v.resolution = ResolutionKind::FullScan;
        if (!input_.aggregate) {
            bool all = true;
            const PhysOp* check = plan_.find_op(PhysOp::Kind::Check);
            for (size_t i : alive) all = all && eval_symbolic(check->expr, input_.rows[i]).as_bool();
            v.value = !alive.empty() && all;
            if (alive.empty()) v.notes.push_back("check evaluated over empty input");
            return v;
        }

        // first aggregate: exact, grouped by first appearance
        const PhysOp& agg_op = *input_.aggregate;
        struct GroupAgg {
            std::string key;
            Row rep;
            std::vector<std::int64_t> positives, seen;
            AccCapture cap;
        };
        std::vector<GroupAgg> order;
        std::map<std::string, size_t> index;
        for (size_t i : alive) {
            const Row& row = input_.rows[i];
            std::string key =
                agg_op.group_by.empty() ? "" : exec_detail::group_key_display(row, agg_op.group_by);
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, order.size());
                GroupAgg g;
                g.key = key;
                g.positives.assign(agg_op.aggs.size(), 0);
                g.seen.assign(agg_op.aggs.size(), 0);
                for (const auto& gb : agg_op.group_by) g.rep.derived[gb] = row.get(gb);
                order.push_back(std::move(g));
                it = index.find(key);
            }
            GroupAgg& g = order[it->second];
            for (size_t a = 0; a < agg_op.aggs.size(); ++a) {
                bool val = eval_symbolic(agg_op.aggs[a].agg.arg, row).as_bool();
                g.positives[a] += val ? 1 : 0;
                g.seen[a] += 1;
                if (a == 0) {
                    g.cap.tokens.push_back({row.row_id(),
                                            plan_.shape ? plan_.shape->formula_id
                                                        : print_expr(agg_op.aggs[a].agg.arg),
                                            val});
                    g.cap.positives += val ? 1 : 0;
                    g.cap.seen += 1;
                }
            }
        }
        for (auto& g : order) {
            g.cap.exhausted = true;
            g.cap.prop_denominator = static_cast<double>(g.cap.seen);
        }

        auto agg_value = [&](const GroupAgg& g, size_t a) -> AttrValue {
            std::int64_t p = g.positives[a], n = g.seen[a];
            switch (agg_op.aggs[a].agg.fn) {
                case AggFn::BoolOr: return AttrValue::boolean(p >= 1);
                case AggFn::BoolAnd: return AttrValue::boolean(p == n);
                case AggFn::CountIf: return AttrValue::integer(p);
                case AggFn::Proportion:
                    return AttrValue::real(n ? static_cast<double>(p) / n
                                             : std::numeric_limits<double>::quiet_NaN());
            }
            return AttrValue::boolean(false);
        };

        std::vector<Row> out_rows;
        if (agg_op.group_by.empty()) {
            GroupAgg* g;
            GroupAgg empty;
            if (order.empty()) {
                empty.positives.assign(agg_op.aggs.size(), 0);
                empty.seen.assign(agg_op.aggs.size(), 0);
                empty.cap.exhausted = true;
                g = &empty;
                if (!alive.empty() || !input_.rows.empty())
                    input_.notes.push_back("aggregate over empty input");
                for (size_t a = 0; a < agg_op.aggs.size(); ++a)
                    if (agg_op.aggs[a].agg.fn == AggFn::Proportion)
                        input_.notes.push_back(
                            "proportion over empty input: comparison evaluates false");
                order.push_back(*g);
            }
            g = &order[0];
            Row r = g->rep;
            for (size_t a = 0; a < agg_op.aggs.size(); ++a)
                r.derived[agg_op.aggs[a].agg.out_name] = agg_value(*g, a);
            out_rows.push_back(std::move(r));
        } else {
            for (auto& g : order) {
                Row r = g.rep;
                for (size_t a = 0; a < agg_op.aggs.size(); ++a)
                    r.derived[agg_op.aggs[a].agg.out_name] = agg_value(g, a);
                out_rows.push_back(std::move(r));
            }
        }

        // everything above the first aggregate
        std::vector<AccCapture> group_caps;
        for (auto& g : order) group_caps.push_back(g.cap);
        std::vector<bool> outer_values;  // nested: per-group outer-arg booleans

        for (const PhysOp* op : input_.post_ops) {
            switch (op->kind) {
                case PhysOp::Kind::Aggregate: {
                    const AggPhys& outer = op->aggs.at(0);
                    std::int64_t p = 0, n = 0;
                    for (auto& r : out_rows) {
                        bool val = eval_symbolic(outer.agg.arg, r).as_bool();
                        outer_values.push_back(val);
                        p += val ? 1 : 0;
                        ++n;
                    }
                    Row r;
                    switch (outer.agg.fn) {
                        case AggFn::BoolOr: r.derived[outer.agg.out_name] = AttrValue::boolean(p >= 1); break;
                        case AggFn::BoolAnd: r.derived[outer.agg.out_name] = AttrValue::boolean(p == n); break;
                        case AggFn::CountIf: r.derived[outer.agg.out_name] = AttrValue::integer(p); break;
                        case AggFn::Proportion:
                            r.derived[outer.agg.out_name] = AttrValue::real(
                                n ? static_cast<double>(p) / n
                                  : std::numeric_limits<double>::quiet_NaN());
                            break;
                    }
                    out_rows.clear();
                    out_rows.push_back(std::move(r));
                    break;
                }
                case PhysOp::Kind::WithRank: {
                    std::vector<double> vals;
                    for (auto& r : out_rows) vals.push_back(eval_symbolic(op->expr, r).as_real());
                    auto ranks = dense_rank(vals, op->descending);
                    for (size_t i = 0; i < out_rows.size(); ++i)
                        out_rows[i].derived["rank"] = AttrValue::integer(ranks[i]);
                    break;
                }
                case PhysOp::Kind::SymbolicFilter: {
                    std::vector<Row> kept;
                    for (auto& r : out_rows)
                        if (eval_symbolic(op->expr, r).as_bool()) kept.push_back(std::move(r));
                    out_rows = std::move(kept);
                    break;
                }
                case PhysOp::Kind::Check: {
                    bool all = true;
                    for (auto& r : out_rows) {
                        AttrValue val = eval_symbolic(op->expr, r);
                        all = all && val.as_bool();
                    }
                    v.value = !out_rows.empty() && all;
                    if (out_rows.empty())
                        v.notes.push_back(plan_.shape && plan_.shape->kind == ClaimKind::Ordinal
                                              ? "ordinal target group '" +
                                                    plan_.shape->target_value.to_display() +
                                                    "' is missing from the data"
                                              : "check evaluated over empty input");
                    break;
                }
                default:
                    throw Error(std::string("execution: unexpected physical operator above the "
                                            "aggregate: ") +
                                phys_op_name(op->kind));
            }
        }

        // full-scan provenance per the claim's structure when known
        if (plan_.shape) {
            switch (plan_.shape->kind) {
                case ClaimKind::Simple:
                    if (!group_caps.empty())
                        v.tokens = assemble_simple(plan_.shape->outer, group_caps[0], v.value);
                    break;
                case ClaimKind::Nested: {
                    std::vector<GroupTokens> gts;
                    for (size_t g = 0; g < group_caps.size(); ++g) {
                        bool gv = g < outer_values.size() && outer_values[g];
                        gts.push_back({gv, assemble_simple(plan_.shape->inner, group_caps[g], gv)});
                    }
                    v.tokens = assemble_nested(plan_.shape->outer, gts, v.value,
                                               static_cast<double>(group_caps.size()));
                    break;
                }
                case ClaimKind::Ordinal: {
                    std::string target = plan_.shape->target_value.to_display();
                    std::optional<size_t> target_idx;
                    for (size_t g = 0; g < order.size(); ++g)
                        if (order[g].key == target) target_idx = g;
                    if (target_idx) {
                        std::vector<OrdinalGroupCapture> caps;
                        for (auto& g : order) {
                            OrdinalGroupCapture c;
                            c.cap = g.cap;
                            c.positives = g.cap.positives;
                            c.denominator = std::max<std::int64_t>(1, g.cap.seen);
                            caps.push_back(std::move(c));
                        }
                        v.tokens = assemble_ordinal(caps, *target_idx,
                                                    plan_.shape->ordinal_proportion);
                    } else {
                        std::vector<ProvToken> all;
                        for (auto& g : order)
                            all.insert(all.end(), g.cap.tokens.begin(), g.cap.tokens.end());
                        v.tokens = dedup_tokens(std::move(all));
                    }
                    break;
                }
            }
        } else {
            std::vector<ProvToken> all;
            for (auto& g : order) all.insert(all.end(), g.cap.tokens.begin(), g.cap.tokens.end());
            v.tokens = dedup_tokens(std::move(all));
        }
        return v;
    }
};

}  // namespace exec_detail

// Executes a physical plan over a relation, pulling tuples through the
// pipeline in batches and stopping as soon as the verdict's accumulators
// resolve.
inline Verdict execute(const PhysicalPlan& plan, const Relation& rel, Oracle& oracle,
                       const EngineConfig& cfg) {
    exec_detail::Executor ex(plan, rel, oracle, cfg);
    return ex.run();
}

}  // namespace veriq
