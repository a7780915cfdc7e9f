#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veriq/compile.hpp"
#include "veriq/engine.hpp"
#include "veriq/gen.hpp"
#include "veriq/optimizer.hpp"

namespace veriq {

// Verification quality metrics with ungrounded claims as the positive class
// (a false verdict predicts "ungrounded").
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

inline Metrics compute_metrics(const std::vector<bool>& predicted_ungrounded,
                               const std::vector<bool>& truly_ungrounded) {
    if (predicted_ungrounded.size() != truly_ungrounded.size())
        throw Error("metrics: prediction/truth size mismatch");
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < predicted_ungrounded.size(); ++i) {
        bool p = predicted_ungrounded[i], t = truly_ungrounded[i];
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
        tn += !p && !t;
    }
    Metrics m;
    if (tp + fp == 0)
        m.precision = (tp + fn == 0) ? 1.0 : 0.0;
    else
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = (tp + fn == 0) ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.f1 = (m.precision + m.recall == 0.0)
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    m.accuracy = predicted_ungrounded.empty()
                     ? 0.0
                     : static_cast<double>(tp + tn) / static_cast<double>(predicted_ungrounded.size());
    return m;
}

struct ClaimResult {
    std::string id;
    std::string text;
    bool verdict = false;
    std::optional<bool> grounded;
    std::string resolution;
    size_t tokens_cited = 0;
    std::int64_t oracle_calls = 0;
    std::int64_t backend_calls = 0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    double cost = 0.0;
    double latency_s = 0.0;
    bool error = false;
    std::string error_message;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"id", id},
                            {"text", text},
                            {"verdict", verdict},
                            {"resolution", resolution},
                            {"tokens_cited", tokens_cited},
                            {"oracle_calls", oracle_calls},
                            {"backend_calls", backend_calls},
                            {"input_tokens", input_tokens},
                            {"output_tokens", output_tokens},
                            {"cost", cost},
                            {"latency_s", latency_s},
                            {"error", error}};
        if (grounded) j["grounded"] = *grounded;
        if (error) j["error_message"] = error_message;
        return j;
    }
};

struct TrialReport {
    std::vector<ClaimResult> claims;
    Metrics metrics;
    double mean_cost = 0.0;
    double mean_latency_s = 0.0;
    std::int64_t total_oracle_calls = 0;
    std::int64_t total_backend_calls = 0;
};

struct HarnessOptions {
    int trials = 3;
    double sim_latency_per_call_s = 0.5;  // offline latency model
    std::string cache_dir;                // empty: fresh in-memory style cache per trial
    bool use_replay_backend = false;      // serve everything from the cache
};

struct RunReport {
    nlohmann::json config_snapshot;
    std::vector<TrialReport> trials;

    // mean with [min, max] across trials, per metric
    struct Aggregate {
        double mean = 0.0, min = 0.0, max = 0.0;
    };
    Aggregate agg(double TrialReport::* field) const {
        Aggregate a;
        if (trials.empty()) return a;
        a.min = a.max = trials[0].*field;
        for (const auto& t : trials) {
            double v = t.*field;
            a.mean += v;
            a.min = std::min(a.min, v);
            a.max = std::max(a.max, v);
        }
        a.mean /= static_cast<double>(trials.size());
        return a;
    }
    Aggregate agg_metric(double Metrics::* field) const {
        Aggregate a;
        if (trials.empty()) return a;
        a.min = a.max = trials[0].metrics.*field;
        for (const auto& t : trials) {
            double v = t.metrics.*field;
            a.mean += v;
            a.min = std::min(a.min, v);
            a.max = std::max(a.max, v);
        }
        a.mean /= static_cast<double>(trials.size());
        return a;
    }

    nlohmann::json to_json() const {
        auto agg_json = [](const Aggregate& a) {
            return nlohmann::json{{"mean", a.mean}, {"min", a.min}, {"max", a.max}};
        };
        nlohmann::json trials_j = nlohmann::json::array();
        for (const auto& t : trials) {
            nlohmann::json claims_j = nlohmann::json::array();
            for (const auto& c : t.claims) claims_j.push_back(c.to_json());
            trials_j.push_back({{"claims", claims_j},
                                {"precision", t.metrics.precision},
                                {"recall", t.metrics.recall},
                                {"f1", t.metrics.f1},
                                {"accuracy", t.metrics.accuracy},
                                {"mean_cost", t.mean_cost},
                                {"mean_latency_s", t.mean_latency_s},
                                {"total_oracle_calls", t.total_oracle_calls},
                                {"total_backend_calls", t.total_backend_calls}});
        }
        return {{"config", config_snapshot},
                {"trials", trials_j},
                {"precision", agg_json(agg_metric(&Metrics::precision))},
                {"recall", agg_json(agg_metric(&Metrics::recall))},
                {"f1", agg_json(agg_metric(&Metrics::f1))},
                {"accuracy", agg_json(agg_metric(&Metrics::accuracy))},
                {"cost", agg_json(agg(&TrialReport::mean_cost))},
                {"latency_s", agg_json(agg(&TrialReport::mean_latency_s))}};
    }
};

inline nlohmann::json config_snapshot_json(const EngineConfig& cfg, const HarnessOptions& opt) {
    return {{"batch_size", cfg.batch_size},
            {"alpha", cfg.alpha},
            {"eps", cfg.eps},
            {"tau", cfg.tau},
            {"low_k", cfg.low_k},
            {"shuffle_seed", cfg.shuffle_seed},
            {"early_stopping", cfg.early_stopping},
            {"relevance_sorting", cfg.relevance_sorting},
            {"estimation", cfg.estimation},
            {"fusion", cfg.fusion},
            {"similarity_filter", cfg.similarity_filter},
            {"caching", cfg.caching},
            {"exec_model", cfg.exec_model},
            {"opt_model", cfg.opt_model},
            {"trials", opt.trials},
            {"sim_latency_per_call_s", opt.sim_latency_per_call_s}};
}

// Runs every claim through compile -> optimize -> execute per trial and
// reports per-claim rows plus aggregate metrics. Compilation failures become
// error rows; the run continues.
inline RunReport run_bench(const gen::SyntheticBench& bench, const EngineConfig& base_cfg,
                           const HarnessOptions& opt, const Embedder& embedder,
                           std::shared_ptr<OracleBackend> backend_override = nullptr,
                           std::shared_ptr<PromptCache> shared_cache = nullptr) {
    RunReport report;
    report.config_snapshot = config_snapshot_json(base_cfg, opt);

    for (int trial = 0; trial < opt.trials; ++trial) {
        EngineConfig cfg = base_cfg;
        cfg.shuffle_seed = base_cfg.shuffle_seed + static_cast<std::uint64_t>(trial);

        std::shared_ptr<PromptCache> cache = shared_cache;
        if (!cache && cfg.caching) {
            auto dir = opt.cache_dir.empty()
                           ? (std::filesystem::temp_directory_path() /
                              ("veriq-bench-" + std::to_string(cfg.shuffle_seed)))
                           : std::filesystem::path(opt.cache_dir);
            if (opt.cache_dir.empty()) std::filesystem::remove_all(dir);
            cache = std::make_shared<PromptCache>(dir);
        }
        std::shared_ptr<OracleBackend> backend = backend_override;
        if (!backend) {
            backend = opt.use_replay_backend
                          ? std::static_pointer_cast<OracleBackend>(std::make_shared<ReplayBackend>())
                          : std::static_pointer_cast<OracleBackend>(bench.backend);
        }

        TrialReport tr;
        std::vector<bool> pred, truth;
        for (const auto& bc : bench.claims) {
            auto ledger = std::make_shared<CostLedger>();
            ledger->set_rate(cfg.exec_model, {5.0, 25.0});
            ledger->set_rate(cfg.opt_model, {5.0, 25.0});
            Oracle oracle(backend, cache, ledger, cfg.caching);

            ClaimResult row;
            row.id = bc.id;
            row.text = bc.text;
            row.grounded = bc.grounded;
            try {
                PlanPtr logical =
                    compile_claim(bc.text, "Summarize the reviews.", bench.schema, oracle,
                                  cfg.opt_model);
                PhysicalPlan plan = optimize(logical, bench.schema, oracle, embedder, cfg);
                Verdict v = execute(plan, bench.relation, oracle, cfg);
                row.verdict = v.value;
                row.resolution = resolution_name(v.resolution);
                row.tokens_cited = v.tokens.size();
                row.oracle_calls = oracle.stats().oracle_calls;
                row.backend_calls = oracle.stats().backend_calls;
                row.input_tokens = oracle.stats().input_tokens;
                row.output_tokens = oracle.stats().output_tokens;
                row.cost = ledger->cost();
                // simulated latency only: real wall time stays out of the
                // report so runs with fixed seeds reproduce byte-identically
                row.latency_s =
                    static_cast<double>(row.backend_calls) * opt.sim_latency_per_call_s;
                pred.push_back(!row.verdict);
                truth.push_back(!bc.grounded);
            } catch (const std::exception& e) {
                row.error = true;
                row.error_message = e.what();
            }
            tr.total_oracle_calls += row.oracle_calls;
            tr.total_backend_calls += row.backend_calls;
            tr.claims.push_back(std::move(row));
        }
        tr.metrics = compute_metrics(pred, truth);
        double cost_sum = 0.0, lat_sum = 0.0;
        for (const auto& c : tr.claims) {
            cost_sum += c.cost;
            lat_sum += c.latency_s;
        }
        tr.mean_cost = tr.claims.empty() ? 0.0 : cost_sum / static_cast<double>(tr.claims.size());
        tr.mean_latency_s =
            tr.claims.empty() ? 0.0 : lat_sum / static_cast<double>(tr.claims.size());
        report.trials.push_back(std::move(tr));
    }
    return report;
}

// ---- ablation driver ---------------------------------------------------------

struct AblationRow {
    std::string disabled;  // "none", one optimization name, or "all"
    Metrics metrics;
    double mean_cost = 0.0;
    double mean_latency_s = 0.0;
    std::int64_t backend_calls = 0;
    double cost_multiplier = 1.0;
    double latency_multiplier = 1.0;
    double calls_multiplier = 1.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    const AblationRow* row(const std::string& name) const {
        for (const auto& r : rows)
            if (r.disabled == name) return &r;
        return nullptr;
    }

    nlohmann::json to_json() const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows)
            out.push_back({{"disabled", r.disabled},
                           {"precision", r.metrics.precision},
                           {"recall", r.metrics.recall},
                           {"f1", r.metrics.f1},
                           {"accuracy", r.metrics.accuracy},
                           {"mean_cost", r.mean_cost},
                           {"mean_latency_s", r.mean_latency_s},
                           {"backend_calls", r.backend_calls},
                           {"cost_multiplier", r.cost_multiplier},
                           {"latency_multiplier", r.latency_multiplier},
                           {"calls_multiplier", r.calls_multiplier}});
        return out;
    }
};

inline const std::vector<std::string>& ablation_flags() {
    static const std::vector<std::string> flags = {
        "early_stopping", "relevance_sorting", "estimation",
        "fusion",         "similarity_filter", "caching"};
    return flags;
}

inline EngineConfig config_without(const EngineConfig& base, const std::string& flag) {
    EngineConfig cfg = base;
    if (flag == "early_stopping") cfg.early_stopping = false;
    else if (flag == "relevance_sorting") cfg.relevance_sorting = false;
    else if (flag == "estimation") cfg.estimation = false;
    else if (flag == "fusion") cfg.fusion = false;
    else if (flag == "similarity_filter") cfg.similarity_filter = false;
    else if (flag == "caching") cfg.caching = false;
    else if (flag == "all") cfg = EngineConfig::all_disabled();
    else if (flag != "none") throw Error("unknown ablation flag: " + flag);
    return cfg;
}

// Leave-one-out ablation: each optimization disabled in turn (plus the fully
// optimized baseline and the everything-off run), with cost and latency
// multipliers relative to the baseline.
inline AblationReport run_ablation(const gen::SyntheticBench& bench, const EngineConfig& base_cfg,
                                   HarnessOptions opt, const Embedder& embedder,
                                   std::vector<std::string> rows_wanted = {}) {
    if (rows_wanted.empty()) {
        rows_wanted = {"none"};
        for (const auto& f : ablation_flags()) rows_wanted.push_back(f);
        rows_wanted.push_back("all");
    }
    opt.trials = 1;
    AblationReport report;
    double base_cost = 0.0, base_latency = 0.0;
    std::int64_t base_calls = 0;
    for (const auto& flag : rows_wanted) {
        EngineConfig cfg = config_without(base_cfg, flag);
        RunReport run = run_bench(bench, cfg, opt, embedder);
        AblationRow row;
        row.disabled = flag;
        row.metrics = run.trials[0].metrics;
        row.mean_cost = run.trials[0].mean_cost;
        row.mean_latency_s = run.trials[0].mean_latency_s;
        row.backend_calls = run.trials[0].total_backend_calls;
        if (flag == "none") {
            base_cost = row.mean_cost;
            base_latency = row.mean_latency_s;
            base_calls = row.backend_calls;
            row.cost_multiplier = row.latency_multiplier = row.calls_multiplier = 1.0;
        } else {
            row.cost_multiplier = base_cost > 0 ? row.mean_cost / base_cost : 0.0;
            row.latency_multiplier =
                base_latency > 0 ? row.mean_latency_s / base_latency : 0.0;
            row.calls_multiplier =
                base_calls > 0 ? static_cast<double>(row.backend_calls) /
                                     static_cast<double>(base_calls)
                               : 0.0;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace veriq
