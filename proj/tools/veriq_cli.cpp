// veriq: verify natural-language claims about a relation, with citations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "veriq/harness.hpp"
#include "veriq/http_backend.hpp"
#include "veriq/veriq.hpp"

namespace fs = std::filesystem;
using namespace veriq;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

struct OracleSetup {
    std::string fixture;
    std::string cache_dir = ".veriq-cache";
    std::string rates_file;
    bool no_cache = false;
    bool replay = false;
    std::string remote_host;
    int remote_port = 0;

    std::shared_ptr<CostLedger> ledger(const EngineConfig& cfg) const {
        auto l = std::make_shared<CostLedger>();
        l->set_rate(cfg.exec_model, {5.0, 25.0});
        l->set_rate(cfg.opt_model, {5.0, 25.0});
        if (!rates_file.empty()) l->load_rates(nlohmann::json::parse(slurp(rates_file)));
        return l;
    }

    std::shared_ptr<PromptCache> cache() const {
        if (no_cache) return nullptr;
        return std::make_shared<PromptCache>(cache_dir);
    }

    std::shared_ptr<OracleBackend> backend() const {
        if (replay) return std::make_shared<ReplayBackend>();
        if (!remote_host.empty()) {
            RemoteBackendConfig cfg = RemoteBackendConfig::from_env();
            cfg.host = remote_host;
            if (remote_port) cfg.port = remote_port;
            return std::make_shared<RemoteBackend>(cfg);
        }
        if (fixture.empty())
            throw Error("offline runs need --fixture (scripted rules); see `veriq gen`");
        return ScriptedBackend::from_json(nlohmann::json::parse(slurp(fixture)));
    }

    Oracle make(const EngineConfig& cfg, std::shared_ptr<CostLedger> ledger) const {
        return Oracle(backend(), cache(), std::move(ledger), cfg.caching && !no_cache);
    }
};

void add_engine_flags(CLI::App* cmd, EngineConfig& cfg) {
    cmd->add_option("--batch-size", cfg.batch_size, "oracle batch size");
    cmd->add_option("--alpha", cfg.alpha, "estimation significance level");
    cmd->add_option("--eps", cfg.eps, "relative tolerance for equality comparisons");
    cmd->add_option("--tau", cfg.tau, "similarity prefilter threshold");
    cmd->add_option("--low-k", cfg.low_k, "at-least threshold treated as low");
    cmd->add_option("--seed", cfg.shuffle_seed, "shuffle seed");
    cmd->add_option("--exec-model", cfg.exec_model, "execution model name");
    cmd->add_option("--opt-model", cfg.opt_model, "optimizer model name");
    cmd->add_flag_callback("--skip-bad-rows",
                           [&cfg] { cfg.error_policy = EngineConfig::ErrorPolicy::SkipWithWarning; },
                           "skip tuples with malformed oracle values instead of aborting");
    auto disable = [&cfg](const std::string& flag) {
        EngineConfig next = config_without(cfg, flag);
        cfg = next;
    };
    cmd->add_option_function<std::vector<std::string>>(
        "--disable", [disable](const std::vector<std::string>& flags) {
            for (const auto& f : flags) disable(f);
        },
        "disable optimizations: early_stopping, relevance_sorting, estimation, fusion, "
        "similarity_filter, caching, all");
}

Relation load_relation_arg(const std::string& relation_file, const std::string& data_file,
                           const std::string& schema_file, const Embedder& embedder) {
    if (!relation_file.empty()) {
        std::ifstream in(relation_file);
        if (!in) throw Error("cannot open " + relation_file);
        return load_relation(in);
    }
    if (data_file.empty() || schema_file.empty())
        throw Error("pass --relation, or --data with --schema");
    Schema schema = Schema::from_json(nlohmann::json::parse(slurp(schema_file)));
    std::ifstream in(data_file);
    if (!in) throw Error("cannot open " + data_file);
    return ingest(in, schema, embedder);
}

nlohmann::json verdict_to_json(const Verdict& v, const std::string& claim,
                               const std::string& program, const Relation& rel) {
    nlohmann::json citations = nlohmann::json::array();
    for (const auto& t : v.tokens) {
        nlohmann::json c = {{"row_id", t.row_id},
                            {"formula", t.formula_id},
                            {"polarity", t.positive ? "pos" : "neg"}};
        if (t.row_id >= 0 && t.row_id < static_cast<std::int64_t>(rel.rows.size())) {
            const TupleRow& row = rel.rows[static_cast<size_t>(t.row_id)];
            nlohmann::json attrs = nlohmann::json::object();
            for (const auto& [name, value] : row.attrs) attrs[name] = value.to_display();
            c["tuple"] = attrs;
        }
        citations.push_back(std::move(c));
    }
    return {{"claim", claim},
            {"program", program},
            {"verdict", v.value},
            {"resolution", resolution_name(v.resolution)},
            {"alpha_used", v.alpha_used},
            {"notes", v.notes},
            {"stats",
             {{"oracle_calls", v.stats.oracle_calls},
              {"backend_calls", v.stats.backend_calls},
              {"input_tokens", v.stats.input_tokens},
              {"output_tokens", v.stats.output_tokens},
              {"tuples_processed", v.stats.tuples_processed},
              {"wall_time_s", v.stats.wall_time_s}}},
            {"citations", citations}};
}

void print_verdict_human(const nlohmann::json& j) {
    std::cout << "claim:      " << j["claim"].get<std::string>() << "\n";
    std::cout << "verdict:    " << (j["verdict"].get<bool>() ? "SUPPORTED" : "NOT SUPPORTED")
              << "\n";
    std::cout << "resolution: " << j["resolution"].get<std::string>() << "\n";
    const auto& s = j["stats"];
    std::cout << "oracle:     " << s["oracle_calls"] << " calls (" << s["backend_calls"]
              << " past cache), " << s["tuples_processed"] << " tuples\n";
    for (const auto& n : j["notes"]) std::cout << "note:       " << n.get<std::string>() << "\n";
    std::cout << "citations (" << j["citations"].size() << "):\n";
    size_t shown = 0;
    for (const auto& c : j["citations"]) {
        if (++shown > 12) {
            std::cout << "  ... " << (j["citations"].size() - 12) << " more\n";
            break;
        }
        std::cout << "  [" << (c["polarity"] == "pos" ? "+" : "-") << "] row " << c["row_id"];
        if (c.contains("tuple") && c["tuple"].contains("text")) {
            std::string text = c["tuple"]["text"].get<std::string>();
            if (text.size() > 90) text = text.substr(0, 87) + "...";
            std::cout << ": " << text;
        }
        std::cout << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"claim verification over relations with verification-aware optimizations"};
    app.require_subcommand(1);

    FeatureHashEmbedder embedder;

    // ---- gen ----
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic offline benchmark directory");
    std::string gen_out = "bench";
    gen::GenOptions gen_opt;
    gen_cmd->add_option("--out", gen_out, "output directory");
    gen_cmd->add_option("--seed", gen_opt.seed, "generator seed");
    gen_cmd->add_option("--businesses", gen_opt.businesses, "number of business groups");
    gen_cmd->add_option("--reviews", gen_opt.reviews_per_business, "reviews per business");
    gen_cmd->callback([&] {
        auto bench = gen::generate_bench(gen_opt, embedder);
        fs::create_directories(gen_out);
        std::string data;
        for (const auto& l : bench.dataset_lines) data += l + "\n";
        spill(fs::path(gen_out) / "dataset.jsonl", data);
        spill(fs::path(gen_out) / "schema.json", bench.schema.to_json().dump(2) + "\n");
        spill(fs::path(gen_out) / "fixture.json", bench.backend->to_json().dump(2) + "\n");
        std::string claims;
        for (const auto& c : bench.claims)
            claims += nlohmann::json({{"id", c.id},
                                      {"text", c.text},
                                      {"program", c.program},
                                      {"grounded", c.grounded}})
                          .dump() +
                      "\n";
        spill(fs::path(gen_out) / "claims.jsonl", claims);
        std::cout << "wrote dataset.jsonl, schema.json, fixture.json, claims.jsonl to " << gen_out
                  << "\n";
    });

    // ---- ingest ----
    auto* ingest_cmd = app.add_subcommand("ingest", "materialize a relation with embeddings");
    std::string in_data, in_schema, in_out = "relation.jsonl";
    ingest_cmd->add_option("--data", in_data, "line-delimited record file")->required();
    ingest_cmd->add_option("--schema", in_schema, "schema declaration file")->required();
    ingest_cmd->add_option("--out", in_out, "materialized relation file");
    ingest_cmd->callback([&] {
        std::ifstream in(in_data);
        if (!in) throw Error("cannot open " + in_data);
        Schema schema = Schema::from_json(nlohmann::json::parse(slurp(in_schema)));
        Relation rel = ingest(in, schema, embedder);
        std::ofstream out(in_out);
        save_relation(out, rel);
        std::cout << "ingested " << rel.row_count() << " rows into " << in_out << "\n";
    });

    // ---- compile ----
    auto* compile_cmd = app.add_subcommand("compile", "compile a claim into a query program");
    std::string cl_claim, cl_schema, cl_agg = "Summarize the reviews.", cl_out;
    OracleSetup cl_oracle;
    EngineConfig cl_cfg;
    compile_cmd->add_option("--claim", cl_claim, "claim text")->required();
    compile_cmd->add_option("--schema", cl_schema, "schema declaration file")->required();
    compile_cmd->add_option("--agg-prompt", cl_agg, "original aggregation prompt");
    compile_cmd->add_option("--fixture", cl_oracle.fixture, "scripted oracle rules");
    compile_cmd->add_option("--cache-dir", cl_oracle.cache_dir, "prompt cache directory");
    compile_cmd->add_option("--out", cl_out, "write the program here instead of stdout");
    compile_cmd->add_option("--opt-model", cl_cfg.opt_model, "compiling model name");
    compile_cmd->callback([&] {
        Schema schema = Schema::from_json(nlohmann::json::parse(slurp(cl_schema)));
        Oracle oracle = cl_oracle.make(cl_cfg, std::make_shared<CostLedger>());
        PlanPtr plan = compile_claim(cl_claim, cl_agg, schema, oracle, cl_cfg.opt_model);
        std::string program = print_plan(plan);
        if (cl_out.empty())
            std::cout << program << "\n";
        else
            spill(cl_out, program + "\n");
    });

    // ---- verify ----
    auto* verify_cmd = app.add_subcommand("verify", "verify a claim or query over a relation");
    std::string vf_claim, vf_query, vf_relation, vf_data, vf_schema, vf_agg = "Summarize the reviews.";
    std::string vf_json_out;
    OracleSetup vf_oracle;
    EngineConfig vf_cfg;
    verify_cmd->add_option("--claim", vf_claim, "claim text (compiled via the oracle)");
    verify_cmd->add_option("--query", vf_query, "a .vq program file");
    verify_cmd->add_option("--relation", vf_relation, "materialized relation file");
    verify_cmd->add_option("--data", vf_data, "raw record file (needs --schema)");
    verify_cmd->add_option("--schema", vf_schema, "schema declaration file");
    verify_cmd->add_option("--agg-prompt", vf_agg, "original aggregation prompt");
    verify_cmd->add_option("--fixture", vf_oracle.fixture, "scripted oracle rules (offline)");
    verify_cmd->add_option("--cache-dir", vf_oracle.cache_dir, "prompt cache directory");
    verify_cmd->add_option("--rates", vf_oracle.rates_file,
                           "per-million-token price table (JSON, model -> rates)");
    verify_cmd->add_flag("--no-cache", vf_oracle.no_cache, "disable the prompt cache");
    verify_cmd->add_flag("--replay", vf_oracle.replay, "serve oracle responses from cache only");
    verify_cmd->add_option("--remote-host", vf_oracle.remote_host, "remote oracle host");
    verify_cmd->add_option("--remote-port", vf_oracle.remote_port, "remote oracle port");
    verify_cmd->add_option("--json", vf_json_out, "write the machine-readable verdict here");
    add_engine_flags(verify_cmd, vf_cfg);
    verify_cmd->callback([&] {
        if (vf_claim.empty() == vf_query.empty())
            throw Error("pass exactly one of --claim or --query");
        Relation rel = load_relation_arg(vf_relation, vf_data, vf_schema, embedder);
        auto ledger = vf_oracle.ledger(vf_cfg);
        Oracle oracle = vf_oracle.make(vf_cfg, ledger);
        PlanPtr logical;
        std::string claim_text = vf_claim;
        if (!vf_query.empty()) {
            logical = parse(slurp(vf_query), rel.schema);
            claim_text = "(query file: " + vf_query + ")";
        } else {
            logical = compile_claim(vf_claim, vf_agg, rel.schema, oracle, vf_cfg.opt_model);
        }
        PhysicalPlan plan = optimize(logical, rel.schema, oracle, embedder, vf_cfg);
        Verdict v = execute(plan, rel, oracle, vf_cfg);
        nlohmann::json j = verdict_to_json(v, claim_text, print_plan(logical), rel);
        j["cost"] = ledger->cost();
        print_verdict_human(j);
        std::printf("cost:       $%.6f\n", ledger->cost());
        if (!vf_json_out.empty()) spill(vf_json_out, j.dump(2) + "\n");
    });

    // ---- explain ----
    auto* explain_cmd = app.add_subcommand("explain", "render the cited tuples of a verdict file");
    std::string ex_verdict, ex_relation, ex_data, ex_schema;
    explain_cmd->add_option("--verdict", ex_verdict, "verdict JSON from verify --json")->required();
    explain_cmd->add_option("--relation", ex_relation, "materialized relation file");
    explain_cmd->add_option("--data", ex_data, "raw record file (needs --schema)");
    explain_cmd->add_option("--schema", ex_schema, "schema declaration file");
    explain_cmd->callback([&] {
        nlohmann::json j = nlohmann::json::parse(slurp(ex_verdict));
        Relation rel = load_relation_arg(ex_relation, ex_data, ex_schema, embedder);
        std::cout << "claim:   " << j["claim"].get<std::string>() << "\n";
        std::cout << "verdict: " << (j["verdict"].get<bool>() ? "SUPPORTED" : "NOT SUPPORTED")
                  << "\n\n";
        for (const auto& c : j["citations"]) {
            std::int64_t row_id = c["row_id"].get<std::int64_t>();
            std::cout << "[" << (c["polarity"] == "pos" ? "+" : "-") << "] row " << row_id
                      << "  (" << c["formula"].get<std::string>() << ")\n";
            if (row_id >= 0 && row_id < static_cast<std::int64_t>(rel.rows.size())) {
                for (const auto& [name, value] : rel.rows[static_cast<size_t>(row_id)].attrs)
                    std::cout << "    " << name << ": " << value.to_display() << "\n";
            }
        }
    });

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "run the benchmark claims and report metrics");
    std::string bn_dir = "bench", bn_report, bn_ablate;
    EngineConfig bn_cfg;
    HarnessOptions bn_opt;
    bool bn_replay = false;
    bench_cmd->add_option("--dir", bn_dir, "benchmark directory from `veriq gen`");
    bench_cmd->add_option("--trials", bn_opt.trials, "trials per configuration");
    bench_cmd->add_option("--sim-latency", bn_opt.sim_latency_per_call_s,
                          "simulated seconds per backend call");
    bench_cmd->add_option("--report", bn_report, "write the JSON report here");
    bench_cmd->add_option("--ablate", bn_ablate,
                          "ablation row(s): an optimization name, or 'all' for the full study");
    bench_cmd->add_option("--cache-dir", bn_opt.cache_dir, "prompt cache directory");
    bench_cmd->add_flag("--replay", bn_replay, "serve oracle responses from cache only");
    add_engine_flags(bench_cmd, bn_cfg);
    bench_cmd->callback([&] {
        gen::SyntheticBench bench;
        bench.schema =
            Schema::from_json(nlohmann::json::parse(slurp(fs::path(bn_dir) / "schema.json")));
        {
            std::ifstream in(fs::path(bn_dir) / "dataset.jsonl");
            bench.relation = ingest(in, bench.schema, embedder);
        }
        bench.backend = ScriptedBackend::from_json(
            nlohmann::json::parse(slurp(fs::path(bn_dir) / "fixture.json")));
        {
            std::istringstream in(slurp(fs::path(bn_dir) / "claims.jsonl"));
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line);
                bench.claims.push_back({j.at("id"), j.at("text"), j.at("program"),
                                        j.value("grounded", false)});
            }
        }
        bn_opt.use_replay_backend = bn_replay;

        if (!bn_ablate.empty()) {
            std::vector<std::string> rows = {"none"};
            if (bn_ablate == "all")
                for (const auto& f : ablation_flags()) rows.push_back(f);
            else
                rows.push_back(bn_ablate);
            rows.push_back("all");
            AblationReport report = run_ablation(bench, bn_cfg, bn_opt, embedder, rows);
            std::cout << "disabled            backend_calls  cost_mult  latency_mult  f1\n";
            for (const auto& r : report.rows) {
                std::printf("%-19s %12lld  %9.2f  %12.2f  %.2f\n", r.disabled.c_str(),
                            static_cast<long long>(r.backend_calls), r.cost_multiplier,
                            r.latency_multiplier, r.metrics.f1);
            }
            if (!bn_report.empty()) spill(bn_report, report.to_json().dump(2) + "\n");
            return;
        }

        RunReport report = run_bench(bench, bn_cfg, bn_opt, embedder, nullptr, nullptr);
        auto p = report.agg_metric(&Metrics::precision);
        auto r = report.agg_metric(&Metrics::recall);
        auto f = report.agg_metric(&Metrics::f1);
        auto a = report.agg_metric(&Metrics::accuracy);
        auto c = report.agg(&TrialReport::mean_cost);
        auto l = report.agg(&TrialReport::mean_latency_s);
        std::printf("precision %.3f [%.3f, %.3f]\n", p.mean, p.min, p.max);
        std::printf("recall    %.3f [%.3f, %.3f]\n", r.mean, r.min, r.max);
        std::printf("f1        %.3f [%.3f, %.3f]\n", f.mean, f.min, f.max);
        std::printf("accuracy  %.3f [%.3f, %.3f]\n", a.mean, a.min, a.max);
        std::printf("cost      $%.4f [%.4f, %.4f] per claim\n", c.mean, c.min, c.max);
        std::printf("latency   %.1fs [%.1f, %.1f] per claim (simulated)\n", l.mean, l.min, l.max);
        if (!bn_report.empty()) spill(bn_report, report.to_json().dump(2) + "\n");
    });

    // ---- cache ----
    auto* cache_cmd = app.add_subcommand("cache", "prompt cache maintenance");
    std::string cc_dir = ".veriq-cache";
    std::string cc_action;
    cache_cmd->add_option("action", cc_action, "stats | clear")
        ->required()
        ->check(CLI::IsMember({"stats", "clear"}));
    cache_cmd->add_option("--cache-dir", cc_dir, "prompt cache directory");
    cache_cmd->callback([&] {
        PromptCache cache(cc_dir);
        if (cc_action == "clear") {
            cache.clear();
            std::cout << "cache cleared\n";
            return;
        }
        std::uintmax_t bytes = 0;
        std::error_code ec;
        for (const auto& e : fs::directory_iterator(cc_dir, ec))
            if (e.is_regular_file()) bytes += e.file_size();
        std::cout << "entries: " << cache.entry_count() << "\nbytes:   " << bytes << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        nlohmann::json err = {{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
