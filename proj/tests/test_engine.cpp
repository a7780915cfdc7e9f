#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>
#include <thread>

#include "veriq/engine.hpp"
#include "veriq/gen.hpp"
#include "veriq/optimizer.hpp"
#include "veriq/parse.hpp"

using namespace veriq;

namespace {

struct Fixture {
    Schema schema;
    Relation relation;
    std::shared_ptr<ScriptedBackend> backend;
    FeatureHashEmbedder embedder;

    explicit Fixture(std::vector<std::pair<std::string, std::string>> rows_in) {
        schema.relation_name = "reviews";
        schema.attrs = {{"text", AttrType::Text, "review text"},
                        {"business_id", AttrType::Categorical, "location id"}};
        std::string lines;
        for (auto& [text, biz] : rows_in)
            lines += nlohmann::json({{"text", text}, {"business_id", biz}}).dump() + "\n";
        std::istringstream in(lines);
        relation = ingest(in, schema, embedder);
        backend = std::make_shared<ScriptedBackend>();
        ScriptedRule rule;
        rule.kind = ScriptedRule::Kind::Bool;
        rule.field = "text";
        rule.any_of = {"rude", "slow"};
        backend->add_rule("Identify whether the {text} complains about service", rule);
        ScriptedRule spec_rule;
        spec_rule.kind = ScriptedRule::Kind::Completion;
        spec_rule.field = "context";
        spec_rule.completion_default =
            nlohmann::json({{"query", "service complaints rude slow"},
                            {"inclusion_keywords", {"rude", "slow"}},
                            {"exclusion_keywords", {"pleasant"}}})
                .dump();
        backend->add_rule(prompts::kSearchSpecTemplate, spec_rule);
    }

    Oracle make_oracle(const EngineConfig& cfg) {
        return Oracle(backend, nullptr, std::make_shared<CostLedger>(), cfg.caching);
    }

    Verdict run(const std::string& program, EngineConfig cfg) {
        PlanPtr logical = parse(program, schema);
        Oracle oracle = make_oracle(cfg);
        PhysicalPlan plan = optimize(logical, schema, oracle, embedder, cfg);
        return execute(plan, relation, oracle, cfg);
    }
};

constexpr const char* kComplainTemplate = "Identify whether the {text} complains about service";

std::string simple_program(const std::string& agg, const std::string& check) {
    return "df\n.map(prompt(" + escape_string(kComplainTemplate) +
           ", bool).alias(\"hit\"))\n.aggregate([" + agg +
           "(col(\"hit\")).alias(\"out\")])\n.check(" + check + ")";
}

}  // namespace

TEST_CASE("accumulator examples from the aggregation rules") {
    SECTION("count_if at-least-2 resolves at the second positive") {
        EngineAccumulator acc;
        acc.fn = AggFn::CountIf;
        acc.hint = Comparison{CompareOp::GE, 2};
        acc.formula_id = "phi";
        acc.row_passed(0, true);
        CHECK_FALSE(acc.done());
        acc.row_passed(1, true);
        CHECK(acc.done());
        CHECK(acc.result);
        CHECK(acc.seen == 2);
    }
    SECTION("proportion with known total resolves from the guaranteed minimum") {
        EngineAccumulator acc;
        acc.fn = AggFn::Proportion;
        acc.hint = Comparison{CompareOp::GT, 0.5};
        acc.n_exact = 4;
        acc.formula_id = "phi";
        acc.row_passed(0, true);
        acc.row_passed(1, true);
        CHECK_FALSE(acc.done());
        acc.row_passed(2, true);  // minimum final proportion 3/4
        CHECK(acc.done());
        CHECK(acc.result);
    }
    SECTION("count_if refutes when the maximum achievable count falls short") {
        EngineAccumulator acc;
        acc.fn = AggFn::CountIf;
        acc.hint = Comparison{CompareOp::GE, 4};
        acc.n_exact = 5;
        acc.formula_id = "phi";
        acc.row_passed(0, false);
        CHECK_FALSE(acc.done());  // max achievable 4 >= 4: still open
        acc.row_passed(1, false);  // max achievable 3 < 4: determined
        CHECK(acc.done());
        CHECK_FALSE(acc.result);
        CHECK(acc.seen == 2);
    }
    SECTION("exact equality finalizes from counts at exhaustion") {
        EngineAccumulator acc;
        acc.fn = AggFn::CountIf;
        acc.hint = Comparison{CompareOp::EQ, 2};
        acc.n_exact = 3;
        acc.formula_id = "phi";
        acc.row_passed(0, true);
        acc.row_passed(1, false);
        acc.row_passed(2, true);
        if (!acc.done()) acc.finish_stream();
        CHECK(acc.done());
        CHECK(acc.result);
        CHECK(acc.exhausted);
    }
    SECTION("fractional count thresholds from proportional scaling use real arithmetic") {
        EngineAccumulator acc;
        acc.fn = AggFn::CountIf;
        acc.hint = Comparison{CompareOp::GT, 2.0};  // count > 2.0 means >= 3
        acc.formula_id = "phi";
        acc.row_passed(0, true);
        acc.row_passed(1, true);
        CHECK_FALSE(acc.done());
        acc.row_passed(2, true);
        CHECK(acc.done());
        CHECK(acc.result);
    }
}

TEST_CASE("dense rank matches the distinct-count rule") {
    CHECK(dense_rank({0.9, 0.7, 0.9, 0.5}, true) == std::vector<std::int64_t>{1, 2, 1, 3});
    CHECK(dense_rank({0.4}, true) == std::vector<std::int64_t>{1});
    CHECK(dense_rank({0.2, 0.2, 0.2}, true) == std::vector<std::int64_t>{1, 1, 1});
    CHECK(dense_rank({0.1, 0.3}, false) == std::vector<std::int64_t>{1, 2});
}

TEST_CASE("bool_or stops at the witness and cites it") {
    Fixture fx({{"fine day out", "a"},
                {"pleasant visit", "a"},
                {"the staff was rude", "a"},
                {"nothing to note", "a"},
                {"quiet corner table", "a"}});
    EngineConfig cfg;
    cfg.batch_size = 1;
    cfg.relevance_sorting = false;  // keep input order so the third tuple is the witness
    cfg.estimation = false;
    Verdict v = fx.run(simple_program("bool_or", "col(\"out\")"), cfg);
    CHECK(v.value);
    CHECK(v.stats.tuples_processed == 3);
    CHECK(v.stats.oracle_calls == 3);
    REQUIRE(v.tokens.size() == 1);
    CHECK(v.tokens[0].row_id == 2);
    CHECK(v.tokens[0].positive);
    CHECK(v.resolution == ResolutionKind::Deterministic);
}

TEST_CASE("bool_and stops at the counterexample") {
    Fixture fx({{"the staff was rude", "a"}, {"rude again", "a"}, {"lovely", "a"}});
    EngineConfig cfg;
    cfg.batch_size = 1;
    cfg.relevance_sorting = false;
    cfg.estimation = false;
    Verdict v = fx.run(simple_program("bool_and", "col(\"out\")"), cfg);
    CHECK_FALSE(v.value);
    CHECK(v.stats.tuples_processed == 3);
    REQUIRE(v.tokens.size() == 1);
    CHECK(v.tokens[0].row_id == 2);
    CHECK_FALSE(v.tokens[0].positive);
}

TEST_CASE("early stopping disabled forces a full scan") {
    Fixture fx({{"rude", "a"}, {"fine", "a"}, {"fine", "a"}, {"fine", "a"}});
    EngineConfig cfg;
    cfg.batch_size = 1;
    cfg.early_stopping = false;
    Verdict v = fx.run(simple_program("bool_or", "col(\"out\")"), cfg);
    CHECK(v.value);
    CHECK(v.stats.oracle_calls == 4);
    CHECK(v.resolution == ResolutionKind::FullScan);
}

TEST_CASE("batched pulls trade at most one batch of extra calls") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 40; ++i)
        rows.push_back({i == 5 ? "the staff was rude" : "fine visit", "a"});
    Fixture fx(rows);
    EngineConfig cfg;
    cfg.batch_size = 8;
    cfg.relevance_sorting = false;
    cfg.estimation = false;
    Verdict v = fx.run(simple_program("bool_or", "col(\"out\")"), cfg);
    CHECK(v.value);
    CHECK(v.stats.oracle_calls == 8);  // one batch resolves it
}

TEST_CASE("streaming group skip: one call per group with an immediate witness") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int g = 0; g < 2; ++g) {
        rows.push_back({"the staff was rude", "b" + std::to_string(g)});
        for (int i = 0; i < 4; ++i)
            rows.push_back({"fine visit", "b" + std::to_string(g)});
    }
    Fixture fx(rows);
    EngineConfig cfg;
    cfg.batch_size = 1;
    cfg.relevance_sorting = false;
    cfg.estimation = false;  // no shuffle: groups keep their planted order
    std::string program =
        "df\n.map(prompt(" + escape_string(kComplainTemplate) +
        ", bool).alias(\"hit\"))\n.aggregate([count_if(col(\"hit\")).alias(\"n\")], "
        "group_by=[col(\"business_id\")])\n.aggregate([bool_and(col(\"n\") >= "
        "1).alias(\"all\")])\n.check(col(\"all\"))";
    Verdict v = fx.run(program, cfg);
    CHECK(v.value);
    CHECK(v.stats.oracle_calls == 2);  // the witness row of each group only
    REQUIRE(v.tokens.size() == 2);
}

TEST_CASE("empty scope semantics") {
    Fixture fx({{"rude", "a"}, {"fine", "a"}});
    EngineConfig cfg;
    cfg.estimation = false;
    std::string scope = "df\n.filter(col(\"business_id\") == \"nope\")";
    std::string tail = "\n.map(prompt(" + escape_string(kComplainTemplate) +
                       ", bool).alias(\"hit\"))\n.aggregate([";

    Verdict v1 = fx.run(scope + tail + "bool_and(col(\"hit\")).alias(\"out\")])\n.check(col(\"out\"))", cfg);
    CHECK(v1.value);  // vacuous truth
    CHECK(v1.tokens.empty());

    Verdict v2 = fx.run(scope + tail + "bool_or(col(\"hit\")).alias(\"out\")])\n.check(col(\"out\"))", cfg);
    CHECK_FALSE(v2.value);

    Verdict v3 = fx.run(
        scope + tail + "proportion(col(\"hit\")).alias(\"out\")])\n.check(col(\"out\") >= 0.5)",
        cfg);
    CHECK_FALSE(v3.value);
    bool warned = false;
    for (const auto& n : v3.notes) warned = warned || n.find("empty") != std::string::npos;
    CHECK(warned);
    CHECK(v3.tokens.empty());
}

TEST_CASE("fused filter and map evaluate in one call per tuple") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({"the staff was rude", "a"});
    Fixture fx(rows);
    fx.backend->add_rule("Does the {text} discuss a restaurant visit",
                         [] {
                             ScriptedRule r;
                             r.kind = ScriptedRule::Kind::Bool;
                             r.field = "text";
                             r.any_of = {"staff", "visit", "table"};
                             return r;
                         }());
    std::string program =
        "df\n.filter(prompt(\"Does the {text} discuss a restaurant visit\", bool))"
        "\n.map(prompt(" +
        escape_string(kComplainTemplate) +
        ", bool).alias(\"hit\"))"
        "\n.aggregate([bool_and(col(\"hit\")).alias(\"out\")])\n.check(col(\"out\"))";

    EngineConfig fused_cfg;
    fused_cfg.estimation = false;
    fused_cfg.similarity_filter = false;
    Verdict fused = fx.run(program, fused_cfg);

    EngineConfig unfused_cfg = fused_cfg;
    unfused_cfg.fusion = false;
    Verdict unfused = fx.run(program, unfused_cfg);

    CHECK(fused.value == unfused.value);
    CHECK(fused.stats.oracle_calls == 10);
    CHECK(unfused.stats.oracle_calls == 20);
}

TEST_CASE("fused filter discards tuples and their map outputs") {
    Fixture fx({{"the staff was rude", "a"}, {"unrelated topic", "a"}});
    fx.backend->add_rule("Does the {text} discuss staff",
                         [] {
                             ScriptedRule r;
                             r.kind = ScriptedRule::Kind::Bool;
                             r.field = "text";
                             r.any_of = {"staff"};
                             return r;
                         }());
    std::string program =
        "df\n.filter(prompt(\"Does the {text} discuss staff\", bool))"
        "\n.map(prompt(" +
        escape_string(kComplainTemplate) +
        ", bool).alias(\"hit\"))"
        "\n.aggregate([count_if(col(\"hit\")).alias(\"n\")])\n.check(col(\"n\") == 1)";
    EngineConfig cfg;
    cfg.estimation = false;
    cfg.similarity_filter = false;
    Verdict v = fx.run(program, cfg);
    CHECK(v.value);  // only the staff row is counted, and it complains
}

TEST_CASE("per-tuple oracle type errors follow the configured policy") {
    Fixture fx({{"the staff was rude", "a"}, {"fine", "a"}});
    ScriptedRule garbage;
    garbage.kind = ScriptedRule::Kind::Completion;
    garbage.field = "text";
    garbage.completion_default = "banana";
    fx.backend->add_rule("Is the {text} nonsense", garbage);
    std::string program =
        "df\n.map(prompt(\"Is the {text} nonsense\", bool).alias(\"hit\"))"
        "\n.aggregate([bool_or(col(\"hit\")).alias(\"out\")])\n.check(col(\"out\"))";
    EngineConfig cfg;
    cfg.estimation = false;
    cfg.relevance_sorting = false;
    CHECK_THROWS_AS(fx.run(program, cfg), Error);

    cfg.error_policy = EngineConfig::ErrorPolicy::SkipWithWarning;
    Verdict v = fx.run(program, cfg);
    CHECK_FALSE(v.value);  // every row skipped
    bool warned = false;
    for (const auto& n : v.notes) warned = warned || n.find("skipped") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("relevance sorting surfaces the witness early") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 30; ++i) rows.push_back({"pleasant if unremarkable visit", "a"});
    rows.push_back({"the staff was rude and slow", "a"});
    Fixture fx(rows);
    EngineConfig cfg;
    cfg.batch_size = 1;
    cfg.estimation = false;
    Verdict v = fx.run(simple_program("bool_or", "col(\"out\")"), cfg);
    CHECK(v.value);
    CHECK(v.stats.oracle_calls <= 2);  // the witness ranks first (or nearly)
}

TEST_CASE("estimation resolves a clear majority without a full scan") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int i = 0; i < 400; ++i)
        rows.push_back({i % 10 < 9 ? "the staff was rude" : "fine visit", "a"});
    Fixture fx(rows);
    EngineConfig cfg;
    cfg.batch_size = 1;
    Verdict v = fx.run(simple_program("proportion", "col(\"out\") >= 0.5"), cfg);
    CHECK(v.value);
    CHECK(v.resolution == ResolutionKind::Estimated);
    CHECK(v.stats.oracle_calls < 400);
    CHECK(v.alpha_used > 0.0);
    CHECK(v.tokens.size() >= 1);
}

TEST_CASE("ordinal claims rank groups and cite pairwise evidence") {
    std::vector<std::pair<std::string, std::string>> rows;
    auto add_rows = [&](const std::string& biz, int complaints, int fine) {
        for (int i = 0; i < complaints; ++i) rows.push_back({"the staff was rude", biz});
        for (int i = 0; i < fine; ++i) rows.push_back({"pleasant visit", biz});
    };
    add_rows("b0", 8, 2);  // complaint proportion 0.8
    add_rows("b1", 5, 5);  // 0.5
    add_rows("b2", 1, 9);  // 0.1
    Fixture fx(rows);
    EngineConfig cfg;
    cfg.estimation = false;
    std::string program =
        "df\n.map(prompt(" + escape_string(kComplainTemplate) +
        ", bool).alias(\"hit\"))\n.aggregate([proportion(col(\"hit\")).alias(\"p\")], "
        "group_by=[col(\"business_id\")])\n.with_rank(col(\"p\"))\n.filter(col(\"business_id\") "
        "== \"b0\")\n.check(col(\"rank\") == 1)";
    Verdict v = fx.run(program, cfg);
    CHECK(v.value);
    CHECK(!v.tokens.empty());

    std::string program2 =
        "df\n.map(prompt(" + escape_string(kComplainTemplate) +
        ", bool).alias(\"hit\"))\n.aggregate([proportion(col(\"hit\")).alias(\"p\")], "
        "group_by=[col(\"business_id\")])\n.with_rank(col(\"p\"))\n.filter(col(\"business_id\") "
        "== \"b7\")\n.check(col(\"rank\") == 1)";
    Verdict v2 = fx.run(program2, cfg);
    CHECK_FALSE(v2.value);
    bool noted = false;
    for (const auto& n : v2.notes) noted = noted || n.find("missing") != std::string::npos;
    CHECK(noted);
}

TEST_CASE("ordinal estimation separates well-spread groups early") {
    std::vector<std::pair<std::string, std::string>> rows;
    auto add_rows = [&](const std::string& biz, int complaints, int fine) {
        for (int i = 0; i < complaints; ++i) rows.push_back({"the staff was rude", biz});
        for (int i = 0; i < fine; ++i) rows.push_back({"pleasant visit", biz});
    };
    add_rows("b0", 170, 30);
    add_rows("b1", 100, 100);
    add_rows("b2", 20, 180);
    Fixture fx(rows);
    EngineConfig cfg;
    cfg.batch_size = 8;
    std::string program =
        "df\n.map(prompt(" + escape_string(kComplainTemplate) +
        ", bool).alias(\"hit\"))\n.aggregate([proportion(col(\"hit\")).alias(\"p\")], "
        "group_by=[col(\"business_id\")])\n.with_rank(col(\"p\"))\n.filter(col(\"business_id\") "
        "== \"b0\")\n.check(col(\"rank\") == 1)";
    Verdict v = fx.run(program, cfg);
    CHECK(v.value);
    CHECK(v.stats.oracle_calls < 600);

    EngineConfig full = cfg;
    full.estimation = false;
    Verdict fv = fx.run(program, full);
    CHECK(fv.value);
    CHECK(fv.stats.oracle_calls == 600);
}

TEST_CASE("deterministic optimizations never change verdicts (mini property)") {
    FeatureHashEmbedder embedder;
    for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
        auto suite = gen::generate_equiv_suite(seed, 4, 12, 25, embedder);
        for (const auto& program : suite.programs) {
            PlanPtr logical = parse(program, suite.schema);

            EngineConfig opt_cfg;
            opt_cfg.estimation = false;
            opt_cfg.tau = -1.0;  // similarity prefilter as a guaranteed no-op
            opt_cfg.batch_size = 1;
            Oracle o1(suite.backend, nullptr, std::make_shared<CostLedger>(), false);
            PhysicalPlan p1 = optimize(logical, suite.schema, o1, embedder, opt_cfg);
            Verdict v1 = execute(p1, suite.relation, o1, opt_cfg);

            EngineConfig plain_cfg = EngineConfig::all_disabled();
            Oracle o2(suite.backend, nullptr, std::make_shared<CostLedger>(), false);
            PhysicalPlan p2 = optimize(logical, suite.schema, o2, embedder, plain_cfg);
            Verdict v2 = execute(p2, suite.relation, o2, plain_cfg);

            CAPTURE(seed, program);
            REQUIRE(v1.value == v2.value);
            // oracle-call monotonicity: per-tuple pulls never cost more than
            // the full scan (the optimizer's own search-spec calls aside,
            // which a disabled run does not make)
            REQUIRE(v1.stats.oracle_calls <= v2.stats.oracle_calls);
        }
    }
}

TEST_CASE("exhausted accumulators finalize exactly like brute force") {
    for (std::int64_t n = 0; n <= 8; ++n) {
        std::vector<Quantifier> grid{Quantifier::exists(), Quantifier::forall()};
        for (auto op : {CompareOp::GE, CompareOp::GT, CompareOp::LE, CompareOp::LT, CompareOp::EQ,
                        CompareOp::NE}) {
            for (std::int64_t k = 0; k <= n; ++k)
                grid.push_back(Quantifier::cardinal(op, static_cast<double>(k)));
            for (double p : {0.25, 0.5, 0.75}) grid.push_back(Quantifier::proportional(op, p));
        }
        for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
            std::vector<bool> column(static_cast<size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) column[static_cast<size_t>(i)] = (bits >> i) & 1;
            for (const auto& q : grid) {
                EngineAccumulator acc;
                switch (q.kind) {
                    case QuantKind::Exists: acc.fn = AggFn::BoolOr; break;
                    case QuantKind::Forall: acc.fn = AggFn::BoolAnd; break;
                    case QuantKind::Cardinal:
                        acc.fn = AggFn::CountIf;
                        acc.hint = q.cmp;
                        break;
                    case QuantKind::Proportional:
                        acc.fn = AggFn::Proportion;
                        acc.hint = q.cmp;
                        break;
                }
                acc.es_enabled = false;  // force exhaustion, no early resolution
                acc.formula_id = "phi";
                for (std::int64_t i = 0; i < n; ++i)
                    acc.row_passed(i, column[static_cast<size_t>(i)]);
                acc.finish_stream();
                CAPTURE(n, bits, static_cast<int>(q.kind), static_cast<int>(q.cmp.op),
                        q.cmp.threshold);
                CHECK(acc.result == eval_quantifier(q, column));
            }
        }
    }
}

TEST_CASE("independent executions share a relation and cache concurrently") {
    std::vector<std::pair<std::string, std::string>> rows;
    for (int g = 0; g < 3; ++g)
        for (int i = 0; i < 12; ++i)
            rows.push_back({i % 3 ? "pleasant visit" : "the staff was rude",
                            "b" + std::to_string(g)});
    Fixture fx(rows);
    auto dir = std::filesystem::temp_directory_path() / "veriq_concurrent_test";
    std::filesystem::remove_all(dir);
    auto cache = std::make_shared<PromptCache>(dir);
    auto ledger = std::make_shared<CostLedger>();

    EngineConfig cfg;
    cfg.batch_size = 4;
    std::vector<std::string> programs = {
        simple_program("bool_or", "col(\"out\")"),
        simple_program("bool_and", "col(\"out\")"),
        simple_program("proportion", "col(\"out\") >= 0.2"),
        simple_program("count_if", "col(\"out\") >= 3"),
    };
    std::vector<std::thread> threads;
    std::vector<Verdict> verdicts(programs.size());
    for (size_t i = 0; i < programs.size(); ++i) {
        threads.emplace_back([&, i] {
            Oracle oracle(fx.backend, cache, ledger, true);
            PlanPtr logical = parse(programs[i], fx.schema);
            PhysicalPlan plan = optimize(logical, fx.schema, oracle, fx.embedder, cfg);
            verdicts[i] = execute(plan, fx.relation, oracle, cfg);
        });
    }
    for (auto& t : threads) t.join();

    for (size_t i = 0; i < programs.size(); ++i) {
        Oracle oracle(fx.backend, nullptr, std::make_shared<CostLedger>(), false);
        PlanPtr logical = parse(programs[i], fx.schema);
        PhysicalPlan plan = optimize(logical, fx.schema, oracle, fx.embedder, cfg);
        Verdict again = execute(plan, fx.relation, oracle, cfg);
        CHECK(verdicts[i].value == again.value);
    }
    std::filesystem::remove_all(dir);
}
