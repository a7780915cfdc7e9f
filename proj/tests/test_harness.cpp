#include <catch2/catch_amalgamated.hpp>

#include "veriq/harness.hpp"

using namespace veriq;

TEST_CASE("metric arithmetic matches the worked example") {
    // predictions [T,T,F,F] vs truth [T,F,F,F], T = ungrounded
    Metrics m = compute_metrics({true, true, false, false}, {true, false, false, false});
    CHECK(m.precision == Catch::Approx(0.5));
    CHECK(m.recall == Catch::Approx(1.0));
    CHECK(m.f1 == Catch::Approx(2.0 / 3.0));
    CHECK(m.accuracy == Catch::Approx(0.75));
}

TEST_CASE("metrics validated against hand-computed confusion matrices") {
    // all 16 prediction patterns over 4 claims with truth [T,F,T,F]
    std::vector<bool> truth = {true, false, true, false};
    for (int bits = 0; bits < 16; ++bits) {
        std::vector<bool> pred(4);
        for (int i = 0; i < 4; ++i) pred[i] = (bits >> i) & 1;
        long tp = 0, fp = 0, fn = 0, tn = 0;
        for (int i = 0; i < 4; ++i) {
            tp += pred[i] && truth[i];
            fp += pred[i] && !truth[i];
            fn += !pred[i] && truth[i];
            tn += !pred[i] && !truth[i];
        }
        Metrics m = compute_metrics(pred, truth);
        CAPTURE(bits);
        double want_p = tp + fp == 0 ? (tp + fn == 0 ? 1.0 : 0.0)
                                     : static_cast<double>(tp) / (tp + fp);
        double want_r = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
        double want_f =
            want_p + want_r == 0 ? 0.0 : 2.0 * want_p * want_r / (want_p + want_r);
        CHECK(m.precision == Catch::Approx(want_p));
        CHECK(m.recall == Catch::Approx(want_r));
        CHECK(m.f1 == Catch::Approx(want_f));
        CHECK(m.accuracy == Catch::Approx((tp + tn) / 4.0));
    }
}

TEST_CASE("the scripted bench runs deterministically and scores perfectly") {
    FeatureHashEmbedder embedder;
    gen::GenOptions gopt;
    gopt.businesses = 4;
    gopt.reviews_per_business = 25;
    auto bench = gen::generate_bench(gopt, embedder);

    EngineConfig cfg;
    cfg.caching = false;  // keep trials independent
    HarnessOptions opt;
    opt.trials = 2;
    RunReport r1 = run_bench(bench, cfg, opt, embedder);
    RunReport r2 = run_bench(bench, cfg, opt, embedder);
    CHECK(r1.to_json() == r2.to_json());

    // the scripted oracle matches the planted ground truth exactly, so the
    // engine should verify every claim
    for (const auto& trial : r1.trials) {
        for (const auto& c : trial.claims) {
            CAPTURE(c.id, c.text, c.error_message);
            REQUIRE_FALSE(c.error);
            CHECK(c.verdict == *c.grounded);
        }
        CHECK(trial.metrics.f1 == Catch::Approx(1.0));
        CHECK(trial.metrics.accuracy == Catch::Approx(1.0));
    }
}

TEST_CASE("full-scan execution agrees with the optimized run on the bench") {
    FeatureHashEmbedder embedder;
    gen::GenOptions gopt;
    gopt.businesses = 3;
    gopt.reviews_per_business = 20;
    auto bench = gen::generate_bench(gopt, embedder);

    HarnessOptions opt;
    opt.trials = 1;
    EngineConfig optimized;
    optimized.estimation = false;  // deterministic-only comparison
    optimized.tau = -1.0;
    optimized.caching = false;
    RunReport a = run_bench(bench, optimized, opt, embedder);
    RunReport b = run_bench(bench, EngineConfig::all_disabled(), opt, embedder);
    REQUIRE(a.trials[0].claims.size() == b.trials[0].claims.size());
    for (size_t i = 0; i < a.trials[0].claims.size(); ++i) {
        CAPTURE(a.trials[0].claims[i].id);
        CHECK(a.trials[0].claims[i].verdict == b.trials[0].claims[i].verdict);
    }
}

TEST_CASE("the ablation driver reports multipliers against the optimized baseline") {
    FeatureHashEmbedder embedder;
    gen::GenOptions gopt;
    gopt.businesses = 3;
    gopt.reviews_per_business = 24;
    auto bench = gen::generate_bench(gopt, embedder);

    EngineConfig cfg;
    HarnessOptions opt;
    opt.sim_latency_per_call_s = 0.5;
    AblationReport report = run_ablation(bench, cfg, opt, embedder, {"none", "all"});
    const AblationRow* base = report.row("none");
    const AblationRow* all_off = report.row("all");
    REQUIRE(base != nullptr);
    REQUIRE(all_off != nullptr);
    CHECK(base->calls_multiplier == 1.0);
    CHECK(all_off->backend_calls > base->backend_calls);
    CHECK(all_off->calls_multiplier > 1.0);
}
