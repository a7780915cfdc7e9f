#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "veriq/claims.hpp"

using namespace veriq;

TEST_CASE("normalize follows the scaling rules") {
    auto q1 = normalize(Quantifier::exists(), 7);
    CHECK(q1.kind == QuantKind::Cardinal);
    CHECK(q1.cmp.op == CompareOp::GE);
    CHECK(q1.cmp.threshold == 1.0);

    auto q2 = normalize(Quantifier::forall(), 7);
    CHECK(q2.cmp.op == CompareOp::EQ);
    CHECK(q2.cmp.threshold == 7.0);

    auto q3 = normalize(Quantifier::proportional(CompareOp::GT, 0.5), 4);
    CHECK(q3.kind == QuantKind::Cardinal);
    CHECK(q3.cmp.op == CompareOp::GT);
    CHECK(q3.cmp.threshold == 2.0);
}

TEST_CASE("normalize is idempotent on cardinal quantifiers") {
    for (auto op : {CompareOp::GE, CompareOp::GT, CompareOp::LE, CompareOp::LT, CompareOp::EQ,
                    CompareOp::NE}) {
        for (double k : {0.0, 1.0, 2.5, 7.0}) {
            auto q = Quantifier::cardinal(op, k);
            CHECK(normalize(q, 11) == q);
            CHECK(normalize(normalize(q, 11), 11) == q);
        }
    }
}

namespace {

std::vector<Quantifier> quantifier_grid(std::int64_t n) {
    std::vector<Quantifier> qs{Quantifier::exists(), Quantifier::forall()};
    for (auto op : {CompareOp::GE, CompareOp::GT, CompareOp::LE, CompareOp::LT, CompareOp::EQ,
                    CompareOp::NE}) {
        for (std::int64_t k = 0; k <= n; ++k)
            qs.push_back(Quantifier::cardinal(op, static_cast<double>(k)));
        for (double p : {0.25, 0.5, 0.75}) qs.push_back(Quantifier::proportional(op, p));
    }
    return qs;
}

}  // namespace

TEST_CASE("normalize preserves truth over every column, exhaustively for small n") {
    for (std::int64_t n = 1; n <= 8; ++n) {
        for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
            std::vector<bool> column(n);
            for (std::int64_t i = 0; i < n; ++i) column[i] = (bits >> i) & 1;
            for (const auto& q : quantifier_grid(n)) {
                CAPTURE(n, bits);
                CHECK(eval_quantifier(q, column) == eval_quantifier(normalize(q, n), column));
            }
        }
    }
}

TEST_CASE("normalize preserves truth on random columns up to n=12") {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 300; ++trial) {
        std::int64_t n = 1 + static_cast<std::int64_t>(gen() % 12);
        std::vector<bool> column(n);
        for (auto&& b : column) b = gen() & 1;
        for (const auto& q : quantifier_grid(n)) {
            CHECK(eval_quantifier(q, column) == eval_quantifier(normalize(q, n), column));
        }
    }
}

namespace {

std::shared_ptr<ScriptedBackend> decompose_fixture() {
    auto b = std::make_shared<ScriptedBackend>();
    ScriptedRule split;
    split.kind = ScriptedRule::Kind::Completion;
    split.field = "sentence";
    split.completions = {
        {"The food is praised often.", "Customers praise the food."},
        {"They serve it daily and it sells out.",
         "They serve it daily\nIt sells out."},
    };
    b->add_rule(prompts::kDecomposeTemplate, split);

    ScriptedRule resolve;
    resolve.kind = ScriptedRule::Kind::Completion;
    resolve.field = "claim";
    resolve.completions = {
        {"Customers praise the food.", "Customers praise the restaurant's food."},
        {"They serve it daily", "The restaurant serves roast pork daily"},
        {"It sells out.", "The roast pork sells out."},
    };
    b->add_rule(prompts::kResolveTemplate, resolve);
    return b;
}

}  // namespace

TEST_CASE("decompose splits sentences and resolves references in order") {
    auto ledger = std::make_shared<CostLedger>();
    Oracle oracle(decompose_fixture(), nullptr, ledger, false);
    auto claims = decompose(
        "The food is praised often. They serve it daily and it sells out.", oracle, "scripted");
    REQUIRE(claims.size() == 3);
    CHECK(claims[0] == "Customers praise the restaurant's food.");
    CHECK(claims[1] == "The restaurant serves roast pork daily");
    CHECK(claims[2] == "The roast pork sells out.");
}

TEST_CASE("decompose of an empty response yields no claims") {
    auto ledger = std::make_shared<CostLedger>();
    Oracle oracle(decompose_fixture(), nullptr, ledger, false);
    CHECK(decompose("", oracle, "scripted").empty());
}

TEST_CASE("vague quantity hints render the default table") {
    VagueQuantityHints hints;
    std::string r = hints.render();
    CHECK(r.find("some -> at least 1") != std::string::npos);
    CHECK(r.find("majority -> more than 50%") != std::string::npos);
}
