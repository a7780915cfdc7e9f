#include <catch2/catch_amalgamated.hpp>

#include "veriq/provenance.hpp"

using namespace veriq;

namespace {

AccCapture capture_of(const std::vector<std::pair<std::int64_t, bool>>& column,
                      const std::string& formula = "phi") {
    AccCapture cap;
    for (const auto& [row, v] : column) {
        cap.tokens.push_back({row, formula, v});
        cap.positives += v ? 1 : 0;
        ++cap.seen;
    }
    cap.prop_denominator = static_cast<double>(column.size());
    cap.exhausted = true;
    return cap;
}

std::vector<std::pair<std::int64_t, bool>> column_from_bits(std::int64_t n, std::uint64_t bits,
                                                            std::int64_t base_row = 0) {
    std::vector<std::pair<std::int64_t, bool>> col;
    for (std::int64_t i = 0; i < n; ++i) col.push_back({base_row + i, ((bits >> i) & 1) != 0});
    return col;
}

}  // namespace

TEST_CASE("existential true provenance is a single positive witness") {
    // witness at row 7 after two negatives
    AccCapture cap = capture_of({{5, false}, {6, false}, {7, true}});
    auto tokens = assemble_simple(Quantifier::exists(), cap, true);
    REQUIRE(tokens.size() == 1);
    CHECK(tokens[0] == ProvToken{7, "phi", true});
}

TEST_CASE("cardinal at-least-two true provenance is two positive witnesses") {
    AccCapture cap = capture_of({{3, true}, {5, false}, {9, true}});
    auto tokens = assemble_simple(Quantifier::cardinal(CompareOp::GE, 2), cap, true);
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].row_id == 3);
    CHECK(tokens[1].row_id == 9);
    CHECK(tokens[0].positive);
    CHECK(tokens[1].positive);
}

TEST_CASE("universal false provenance is a single counterexample") {
    AccCapture cap = capture_of({{1, true}, {2, true}, {4, false}});
    auto tokens = assemble_simple(Quantifier::forall(), cap, false);
    REQUIRE(tokens.size() == 1);
    CHECK(tokens[0] == ProvToken{4, "phi", false});
}

TEST_CASE("polynomial interpretation rules on two tuples") {
    // R = {t1, t2}, phi = [true, false]
    std::vector<std::pair<std::int64_t, bool>> col{{1, true}, {2, false}};
    auto p_exists = brute_polynomial(Quantifier::exists(), col);
    REQUIRE(p_exists.ms.size() == 1);
    CHECK(p_exists.ms[0] == Monomial{{1, +1}});

    auto p_forall = brute_polynomial(Quantifier::forall(), col);
    CHECK(p_forall.is_zero());

    auto p_not_forall = brute_polynomial(Quantifier::forall(), col, /*negated=*/true);
    REQUIRE(p_not_forall.ms.size() == 1);
    CHECK(p_not_forall.ms[0] == Monomial{{2, -1}});
}

TEST_CASE("exactly-k polynomial is the single full monomial") {
    // 3 rows, 2 positives, EQ 2
    std::vector<std::pair<std::int64_t, bool>> col{{0, true}, {1, true}, {2, false}};
    auto p = brute_polynomial(Quantifier::cardinal(CompareOp::EQ, 2), col);
    REQUIRE(p.ms.size() == 1);
    CHECK(p.ms[0] == Monomial{{0, +1}, {1, +1}, {2, -1}});
}

TEST_CASE("check_minimal accepts monomials and rejects redundancy") {
    std::vector<std::pair<std::int64_t, bool>> col{{7, true}, {9, true}};
    auto p = brute_polynomial(Quantifier::exists(), col);
    CHECK(check_minimal({{7, "phi", true}}, p));
    CHECK(check_minimal({{9, "phi", true}}, p));
    CHECK_FALSE(check_minimal({{7, "phi", true}, {9, "phi", true}}, p));  // not minimal
    CHECK_FALSE(check_minimal({}, p));
}

TEST_CASE("size guard refuses large relations") {
    std::vector<std::pair<std::int64_t, bool>> col;
    for (int i = 0; i < 17; ++i) col.push_back({i, true});
    CHECK_THROWS_AS(brute_polynomial(Quantifier::exists(), col), Error);
}

namespace {

std::vector<Quantifier> provenance_grid(std::int64_t n) {
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

TEST_CASE("full-scan assembly passes check_minimal on the small grid") {
    // n <= 6 here; the acceptance suite runs the full |R| <= 10 grid
    for (std::int64_t n = 1; n <= 6; ++n) {
        for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
            auto col = column_from_bits(n, bits);
            AccCapture cap = capture_of(col);
            std::vector<bool> boolcol;
            for (auto [_, v] : col) boolcol.push_back(v);
            for (const auto& q : provenance_grid(n)) {
                bool verdict = eval_quantifier(q, boolcol);
                auto tokens = assemble_simple(q, cap, verdict);
                auto poly = brute_polynomial(q, col, !verdict);
                CAPTURE(n, bits, static_cast<int>(q.kind), static_cast<int>(q.cmp.op),
                        q.cmp.threshold, verdict);
                REQUIRE(check_minimal(tokens, poly));
            }
        }
    }
}

TEST_CASE("nested forall of at-least-two matches its polynomial") {
    // 2 groups of 3, both verdicts
    for (std::uint64_t b1 = 0; b1 < 8; ++b1) {
        for (std::uint64_t b2 = 0; b2 < 8; ++b2) {
            auto g1 = column_from_bits(3, b1, 0);
            auto g2 = column_from_bits(3, b2, 3);
            Quantifier inner = Quantifier::cardinal(CompareOp::GE, 2);
            Quantifier outer = Quantifier::forall();

            auto eval_col = [&](const std::vector<std::pair<std::int64_t, bool>>& g) {
                std::vector<bool> c;
                for (auto [_, v] : g) c.push_back(v);
                return eval_quantifier(inner, c);
            };
            bool v1 = eval_col(g1), v2 = eval_col(g2);
            bool verdict = v1 && v2;

            std::vector<GroupTokens> groups;
            for (auto* g : {&g1, &g2}) {
                AccCapture cap = capture_of(*g);
                bool v = eval_col(*g);
                groups.push_back({v, assemble_simple(inner, cap, v)});
            }
            auto tokens = assemble_nested(outer, groups, verdict, 2.0);
            auto poly = brute_polynomial_nested(outer, inner, {g1, g2}, !verdict);
            CAPTURE(b1, b2, verdict);
            REQUIRE(check_minimal(tokens, poly));
        }
    }
}

TEST_CASE("ordinal pairwise provenance matches its polynomial") {
    // 3 groups of 3 rows each, proportion aggregate, every boolean fill
    for (std::uint64_t b1 = 0; b1 < 8; ++b1) {
        for (std::uint64_t b2 = 0; b2 < 8; ++b2) {
            for (std::uint64_t b3 = 0; b3 < 8; ++b3) {
                auto g1 = column_from_bits(3, b1, 0);
                auto g2 = column_from_bits(3, b2, 3);
                auto g3 = column_from_bits(3, b3, 6);
                std::vector<OrdinalGroupCapture> groups;
                for (auto* g : {&g1, &g2, &g3}) {
                    OrdinalGroupCapture og;
                    og.cap = capture_of(*g);
                    og.positives = og.cap.positives;
                    og.denominator = static_cast<std::int64_t>(g->size());
                    groups.push_back(std::move(og));
                }
                auto tokens = assemble_ordinal(groups, 0, /*proportion=*/true);
                auto poly = brute_polynomial_ordinal({g1, g2, g3}, 0, /*proportion=*/true);
                CAPTURE(b1, b2, b3);
                REQUIRE(check_minimal(tokens, poly));
            }
        }
    }
}

TEST_CASE("token polarity mirrors the evaluated column") {
    auto col = column_from_bits(6, 0b101100);
    AccCapture cap = capture_of(col);
    for (const auto& t : cap.tokens) {
        bool expect = false;
        for (auto [row, v] : col)
            if (row == t.row_id) expect = v;
        CHECK(t.positive == expect);
    }
}

TEST_CASE("sampled contexts validate against sample-restricted polynomials") {
    // estimation processed only rows 0..3 of a larger relation; a universal
    // claim confirmed by estimation carries the sample's positive tokens
    std::vector<std::pair<std::int64_t, bool>> sample{{0, true}, {1, true}, {2, true}, {3, true}};
    AccCapture cap = capture_of(sample);
    cap.exhausted = false;
    auto tokens = assemble_simple(Quantifier::forall(), cap, true);
    CHECK(tokens.size() == 4);
    auto poly = brute_polynomial(Quantifier::forall(), sample);
    CHECK(check_minimal(tokens, poly));

    // a false existential under estimation: all processed tokens negative
    std::vector<std::pair<std::int64_t, bool>> neg{{0, false}, {1, false}, {2, false}};
    AccCapture ncap = capture_of(neg);
    ncap.exhausted = false;
    auto ntokens = assemble_simple(Quantifier::exists(), ncap, false);
    CHECK(ntokens.size() == 3);
    CHECK(check_minimal(ntokens, brute_polynomial(Quantifier::exists(), neg, /*negated=*/true)));
}
