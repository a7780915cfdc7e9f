#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "veriq/relevance.hpp"

using namespace veriq;

TEST_CASE("keyword_hits counts whole words case-insensitively, once each") {
    CHECK(keyword_hits("Service was RUDE and slow", {"rude", "slow", "wait"}) == 2);
    CHECK(keyword_hits("rudeness", {"rude"}) == 0);
    CHECK(keyword_hits("anything", {}) == 0);
    CHECK(keyword_hits("rude rude rude", {"rude"}) == 1);
    CHECK(keyword_hits("the wait was long", {"wait was long"}) == 1);
}

TEST_CASE("rrf uses the standard constant") {
    double s = rrf_score({1, 2, 3});
    CHECK(s == Catch::Approx(1.0 / 61 + 1.0 / 62 + 1.0 / 63).margin(1e-12));
}

namespace {

struct MiniRow {
    std::int64_t id;
    std::string text;
    Embedding emb;
};

std::vector<MiniRow> make_rows(const std::vector<std::string>& texts) {
    FeatureHashEmbedder emb;
    std::vector<MiniRow> rows;
    for (size_t i = 0; i < texts.size(); ++i)
        rows.push_back({static_cast<std::int64_t>(i), texts[i], emb.embed(texts[i])});
    return rows;
}

std::vector<size_t> order_of(const std::vector<MiniRow>& rows, const SearchSpec& spec) {
    return relevance_order(
        rows.size(), spec, [&](size_t i) -> const std::string& { return rows[i].text; },
        [&](size_t i) -> const Embedding& { return rows[i].emb; },
        [&](size_t i) { return rows[i].id; });
}

}  // namespace

TEST_CASE("relevance order surfaces the matching row first") {
    FeatureHashEmbedder emb;
    auto rows = make_rows({
        "the parking lot was big",
        "staff was rude and slow to help",
        "lovely patio seating",
        "friendly and quick service",
    });
    SearchSpec spec;
    spec.query = "poor service complaints rude slow";
    spec.query_embedding = emb.embed(spec.query);
    spec.inclusion_keywords = {"rude", "slow", "wait"};
    spec.exclusion_keywords = {"friendly", "quick"};
    auto order = order_of(rows, spec);
    CHECK(order[0] == 1);
    CHECK(order[3] == 3);  // the praising row carries exclusion keywords
}

TEST_CASE("relevance order is a deterministic permutation") {
    auto rows = make_rows({"aa bb", "cc dd", "aa bb", "ee ff", "gg hh"});
    FeatureHashEmbedder emb;
    SearchSpec spec;
    spec.query = "aa";
    spec.query_embedding = emb.embed(spec.query);
    auto o1 = order_of(rows, spec);
    auto o2 = order_of(rows, spec);
    CHECK(o1 == o2);
    std::vector<size_t> sorted = o1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<size_t>{0, 1, 2, 3, 4});
    // identical rows keep ascending row_id order
    size_t pos0 = std::find(o1.begin(), o1.end(), size_t{0}) - o1.begin();
    size_t pos2 = std::find(o1.begin(), o1.end(), size_t{2}) - o1.begin();
    CHECK(pos0 < pos2);
}

TEST_CASE("similarity prefilter keeps by max sentence cosine") {
    FeatureHashEmbedder emb;
    TupleRow row;
    row.sentences = {"the burger was cold", "parking was easy"};
    for (const auto& s : row.sentences) row.sentence_embeddings.push_back(emb.embed(s));

    SearchSpec spec;
    spec.query = "cold food burger complaints";
    spec.query_embedding = emb.embed(spec.query);
    double sim = -2.0;
    for (const auto& se : row.sentence_embeddings)
        sim = std::max(sim, cosine(spec.query_embedding, se));

    CHECK(similarity_keep(row, spec, sim - 0.01));
    CHECK_FALSE(similarity_keep(row, spec, sim + 0.01));

    // tau = -1 keeps everything
    CHECK(similarity_keep(row, spec, -1.0));

    TupleRow empty_row;  // no sentences: conservatively kept
    CHECK(similarity_keep(empty_row, spec, 0.9));
}
