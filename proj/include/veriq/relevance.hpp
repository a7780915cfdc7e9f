#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "veriq/embed.hpp"
#include "veriq/relation.hpp"
#include "veriq/text.hpp"

namespace veriq {

// Search context built by the optimizer for relevance sorting and similarity
// pre-filtering.
struct SearchSpec {
    std::string query;
    Embedding query_embedding;
    std::vector<std::string> inclusion_keywords;  // lower-cased, deduplicated
    std::vector<std::string> exclusion_keywords;
};

inline std::vector<std::string> normalize_keywords(std::vector<std::string> words) {
    std::vector<std::string> out;
    for (auto& w : words) {
        std::string lw = to_lower(trim(w));
        if (lw.empty()) continue;
        if (std::find(out.begin(), out.end(), lw) == out.end()) out.push_back(std::move(lw));
    }
    return out;
}

// Case-insensitive whole-word keyword hits; each keyword counts at most once.
inline int keyword_hits(std::string_view text, const std::vector<std::string>& keywords) {
    int n = 0;
    for (const auto& k : keywords)
        if (contains_whole_word(text, k)) ++n;
    return n;
}

inline constexpr double kRrfConstant = 60.0;

inline double rrf_score(const std::vector<int>& ranks) {
    double s = 0.0;
    for (int r : ranks) s += 1.0 / (kRrfConstant + static_cast<double>(r));
    return s;
}

// Reorders row indices by fused relevance. Three signals rank every row
// (descending embedding cosine, descending inclusion-keyword hits, descending
// exclusion-keyword misses), ties broken by ascending row id; the fused score
// is the reciprocal-rank sum and the output is sorted by descending score,
// ties again by ascending row id. `text_of`/`embedding_of` supply the scored
// text attribute and document embedding per row.
template <typename TextOf, typename EmbeddingOf, typename RowIdOf>
std::vector<size_t> relevance_order(size_t n, const SearchSpec& spec, TextOf&& text_of,
                                    EmbeddingOf&& embedding_of, RowIdOf&& row_id_of) {
    std::vector<double> cos_sig(n), inc_sig(n), exc_sig(n);
    for (size_t i = 0; i < n; ++i) {
        cos_sig[i] = cosine(spec.query_embedding, embedding_of(i));
        const std::string& text = text_of(i);
        inc_sig[i] = keyword_hits(text, spec.inclusion_keywords);
        exc_sig[i] = static_cast<double>(spec.exclusion_keywords.size()) -
                     keyword_hits(text, spec.exclusion_keywords);
    }

    auto ranks_for = [&](const std::vector<double>& sig) {
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            if (sig[a] != sig[b]) return sig[a] > sig[b];
            return row_id_of(a) < row_id_of(b);
        });
        std::vector<int> rank(n);
        for (size_t pos = 0; pos < n; ++pos) rank[idx[pos]] = static_cast<int>(pos) + 1;
        return rank;
    };

    auto r1 = ranks_for(cos_sig), r2 = ranks_for(inc_sig), r3 = ranks_for(exc_sig);
    std::vector<double> fused(n);
    for (size_t i = 0; i < n; ++i) fused[i] = rrf_score({r1[i], r2[i], r3[i]});

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (fused[a] != fused[b]) return fused[a] > fused[b];
        return row_id_of(a) < row_id_of(b);
    });
    return order;
}

// Keep a row iff any of its sentence embeddings clears the similarity
// threshold against the query embedding. Rows with no sentences are kept:
// dropping unembeddable rows could silently change verdicts.
inline bool similarity_keep(const TupleRow& row, const SearchSpec& spec, double tau) {
    if (row.sentence_embeddings.empty()) return true;
    double best = -2.0;
    for (const auto& se : row.sentence_embeddings)
        best = std::max(best, cosine(spec.query_embedding, se));
    return best >= tau;
}

}  // namespace veriq
