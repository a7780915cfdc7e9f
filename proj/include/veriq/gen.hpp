#pragma once

#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "veriq/compile.hpp"
#include "veriq/optimizer.hpp"
#include "veriq/relation.hpp"

namespace veriq::gen {

// A synthetic review phenomenon: sentences the generator can plant in a
// review, the keyword rule that detects them, and retrieval wording.
struct Phenomenon {
    std::string id;
    std::vector<std::string> sentences;
    std::vector<std::string> keywords;
    std::string query;
    std::string mention_template;  // bool prompt template detecting it
};

inline const std::vector<Phenomenon>& phenomena() {
    static const std::vector<Phenomenon> table = {
        {"service_complaint",
         {"The staff was rude to us.", "Service was painfully slow.",
          "The waiter was dismissive the whole evening."},
         {"rude", "slow", "dismissive"},
         "complaints about rude or slow service staff",
         "Identify whether the {text} complains about rude or slow service"},
        {"service_praise",
         {"The service was friendly and quick.", "Staff went above and beyond for our table.",
          "Our server was attentive all night."},
         {"friendly", "quick", "above and beyond", "attentive"},
         "praise for friendly quick attentive service staff",
         "Identify whether the {text} praises the service"},
        {"cold_food",
         {"The fries arrived cold.", "My burger was cold in the middle."},
         {"cold"},
         "reports of cold food fries burger",
         "Identify whether the {text} reports cold food"},
        {"incorrect_order",
         {"They got my order wrong again.", "The order was missing my drink."},
         {"order wrong", "missing"},
         "reports of an incorrect or wrong order missing items",
         "Identify whether the {text} reports an incorrect order"},
        {"vegan",
         {"The vegan burger here is excellent.", "Plenty of vegan choices on the menu."},
         {"vegan"},
         "mentions of vegan options vegan burger menu",
         "Identify whether the {text} mentions vegan options"},
        {"chicken_salad",
         {"The chicken salad is fantastic.", "I keep coming back for the chicken salad."},
         {"chicken salad"},
         "praise for the chicken salad",
         "Identify whether the {text} mentions the chicken salad"},
        {"cash_only",
         {"Annoyingly the place is cash only.", "Bring cash because cards are not accepted."},
         {"cash only", "cards are not accepted"},
         "complaints about a cash only payment policy",
         "Identify whether the {text} complains about a cash-only policy"},
        {"prices_reasonable",
         {"Prices are very reasonable for the portions.", "Great value, fair prices overall."},
         {"reasonable", "fair prices", "value"},
         "opinions that prices are reasonable and fair value",
         "Identify whether the {text} says prices are reasonable"},
        {"live_music",
         {"The live band was a nice surprise.", "Catch the live band on weekends."},
         {"live band"},
         "mentions of a live band or live music",
         "Identify whether the {text} mentions live music"},
        {"bacon_fries",
         {"The bacon fries are outstanding."},
         {"bacon fries"},
         "praise for the bacon fries dish",
         "Identify whether the {text} praises the bacon fries"},
        {"valet",
         {"The valet scratched our car."},
         {"valet"},
         "mentions of valet parking",
         "Identify whether the {text} mentions valet parking"},
    };
    return table;
}

inline const Phenomenon& phenomenon(const std::string& id) {
    for (const auto& p : phenomena())
        if (p.id == id) return p;
    throw Error("generator: unknown phenomenon " + id);
}

inline const std::vector<std::string>& filler_sentences() {
    static const std::vector<std::string> fillers = {
        "Parking nearby took a few minutes.",
        "The patio looks over the street.",
        "We came on a weekday around noon.",
        "The menu covers a bit of everything.",
        "Portions run on the larger side.",
        "The room gets loud when it fills up.",
        "Decor leans rustic with wood tables.",
        "I heard about this spot from a coworker.",
    };
    return fillers;
}

inline constexpr const char* kServiceFilterTemplate =
    "The {text} mentions the service at the restaurant";
inline constexpr const char* kNotVeganTemplate =
    "Identify whether the {text} avoids mentioning any vegan options";
inline constexpr const char* kNotValetTemplate =
    "Identify whether the {text} avoids mentioning valet parking";
inline constexpr const char* kNoColdTemplate =
    "Identify whether the {text} is free of cold food reports";
inline constexpr const char* kNoComplaintTemplate =
    "Identify whether the {text} is free of rude or slow service complaints";

struct BenchClaim {
    std::string id;
    std::string text;
    std::string program;
    bool grounded = false;
};

struct SyntheticBench {
    Schema schema;
    std::vector<std::string> dataset_lines;
    Relation relation;
    std::shared_ptr<ScriptedBackend> backend;
    std::vector<BenchClaim> claims;
};

struct GenOptions {
    std::uint64_t seed = 20260811;
    int businesses = 6;
    int reviews_per_business = 40;
};

namespace detail {

struct RowPlan {
    std::string business;
    std::vector<std::string> sentences;
    std::set<std::string> placed;  // phenomenon ids
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    size_t pick(size_t n) { return static_cast<size_t>(gen_() % std::max<size_t>(1, n)); }
    std::mt19937_64& raw() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Plants `count` occurrences of a phenomenon in distinct rows of a business.
inline void plant(std::vector<RowPlan>& rows, const std::vector<size_t>& biz_rows,
                  const std::string& phen, std::int64_t count, Rng& rng) {
    std::vector<size_t> candidates;
    for (size_t idx : biz_rows)
        if (!rows[idx].placed.count(phen)) candidates.push_back(idx);
    const auto& p = phenomenon(phen);
    for (std::int64_t c = 0; c < count && !candidates.empty(); ++c) {
        size_t pick = rng.pick(candidates.size());
        size_t row = candidates[pick];
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        rows[row].placed.insert(phen);
        rows[row].sentences.push_back(p.sentences[rows[row].placed.size() % p.sentences.size()]);
    }
}

inline ScriptedRule bool_rule(const std::vector<std::string>& keywords, bool negate = false) {
    ScriptedRule r;
    r.kind = ScriptedRule::Kind::Bool;
    r.field = "text";
    r.any_of = keywords;
    r.negate = negate;
    return r;
}

inline nlohmann::json spec_json(const std::string& query, std::vector<std::string> inclusion,
                                std::vector<std::string> exclusion) {
    return {{"query", query},
            {"inclusion_keywords", inclusion},
            {"exclusion_keywords", exclusion}};
}

}  // namespace detail

// Deterministic review-like benchmark: planted phenomena at controlled
// per-business counts, a scripted rule table covering every prompt the
// claims' programs use, retrieval fixtures for the optimizer, and a claim
// grid over all six claim types with a balanced grounded/ungrounded split.
inline SyntheticBench generate_bench(const GenOptions& opt, const Embedder& embedder) {
    detail::Rng rng(opt.seed);
    const int B = opt.businesses;
    const int R = opt.reviews_per_business;

    SyntheticBench bench;
    bench.schema.relation_name = "reviews";
    bench.schema.attrs = {{"text", AttrType::Text, "full review text"},
                          {"business_id", AttrType::Categorical, "restaurant location id"}};

    // rows and planted phenomena
    std::vector<detail::RowPlan> rows(static_cast<size_t>(B) * R);
    std::vector<std::vector<size_t>> biz_rows(B);
    for (int b = 0; b < B; ++b) {
        for (int r = 0; r < R; ++r) {
            size_t idx = static_cast<size_t>(b) * R + r;
            rows[idx].business = "b" + std::to_string(b);
            const auto& fills = filler_sentences();
            size_t f1 = rng.pick(fills.size());
            size_t f2 = (f1 + 1 + rng.pick(fills.size() - 1)) % fills.size();
            rows[idx].sentences = {fills[f1], fills[f2]};
            biz_rows[b].push_back(idx);
        }
    }

    auto count_of = [&](int b) { return static_cast<std::int64_t>(biz_rows[b].size()); };
    for (int b = 0; b < B; ++b) {
        detail::plant(rows, biz_rows[b], "service_complaint", count_of(b) / 4, rng);
        detail::plant(rows, biz_rows[b], "incorrect_order", 2 + static_cast<std::int64_t>(rng.pick(3)), rng);
        detail::plant(rows, biz_rows[b], "cold_food", b == 0 ? 0 : count_of(b) / 3, rng);
        detail::plant(rows, biz_rows[b], "cash_only", (count_of(b) + 4) / 5, rng);
        detail::plant(rows, biz_rows[b], "prices_reasonable", (count_of(b) * 7 + 9) / 10, rng);
        // praise declines across businesses so service rankings spread out
        std::int64_t praise = std::max<std::int64_t>(1, count_of(b) * (8 - b) / 12);
        detail::plant(rows, biz_rows[b], "service_praise", praise, rng);
    }
    detail::plant(rows, biz_rows[0], "vegan", 5, rng);
    detail::plant(rows, biz_rows[std::min(1, B - 1)], "vegan", 3, rng);
    detail::plant(rows, biz_rows[std::min(2, B - 1)], "chicken_salad", 3, rng);
    detail::plant(rows, biz_rows[std::min(1, B - 1)], "live_music", 2, rng);

    // dataset lines + relation
    for (const auto& row : rows) {
        std::string text;
        for (const auto& s : row.sentences) {
            if (!text.empty()) text += " ";
            text += s;
        }
        nlohmann::json j = {{"text", text}, {"business_id", row.business}};
        bench.dataset_lines.push_back(j.dump());
    }
    {
        std::string all;
        for (const auto& l : bench.dataset_lines) all += l + "\n";
        std::istringstream in(all);
        bench.relation = ingest(in, bench.schema, embedder);
    }

    // scripted rule table
    auto backend = std::make_shared<ScriptedBackend>();
    for (const auto& p : phenomena())
        backend->add_rule(p.mention_template, detail::bool_rule(p.keywords));
    backend->add_rule(kNotVeganTemplate, detail::bool_rule(phenomenon("vegan").keywords, true));
    backend->add_rule(kNotValetTemplate, detail::bool_rule(phenomenon("valet").keywords, true));
    backend->add_rule(kNoColdTemplate, detail::bool_rule(phenomenon("cold_food").keywords, true));
    backend->add_rule(kNoComplaintTemplate,
                      detail::bool_rule(phenomenon("service_complaint").keywords, true));
    {
        std::vector<std::string> service_kw = phenomenon("service_complaint").keywords;
        for (const auto& k : phenomenon("service_praise").keywords) service_kw.push_back(k);
        backend->add_rule(kServiceFilterTemplate, detail::bool_rule(service_kw));
    }

    // ---- truth helpers over the planted data ----
    auto total = [&](const std::string& phen) {
        std::int64_t n = 0;
        for (const auto& r : rows) n += r.placed.count(phen) ? 1 : 0;
        return n;
    };
    auto per_biz = [&](const std::string& phen, int b) {
        std::int64_t n = 0;
        for (size_t idx : biz_rows[b]) n += rows[idx].placed.count(phen) ? 1 : 0;
        return n;
    };
    std::int64_t n_rows = static_cast<std::int64_t>(rows.size());

    // ---- claim grid ----
    auto add_claim = [&](std::string id, std::string text, std::string program, bool grounded) {
        bench.claims.push_back({std::move(id), std::move(text), std::move(program), grounded});
    };
    auto map_agg_program = [&](const std::string& tmpl, const std::string& agg,
                               const std::string& check) {
        return "df\n.map(prompt(" + escape_string(tmpl) + ", bool).alias(\"hit\"))\n.aggregate([" +
               agg + "(col(\"hit\")).alias(\"out\")])\n.check(" + check + ")";
    };

    // existential
    add_claim("C1", "Some reviews mention vegan options.",
              map_agg_program(phenomenon("vegan").mention_template, "bool_or", "col(\"out\")"),
              total("vegan") >= 1);
    add_claim("C2", "Some reviewers praise the bacon fries.",
              map_agg_program(phenomenon("bacon_fries").mention_template, "bool_or",
                              "col(\"out\")"),
              total("bacon_fries") >= 1);
    // universal
    add_claim("C3", "No review mentions valet parking.",
              map_agg_program(kNotValetTemplate, "bool_and", "col(\"out\")"),
              total("valet") == 0);
    add_claim("C4", "No review mentions any vegan options.",
              map_agg_program(kNotVeganTemplate, "bool_and", "col(\"out\")"),
              total("vegan") == 0);
    // cardinal, small at-least thresholds
    add_claim("C5", "At least 2 reviews mention vegan options.",
              map_agg_program(phenomenon("vegan").mention_template, "count_if",
                              "col(\"out\") >= 2"),
              total("vegan") >= 2);
    add_claim("C6", "At least 3 reviews mention live music.",
              map_agg_program(phenomenon("live_music").mention_template, "count_if",
                              "col(\"out\") >= 3"),
              total("live_music") >= 3);
    // cardinal, larger thresholds
    {
        std::int64_t c = total("service_complaint");
        std::int64_t k_true = std::max<std::int64_t>(1, c - 5);
        std::int64_t k_false = c + 5;
        add_claim("C7",
                  "At least " + std::to_string(k_true) + " customers complained about service.",
                  map_agg_program(phenomenon("service_complaint").mention_template, "count_if",
                                  "col(\"out\") >= " + std::to_string(k_true)),
                  c >= k_true);
        add_claim("C8",
                  "At least " + std::to_string(k_false) + " customers complained about service.",
                  map_agg_program(phenomenon("service_complaint").mention_template, "count_if",
                                  "col(\"out\") >= " + std::to_string(k_false)),
                  c >= k_false);
    }
    add_claim("C9", "Less than a handful of reviews mention live music.",
              map_agg_program(phenomenon("live_music").mention_template, "count_if",
                              "col(\"out\") < 5"),
              total("live_music") < 5);
    add_claim("C10", "Less than a handful of reviews report cold food.",
              map_agg_program(phenomenon("cold_food").mention_template, "count_if",
                              "col(\"out\") < 5"),
              total("cold_food") < 5);
    // cardinal, exact
    {
        std::int64_t c = total("chicken_salad");
        add_claim("C11", "Exactly " + std::to_string(c) + " reviews mention the chicken salad.",
                  map_agg_program(phenomenon("chicken_salad").mention_template, "count_if",
                                  "col(\"out\") == " + std::to_string(c)),
                  true);
        add_claim("C12",
                  "Exactly " + std::to_string(c + 2) + " reviews mention the chicken salad.",
                  map_agg_program(phenomenon("chicken_salad").mention_template, "count_if",
                                  "col(\"out\") == " + std::to_string(c + 2)),
                  false);
    }
    // proportional
    add_claim("C13", "The majority of reviews say prices are reasonable.",
              map_agg_program(phenomenon("prices_reasonable").mention_template, "proportion",
                              "col(\"out\") > 0.5"),
              static_cast<double>(total("prices_reasonable")) / n_rows > 0.5);
    add_claim("C14", "The majority of reviews report cold food.",
              map_agg_program(phenomenon("cold_food").mention_template, "proportion",
                              "col(\"out\") > 0.5"),
              static_cast<double>(total("cold_food")) / n_rows > 0.5);
    add_claim("C15", "Common criticisms include the cash-only policy.",
              map_agg_program(phenomenon("cash_only").mention_template, "proportion",
                              "col(\"out\") >= 0.1"),
              static_cast<double>(total("cash_only")) / n_rows >= 0.1);
    add_claim("C16", "Common criticisms include valet parking problems.",
              map_agg_program(phenomenon("valet").mention_template, "proportion",
                              "col(\"out\") >= 0.1"),
              static_cast<double>(total("valet")) / n_rows >= 0.1);
    // nested: forall / at-least-2
    {
        auto nested_program = [&](const std::string& tmpl) {
            return "df\n.map(prompt(" + escape_string(tmpl) +
                   ", bool).alias(\"hit\"))\n.aggregate([count_if(col(\"hit\")).alias(\"n\")], "
                   "group_by=[col(\"business_id\")])\n.aggregate([bool_and(col(\"n\") >= "
                   "2).alias(\"all_have\")])\n.check(col(\"all_have\"))";
        };
        bool t17 = true, t18 = true;
        for (int b = 0; b < B; ++b) {
            t17 = t17 && per_biz("incorrect_order", b) >= 2;
            t18 = t18 && per_biz("cold_food", b) >= 2;
        }
        add_claim("C17", "All locations have multiple reports of incorrect orders.",
                  nested_program(phenomenon("incorrect_order").mention_template), t17);
        add_claim("C18", "All locations have multiple reports of cold food.",
                  nested_program(phenomenon("cold_food").mention_template), t18);
    }
    // nested: exists / forall
    {
        auto nested_program = [&](const std::string& tmpl) {
            return "df\n.map(prompt(" + escape_string(tmpl) +
                   ", bool).alias(\"clean\"))\n.aggregate([bool_and(col(\"clean\")).alias(\"all_"
                   "clean\")], group_by=[col(\"business_id\")])\n.aggregate([bool_or(col(\"all_"
                   "clean\")).alias(\"some_clean\")])\n.check(col(\"some_clean\"))";
        };
        bool t19 = false, t20 = false;
        for (int b = 0; b < B; ++b) {
            t19 = t19 || per_biz("cold_food", b) == 0;
            t20 = t20 || per_biz("service_complaint", b) == 0;
        }
        add_claim("C19", "Some location has no cold food reports.",
                  nested_program(kNoColdTemplate), t19);
        add_claim("C20", "Some location has no service complaints.",
                  nested_program(kNoComplaintTemplate), t20);
    }
    // ordinal over service praise proportion among service-related reviews
    {
        std::vector<std::pair<double, int>> vals;
        for (int b = 0; b < B; ++b) {
            std::int64_t scope = 0, pos = 0;
            for (size_t idx : biz_rows[b]) {
                bool mentions = rows[idx].placed.count("service_complaint") ||
                                rows[idx].placed.count("service_praise");
                if (!mentions) continue;
                ++scope;
                pos += rows[idx].placed.count("service_praise") ? 1 : 0;
            }
            vals.push_back({scope ? static_cast<double>(pos) / scope : 0.0, b});
        }
        std::vector<double> just_vals;
        for (auto& [v, b] : vals) just_vals.push_back(v);
        std::vector<double> sorted = just_vals;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        auto rank_of = [&](int b) {
            std::int64_t better = 0;
            for (double v : sorted) better += v > just_vals[b] ? 1 : 0;
            return better + 1;
        };
        int top = 0, second = 0;
        for (int b = 0; b < B; ++b) {
            if (rank_of(b) == 1) top = b;
            if (rank_of(b) == 2) second = b;
        }
        auto ordinal_program = [&](int target, int rank) {
            return std::string("df\n.filter(prompt(") + escape_string(kServiceFilterTemplate) +
                   ", bool))\n.map(prompt(" +
                   escape_string(phenomenon("service_praise").mention_template) +
                   ", bool).alias(\"praises\"))\n.aggregate([proportion(col(\"praises\")).alias("
                   "\"praise_prop\")], "
                   "group_by=[col(\"business_id\")])\n.with_rank(col(\"praise_prop\"))\n.filter("
                   "col(\"business_id\") == \"b" +
                   std::to_string(target) + "\")\n.check(col(\"rank\") == " +
                   std::to_string(rank) + ")";
        };
        add_claim("C21",
                  "The top-ranked location in terms of service is b" + std::to_string(top) + ".",
                  ordinal_program(top, 1), rank_of(top) == 1);
        add_claim("C22",
                  "The top-ranked location in terms of service is b" + std::to_string(second) +
                      ".",
                  ordinal_program(second, 1), rank_of(second) == 1);
        add_claim("C23",
                  "The location ranked #2 in terms of service is b" + std::to_string(second) + ".",
                  ordinal_program(second, 2), rank_of(second) == 2);
        add_claim("C24",
                  "The location ranked #2 in terms of service is b" + std::to_string(top) + ".",
                  ordinal_program(top, 2), rank_of(top) == 2);
    }

    // ---- compile + retrieval fixtures ----
    {
        ScriptedRule compile_rule;
        compile_rule.kind = ScriptedRule::Kind::Completion;
        compile_rule.field = "claim";
        for (const auto& c : bench.claims) compile_rule.completions[c.text] = c.program;
        backend->add_rule(prompts::kCompileTemplate, compile_rule);
    }
    {
        ScriptedRule spec_rule;
        spec_rule.kind = ScriptedRule::Kind::Completion;
        spec_rule.field = "context";
        // one retrieval case per phenomenon context, plus negated templates;
        // exact context keys are rebuilt the way the optimizer renders them
        auto add_spec_cases = [&](const std::string& map_tmpl,
                                  const std::vector<std::string>& filters, AggFn fn,
                                  std::optional<Comparison> cmp, const nlohmann::json& spec) {
            SearchContext ctx;
            ctx.map_prompt = map_tmpl;
            ctx.filter_prompts = filters;
            ctx.fn = fn;
            ctx.cmp = cmp;
            spec_rule.completions[ctx.render()] = spec.dump();
        };
        for (const auto& p : phenomena()) {
            nlohmann::json spec = detail::spec_json(p.query, p.keywords, {});
            for (AggFn fn : {AggFn::BoolOr, AggFn::BoolAnd, AggFn::CountIf, AggFn::Proportion}) {
                add_spec_cases(p.mention_template, {}, fn, std::nullopt, spec);
                for (auto op : {CompareOp::GE, CompareOp::GT, CompareOp::LE, CompareOp::LT,
                                CompareOp::EQ, CompareOp::NE})
                    for (std::int64_t k = 0; k <= 8; ++k)
                        add_spec_cases(p.mention_template, {}, fn,
                                       Comparison{op, static_cast<double>(k)}, spec);
            }
        }
        // the service prefilter context (filter template used as map prompt)
        std::vector<std::string> service_kw = phenomenon("service_complaint").keywords;
        for (const auto& k : phenomenon("service_praise").keywords) service_kw.push_back(k);
        add_spec_cases(kServiceFilterTemplate, {}, AggFn::BoolOr, std::nullopt,
                       detail::spec_json(
                           "restaurant service staff waiter server rude slow dismissive "
                           "friendly quick attentive above beyond",
                           service_kw, {}));
        // fallback for any context not pinned above
        spec_rule.completion_default =
            detail::spec_json("restaurant reviews", {}, {}).dump();
        backend->add_rule(prompts::kSearchSpecTemplate, spec_rule);
    }

    bench.backend = std::move(backend);
    return bench;
}

// ---- randomized claim/relation pairs for the equivalence property ----

struct EquivSuite {
    Schema schema;
    Relation relation;
    std::shared_ptr<ScriptedBackend> backend;
    std::vector<std::string> programs;
};

// Random relations (planted phenomenon counts per business, including empty
// scopes) and random supported plans across all claim shapes, quantifiers and
// comparison operators. Shared scripted rules make verdicts deterministic.
inline EquivSuite generate_equiv_suite(std::uint64_t seed, int businesses, int rows_per_business,
                                       int n_programs, const Embedder& embedder) {
    detail::Rng rng(seed);
    EquivSuite suite;
    suite.schema.relation_name = "reviews";
    suite.schema.attrs = {{"text", AttrType::Text, "review text"},
                          {"business_id", AttrType::Categorical, "location id"}};

    std::vector<detail::RowPlan> rows(static_cast<size_t>(businesses) * rows_per_business);
    std::vector<std::vector<size_t>> biz_rows(businesses);
    for (int b = 0; b < businesses; ++b) {
        for (int r = 0; r < rows_per_business; ++r) {
            size_t idx = static_cast<size_t>(b) * rows_per_business + r;
            rows[idx].business = "b" + std::to_string(b);
            const auto& fills = filler_sentences();
            rows[idx].sentences = {fills[rng.pick(fills.size())]};
            biz_rows[b].push_back(idx);
        }
    }
    std::vector<std::string> used = {"service_complaint", "service_praise", "cold_food",
                                     "vegan",             "cash_only",      "live_music"};
    for (int b = 0; b < businesses; ++b) {
        for (const auto& phen : used) {
            // planted counts span empty, sparse and dense regimes
            std::int64_t cap = static_cast<std::int64_t>(biz_rows[b].size());
            std::int64_t count = 0;
            switch (rng.pick(4)) {
                case 0: count = 0; break;
                case 1: count = static_cast<std::int64_t>(rng.pick(2)); break;
                case 2: count = cap / 4 + static_cast<std::int64_t>(rng.pick(3)); break;
                default: count = cap / 2 + static_cast<std::int64_t>(rng.pick(3)); break;
            }
            detail::plant(rows, biz_rows[b], phen, std::min(count, cap), rng);
        }
    }

    std::vector<std::string> lines;
    for (const auto& row : rows) {
        std::string text;
        for (const auto& s : row.sentences) {
            if (!text.empty()) text += " ";
            text += s;
        }
        lines.push_back(nlohmann::json({{"text", text}, {"business_id", row.business}}).dump());
    }
    {
        std::string all;
        for (const auto& l : lines) all += l + "\n";
        std::istringstream in(all);
        suite.relation = ingest(in, suite.schema, embedder);
    }

    auto backend = std::make_shared<ScriptedBackend>();
    for (const auto& p : phenomena())
        backend->add_rule(p.mention_template, detail::bool_rule(p.keywords));
    backend->add_rule(kServiceFilterTemplate, [&] {
        std::vector<std::string> kw = phenomenon("service_complaint").keywords;
        for (const auto& k : phenomenon("service_praise").keywords) kw.push_back(k);
        return detail::bool_rule(kw);
    }());
    {
        ScriptedRule spec_rule;
        spec_rule.kind = ScriptedRule::Kind::Completion;
        spec_rule.field = "context";
        spec_rule.completion_default = detail::spec_json("restaurant reviews", {}, {}).dump();
        backend->add_rule(prompts::kSearchSpecTemplate, spec_rule);
    }
    suite.backend = std::move(backend);

    auto rand_threshold_count = [&](std::int64_t up) {
        return static_cast<double>(rng.pick(static_cast<size_t>(up) + 1));
    };
    const char* ops[] = {">=", ">", "<=", "<", "==", "!="};
    auto rand_phen = [&]() -> const Phenomenon& {
        return phenomenon(used[rng.pick(used.size())]);
    };

    for (int i = 0; i < n_programs; ++i) {
        const Phenomenon& p = rand_phen();
        std::string scope;
        if (rng.pick(3) == 0)
            scope = "\n.filter(col(\"business_id\") == \"b" +
                    std::to_string(rng.pick(static_cast<size_t>(businesses) + 1)) + "\")";
        bool with_sem_filter = rng.pick(3) == 0;
        std::string sem_filter;
        if (with_sem_filter)
            sem_filter = "\n.filter(prompt(" + std::string(escape_string(kServiceFilterTemplate)) +
                         ", bool))";
        std::string mapped = "\n.map(prompt(" + escape_string(p.mention_template) +
                             ", bool).alias(\"hit\"))";
        std::string program;
        switch (rng.pick(3)) {
            case 0: {  // simple
                size_t fn = rng.pick(4);
                if (fn == 0)
                    program = "df" + scope + sem_filter + mapped +
                              "\n.aggregate([bool_or(col(\"hit\")).alias(\"out\")])"
                              "\n.check(col(\"out\"))";
                else if (fn == 1)
                    program = "df" + scope + sem_filter + mapped +
                              "\n.aggregate([bool_and(col(\"hit\")).alias(\"out\")])"
                              "\n.check(col(\"out\"))";
                else if (fn == 2) {
                    std::string op = ops[rng.pick(6)];
                    program = "df" + scope + sem_filter + mapped +
                              "\n.aggregate([count_if(col(\"hit\")).alias(\"out\")])\n.check(col("
                              "\"out\") " +
                              op + " " + std::to_string(static_cast<std::int64_t>(
                                             rand_threshold_count(rows_per_business))) +
                              ")";
                } else {
                    std::string op = ops[rng.pick(6)];
                    double rho = static_cast<double>(rng.pick(5)) / 4.0;
                    std::ostringstream os;
                    os.precision(17);
                    os << rho;
                    std::string rs = os.str();
                    if (rs.find('.') == std::string::npos) rs += ".0";
                    program = "df" + scope + sem_filter + mapped +
                              "\n.aggregate([proportion(col(\"hit\")).alias(\"out\")])\n.check("
                              "col(\"out\") " +
                              op + " " + rs + ")";
                }
                break;
            }
            case 1: {  // nested
                std::string inner_op = ops[rng.pick(6)];
                std::int64_t inner_k = 1 + static_cast<std::int64_t>(rng.pick(3));
                size_t outer = rng.pick(4);
                std::string outer_agg, check;
                if (outer == 0) {
                    outer_agg = "bool_and(col(\"n\") " + inner_op + " " +
                                std::to_string(inner_k) + ").alias(\"out\")";
                    check = "col(\"out\")";
                } else if (outer == 1) {
                    outer_agg = "bool_or(col(\"n\") " + inner_op + " " + std::to_string(inner_k) +
                                ").alias(\"out\")";
                    check = "col(\"out\")";
                } else if (outer == 2) {
                    outer_agg = "count_if(col(\"n\") " + inner_op + " " + std::to_string(inner_k) +
                                ").alias(\"out\")";
                    check = "col(\"out\") >= " + std::to_string(rng.pick(4));
                } else {
                    outer_agg = "proportion(col(\"n\") " + inner_op + " " +
                                std::to_string(inner_k) + ").alias(\"out\")";
                    check = "col(\"out\") > 0.5";
                }
                program = "df" + scope + sem_filter + mapped +
                          "\n.aggregate([count_if(col(\"hit\")).alias(\"n\")], "
                          "group_by=[col(\"business_id\")])\n.aggregate([" +
                          outer_agg + "])\n.check(" + check + ")";
                break;
            }
            default: {  // ordinal
                std::string agg = rng.pick(2) ? "proportion" : "count_if";
                std::string target =
                    "b" + std::to_string(rng.pick(static_cast<size_t>(businesses) + 1));
                std::int64_t rank = 1 + static_cast<std::int64_t>(rng.pick(3));
                program = "df" + scope + sem_filter + mapped + "\n.aggregate([" + agg +
                          "(col(\"hit\")).alias(\"score\")], "
                          "group_by=[col(\"business_id\")])\n.with_rank(col(\"score\"))"
                          "\n.filter(col(\"business_id\") == \"" +
                          target + "\")\n.check(col(\"rank\") == " + std::to_string(rank) + ")";
                break;
            }
        }
        suite.programs.push_back(std::move(program));
    }
    return suite;
}

}  // namespace veriq::gen
