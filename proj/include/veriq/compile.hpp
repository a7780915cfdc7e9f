#pragma once

#include <string>
#include <vector>

#include "veriq/claims.hpp"
#include "veriq/parse.hpp"

namespace veriq {

namespace prompts {

inline constexpr const char* kCompileTemplate =
    "Translate the natural-language claim into a verification query program.\n"
    "Claim: {claim}\n"
    "Original aggregation prompt: {agg_prompt}\n"
    "Dataset schema: {schema}\n"
    "Quantity hints: {hints}\n"
    "Language documentation:\n{docs}\n"
    "Reply with only the program.";

inline constexpr const char* kCompileRetryTemplate =
    "The previous program failed to parse or type-check.\n"
    "Claim: {claim}\n"
    "Previous program:\n{previous}\n"
    "Error: {error}\n"
    "Dataset schema: {schema}\n"
    "Language documentation:\n{docs}\n"
    "Reply with only the corrected program.";

}  // namespace prompts

// Language documentation handed to the compiling model. The worked examples
// use a separate domain (movie reviews) from the datasets under test.
inline const char* dsl_documentation() {
    return R"(A verification query is a chain of operators over the input relation `df`:
  df.filter(predicate)    keep tuples satisfying a boolean expression
    .map(expr.alias("name"))   add a derived attribute
    .aggregate([fn(expr).alias("name")], group_by=[col("attr")])   reduce tuples
    .with_rank(col("name"))    dense rank per group row, descending by default
    .check(predicate)          terminal verdict test
Aggregation functions: bool_or(expr), bool_and(expr), count_if(expr), proportion(expr).
Expressions: col("attr"), literals, comparisons (>=, >, <=, <, ==, !=), and/or/not,
prompt("template with {attr} placeholders", bool|int|real|enum(L1, L2)).

Examples (movie reviews with attributes text, movie_id):
1. "Some reviewers call the plot predictable":
df.map(prompt("Identify whether the {text} calls the plot predictable", bool).alias("predictable"))
.aggregate([bool_or(col("predictable")).alias("found")])
.check(col("found"))
2. "Every movie has at least 2 reviews praising the soundtrack":
df.map(prompt("Identify whether the {text} praises the soundtrack", bool).alias("praises"))
.aggregate([count_if(col("praises")).alias("n")], group_by=[col("movie_id")])
.aggregate([bool_and(col("n") >= 2).alias("all_have")])
.check(col("all_have"))
3. "The movie with the most positive reviews is M1":
df.filter(prompt("The {text} expresses an overall opinion of the movie", bool))
.map(prompt("Identify whether the {text} is positive about the movie", bool).alias("positive"))
.aggregate([proportion(col("positive")).alias("pos_prop")], group_by=[col("movie_id")])
.with_rank(col("pos_prop"))
.filter(col("movie_id") == "M1")
.check(col("rank") == 1)
)";
}

inline std::string schema_description(const Schema& schema) {
    std::string out;
    for (const auto& a : schema.attrs) {
        if (!out.empty()) out += "; ";
        out += a.name;
        out += " (";
        out += attr_type_name(a.type);
        if (!a.description.empty()) out += ": " + a.description;
        out += ")";
    }
    return out;
}

struct CompileError : Error {
    explicit CompileError(const std::string& what, std::vector<std::string> attempts_in)
        : Error(what), attempts(std::move(attempts_in)) {}
    std::vector<std::string> attempts;
};

// Prompts the oracle to translate a claim into a query program, re-prompting
// up to three times with the parse or type error appended. Throws
// CompileError carrying every attempted program after the third failure.
inline PlanPtr compile_claim(const std::string& claim_text, const std::string& agg_prompt,
                             const Schema& schema, Oracle& oracle, const std::string& model,
                             const VagueQuantityHints& hints = {}) {
    std::vector<std::string> attempts;
    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
        OracleRequest req;
        if (attempt == 0) {
            req = make_completion_request(model, prompts::kCompileTemplate,
                                          {{"claim", claim_text},
                                           {"agg_prompt", agg_prompt},
                                           {"schema", schema_description(schema)},
                                           {"hints", hints.render()},
                                           {"docs", dsl_documentation()}});
        } else {
            req = make_completion_request(model, prompts::kCompileRetryTemplate,
                                          {{"claim", claim_text},
                                           {"previous", attempts.back()},
                                           {"error", last_error},
                                           {"schema", schema_description(schema)},
                                           {"docs", dsl_documentation()}});
        }
        std::string program = trim(oracle.evaluate_one(req).raw);
        attempts.push_back(program);
        try {
            return parse(program, schema);
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    std::string msg = "compile_claim: no valid program after 3 attempts for claim: " + claim_text +
                      " (last error: " + last_error + ")";
    throw CompileError(msg, std::move(attempts));
}

}  // namespace veriq
