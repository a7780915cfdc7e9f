#pragma once

#include <random>

#include "veriq/plan.hpp"

namespace veriq::testing {

// Grammar-directed random plans over a fixed review schema; used by the
// round-trip property in the unit and acceptance suites.
struct PlanFuzzer {
    std::mt19937_64 gen;
    Schema schema;

    explicit PlanFuzzer(std::uint64_t seed) : gen(seed) {
        schema.relation_name = "reviews";
        schema.attrs = {{"text", AttrType::Text, "review text"},
                        {"business_id", AttrType::Categorical, "location id"},
                        {"stars", AttrType::Real, "star rating"},
                        {"votes", AttrType::Int, "useful votes"},
                        {"verified", AttrType::Bool, "verified purchase"}};
    }

    size_t pick(size_t n) { return static_cast<size_t>(gen() % n); }

    ExprPtr bool_expr(int depth) {
        switch (depth > 0 ? pick(7) : pick(4)) {
            case 0: return make_column("verified");
            case 1:
                return make_prompt("The {text} mentions topic " + std::to_string(pick(50)),
                                   {ReturnType::Bool, {}});
            case 2: {
                auto ops = {CompareOp::GE, CompareOp::GT, CompareOp::LE, CompareOp::LT,
                            CompareOp::EQ, CompareOp::NE};
                CompareOp op = *(ops.begin() + pick(6));
                ExprPtr lhs = make_column(pick(2) ? "stars" : "votes");
                ExprPtr rhs = pick(2) ? make_literal(AttrValue::integer(pick(6)))
                                      : make_literal(AttrValue::real(pick(100) / 10.0));
                return make_compare(lhs, op, rhs);
            }
            case 3:
                return make_compare(make_column("business_id"),
                                    pick(2) ? CompareOp::EQ : CompareOp::NE,
                                    make_literal(AttrValue::text("loc" + std::to_string(pick(5)))));
            case 4: return make_not(bool_expr(depth - 1));
            case 5: {
                std::vector<ExprPtr> kids;
                size_t n = 2 + pick(2);
                for (size_t i = 0; i < n; ++i) kids.push_back(bool_expr(depth - 1));
                return make_and(std::move(kids));
            }
            default: {
                std::vector<ExprPtr> kids;
                size_t n = 2 + pick(2);
                for (size_t i = 0; i < n; ++i) kids.push_back(bool_expr(depth - 1));
                return make_or(std::move(kids));
            }
        }
    }

    PlanPtr plan() {
        PlanPtr p = make_scan();
        size_t pre_ops = pick(3);
        int map_idx = 0;
        for (size_t i = 0; i < pre_ops; ++i) {
            if (pick(2)) {
                p = make_filter(p, bool_expr(2));
            } else {
                p = make_map(p, bool_expr(1), "m" + std::to_string(map_idx++));
            }
        }
        ExprPtr phi = bool_expr(1);
        switch (pick(3)) {
            case 0: {  // simple
                AggFn fn = static_cast<AggFn>(pick(4));
                p = make_aggregate(p, {{fn, phi, "agg_out"}});
                ExprPtr check;
                if (fn == AggFn::BoolOr || fn == AggFn::BoolAnd) {
                    check = make_column("agg_out");
                } else {
                    auto ops = {CompareOp::GE, CompareOp::GT, CompareOp::LE, CompareOp::LT,
                                CompareOp::EQ, CompareOp::NE};
                    CompareOp op = *(ops.begin() + pick(6));
                    ExprPtr lit = fn == AggFn::CountIf
                                      ? make_literal(AttrValue::integer(pick(5)))
                                      : make_literal(AttrValue::real(pick(10) / 10.0));
                    check = make_compare(make_column("agg_out"), op, lit);
                }
                return make_check(p, check);
            }
            case 1: {  // nested
                AggFn inner_fn = static_cast<AggFn>(pick(4));
                p = make_aggregate(p, {{inner_fn, phi, "inner_out"}}, {"business_id"});
                ExprPtr outer_arg;
                if (inner_fn == AggFn::BoolOr || inner_fn == AggFn::BoolAnd) {
                    outer_arg = make_column("inner_out");
                } else {
                    outer_arg = make_compare(
                        make_column("inner_out"), pick(2) ? CompareOp::GE : CompareOp::LT,
                        inner_fn == AggFn::CountIf ? make_literal(AttrValue::integer(1 + pick(4)))
                                                   : make_literal(AttrValue::real(pick(10) / 10.0)));
                }
                AggFn outer_fn = static_cast<AggFn>(pick(4));
                p = make_aggregate(p, {{outer_fn, outer_arg, "outer_out"}});
                ExprPtr check;
                if (outer_fn == AggFn::BoolOr || outer_fn == AggFn::BoolAnd)
                    check = make_column("outer_out");
                else
                    check = make_compare(make_column("outer_out"), CompareOp::GE,
                                         outer_fn == AggFn::CountIf
                                             ? make_literal(AttrValue::integer(pick(4)))
                                             : make_literal(AttrValue::real(pick(10) / 10.0)));
                return make_check(p, check);
            }
            default: {  // ordinal
                AggFn fn = pick(2) ? AggFn::CountIf : AggFn::Proportion;
                p = make_aggregate(p, {{fn, phi, "score"}}, {"business_id"});
                p = make_with_rank(p, make_column("score"), pick(2) == 0);
                p = make_filter(p, make_compare(make_column("business_id"), CompareOp::EQ,
                                                make_literal(AttrValue::text("loc1"))));
                return make_check(p, make_compare(make_column("rank"), CompareOp::EQ,
                                                  make_literal(AttrValue::integer(1 + pick(3)))));
            }
        }
    }
};

}  // namespace veriq::testing
