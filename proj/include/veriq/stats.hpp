#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "veriq/claims.hpp"
#include "veriq/value.hpp"

namespace veriq {

enum class CsKind { Betting, Hoeffding };
enum class CsMode { WithReplacement, WithoutReplacement };

// Anytime-valid confidence sequence over a Bernoulli stream.
//
// The default construction inverts a hedged betting test over the candidate
// grid m in {0, 1/G, ..., 1}: a candidate stays in the interval while its
// average capital (upward and downward bets) is below 1/alpha. Bets use a
// predictable plug-in lambda clipped per candidate so capital stays positive.
// Without-replacement mode bets against the conditional mean of the remaining
// finite population and additionally intersects with the deterministic
// achievable envelope, so the interval collapses once the population is
// consumed.
//
// A closed-form time-uniform Hoeffding-style construction sits behind the
// same interface for cross-checking.
class ConfidenceState {
public:
    static constexpr int kGrid = 1000;

    ConfidenceState() = default;
    ConfidenceState(double alpha_alloc, CsKind kind = CsKind::Betting,
                    CsMode mode = CsMode::WithReplacement,
                    std::optional<std::int64_t> n_total = std::nullopt, double clip = 0.5)
        : alpha_(alpha_alloc), kind_(kind), mode_(mode), n_total_(n_total), clip_(clip) {
        if (mode_ == CsMode::WithoutReplacement && !n_total_)
            throw Error("confidence state: without-replacement mode needs n_total");
    }

    double alpha_alloc() const { return alpha_; }
    std::int64_t observations() const { return s_; }
    std::int64_t sum() const { return sum_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    CsMode mode() const { return mode_; }
    std::optional<std::int64_t> n_total() const { return n_total_; }

    bool finalized() const {
        return mode_ == CsMode::WithoutReplacement && n_total_ && s_ >= *n_total_;
    }

    // Fixture constructor for stopping-rule tests: a state with a pinned
    // interval, bypassing the capital processes.
    static ConfidenceState for_testing(double alpha_alloc, double lower, double upper,
                                       std::int64_t s, std::int64_t sum,
                                       std::optional<std::int64_t> n_total = std::nullopt) {
        ConfidenceState cs(alpha_alloc);
        cs.n_total_ = n_total;
        cs.lower_ = lower;
        cs.upper_ = upper;
        cs.s_ = s;
        cs.sum_ = sum;
        return cs;
    }

    void update(bool x) {
        if (finalized()) throw Error("confidence state: update after population exhausted");
        ++s_;
        if (kind_ == CsKind::Betting) {
            betting_update(x);
        } else {
            hoeffding_update(x);
        }
        sum_ += x ? 1 : 0;
        if (mode_ == CsMode::WithoutReplacement) intersect_envelope();
        if (lower_ > upper_) lower_ = upper_;  // degenerate guard, keeps L <= U
    }

private:
    void ensure_grid() {
        if (!log_cap_plus_.empty()) return;
        log_cap_plus_.assign(kGrid + 1, 0.0);
        log_cap_minus_.assign(kGrid + 1, 0.0);
        lo_ = 0;
        hi_ = kGrid;
        if (mode_ == CsMode::WithReplacement) {
            // with-replacement candidates are fixed at m = j/G, so the clipped
            // bet contributions are the same at every step; precompute them
            const double inf = std::numeric_limits<double>::infinity();
            clip_over_m_.resize(kGrid + 1);
            clip_over_1m_.resize(kGrid + 1);
            clip_plus_x1_.resize(kGrid + 1);
            clip_plus_x0_.resize(kGrid + 1);
            clip_minus_x1_.resize(kGrid + 1);
            clip_minus_x0_.resize(kGrid + 1);
            for (int j = 0; j <= kGrid; ++j) {
                double m = static_cast<double>(j) / kGrid;
                clip_over_m_[j] = m > 0.0 ? clip_ / m : inf;
                clip_over_1m_[j] = m < 1.0 ? clip_ / (1.0 - m) : inf;
                clip_plus_x1_[j] = j > 0 ? std::log1p(clip_over_m_[j] * (1.0 - m)) : 0.0;
                clip_plus_x0_[j] = j > 0 ? std::log1p(-(clip_over_m_[j] * m)) : 0.0;
                clip_minus_x1_[j] = j < kGrid ? std::log1p(-(clip_over_1m_[j] * (1.0 - m))) : 0.0;
                clip_minus_x0_[j] = j < kGrid ? std::log1p(clip_over_1m_[j] * m) : 0.0;
            }
        }
    }

    // Predictable plug-in bet magnitude; depends only on history.
    double next_lambda() const {
        double t = static_cast<double>(s_);  // s_ already incremented: this is step index >= 1
        double sigma2 = (0.25 + sq_dev_sum_) / t;
        double lam = std::sqrt(2.0 * std::log(2.0 / alpha_) / (sigma2 * t * std::log(t + 1.0)));
        return lam;
    }

    void betting_update(bool xb) {
        ensure_grid();
        double x = xb ? 1.0 : 0.0;
        double lam = next_lambda();
        double log_thresh = std::log(1.0 / alpha_);
        double prev_n = static_cast<double>(s_ - 1);
        double mu_hat_prev = (0.5 + static_cast<double>(sum_)) / (prev_n + 1.0);
        sq_dev_sum_ += (x - mu_hat_prev) * (x - mu_hat_prev);

        const double inf = std::numeric_limits<double>::infinity();
        if (mode_ == CsMode::WithoutReplacement) {
            for (int j = lo_; j <= hi_; ++j) {
                if (log_cap_plus_[j] == inf || log_cap_minus_[j] == inf) continue;
                // Conditional mean of the next draw under the hypothesis that
                // the finite-population mean is j/G.
                double N = static_cast<double>(*n_total_);
                double S_prev = static_cast<double>(sum_);
                double rem = N - prev_n;
                double m = (N * (static_cast<double>(j) / kGrid) - S_prev) / rem;
                if (m < -1e-12 || m > 1.0 + 1e-12) {
                    log_cap_plus_[j] = inf;  // hypothesis infeasible given the prefix
                    continue;
                }
                m = std::clamp(m, 0.0, 1.0);
                if (m <= 1e-12) {
                    if (xb) log_cap_plus_[j] = inf;
                    continue;
                }
                if (m >= 1.0 - 1e-12) {
                    if (!xb) log_cap_plus_[j] = inf;
                    continue;
                }
                double lam_plus = std::min(lam, clip_ / m);
                double lam_minus = std::min(lam, clip_ / (1.0 - m));
                log_cap_plus_[j] += std::log1p(lam_plus * (x - m));
                log_cap_minus_[j] += std::log1p(-lam_minus * (x - m));
            }
        } else if (xb) {
            // clipped contributions come from the precomputed tables; the
            // branch reproduces min(lam, c/m) selection exactly
            for (int j = lo_; j <= hi_; ++j) {
                double m = static_cast<double>(j) / kGrid;
                log_cap_plus_[j] += clip_over_m_[j] < lam
                                        ? clip_plus_x1_[j]
                                        : std::log1p(lam * (1.0 - m));
                log_cap_minus_[j] += clip_over_1m_[j] < lam
                                         ? clip_minus_x1_[j]
                                         : std::log1p(-(lam * (1.0 - m)));
            }
        } else {
            for (int j = lo_; j <= hi_; ++j) {
                double m = static_cast<double>(j) / kGrid;
                log_cap_plus_[j] += clip_over_m_[j] < lam ? clip_plus_x0_[j]
                                                          : std::log1p(-(lam * m));
                log_cap_minus_[j] +=
                    clip_over_1m_[j] < lam ? clip_minus_x0_[j] : std::log1p(lam * m);
            }
        }

        auto excluded = [&](int j) {
            double a = log_cap_plus_[j];
            double b = log_cap_minus_[j];
            if (a == inf || b == inf) return true;
            double hi_v = std::max(a, b), lo_v = std::min(a, b);
            // log(0.5*(e^a + e^b))
            double log_avg = hi_v + std::log1p(std::exp(lo_v - hi_v)) - std::log(2.0);
            return log_avg >= log_thresh;
        };
        while (lo_ < hi_ && excluded(lo_)) ++lo_;
        while (hi_ > lo_ && excluded(hi_)) --hi_;
        lower_ = std::max(lower_, static_cast<double>(lo_) / kGrid);
        upper_ = std::min(upper_, static_cast<double>(hi_) / kGrid);
    }

    void hoeffding_update(bool xb) {
        double x = xb ? 1.0 : 0.0;
        double t = static_cast<double>(s_);
        double lam = std::min(std::sqrt(8.0 * std::log(2.0 / alpha_) / (t * std::log(t + 1.0))), 1.0);
        lam_sum_ += lam;
        lam_x_sum_ += lam * x;
        lam_sq_sum_ += lam * lam;
        double center = lam_x_sum_ / lam_sum_;
        double margin = (std::log(2.0 / alpha_) + lam_sq_sum_ / 8.0) / lam_sum_;
        lower_ = std::max(lower_, std::max(0.0, center - margin));
        upper_ = std::min(upper_, std::min(1.0, center + margin));
    }

    // Deterministic bounds on the achievable population mean given the prefix.
    void intersect_envelope() {
        double N = static_cast<double>(*n_total_);
        double lo = static_cast<double>(sum_) / N;
        double hi = (static_cast<double>(sum_) + (N - static_cast<double>(s_))) / N;
        lower_ = std::max(lower_, lo);
        upper_ = std::min(upper_, hi);
    }

    double alpha_ = 0.05;
    CsKind kind_ = CsKind::Betting;
    CsMode mode_ = CsMode::WithReplacement;
    std::optional<std::int64_t> n_total_;
    double clip_ = 0.5;

    std::int64_t s_ = 0;
    std::int64_t sum_ = 0;
    double lower_ = 0.0;
    double upper_ = 1.0;

    std::vector<double> log_cap_plus_, log_cap_minus_;
    std::vector<double> clip_over_m_, clip_over_1m_;
    std::vector<double> clip_plus_x1_, clip_plus_x0_, clip_minus_x1_, clip_minus_x0_;
    int lo_ = 0, hi_ = kGrid;
    double sq_dev_sum_ = 0.0;

    double lam_sum_ = 0.0, lam_x_sum_ = 0.0, lam_sq_sum_ = 0.0;
};

inline void cs_update(ConfidenceState& state, bool x) { state.update(x); }

// ---- stopping rules ---------------------------------------------------------

enum class AggFn { BoolOr, BoolAnd, CountIf, Proportion };

inline const char* agg_fn_name(AggFn fn) {
    switch (fn) {
        case AggFn::BoolOr: return "bool_or";
        case AggFn::BoolAnd: return "bool_and";
        case AggFn::CountIf: return "count_if";
        case AggFn::Proportion: return "proportion";
    }
    return "?";
}

struct CsResolution {
    bool resolved = false;
    bool value = false;
    static CsResolution running() { return {}; }
    static CsResolution done(bool v) { return {true, v}; }
};

namespace detail {

// Shared interval-vs-threshold logic; [lo, hi] is the scaled CI.
inline CsResolution resolve_interval(double lo, double hi, const Comparison& cmp, double eps) {
    double t = cmp.threshold;
    switch (cmp.op) {
        case CompareOp::GE:
            if (lo >= t) return CsResolution::done(true);
            if (hi < t) return CsResolution::done(false);
            return CsResolution::running();
        case CompareOp::GT:
            if (lo > t) return CsResolution::done(true);
            if (hi <= t) return CsResolution::done(false);
            return CsResolution::running();
        case CompareOp::LE:
            if (hi <= t) return CsResolution::done(true);
            if (lo > t) return CsResolution::done(false);
            return CsResolution::running();
        case CompareOp::LT:
            if (hi < t) return CsResolution::done(true);
            if (lo >= t) return CsResolution::done(false);
            return CsResolution::running();
        case CompareOp::EQ: {
            double tl = t * (1.0 - eps), th = t * (1.0 + eps);
            if (lo >= tl && hi <= th) return CsResolution::done(true);
            if (hi < tl || lo > th) return CsResolution::done(false);
            return CsResolution::running();
        }
        case CompareOp::NE: {
            double tl = t * (1.0 - eps), th = t * (1.0 + eps);
            if (hi < tl || lo > th) return CsResolution::done(true);
            if (lo >= tl && hi <= th) return CsResolution::done(false);
            return CsResolution::running();
        }
    }
    return CsResolution::running();
}

}  // namespace detail

// Stopping rule for one accumulator. For count_if and bool_or the proportion
// CI is scaled by n_total; requesting a count-space resolution without a
// known total is a planning bug surfaced as an error.
inline CsResolution cs_resolve(const ConfidenceState& state, AggFn fn,
                               const std::optional<Comparison>& cmp, double eps,
                               std::optional<std::int64_t> n_total) {
    double lo = state.lower(), hi = state.upper();
    switch (fn) {
        case AggFn::Proportion:
            if (!cmp) return CsResolution::running();
            return detail::resolve_interval(lo, hi, *cmp, eps);
        case AggFn::CountIf: {
            if (!cmp) return CsResolution::running();
            if (!n_total) throw Error("cs_resolve: count comparison needs n_total");
            double n = static_cast<double>(*n_total);
            return detail::resolve_interval(lo * n, hi * n, *cmp, eps);
        }
        case AggFn::BoolAnd:
            // Estimation only confirms; a counterexample refutes deterministically.
            if (lo >= 1.0 - eps) return CsResolution::done(true);
            return CsResolution::running();
        case AggFn::BoolOr: {
            if (!n_total) throw Error("cs_resolve: bool_or estimation needs n_total");
            double n = static_cast<double>(*n_total);
            if (n * lo >= 1.0) return CsResolution::done(true);
            if (n * hi < 1.0) return CsResolution::done(false);
            return CsResolution::running();
        }
    }
    return CsResolution::running();
}

// ---- error-budget allocation --------------------------------------------------

// Two-stage family-wise budget split: alpha/o per estimating operator, then
// across the operator's accumulators and groups. Known group counts take a
// Bonferroni share alpha/(o*a*g); unknown counts take a geometrically
// decreasing share alpha/(o*a*2^i) for the i-th group (i starting at 1), so
// the series sums below the operator budget for any number of groups.
struct BudgetPlan {
    enum class Rule { Bonferroni, Geometric };
    struct OpBudget {
        int accumulators = 1;
        std::optional<std::int64_t> groups;  // known -> Bonferroni, unknown -> Geometric
        Rule rule() const { return groups ? Rule::Bonferroni : Rule::Geometric; }
    };

    double alpha = 0.05;
    std::vector<OpBudget> ops;

    int operator_count() const { return static_cast<int>(ops.size()); }

    // Fills in group counts that only become known once the sort phase has
    // materialized the groups.
    BudgetPlan with_runtime_groups(size_t op_idx, std::int64_t g) const {
        BudgetPlan out = *this;
        if (op_idx < out.ops.size() && out.ops[op_idx].groups)
            out.ops[op_idx].groups = std::max<std::int64_t>(1, g);
        return out;
    }

    double alpha_for(size_t op_idx, int /*acc_idx*/, std::int64_t group_idx) const {
        const auto& op = ops.at(op_idx);
        double o = static_cast<double>(ops.size());
        double a = static_cast<double>(op.accumulators);
        if (op.groups) return alpha / (o * a * static_cast<double>(*op.groups));
        return alpha / (o * a * std::pow(2.0, static_cast<double>(group_idx + 1)));
    }
};

inline BudgetPlan allocate_budget(double alpha, std::vector<BudgetPlan::OpBudget> ops) {
    if (ops.empty()) throw Error("allocate_budget: needs at least one estimating operator");
    BudgetPlan plan;
    plan.alpha = alpha;
    plan.ops = std::move(ops);
    return plan;
}

// ---- seeded shuffles ---------------------------------------------------------

namespace detail {
// Bounded draw via modulo keeps permutations identical across standard
// library implementations.
inline size_t bounded(std::mt19937_64& gen, size_t n) { return static_cast<size_t>(gen() % n); }
}  // namespace detail

template <typename T>
void shuffle_rows(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = detail::bounded(gen, i);
        std::swap(v[i - 1], v[j]);
    }
}

// Hierarchical shuffle over group-contiguous input: permutes whole blocks,
// then permutes within each block, preserving contiguity. `offsets` holds
// block starts plus a final end offset.
template <typename T>
void hierarchical_shuffle(std::vector<T>& v, const std::vector<size_t>& offsets,
                          std::uint64_t seed) {
    if (offsets.size() < 2) return;
    size_t blocks = offsets.size() - 1;
    std::mt19937_64 gen(seed);
    std::vector<size_t> order(blocks);
    for (size_t i = 0; i < blocks; ++i) order[i] = i;
    for (size_t i = blocks; i > 1; --i) std::swap(order[i - 1], order[detail::bounded(gen, i)]);

    std::vector<T> out;
    out.reserve(v.size());
    for (size_t b : order)
        for (size_t k = offsets[b]; k < offsets[b + 1]; ++k) out.push_back(std::move(v[k]));
    v = std::move(out);

    // within-block passes, in the new block order
    size_t pos = 0;
    for (size_t bi = 0; bi < blocks; ++bi) {
        size_t len = offsets[order[bi] + 1] - offsets[order[bi]];
        for (size_t i = len; i > 1; --i)
            std::swap(v[pos + i - 1], v[pos + detail::bounded(gen, i)]);
        pos += len;
    }
}

}  // namespace veriq
