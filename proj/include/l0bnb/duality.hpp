#pragma once
#include <cmath>
#include <l0bnb/problem_model.hpp>
#include <l0bnb/screening.hpp>

namespace l0bnb {

/**
 * A dual-feasible point built from a primal iterate beta_hat with residual r:
 * alpha = -r, and per-coordinate multipliers that maximize the dual with alpha
 * fixed. In the reverse Huber regime the multipliers are the gammas (unconstrained
 * dual); in the l1 regime they are the mus that restore feasibility.
 *
 * Multipliers are stored for the support and for features fixed to one. When
 * `full` is set the point was built over every coordinate because the
 * off-support optimality conditions could not be assumed.
 */
struct DualPoint
{
    Regime regime = Regime::reverse_huber;
    vec_t alpha;
    SparseCoefs support_multipliers;
    double bound = -infinity;
    bool full = false;
};

namespace detail {

// gamma_i maximizing the reverse Huber dual for correlation a = alpha^T X_i.
inline double huber_gamma(double a, const PenaltyParams& params)
{
    if (params.unbounded()) return 0;
    return box_soft_threshold(a, 2 * params.big_m * params.lambda2, infinity);
}

// v(alpha, gamma) for a free coordinate in the reverse Huber regime.
inline double huber_v(double a, double gamma, const PenaltyParams& params)
{
    const double d = a - gamma;
    const double quad = std::max(d * d / (4 * params.lambda2) - params.lambda0, 0.0);
    return gamma == 0 ? quad : quad + params.big_m * std::abs(gamma);
}

inline double l1_mu(double a, const PenaltyParams& params)
{
    return std::max(std::abs(a) - params.l1_slope(), 0.0);
}

// Conjugate term of a fixed-to-one coordinate:
//   -min_{|b|<=M} (lambda0 + lambda2 b^2 + a b) = -lambda0 + sup_{|b|<=M} (|a| b - lambda2 b^2).
// Written with gamma = T(a; 2 M lambda2, inf) it is the v bracket without the
// positive-part clamp plus M|gamma|.
inline double fixed_one_v(double a, const PenaltyParams& params)
{
    const double aa = std::abs(a);
    const double b = params.lambda2 > 0 ? std::min(aa / (2 * params.lambda2), params.big_m) : params.big_m;
    return aa * b - params.lambda2 * b * b - params.lambda0;
}

inline double fixed_one_gamma(double a, const PenaltyParams& params)
{
    if (params.lambda2 == 0) return a;
    return huber_gamma(a, params);
}

// Contribution v_i for a coordinate; `a` is alpha^T X_i.
inline double coordinate_v(double a, bool fixed_one, const PenaltyParams& params, Regime regime)
{
    if (fixed_one) return fixed_one_v(a, params);
    if (regime == Regime::reverse_huber) return huber_v(a, huber_gamma(a, params), params);
    return params.big_m * l1_mu(a, params);
}

inline double coordinate_multiplier(double a, bool fixed_one, const PenaltyParams& params, Regime regime)
{
    if (fixed_one) return fixed_one_gamma(a, params);
    if (regime == Regime::reverse_huber) return huber_gamma(a, params);
    return l1_mu(a, params);
}

} // namespace detail

/**
 * Constructs the dual point for beta_hat. With `off_support_verified` the
 * caller guarantees |<r, X_i>| <= c for every free coordinate outside the
 * support, so multipliers vanish there and only support + fixed-to-one
 * coordinates are visited. Otherwise the condition is checked and, if it
 * fails, the point is built over all coordinates.
 */
inline DualPoint build_dual(const SparseCoefs& beta_hat, const vec_t& residual, const Dataset& data,
                            const PenaltyParams& params, const NodeState& node,
                            bool off_support_verified = false)
{
    DualPoint dp;
    dp.regime = params.regime();
    dp.alpha = -residual;

    if (!off_support_verified) {
        const double c = params.violation_threshold();
        for (index_t i = 0; i < data.p() && !dp.full; ++i) {
            if (node.is_fixed_zero(i) || node.is_fixed_one(i)) continue;
            auto it = beta_hat.find(i);
            if (it != beta_hat.end() && it->second != 0) continue;
            if (std::abs(column_dot(data, i, residual)) > c) dp.full = true;
        }
    }

    auto visit = [&](index_t i) {
        const bool one = node.is_fixed_one(i);
        const double a = column_dot(data, i, dp.alpha);
        set_coef(dp.support_multipliers, i, detail::coordinate_multiplier(a, one, params, dp.regime));
    };
    if (dp.full) {
        for (index_t i = 0; i < data.p(); ++i) {
            if (!node.is_fixed_zero(i)) visit(i);
        }
    } else {
        for (const auto& [i, v] : beta_hat) {
            if (v != 0 && !node.is_fixed_one(i)) visit(i);
        }
        for (index_t i : node.fixed_one) visit(i);
    }
    return dp;
}

/**
 * Dual objective of a point from build_dual:
 *   -0.5 ||alpha||^2 - alpha^T y - sum_i v_i
 * summed over the support and the fixed-to-one coordinates (or all coordinates
 * for a full point). Costs O(n + n * ||beta_hat||_0) in the sparse case.
 */
inline double dual_objective(const DualPoint& dp, const SparseCoefs& beta_hat, const Dataset& data,
                             const PenaltyParams& params, const NodeState& node)
{
    double value = -0.5 * dp.alpha.squaredNorm() - dp.alpha.dot(data.y);
    auto term = [&](index_t i) {
        const double a = column_dot(data, i, dp.alpha);
        return detail::coordinate_v(a, node.is_fixed_one(i), params, dp.regime);
    };
    if (dp.full) {
        for (index_t i = 0; i < data.p(); ++i) {
            if (!node.is_fixed_zero(i)) value -= term(i);
        }
        return value;
    }
    for (const auto& [i, v] : beta_hat) {
        if (v != 0 && !node.is_fixed_one(i)) value -= term(i);
    }
    for (index_t i : node.fixed_one) value -= term(i);
    return value;
}

/// Dual function at alpha evaluated over every non-fixed-to-zero coordinate.
inline double dual_objective_all(const vec_t& alpha, const Dataset& data,
                                 const PenaltyParams& params, const NodeState& node)
{
    const Regime regime = params.regime();
    double value = -0.5 * alpha.squaredNorm() - alpha.dot(data.y);
    for (index_t i = 0; i < data.p(); ++i) {
        if (node.is_fixed_zero(i)) continue;
        value -= detail::coordinate_v(column_dot(data, i, alpha), node.is_fixed_one(i), params, regime);
    }
    return value;
}

} // namespace l0bnb
