#pragma once
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace l0bnb {

/// Which closed form the reduced relaxation penalty takes.
///   reverse_huber : sqrt(lambda0/lambda2) <= M, penalty 2*lambda0*B(beta*sqrt(lambda2/lambda0))
///   l1            : sqrt(lambda0/lambda2) >  M, penalty (lambda0/M + lambda2*M)|beta|
enum class Regime { reverse_huber, l1 };

inline const char* to_string(Regime r)
{
    return r == Regime::reverse_huber ? "reverse_huber" : "l1";
}

class config_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

class domain_error : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/**
 * Regularization weights of the l0 + l2 problem together with the box bound.
 * A big_m of +infinity means no box (the pure perspective formulation), which
 * needs lambda2 > 0.
 */
struct PenaltyParams
{
    double lambda0 = 0;
    double lambda2 = 0;
    double big_m = infinity;

    PenaltyParams() = default;
    PenaltyParams(double l0, double l2, double m)
        : lambda0(l0), lambda2(l2), big_m(m)
    {
        validate();
    }

    void validate() const
    {
        if (!(lambda0 > 0) || !std::isfinite(lambda0)) {
            throw config_error("lambda0 must be positive and finite, got " + std::to_string(lambda0));
        }
        if (!(lambda2 >= 0) || !std::isfinite(lambda2)) {
            throw config_error("lambda2 must be nonnegative and finite, got " + std::to_string(lambda2));
        }
        if (!(big_m > 0)) {
            throw config_error("big_m must be positive, got " + std::to_string(big_m));
        }
        if (lambda2 == 0 && std::isinf(big_m)) {
            throw config_error("lambda2 = 0 requires a finite big_m");
        }
    }

    bool unbounded() const { return std::isinf(big_m); }

    // Ties go to reverse_huber. lambda2 = 0 with finite M is always l1.
    Regime regime() const
    {
        if (lambda2 == 0) return Regime::l1;
        return std::sqrt(lambda0 / lambda2) <= big_m ? Regime::reverse_huber : Regime::l1;
    }

    /// sqrt(lambda0/lambda2): where the reverse Huber switches from linear to quadratic.
    double huber_knee() const { return std::sqrt(lambda0 / lambda2); }

    /// Slope of the l1 penalty in the l1 regime.
    double l1_slope() const { return lambda0 / big_m + lambda2 * big_m; }

    /**
     * Off-support optimality threshold c(lambda0, lambda2, M): a zero coordinate
     * stays zero under the prox iff |<r, X_i>| <= c.
     */
    double violation_threshold() const
    {
        return regime() == Regime::reverse_huber
            ? 2 * std::sqrt(lambda0 * lambda2)
            : l1_slope();
    }
};

template <class T>
inline T sign(T t)
{
    return static_cast<T>((T(0) < t) - (t < T(0)));
}

/// Reverse Huber (Berhu): |t| inside [-1, 1], (t^2 + 1)/2 outside.
template <class T>
inline T reverse_huber(T t)
{
    const T a = std::abs(t);
    return a <= T(1) ? a : (t * t + T(1)) / T(2);
}

/// Soft-threshold by `a`, then clip to [-m, m]. m may be +infinity.
template <class T>
inline T box_soft_threshold(T t, T a, T m)
{
    const T at = std::abs(t);
    if (at <= a) return T(0);
    // a == inf is caught above, so at - a is finite here
    return sign(t) * std::min(at - a, m);
}

inline double penalty_psi(double beta, const PenaltyParams& params)
{
    const double ab = std::abs(beta);
    if (ab > params.big_m) {
        throw domain_error("penalty_psi: |beta| exceeds big_m");
    }
    if (ab == 0) return 0;
    if (params.regime() == Regime::reverse_huber) {
        return 2 * params.lambda0 * reverse_huber(beta * std::sqrt(params.lambda2 / params.lambda0));
    }
    return params.l1_slope() * ab;
}

/// Penalty of a coordinate whose indicator is fixed to one.
inline double penalty_psi_tilde(double beta, const PenaltyParams& params)
{
    return params.lambda0 + params.lambda2 * beta * beta;
}

/// argmin_{|b| <= M} 0.5 (b - beta_tilde)^2 + psi(b).
inline double prox_psi(double beta_tilde, const PenaltyParams& params)
{
    const double m = params.big_m;
    if (params.regime() == Regime::reverse_huber) {
        const double shrink = 2 * std::sqrt(params.lambda0 * params.lambda2);
        if (std::abs(beta_tilde) <= shrink + params.huber_knee()) {
            return box_soft_threshold(beta_tilde, shrink, m);
        }
        return box_soft_threshold(beta_tilde / (1 + 2 * params.lambda2), 0.0, m);
    }
    return box_soft_threshold(beta_tilde, params.l1_slope(), m);
}

inline double prox_psi_tilde(double beta_tilde, const PenaltyParams& params)
{
    return box_soft_threshold(beta_tilde / (1 + 2 * params.lambda2), 0.0, params.big_m);
}

// Big-M interval relaxation penalty (lambda0/M)|b| + lambda2 b^2. Only used to
// compare relaxation strengths; the solver itself works on the perspective form.
inline double penalty_big_m(double beta, const PenaltyParams& params)
{
    return params.lambda0 / params.big_m * std::abs(beta) + params.lambda2 * beta * beta;
}

inline double prox_big_m(double beta_tilde, const PenaltyParams& params)
{
    const double shrunk = box_soft_threshold(beta_tilde, params.lambda0 / params.big_m, infinity);
    return box_soft_threshold(shrunk / (1 + 2 * params.lambda2), 0.0, params.big_m);
}

} // namespace l0bnb
