#pragma once
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Dense>
#include <l0bnb/scalar_kernels.hpp>

namespace l0bnb {

using index_t = Eigen::Index;
using vec_t = Eigen::VectorXd;
using mat_t = Eigen::MatrixXd;

/// Sparse coefficient vector keyed by feature index. Never stores explicit zeros.
using SparseCoefs = std::map<index_t, double>;

/// Sorted, duplicate-free list of feature indices.
using IndexSet = std::vector<index_t>;

inline bool contains(const IndexSet& s, index_t i)
{
    return std::binary_search(s.begin(), s.end(), i);
}

inline IndexSet set_union(const IndexSet& a, const IndexSet& b)
{
    IndexSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline IndexSet set_difference(const IndexSet& a, const IndexSet& b)
{
    IndexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline void insert_sorted(IndexSet& s, index_t i)
{
    auto it = std::lower_bound(s.begin(), s.end(), i);
    if (it == s.end() || *it != i) s.insert(it, i);
}

inline IndexSet support_of(const SparseCoefs& beta)
{
    IndexSet s;
    s.reserve(beta.size());
    for (const auto& [i, v] : beta) {
        if (v != 0) s.push_back(i);
    }
    return s;
}

inline void set_coef(SparseCoefs& beta, index_t i, double v)
{
    if (v == 0) beta.erase(i);
    else beta[i] = v;
}

/**
 * Design matrix and response. After normalize() every column and y have unit
 * l2 norm (and zero mean when centered); the pre-normalization norms and means
 * are kept so coefficients can be mapped back to original units.
 */
struct Dataset
{
    mat_t x;
    vec_t y;
    vec_t column_norms;
    vec_t column_means;
    double y_norm = 1;
    double y_mean = 0;
    bool centered = false;

    Dataset() = default;

    Dataset(mat_t x_, vec_t y_)
        : x(std::move(x_)), y(std::move(y_)),
          column_norms(vec_t::Ones(x.cols())),
          column_means(vec_t::Zero(x.cols()))
    {
        validate();
    }

    index_t n() const { return x.rows(); }
    index_t p() const { return x.cols(); }

    void validate() const
    {
        if (x.rows() < 1 || x.cols() < 1) {
            throw config_error("dataset needs n >= 1 and p >= 1");
        }
        if (y.size() != x.rows()) {
            throw config_error("response length " + std::to_string(y.size())
                               + " does not match " + std::to_string(x.rows()) + " rows");
        }
        if (!x.allFinite() || !y.allFinite()) {
            throw config_error("dataset contains non-finite entries");
        }
    }

    /// Coefficient on normalized data -> coefficient in original units.
    double to_original_units(index_t i, double beta) const
    {
        return beta * y_norm / column_norms[i];
    }
};

struct ScreenCache;

/// Branching state of one search-tree node.
struct NodeState
{
    IndexSet fixed_zero;
    IndexSet fixed_one;
    SparseCoefs warm_start;
    IndexSet active_set;
    std::shared_ptr<const ScreenCache> screen_ref;
    double parent_lower_bound = -infinity;
    int depth = 0;
    long id = 0;

    bool is_fixed_zero(index_t i) const { return contains(fixed_zero, i); }
    bool is_fixed_one(index_t i) const { return contains(fixed_one, i); }

    void validate() const
    {
        IndexSet both;
        std::set_intersection(fixed_zero.begin(), fixed_zero.end(),
                              fixed_one.begin(), fixed_one.end(), std::back_inserter(both));
        if (!both.empty()) {
            throw domain_error("node fixes feature " + std::to_string(both.front()) + " to both 0 and 1");
        }
        for (const auto& [i, v] : warm_start) {
            if (v != 0 && is_fixed_zero(i)) {
                throw domain_error("warm start is nonzero on fixed-to-zero feature " + std::to_string(i));
            }
        }
    }
};

struct RelaxResult
{
    SparseCoefs beta;
    vec_t residual;
    double primal_objective = 0;
    double dual_bound = -infinity;
    SparseCoefs z_relaxed;
    SparseCoefs s_values;
    bool is_integral = false;
    IndexSet active_set;
    std::shared_ptr<const ScreenCache> screen;
    bool converged = true;
    long cd_cycles = 0;
};

inline vec_t residual_of(const SparseCoefs& beta, const Dataset& data)
{
    vec_t r = data.y;
    for (const auto& [i, v] : beta) r.noalias() -= v * data.x.col(i);
    return r;
}

namespace detail {

inline void check_box(const SparseCoefs& beta, const PenaltyParams& params)
{
    for (const auto& [i, v] : beta) {
        if (std::abs(v) > params.big_m) {
            throw domain_error("coefficient " + std::to_string(i) + " violates the box |beta| <= M");
        }
    }
}

} // namespace detail

/// 0.5 ||y - X beta||^2 + lambda0 ||beta||_0 + lambda2 ||beta||^2.
inline double objective_full(const SparseCoefs& beta, const Dataset& data, const PenaltyParams& params)
{
    detail::check_box(beta, params);
    double pen = 0;
    for (const auto& [i, v] : beta) {
        if (v != 0) pen += params.lambda0 + params.lambda2 * v * v;
    }
    return 0.5 * residual_of(beta, data).squaredNorm() + pen;
}

/// Penalty part of the node relaxation: psi on free coordinates, psi_tilde on fixed-to-one ones.
inline double relaxation_penalty(const SparseCoefs& beta, const PenaltyParams& params, const NodeState& node)
{
    double pen = 0;
    for (const auto& [i, v] : beta) {
        if (node.is_fixed_one(i)) continue;
        pen += penalty_psi(v, params);
    }
    for (index_t i : node.fixed_one) {
        auto it = beta.find(i);
        pen += penalty_psi_tilde(it == beta.end() ? 0.0 : it->second, params);
    }
    return pen;
}

inline double objective_relaxation(const SparseCoefs& beta, const Dataset& data,
                                   const PenaltyParams& params, const NodeState& node)
{
    for (const auto& [i, v] : beta) {
        if (v != 0 && node.is_fixed_zero(i)) {
            throw domain_error("objective_relaxation: beta nonzero on fixed-to-zero feature " + std::to_string(i));
        }
    }
    detail::check_box(beta, params);
    return 0.5 * residual_of(beta, data).squaredNorm() + relaxation_penalty(beta, params, node);
}

/**
 * Smallest feasible z (and matching s) for a relaxation solution beta, so that
 * (beta, z, s) is feasible for the interval relaxation of the conic Big-M model
 * and lambda0*sum(z) + lambda2*sum(s) equals the relaxation penalty.
 */
inline std::pair<SparseCoefs, SparseCoefs>
recover_zs(const SparseCoefs& beta, const PenaltyParams& params, const NodeState& node)
{
    SparseCoefs z, s;
    for (index_t i : node.fixed_one) {
        auto it = beta.find(i);
        const double b = it == beta.end() ? 0.0 : it->second;
        z[i] = 1;
        set_coef(s, i, b * b);
    }
    const bool huber = params.regime() == Regime::reverse_huber;
    for (const auto& [i, v] : beta) {
        if (v == 0 || node.is_fixed_one(i)) continue;
        const double a = std::abs(v);
        if (huber) {
            const double knee = params.huber_knee();
            if (a <= knee) {
                z[i] = a / knee;
                s[i] = a * knee;
            } else {
                z[i] = 1;
                s[i] = v * v;
            }
        } else {
            z[i] = a / params.big_m;
            s[i] = a * params.big_m;
        }
    }
    return {std::move(z), std::move(s)};
}

} // namespace l0bnb
