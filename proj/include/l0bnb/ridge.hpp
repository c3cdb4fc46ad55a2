#pragma once
#include <algorithm>
#include <cmath>
#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <l0bnb/problem_model.hpp>

namespace l0bnb {

/// Gram matrix X_S^T X_S and X_S^T y for a support.
inline std::pair<mat_t, vec_t> support_normal_equations(const Dataset& data, const IndexSet& support)
{
    const index_t k = static_cast<index_t>(support.size());
    mat_t xs(data.n(), k);
    for (index_t j = 0; j < k; ++j) xs.col(j) = data.x.col(support[j]);
    return {xs.transpose() * xs, xs.transpose() * data.y};
}

/**
 * min 0.5 ||y - X_S b||^2 + lambda2 ||b||^2 without a box. Uses a Cholesky
 * factorization of X_S^T X_S + 2 lambda2 I; with lambda2 = 0 and a rank
 * deficient X_S it falls back to the minimum-norm least squares solution.
 */
inline vec_t ridge_on_support(const Dataset& data, const IndexSet& support, double lambda2)
{
    if (support.empty()) return vec_t();
    auto [gram, rhs] = support_normal_equations(data, support);
    gram.diagonal().array() += 2 * lambda2;
    Eigen::LLT<mat_t> llt(gram);
    if (llt.info() == Eigen::Success && lambda2 > 0) return llt.solve(rhs);
    if (llt.info() == Eigen::Success) {
        // lambda2 = 0: accept only if well conditioned
        const vec_t d = llt.matrixL().toDenseMatrix().diagonal();
        if (d.minCoeff() > 1e-7 * d.maxCoeff()) return llt.solve(rhs);
    }
    const index_t k = static_cast<index_t>(support.size());
    mat_t xs(data.n(), k);
    for (index_t j = 0; j < k; ++j) xs.col(j) = data.x.col(support[j]);
    return xs.completeOrthogonalDecomposition().solve(data.y);
}

/**
 * Box-constrained ridge on a support by projected coordinate descent, started
 * from `start` (clipped). Runs until the largest coordinate change is below tol.
 */
inline vec_t box_ridge_on_support(const Dataset& data, const IndexSet& support, double lambda2, double big_m,
                                  vec_t start, double tol = 1e-12, int max_cycles = 100000)
{
    const index_t k = static_cast<index_t>(support.size());
    if (k == 0) return vec_t();
    vec_t b = start.size() == k ? start.cwiseMax(-big_m).cwiseMin(big_m) : vec_t(vec_t::Zero(k));
    vec_t r = data.y;
    for (index_t j = 0; j < k; ++j) r.noalias() -= b[j] * data.x.col(support[j]);
    for (int t = 0; t < max_cycles; ++t) {
        double biggest = 0;
        for (index_t j = 0; j < k; ++j) {
            const auto col = data.x.col(support[j]);
            const double nb = std::clamp((col.dot(r) + b[j]) / (1 + 2 * lambda2), -big_m, big_m);
            const double d = nb - b[j];
            if (d != 0) {
                r.noalias() -= d * col;
                b[j] = nb;
                biggest = std::max(biggest, std::abs(d));
            }
        }
        if (biggest < tol) break;
    }
    return b;
}

} // namespace l0bnb
