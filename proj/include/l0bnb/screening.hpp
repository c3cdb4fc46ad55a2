#pragma once
#include <algorithm>
#include <memory>
#include <utility>
#include <vector>
#include <l0bnb/problem_model.hpp>

namespace l0bnb {

/// <X_i, r>. Every optimality check goes through this one routine so that the
/// screened and unscreened paths see bit-identical correlations.
inline double column_dot(const Dataset& data, index_t i, const vec_t& r)
{
    return data.x.col(i).dot(r);
}

/**
 * Reference point for gradient screening: a coefficient vector beta0, its fit
 * X beta0, and the correlations |<y - X beta0, X_i>| sorted in decreasing order.
 * Snapshots are immutable and shared between a node and its children; a
 * refresh produces a new snapshot.
 */
struct ScreenCache
{
    SparseCoefs beta_ref;
    vec_t xbeta_ref;
    std::vector<std::pair<double, index_t>> corr_abs_sorted;
    double eps_gs = 0.05;
};

inline constexpr double default_eps_gs = 0.05;

/// Builds a cache around (beta, residual); residual must be y - X beta.
inline std::shared_ptr<const ScreenCache>
build_screen_cache(const SparseCoefs& beta, const vec_t& residual, const Dataset& data, double eps_gs)
{
    auto cache = std::make_shared<ScreenCache>();
    cache->beta_ref = beta;
    cache->xbeta_ref = data.y - residual;
    cache->eps_gs = eps_gs;
    const index_t p = data.p();
    cache->corr_abs_sorted.resize(p);
    for (index_t i = 0; i < p; ++i) {
        cache->corr_abs_sorted[i] = {std::abs(column_dot(data, i, residual)), i};
    }
    std::sort(cache->corr_abs_sorted.begin(), cache->corr_abs_sorted.end(),
              [](const auto& a, const auto& b) {
                  return a.first > b.first || (a.first == b.first && a.second < b.second);
              });
    return cache;
}

/// ||X beta0 - X beta_hat||, using X beta_hat = y - residual.
inline double screening_radius(const ScreenCache& cache, const vec_t& residual, const Dataset& data)
{
    return (cache.xbeta_ref - (data.y - residual)).norm();
}

/**
 * Candidate superset of the violating coordinates: every i outside the support
 * of beta_hat (and not fixed by the node) with |<r0, X_i>| > c - eps. Found by
 * binary search over the sorted correlations.
 *
 * The threshold is lowered by a tiny margin to absorb rounding in eps; this
 * only enlarges the candidate set.
 */
inline IndexSet candidate_set(const ScreenCache& cache, const SparseCoefs& beta_hat,
                              const vec_t& residual, const Dataset& data,
                              const PenaltyParams& params, const NodeState& node)
{
    const double eps = screening_radius(cache, residual, data);
    const double c = params.violation_threshold();
    const double cut = c - eps - 1e-10 * (1 + c);
    const auto& sorted = cache.corr_abs_sorted;
    const auto end = std::partition_point(sorted.begin(), sorted.end(),
                                          [cut](const auto& e) { return e.first > cut; });
    IndexSet out;
    for (auto it = sorted.begin(); it != end; ++it) {
        const index_t i = it->second;
        auto b = beta_hat.find(i);
        if (b != beta_hat.end() && b->second != 0) continue;
        if (node.is_fixed_zero(i) || node.is_fixed_one(i)) continue;
        out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct ScreenedCheck
{
    IndexSet candidates;
    IndexSet violations;
};

inline ScreenedCheck screened_violations(const ScreenCache& cache, const SparseCoefs& beta_hat,
                                         const vec_t& residual, const Dataset& data,
                                         const PenaltyParams& params, const NodeState& node)
{
    ScreenedCheck out;
    out.candidates = candidate_set(cache, beta_hat, residual, data, params, node);
    const double c = params.violation_threshold();
    for (index_t i : out.candidates) {
        if (std::abs(column_dot(data, i, residual)) > c) out.violations.push_back(i);
    }
    return out;
}

/// Re-centres the cache on beta_hat once the candidate set grows past eps_gs * p.
inline std::shared_ptr<const ScreenCache>
maybe_refresh(std::shared_ptr<const ScreenCache> cache, std::size_t candidate_count,
              const SparseCoefs& beta_hat, const vec_t& residual, const Dataset& data)
{
    if (static_cast<double>(candidate_count) > cache->eps_gs * static_cast<double>(data.p())) {
        return build_screen_cache(beta_hat, residual, data, cache->eps_gs);
    }
    return cache;
}

} // namespace l0bnb
