#include <numeric>
#include <random>
#include <gtest/gtest.h>
#include <l0bnb/relaxation.hpp>
#include <l0bnb/screening.hpp>
#include "oracles.hpp"

using namespace l0bnb;

namespace {

// perturb beta on a few coordinates and return the perturbed copy
SparseCoefs jitter(SparseCoefs b, index_t p, double scale, std::mt19937_64& rng)
{
    std::uniform_int_distribution<index_t> pick(0, p - 1);
    std::normal_distribution<double> nd(0, scale);
    for (int k = 0; k < 3; ++k) {
        const index_t i = pick(rng);
        set_coef(b, i, (b.count(i) ? b.at(i) : 0.0) + nd(rng));
    }
    return b;
}

} // namespace

TEST(ScreenCache, SortedPermutation)
{
    const Dataset d = oracle::random_normalized(30, 50, 1, 0.1, 3);
    const auto cache = build_screen_cache({}, d.y, d, default_eps_gs);
    ASSERT_EQ(cache->corr_abs_sorted.size(), 50u);
    std::vector<index_t> seen;
    for (std::size_t k = 0; k < cache->corr_abs_sorted.size(); ++k) {
        seen.push_back(cache->corr_abs_sorted[k].second);
        if (k > 0) EXPECT_GE(cache->corr_abs_sorted[k - 1].first, cache->corr_abs_sorted[k].first);
    }
    std::sort(seen.begin(), seen.end());
    std::vector<index_t> all(50);
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(seen, all);
    EXPECT_NEAR(cache->xbeta_ref.norm(), 0.0, 1e-15);
}

TEST(CandidateSet, ZeroRadiusIsPlainThreshold)
{
    const Dataset d = oracle::random_normalized(40, 200, 2, 0.2, 4);
    const PenaltyParams p(0.002, 0.01, infinity);
    const SparseCoefs beta = {{0, 0.3}, {50, -0.2}};
    const vec_t r = residual_of(beta, d);
    const auto cache = build_screen_cache(beta, r, d, default_eps_gs);
    EXPECT_NEAR(screening_radius(*cache, r, d), 0.0, 1e-14);
    const IndexSet cand = candidate_set(*cache, beta, r, d, p, NodeState{});
    EXPECT_EQ(cand, check_violations(beta, r, d, p, NodeState{}));
}

TEST(CandidateSet, LargeRadiusTakesEverythingOffSupport)
{
    const Dataset d = oracle::random_normalized(40, 60, 3);
    const PenaltyParams p(0.002, 0.01, infinity);
    const auto cache = build_screen_cache({}, d.y, d, default_eps_gs);
    const SparseCoefs beta = {{5, 1.0}, {6, -1.0}};
    const vec_t r = residual_of(beta, d);
    ASSERT_GE(screening_radius(*cache, r, d), p.violation_threshold());
    const IndexSet cand = candidate_set(*cache, beta, r, d, p, NodeState{});
    EXPECT_EQ(cand.size(), 58u);
    EXPECT_FALSE(contains(cand, 5));
    EXPECT_FALSE(contains(cand, 6));
}

TEST(ScreenedViolations, EqualsUnscreenedAndContained)
{
    std::mt19937_64 rng(4);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset d = oracle::random_normalized(40, 200, 10 + seed, 0.2, 5);
        const PenaltyParams p(0.003, 0.02, seed % 2 ? 0.3 : infinity);
        const RelaxResult base = solve_node(NodeState{}, d, p);
        const auto cache = build_screen_cache(base.beta, base.residual, d, default_eps_gs);
        NodeState node;
        node.fixed_zero = {static_cast<index_t>(seed)};
        for (double scale : {1e-3, 1e-2, 1e-1}) {
            SparseCoefs b = jitter(base.beta, d.p(), scale, rng);
            b.erase(static_cast<index_t>(seed));
            for (auto& [i, v] : b) v = std::clamp(v, -p.big_m, p.big_m);
            const vec_t r = residual_of(b, d);
            const auto checked = screened_violations(*cache, b, r, d, p, node);
            const IndexSet full = check_violations(b, r, d, p, node);
            EXPECT_EQ(checked.violations, full);
            EXPECT_TRUE(std::includes(checked.candidates.begin(), checked.candidates.end(), full.begin(), full.end()));
        }
    }
}

TEST(ScreenedViolations, EmptyCandidatesOrAllFixed)
{
    const Dataset d = oracle::random_normalized(30, 40, 5, 0.1, 2);
    const PenaltyParams big(10.0, 10.0, infinity); // threshold far above every correlation
    const auto cache = build_screen_cache({}, d.y, d, default_eps_gs);
    EXPECT_TRUE(screened_violations(*cache, {}, d.y, d, big, NodeState{}).candidates.empty());

    const PenaltyParams p(0.001, 0.001, infinity);
    const auto checked = screened_violations(*cache, {}, d.y, d, p, NodeState{});
    ASSERT_FALSE(checked.candidates.empty());
    NodeState node;
    node.fixed_zero = checked.candidates;
    EXPECT_TRUE(screened_violations(*cache, {}, d.y, d, p, node).violations.empty());
}

TEST(MaybeRefresh, Policy)
{
    const Dataset d = oracle::random_normalized(30, 40, 6, 0.1, 2);
    const auto cache = build_screen_cache({}, d.y, d, 0.05);
    EXPECT_EQ(maybe_refresh(cache, 0, {}, d.y, d), cache);
    EXPECT_EQ(maybe_refresh(cache, 2, {}, d.y, d), cache); // 2 <= 0.05 * 40
    const SparseCoefs beta = {{3, 0.4}};
    const vec_t r = residual_of(beta, d);
    const auto fresh = maybe_refresh(cache, 40, beta, r, d);
    EXPECT_NE(fresh, cache);
    EXPECT_NEAR(screening_radius(*fresh, r, d), 0.0, 1e-14);
    EXPECT_EQ(fresh->beta_ref, beta);
}

TEST(Screening, SolveNodeIdenticalOnAndOff)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = oracle::random_normalized(60, 300, 30 + seed, 0.2, 5);
        const PenaltyParams p(0.002, 0.01, infinity);
        RelaxSettings on, off;
        on.screening = true;
        long probes = 0;
        on.screen_probe = [&](const ScreenProbe& pr) {
            ++probes;
            const IndexSet full = check_violations(pr.beta, pr.residual, d, p, pr.node);
            EXPECT_EQ(pr.violations, full);
        };
        const RelaxResult a = solve_node(NodeState{}, d, p, on);
        const RelaxResult b = solve_node(NodeState{}, d, p, off);
        EXPECT_GT(probes, 0);
        EXPECT_EQ(a.beta, b.beta);
        EXPECT_EQ(a.primal_objective, b.primal_objective);
        EXPECT_EQ(a.dual_bound, b.dual_bound);
    }
}
