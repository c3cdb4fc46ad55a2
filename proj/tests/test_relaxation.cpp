#include <numeric>
#include <random>
#include <gtest/gtest.h>
#include <l0bnb/relaxation.hpp>
#include "oracles.hpp"

using namespace l0bnb;

namespace {

RelaxSettings tight()
{
    RelaxSettings s;
    s.cd_tolerance = 1e-13;
    s.coef_tolerance = 1e-12;
    s.max_cycles = 100000;
    return s;
}

std::vector<int> status_of(const NodeState& node, index_t p)
{
    std::vector<int> st(p, 0);
    for (index_t i : node.fixed_zero) st[i] = -1;
    for (index_t i : node.fixed_one) st[i] = 1;
    return st;
}

} // namespace

TEST(CdCycle, EmptyActiveSetIsNoop)
{
    const Dataset d = oracle::random_normalized(10, 4, 1);
    NodeState root;
    CdWorkspace ws(d, root, {}, {}, 1e-6);
    EXPECT_EQ(cd_cycle(ws, d, PenaltyParams(0.1, 0.1, infinity)), 0.0);
    EXPECT_EQ(ws.cycles, 0);
    EXPECT_TRUE(solve_restricted(ws, d, PenaltyParams(0.1, 0.1, infinity)));
    EXPECT_TRUE(ws.coefficients().empty());
}

TEST(CdCycle, SingleColumnEqualToYConvergesInOneCycle)
{
    mat_t x(4, 1);
    x << 1, -1, 2, -2;
    Dataset d(x / x.norm(), x.col(0) / x.norm());
    const double l0 = 0.01, l2 = 0.02;
    const PenaltyParams p(l0, l2, infinity);
    NodeState root;
    CdWorkspace ws(d, root, {}, {0}, 1e-6);
    cd_cycle(ws, d, p);
    // beta_tilde = <y, X_1> = 1: scalar problem 0.5 (b - 1)^2 + psi(b)
    auto obj = [&](double b) { return 0.5 * (b - 1) * (b - 1) + oracle::psi_reference(b, l0, l2, infinity); };
    const double expected = oracle::golden_min(obj, -3, 3);
    EXPECT_NEAR(ws.beta[0], expected, 1e-7);
    const double before = ws.beta[0];
    cd_cycle(ws, d, p);
    EXPECT_EQ(ws.beta[0], before);
}

TEST(CdCycle, ObjectiveNeverIncreases)
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Dataset d = oracle::random_normalized(30, 15, seed, 0.3, 3);
        const double m = seed % 3 == 0 ? infinity : 0.4 + 0.1 * static_cast<double>(seed % 5);
        const PenaltyParams p(0.005 * static_cast<double>(1 + seed % 4), 0.02 * static_cast<double>(1 + seed % 3), m);
        NodeState node;
        if (seed % 2) node.fixed_one = {3};
        IndexSet all(15);
        std::iota(all.begin(), all.end(), 0);
        CdWorkspace ws(d, node, {}, all, 1e-8);
        double prev = workspace_objective(ws, p);
        for (int t = 0; t < 10; ++t) {
            cd_cycle(ws, d, p);
            EXPECT_LE(ws.objective_history.back(), prev + 1e-14);
            prev = ws.objective_history.back();
        }
        for (double b : ws.beta) EXPECT_LE(std::abs(b), m + 1e-12);
        EXPECT_LE((ws.residual - residual_of(ws.coefficients(), d)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(SolveRestricted, WarmStartAtOptimumStopsAfterOneCycle)
{
    const Dataset d = oracle::random_normalized(30, 6, 4);
    const PenaltyParams p(0.01, 0.05, infinity);
    NodeState root;
    IndexSet all = {0, 1, 2, 3, 4, 5};
    CdWorkspace ws(d, root, {}, all, 1e-14);
    ASSERT_TRUE(solve_restricted(ws, d, p, tight()));
    CdWorkspace again(d, root, ws.coefficients(), all, 1e-6);
    RelaxSettings s;
    ASSERT_TRUE(solve_restricted(again, d, p, s));
    EXPECT_EQ(again.cycles, 1);
}

TEST(SolveRestricted, MatchesReferenceOnRandomInstance)
{
    const Dataset d = oracle::random_normalized(50, 20, 7, 0.2, 3);
    for (double m : {infinity, 0.3}) {
        const PenaltyParams p(0.004, 0.03, m);
        NodeState root;
        IndexSet all(20);
        std::iota(all.begin(), all.end(), 0);
        CdWorkspace ws(d, root, {}, all, 1e-6);
        ASSERT_TRUE(solve_restricted(ws, d, p));
        const auto ref = oracle::reference_relaxation(d.x, d.y, 0.004, 0.03, m);
        EXPECT_NEAR(ws.objective_history.back(), ref.objective, 1e-5);
    }
}

TEST(CheckViolations, EmptyAtReferenceOptimum)
{
    const Dataset d = oracle::random_normalized(40, 30, 9, 0.1, 4);
    for (double m : {infinity, 0.25}) {
        const PenaltyParams p(0.01, 0.02, m);
        const auto ref = oracle::reference_relaxation(d.x, d.y, 0.01, 0.02, m);
        // the reference stops a hair away from exact zeros; round those
        vec_t b = ref.beta;
        for (index_t i = 0; i < b.size(); ++i) {
            if (std::abs(b[i]) < 1e-9) b[i] = 0;
        }
        const SparseCoefs beta = oracle::to_sparse(b);
        EXPECT_TRUE(check_violations(beta, residual_of(beta, d), d, p, NodeState{}).empty());
    }
}

TEST(CheckViolations, FlagsCorrelatedZeroCoordinates)
{
    const Dataset d = oracle::random_normalized(40, 30, 9, 0.1, 4);
    const PenaltyParams p(0.01, 0.02, infinity);
    const IndexSet v = check_violations({}, d.y, d, p, NodeState{});
    const double c = p.violation_threshold();
    for (index_t i = 0; i < d.p(); ++i) {
        EXPECT_EQ(contains(v, i), std::abs(d.x.col(i).dot(d.y)) > c);
    }
    NodeState node;
    node.fixed_zero = {v.front()};
    EXPECT_FALSE(contains(check_violations({}, d.y, d, p, node), v.front()));
}

TEST(SolveNode, AboveLambda0MaxStaysAtZero)
{
    const Dataset d = oracle::random_normalized(30, 10, 11, 0.2, 2);
    const double l2 = 0.1;
    const double g = (d.x.transpose() * d.y).cwiseAbs().maxCoeff();
    // the relaxation threshold c = 2 sqrt(lambda0 lambda2) exceeds every |<y, X_i>|
    const double l0 = 1.01 * g * g / (4 * l2);
    const PenaltyParams p(l0, l2, infinity);
    const RelaxResult r = solve_node(NodeState{}, d, p);
    EXPECT_TRUE(r.beta.empty());
    EXPECT_NEAR(r.primal_objective, 0.5, 1e-12);
    EXPECT_NEAR(r.dual_bound, 0.5, 1e-12);
}

TEST(SolveNode, AllFixedToZero)
{
    const Dataset d = oracle::random_normalized(20, 6, 12);
    NodeState node;
    node.fixed_zero = {0, 1, 2, 3, 4, 5};
    const RelaxResult r = solve_node(node, d, PenaltyParams(0.01, 0.01, infinity));
    EXPECT_TRUE(r.beta.empty());
    EXPECT_NEAR(r.primal_objective, 0.5, 1e-12);
    EXPECT_NEAR(r.dual_bound, 0.5, 1e-12);
}

TEST(SolveNode, RootAgreesWithReference)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = oracle::random_normalized(30, 10, 20 + seed, 0.3, 3);
        for (double m : {infinity, 0.5, 0.15}) {
            const PenaltyParams p(0.01, 0.03, m);
            const RelaxResult r = solve_node(NodeState{}, d, p, tight());
            const auto ref = oracle::reference_relaxation(d.x, d.y, 0.01, 0.03, m);
            EXPECT_NEAR(r.primal_objective, ref.objective, 1e-5 * ref.objective);
            EXPECT_NEAR(r.dual_bound, ref.objective, 1e-5 * ref.objective);
            EXPECT_LE(r.dual_bound, r.primal_objective + 1e-9);
        }
    }
}

TEST(SolveNode, GeneralNodeAgreesWithReference)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = oracle::random_normalized(30, 12, 40 + seed, 0.3, 3);
        NodeState node;
        node.fixed_zero = {0, 7};
        node.fixed_one = {3, 9};
        for (double m : {infinity, 0.4}) {
            const PenaltyParams p(0.02, 0.05, m);
            const RelaxResult r = solve_node(node, d, p, tight());
            const auto ref = oracle::reference_relaxation(d.x, d.y, 0.02, 0.05, m, status_of(node, 12));
            EXPECT_NEAR(r.primal_objective, ref.objective, 1e-6 * ref.objective);
            EXPECT_NEAR(r.dual_bound, ref.objective, 1e-6 * ref.objective);
            EXPECT_EQ(r.beta.count(0) + r.beta.count(7), 0u);
        }
    }
}

TEST(SolveNode, TerminationCertificateAndBox)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset d = oracle::random_normalized(50, 80, 60 + seed, 0.2, 5);
        const double m = seed % 2 ? 0.2 : infinity;
        const PenaltyParams p(0.005, 0.01, m);
        NodeState node;
        node.fixed_one = {static_cast<index_t>(seed)};
        const RelaxResult r = solve_node(node, d, p);
        EXPECT_TRUE(check_violations(r.beta, r.residual, d, p, node).empty());
        for (const auto& [i, v] : r.beta) EXPECT_LE(std::abs(v), m + 1e-12);
        EXPECT_LE((r.residual - residual_of(r.beta, d)).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(SolveNode, WarmStartMatchesColdFullActiveSet)
{
    const Dataset d = oracle::random_normalized(40, 25, 77, 0.3, 4);
    const PenaltyParams p(0.01, 0.02, infinity);
    const RelaxResult parent = solve_node(NodeState{}, d, p, tight());
    ASSERT_FALSE(parent.beta.empty());
    const index_t j = parent.beta.begin()->first;

    NodeState warm;
    warm.fixed_zero = {j};
    warm.warm_start = parent.beta;
    warm.warm_start.erase(j);
    warm.active_set = set_difference(parent.active_set, {j});
    NodeState cold;
    cold.fixed_zero = {j};
    cold.active_set.resize(25);
    std::iota(cold.active_set.begin(), cold.active_set.end(), 0);

    const double a = solve_node(warm, d, p).primal_objective;
    const double b = solve_node(cold, d, p).primal_objective;
    EXPECT_NEAR(a, b, 1e-6 * b);
}

TEST(BigMRelaxation, MatchesReference)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset d = oracle::random_normalized(30, 12, 90 + seed, 0.2, 3);
        const PenaltyParams p(0.05, 0.01, 0.6);
        const auto [beta, obj] = solve_big_m_relaxation(d, p, tight());
        const auto ref = oracle::reference_big_m(d.x, d.y, 0.05, 0.01, 0.6);
        EXPECT_NEAR(obj, ref.objective, 1e-8);
    }
}
