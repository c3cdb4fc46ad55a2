#include <random>
#include <gtest/gtest.h>
#include <l0bnb/scalar_kernels.hpp>
#include "oracles.hpp"

using namespace l0bnb;

TEST(PenaltyParams, RejectsBadConfigurations)
{
    EXPECT_THROW(PenaltyParams(0.0, 1.0, 1.0), config_error);
    EXPECT_THROW(PenaltyParams(-1.0, 1.0, 1.0), config_error);
    EXPECT_THROW(PenaltyParams(1.0, -1.0, 1.0), config_error);
    EXPECT_THROW(PenaltyParams(1.0, 1.0, 0.0), config_error);
    EXPECT_THROW(PenaltyParams(1.0, 0.0, infinity), config_error);
    EXPECT_NO_THROW(PenaltyParams(1.0, 0.0, 2.0));
}

TEST(PenaltyParams, RegimeClassification)
{
    EXPECT_EQ(PenaltyParams(1, 1, 1).regime(), Regime::reverse_huber); // tie
    EXPECT_EQ(PenaltyParams(1, 1, 0.999).regime(), Regime::l1);
    EXPECT_EQ(PenaltyParams(1, 0, 5).regime(), Regime::l1);
    EXPECT_EQ(PenaltyParams(1, 0.01, infinity).regime(), Regime::reverse_huber);
}

TEST(PenaltyParams, ViolationThreshold)
{
    EXPECT_DOUBLE_EQ(PenaltyParams(1, 1, 2).violation_threshold(), 2.0);
    EXPECT_DOUBLE_EQ(PenaltyParams(1, 0.01, 1).violation_threshold(), 1.01);
}

TEST(ReverseHuber, Values)
{
    EXPECT_EQ(reverse_huber(0.0), 0.0);
    EXPECT_EQ(reverse_huber(1.0), 1.0);
    EXPECT_EQ(reverse_huber(2.0), 2.5);
    EXPECT_EQ(reverse_huber(-2.0), 2.5);
}

TEST(BoxSoftThreshold, Branches)
{
    EXPECT_EQ(box_soft_threshold(0.1, 0.2, 1.0), 0.0);
    EXPECT_NEAR(box_soft_threshold(0.5, 0.2, 1.0), 0.3, 1e-15);
    EXPECT_EQ(box_soft_threshold(-2.0, 0.5, 1.0), -1.0);
    EXPECT_EQ(box_soft_threshold(7.0, 2.0, infinity), 5.0);
}

TEST(PenaltyPsi, Values)
{
    EXPECT_EQ(penalty_psi(0.0, PenaltyParams(3, 2, 1)), 0.0);
    EXPECT_NEAR(penalty_psi(0.5, PenaltyParams(1, 1, 10)), 1.0, 1e-15);
    EXPECT_NEAR(penalty_psi(0.5, PenaltyParams(1, 0.01, 1)), 0.505, 1e-15);
    EXPECT_THROW(penalty_psi(1.5, PenaltyParams(1, 0.01, 1)), domain_error);
}

TEST(PenaltyPsi, ContinuousAtKnee)
{
    for (double l0 : {0.1, 1.0, 3.0}) {
        for (double l2 : {0.01, 0.5, 2.0}) {
            const PenaltyParams p(l0, l2, infinity);
            const double k = p.huber_knee();
            const double linear = 2 * std::sqrt(l0 * l2) * k;
            const double quadratic = l0 + l2 * k * k;
            EXPECT_NEAR(linear, quadratic, 1e-12);
            EXPECT_NEAR(penalty_psi(k, p), linear, 1e-12);
        }
    }
}

TEST(PenaltyPsiTilde, Values)
{
    EXPECT_EQ(penalty_psi_tilde(0.0, PenaltyParams(1, 1, infinity)), 1.0);
    EXPECT_EQ(penalty_psi_tilde(2.0, PenaltyParams(1, 0.5, infinity)), 3.0);
    EXPECT_NEAR(penalty_psi_tilde(1.0, PenaltyParams(0.012, 0.0409, infinity)), 0.0529, 1e-15);
}

TEST(ProxPsi, SpecValuesAgainstGrid)
{
    struct Case { double v, l0, l2, m, expected; };
    for (const Case& c : {Case{1.5, 1, 1, 10, 0.0}, Case{4, 1, 1, 10, 4.0 / 3}, Case{2, 1, 0.01, 1, 0.99}}) {
        const PenaltyParams p(c.l0, c.l2, c.m);
        auto obj = [&](double b) { return 0.5 * (b - c.v) * (b - c.v) + oracle::psi_reference(b, c.l0, c.l2, c.m); };
        const double grid = oracle::grid_min(obj, -c.m, c.m, 1e-6);
        EXPECT_NEAR(grid, c.expected, 2e-6);
        EXPECT_NEAR(prox_psi(c.v, p), c.expected, 1e-12);
    }
}

TEST(ProxPsiTilde, Values)
{
    EXPECT_EQ(prox_psi_tilde(0.0, PenaltyParams(1, 1, 10)), 0.0);
    EXPECT_NEAR(prox_psi_tilde(3.0, PenaltyParams(1, 1, 10)), 1.0, 1e-15);
    EXPECT_EQ(prox_psi_tilde(30.0, PenaltyParams(1, 0.5, 5)), 5.0);
}

TEST(ProxPsi, ContinuousAtBreakpoint)
{
    const PenaltyParams p(0.7, 0.3, infinity);
    const double bp = 2 * std::sqrt(0.7 * 0.3) + p.huber_knee();
    for (double s : {1.0, -1.0}) {
        const double left = prox_psi(s * (bp - 1e-10), p);
        const double right = prox_psi(s * (bp + 1e-10), p);
        EXPECT_NEAR(left, s * p.huber_knee(), 1e-9);
        EXPECT_NEAR(right, s * p.huber_knee(), 1e-9);
    }
}

TEST(ProxPsi, OddAndMonotone)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 200; ++t) {
        const double l0 = std::exp(u(rng)), l2 = std::exp(u(rng)), m = std::exp(u(rng) / 2);
        const PenaltyParams p(l0, l2, t % 3 == 0 ? infinity : m);
        double prev = -infinity;
        for (double v = -10; v <= 10; v += 0.05) {
            const double b = prox_psi(v, p);
            EXPECT_EQ(prox_psi(-v, p), -b);
            EXPECT_GE(b, prev);
            prev = b;
        }
    }
}

TEST(ProxPsi, RandomDrawsMatchGolden)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 500; ++t) {
        const double l0 = std::pow(10.0, 2 * u(rng)), l2 = std::pow(10.0, 2 * u(rng));
        const double m = std::pow(10.0, u(rng));
        const double v = 5 * u(rng);
        const PenaltyParams p(l0, l2, m);
        EXPECT_NEAR(prox_psi(v, p), oracle::prox_psi_reference(v, 1.0, l0, l2, m), 1e-6);
        EXPECT_NEAR(prox_psi_tilde(v, p), oracle::prox_tilde_reference(v, 1.0, l2, m), 1e-12);
    }
}

TEST(ProxBigM, MatchesGrid)
{
    const PenaltyParams p(0.3, 0.2, 0.8);
    for (double v : {-3.0, -0.5, 0.1, 0.4, 2.0}) {
        auto obj = [&](double b) { return 0.5 * (b - v) * (b - v) + penalty_big_m(b, p); };
        EXPECT_NEAR(prox_big_m(v, p), oracle::grid_min(obj, -0.8, 0.8, 1e-6), 2e-6);
    }
}
