#include <gtest/gtest.h>

#include "screenkit/identification.hpp"
#include "screenkit/io.hpp"

using namespace screenkit;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

struct Identity2 {
    DesignMatrix X{DenseMatrix::Identity(2, 2)};
    GroupStructure G = GroupStructure::singletons(X);
    QuadraticLoss loss;

    explicit Identity2(Vector y) : loss(std::move(y)) {}
    Problem problem(Penalty pen) const { return Problem(X, G, loss, pen); }
};

} // namespace

TEST(DualPoint, LassoRescaling)
{
    const Identity2 s(vec({1, 0}));
    const DualPoint a = dual_point(s.problem(Penalty::l1(0.5)), Vector::Zero(2));
    EXPECT_DOUBLE_EQ(a.scale, 2.0);
    EXPECT_EQ(a.theta, vec({0.5, 0}));
    const DualPoint b = dual_point(s.problem(Penalty::l1(2.0)), Vector::Zero(2));
    EXPECT_EQ(b.scale, 1.0);
    EXPECT_EQ(b.theta, vec({1, 0}));
}

TEST(DualPoint, FeasibleForEveryPenaltyAtRandomIterates)
{
    const Dataset ds = make_synthetic({30, 40, 5, 2.0, 3, false});
    const auto single = GroupStructure::singletons(ds.X);
    const auto blocks = GroupStructure::contiguous(ds.X, 4);
    const QuadraticLoss loss(ds.y);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        Vector beta(40);
        for (int j = 0; j < 40; ++j)
            beta[j] = normal(rng);
        for (const auto& [pen, groups] : {std::pair{Penalty::l1(0.3), &single}, std::pair{Penalty::group_l2(0.5), &blocks},
                                          std::pair{Penalty::elastic_net(0.3, 0.0), &single}}) {
            const Problem pb(ds.X, *groups, loss, pen);
            const DualPoint dp = dual_point(pb, beta);
            EXPECT_LE(dual_gauge(pen, *groups, adjoint(ds.X, dp.theta)), 1.0 + 1e-12);
            EXPECT_GE(dp.scale, 1.0);
        }
    }
}

TEST(DualPoint, NonNegativeTranslationIsFeasible)
{
    const Dataset ds = make_synthetic({30, 40, 5, 2.0, 4, true});
    const auto single = GroupStructure::singletons(ds.X);
    const QuadraticLoss loss(ds.y);
    const Problem pb(ds.X, single, loss, Penalty::non_negative());
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Vector beta(40);
        for (int j = 0; j < 40; ++j)
            beta[j] = unif(rng);
        const DualPoint dp = dual_point(pb, beta);
        ASSERT_TRUE(std::isfinite(dp.scale));
        EXPECT_LE(adjoint(ds.X, dp.theta).maxCoeff(), 1e-12);
        EXPECT_TRUE(duality_gap(pb, beta, dp).finite());
    }
}

TEST(DualityGap, Examples)
{
    const Identity2 s(vec({1, 0}));
    const Problem pb = s.problem(Penalty::l1(0.5));
    const GapEval ev = duality_gap(pb, Vector::Zero(2), DualPoint{vec({0.5, 0}), 2.0, 0.0});
    EXPECT_DOUBLE_EQ(ev.primal, 0.5);
    EXPECT_DOUBLE_EQ(ev.dual, 0.375);
    EXPECT_DOUBLE_EQ(ev.gap, 0.125);

    const Problem big = s.problem(Penalty::l1(2.0));
    EXPECT_EQ(duality_gap(big, Vector::Zero(2), DualPoint{vec({1, 0}), 1.0, 0.0}).gap, 0.0);
}

TEST(DualityGap, InfeasiblePrimalGivesInfiniteGap)
{
    const Identity2 s(vec({1, 0}));
    const Problem pb = s.problem(Penalty::non_negative());
    const GapEval ev = duality_gap(pb, vec({-1, 0}), DualPoint{Vector::Zero(2), 1.0, 0.0});
    EXPECT_FALSE(ev.finite());
    EXPECT_EQ(gap_safe_ball(Vector::Zero(2), ev.gap, 1.0).radius, kInfinity);
}

TEST(DualityGap, ZeroAtOptimum)
{
    const Dataset ds = make_synthetic({30, 60, 5, 3.0, 7, false});
    const auto G = GroupStructure::singletons(ds.X);
    const QuadraticLoss loss(ds.y);
    const Problem base(ds.X, G, loss, Penalty::l1(1.0));
    const Problem pb = base.with_lambda(lambda_max(base) / 5);
    const ReferenceSolve ref = reference_solve(pb);
    EXPECT_LE(ref.gap, 2e-12 * pb.y_sq_norm());
}

TEST(DualityGap, WeakDualityAtRandomPairs)
{
    const Dataset ds = make_synthetic({20, 30, 4, 2.0, 8, false});
    const auto G = GroupStructure::singletons(ds.X);
    const QuadraticLoss loss(ds.y);
    const Problem pb(ds.X, G, loss, Penalty::l1(0.4));
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 200; ++trial) {
        Vector beta(30), other(30);
        for (int j = 0; j < 30; ++j) {
            beta[j] = normal(rng);
            other[j] = normal(rng);
        }
        const DualPoint dp = dual_point(pb, other);
        EXPECT_GE(duality_gap(pb, beta, dp).gap, 0.0);
    }
}

TEST(GapSafeBall, Radius)
{
    EXPECT_DOUBLE_EQ(gap_safe_ball(Vector::Zero(1), 0.125, 1.0).radius, 0.5);
    EXPECT_EQ(gap_safe_ball(Vector::Zero(1), 0.0, 1.0).radius, 0.0);
    EXPECT_DOUBLE_EQ(gap_safe_ball(Vector::Zero(1), 2.0, 1.0).radius, 2.0);
    const double gap = 0.37;
    const double r = gap_safe_ball(Vector::Zero(1), gap, 1.0).radius;
    EXPECT_NEAR(r * r, 2.0 * gap, 1e-12 * 2.0 * gap);
}

TEST(LambdaMax, Examples)
{
    const Identity2 s(vec({1, 0}));
    EXPECT_DOUBLE_EQ(lambda_max(s.problem(Penalty::l1(1.0))), 1.0);
    const Identity2 zero(vec({0, 0}));
    EXPECT_EQ(lambda_max(zero.problem(Penalty::l1(1.0))), 0.0);
    const Identity2 g(vec({3, 4}));
    const GroupStructure one(g.X, {{0, 1}});
    EXPECT_DOUBLE_EQ(lambda_max(Problem(g.X, one, g.loss, Penalty::group_l2(1.0))), 5.0);
    EXPECT_THROW(lambda_max(s.problem(Penalty::non_negative())), std::invalid_argument);
}

TEST(Problem, ValidatesShapes)
{
    const Identity2 s(vec({1, 0}));
    const QuadraticLoss wrong(vec({1, 0, 0}));
    EXPECT_THROW(Problem(s.X, s.G, wrong, Penalty::l1(1.0)), DimensionError);
    const GroupStructure one(s.X, {{0, 1}});
    EXPECT_THROW(Problem(s.X, one, s.loss, Penalty::box(0, 1)), DimensionError);
}

TEST(DualConvergence, FinalDualPointApproachesReference)
{
    const Dataset ds = make_synthetic({40, 80, 6, 3.0, 10, false});
    const auto G = GroupStructure::singletons(ds.X);
    const QuadraticLoss loss(ds.y);
    const Problem base(ds.X, G, loss, Penalty::l1(1.0));
    const Problem pb = base.with_lambda(lambda_max(base) / 10);
    const ReferenceSolve ref = reference_solve(pb);
    SolveOptions opts;
    opts.tol_eps = 1e-12;
    const SolveOutput run = solve(pb, opts);
    const DualPoint dp = dual_point(pb, run.solution.beta);
    EXPECT_LE((dp.theta - ref.theta).norm(), 1e-6);
    EXPECT_NEAR(dp.scale, 1.0, 1e-6);
    // Radii shrink below any threshold along the run.
    EXPECT_LT(run.trace.entries.back().radius, 1e-5);
}

TEST(ScreeningGap, RoundingFloor)
{
    const Identity2 s(vec({1, 0}));
    const Problem pb = s.problem(Penalty::l1(0.5));
    const GapEval exact{2.0, 2.0, 0.0};
    const double floor = screening_gap(pb, exact);
    EXPECT_GT(floor, 0.0);
    EXPECT_DOUBLE_EQ(floor, 4.0 * 4.0 * std::numeric_limits<double>::epsilon());
    EXPECT_EQ(screening_gap(pb, GapEval{2.0, 1.0, 1.0}), 1.0);
    EXPECT_EQ(screening_gap(pb, GapEval{}), kInfinity);
}
