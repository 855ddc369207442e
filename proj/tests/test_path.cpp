#include <gtest/gtest.h>

#include <limits>

#include "screenkit/identification.hpp"
#include "screenkit/io.hpp"
#include "screenkit/path.hpp"

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

struct Instance {
    Dataset ds;
    GroupStructure groups;
    QuadraticLoss loss;
    Problem pb;

    Instance(const SyntheticSpec& spec, Penalty pen, std::size_t group_size = 1)
        : ds(make_synthetic(spec)), groups(GroupStructure::contiguous(ds.X, group_size)), loss(ds.y),
          pb(ds.X, groups, loss, pen)
    {
    }
};

} // namespace

TEST(LambdaGrid, ThreePoints)
{
    const PathSpec s = lambda_grid(1.0, 0.01, 3);
    ASSERT_EQ(s.lambdas.size(), 3u);
    EXPECT_DOUBLE_EQ(s.lambdas[0], 1.0);
    EXPECT_DOUBLE_EQ(s.lambdas[1], 0.1);
    EXPECT_DOUBLE_EQ(s.lambdas[2], 0.01);
}

TEST(LambdaGrid, TwoPointsAreTheEndpoints)
{
    const PathSpec s = lambda_grid(4.0, 0.25, 2);
    ASSERT_EQ(s.lambdas.size(), 2u);
    EXPECT_EQ(s.lambdas[0], 4.0);
    EXPECT_EQ(s.lambdas[1], 1.0);
}

TEST(LambdaGrid, DefaultIsDenseAndGeometric)
{
    const PathSpec s = lambda_grid(2.0);
    ASSERT_EQ(s.lambdas.size(), 100u);
    EXPECT_DOUBLE_EQ(s.lambdas.back(), 0.02);
    const double q = s.lambdas[1] / s.lambdas[0];
    for (std::size_t t = 1; t < s.lambdas.size(); ++t)
        EXPECT_NEAR(s.lambdas[t] / s.lambdas[t - 1], q, 1e-12);
}

TEST(LambdaGrid, InvalidArgumentsRejected)
{
    EXPECT_THROW(lambda_grid(1.0, 1.0, 5), std::invalid_argument);
    EXPECT_THROW(lambda_grid(1.0, 0.0, 5), std::invalid_argument);
    EXPECT_THROW(lambda_grid(1.0, 0.1, 1), std::invalid_argument);
    EXPECT_THROW(lambda_grid(0.0, 0.1, 5), std::invalid_argument);
}

TEST(PathSpec, Validation)
{
    EXPECT_THROW(PathSpec{}.validate(), std::invalid_argument);
    EXPECT_THROW((PathSpec{{1.0, 1.0}}.validate()), std::invalid_argument);
    EXPECT_THROW((PathSpec{{1.0, 2.0}}.validate()), std::invalid_argument);
    EXPECT_THROW((PathSpec{{1.0, -0.5}}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((PathSpec{{1.0, 0.5}}.validate()));
}

TEST(SolvePath, FirstPointAtLambdaMaxIsZero)
{
    const Instance inst({30, 60, 5, 3.0, 1, false}, Penalty::l1(1.0));
    const double lmax = lambda_max(inst.pb);
    const PathResult res = solve_path(inst.pb, lambda_grid(lmax, 0.1, 5), SolveOptions{});
    ASSERT_TRUE(res.points[0].result);
    EXPECT_TRUE(res.points[0].result->solution.beta.isZero(0.0));
    EXPECT_EQ(res.points[0].result->solution.epochs_used, 0u);
    // The second center is y rescaled onto the new dual feasible set.
    const Problem p1 = inst.pb.with_lambda(res.points[1].lambda);
    const DualPoint dp = dual_point(p1, Vector::Zero(60));
    EXPECT_TRUE(dp.theta.isApprox(inst.ds.y * (res.points[1].lambda / lmax), 1e-12));
}

TEST(SequentialScreen, SameLambdaAtOptimumEqualsDynamicScreen)
{
    const Instance inst({40, 100, 6, 3.0, 2, false}, Penalty::l1(1.0));
    const Problem pb = inst.pb.with_lambda(lambda_max(inst.pb) / 5);
    SolveOptions opts;
    opts.tol_eps = 1e-12;
    opts.rule = Rule::None;
    const SolveOutput out = solve(pb, opts);
    const ScreenState seq = sequential_screen(pb, out.solution.beta);
    ScreenState dyn(pb.n_groups());
    prescreen_zero_groups(dyn, pb);
    const DualPoint dp = dual_point(pb, out.solution.beta);
    safe_screen(dyn, gap_safe_ball(dp.theta, duality_gap(pb, out.solution.beta, dp).gap, 1.0), pb, 0);
    EXPECT_EQ(seq.active(), dyn.active());
}

TEST(SolvePath, ScreenedAndUnscreenedPathsAgree)
{
    for (const auto& [pen, gsize] : {std::pair{Penalty::l1(1.0), std::size_t{1}},
                                     std::pair{Penalty::group_l2(1.0), std::size_t{4}},
                                     std::pair{Penalty::elastic_net(1.0, 0.5), std::size_t{1}}}) {
        const Instance inst({40, 120, 8, 3.0, 3, false}, pen, gsize);
        const PathSpec grid = lambda_grid(lambda_max(inst.pb), 0.05, 8);
        SolveOptions opts;
        opts.tol_eps = 1e-12;
        opts.rule = Rule::None;
        const PathResult plain = solve_path(inst.pb, grid, opts);
        for (Rule r : {Rule::DynamicGap, Rule::StrongThenSafe, Rule::WorkingSet}) {
            opts.rule = r;
            const PathResult screened = solve_path(inst.pb, grid, opts);
            for (std::size_t t = 0; t < grid.lambdas.size(); ++t) {
                ASSERT_TRUE(plain.points[t].result && screened.points[t].result);
                EXPECT_TRUE(screened.points[t].result->solution.converged);
                EXPECT_LE((plain.points[t].result->solution.beta - screened.points[t].result->solution.beta)
                              .lpNorm<Eigen::Infinity>(),
                          1e-6)
                    << to_string(pen.kind) << " " << to_string(r) << " t=" << t;
            }
        }
    }
}

TEST(SolvePath, NoFalseEliminationsAgainstReference)
{
    for (std::uint64_t seed = 10; seed < 13; ++seed) {
        const Instance inst({40, 120, 8, 3.0, seed, false}, Penalty::l1(1.0));
        const PathSpec grid = lambda_grid(lambda_max(inst.pb), 0.02, 10);
        SolveOptions opts;
        opts.tol_eps = 1e-8;
        const PathResult res = solve_path(inst.pb, grid, opts);
        for (std::size_t t = 0; t < grid.lambdas.size(); ++t) {
            const Problem pt = inst.pb.with_lambda(grid.lambdas[t]);
            const ReferenceSolve ref = reference_solve(pt);
            const ScreenState& st = res.points[t].result->solution.state;
            for (std::size_t g = 0; g < pt.n_groups(); ++g)
                if (!st.is_active(g) && st.kind(g) == ScreenKind::Safe) {
                    EXPECT_LE(std::abs(ref.beta[static_cast<Eigen::Index>(g)]), 1e-7)
                        << "seed " << seed << " t=" << t << " group " << g;
                }
        }
    }
}

TEST(SolvePath, SequentialCenterIsFeasibleAtTheNewLambda)
{
    const Instance inst({40, 100, 6, 3.0, 4, false}, Penalty::group_l2(1.0), 5);
    const PathSpec grid = lambda_grid(lambda_max(inst.pb), 0.05, 6);
    SolveOptions opts;
    opts.tol_eps = 1e-8;
    const PathResult res = solve_path(inst.pb, grid, opts);
    for (std::size_t t = 1; t < grid.lambdas.size(); ++t) {
        const Problem pt = inst.pb.with_lambda(grid.lambdas[t]);
        const Vector& prev = res.points[t - 1].result->solution.beta;
        const DualPoint dp = dual_point(pt, prev);
        EXPECT_LE(dual_gauge(pt.penalty(), pt.groups(), adjoint(pt.X(), dp.theta)), 1.0 + 1e-12);
    }
}

TEST(SolvePath, FailuresAreRecordedAndThePathContinues)
{
    const DesignMatrix X(DenseMatrix::Identity(2, 2));
    const auto G = GroupStructure::singletons(X);
    const QuadraticLoss loss(vec({std::numeric_limits<double>::quiet_NaN(), 1.0}));
    const Problem pb(X, G, loss, Penalty::l1(1.0));
    const PathResult res = solve_path(pb, PathSpec{{1.0, 0.5, 0.25}}, SolveOptions{});
    ASSERT_EQ(res.points.size(), 3u);
    for (const auto& pt : res.points) {
        EXPECT_FALSE(pt.result);
        EXPECT_FALSE(pt.error.empty());
    }
}

TEST(SolvePath, InvalidSpecThrowsUpFront)
{
    const Instance inst({20, 30, 3, 3.0, 5, false}, Penalty::l1(1.0));
    EXPECT_THROW(solve_path(inst.pb, PathSpec{{0.5, 1.0}}, SolveOptions{}), std::invalid_argument);
}
