#include <gtest/gtest.h>

#include <vector>

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
    QuadraticLoss loss{vec({1, 0})};
    Problem problem(double lambda) const { return Problem(X, G, loss, Penalty::l1(lambda)); }
};

} // namespace

TEST(SafeScreen, ZeroRadiusAtOptimumScreensInactiveFeature)
{
    const Identity2 s;
    const Problem pb = s.problem(0.7);
    ScreenState state(2);
    const auto res = safe_screen(state, SafeBall{vec({0.7, 0}), 0.0}, pb, 3);
    EXPECT_EQ(res.count, 1u);
    EXPECT_TRUE(state.is_active(0));
    EXPECT_FALSE(state.is_active(1));
    EXPECT_EQ(state.screened_at(1), 3);
    EXPECT_EQ(state.kind(1), ScreenKind::Safe);
    EXPECT_EQ(state.fixed_value(1), 0.0);
}

TEST(SafeScreen, InfiniteRadiusScreensNothing)
{
    const Identity2 s;
    ScreenState state(2);
    EXPECT_EQ(safe_screen(state, SafeBall{vec({0, 0}), kInfinity}, s.problem(0.7), 0).count, 0u);
    EXPECT_EQ(state.n_active(), 2u);
}

TEST(SafeScreen, AboveLambdaMaxScreensEverything)
{
    const Identity2 s;
    const Problem pb = s.problem(2.0);
    const Vector beta = Vector::Zero(2);
    const DualPoint dp = dual_point(pb, beta);
    const GapEval ev = duality_gap(pb, beta, dp);
    EXPECT_EQ(ev.gap, 0.0);
    ScreenState state(2);
    EXPECT_EQ(safe_screen(state, gap_safe_ball(dp.theta, ev.gap, 1.0), pb, 0).count, 2u);
}

TEST(ScreenState, SafeEliminationsArePermanent)
{
    ScreenState state(3);
    state.screen(0, 0.0, 1, ScreenKind::Safe);
    state.screen(1, 0.0, 1, ScreenKind::Strong);
    EXPECT_FALSE(state.reactivate(0));
    EXPECT_TRUE(state.reactivate(1));
    EXPECT_FALSE(state.is_active(0));
    EXPECT_TRUE(state.is_active(1));
    // A second screen of a screened group keeps the first record.
    state.screen(0, 5.0, 9, ScreenKind::Aggressive);
    EXPECT_EQ(state.screened_at(0), 1);
    EXPECT_EQ(state.kind(0), ScreenKind::Safe);
    EXPECT_EQ(state.n_safe(), 1u);
    EXPECT_EQ(state.n_unsafe(), 0u);
}

TEST(StrongRule, HandExample)
{
    const Identity2 s;
    const GroupMask discard = strong_rule_set(vec({1, 0}), 1.0, 0.7, s.problem(0.7));
    EXPECT_FALSE(discard[0]);
    EXPECT_TRUE(discard[1]);
}

TEST(StrongRule, EqualLambdasGiveExactRule)
{
    const Identity2 s;
    const GroupMask discard = strong_rule_set(vec({0.7, 0}), 0.7, 0.7, s.problem(0.7));
    EXPECT_FALSE(discard[0]);
    EXPECT_TRUE(discard[1]);
}

TEST(StrongRule, LargeStepDiscardsNothing)
{
    const Identity2 s;
    const GroupMask discard = strong_rule_set(vec({1, 0}), 1.0, 0.4, s.problem(0.4));
    EXPECT_FALSE(discard[0]);
    EXPECT_FALSE(discard[1]);
    EXPECT_THROW(strong_rule_set(vec({1, 0}), 0.5, 0.7, s.problem(0.7)), std::invalid_argument);
}

TEST(PreviousActiveSet, Examples)
{
    const Identity2 s;
    const GroupMask all = previous_active_set(vec({0, 0}), 0.5, s.problem(0.5));
    EXPECT_TRUE(all[0] && all[1]);
    const GroupMask one = previous_active_set(vec({0.7, 0}), 0.5, s.problem(0.5));
    EXPECT_FALSE(one[0]);
    EXPECT_TRUE(one[1]);
    const GroupMask exact = previous_active_set(vec({0.7, 0}), 0.7, s.problem(0.7));
    EXPECT_FALSE(exact[0]);
    EXPECT_TRUE(exact[1]);
}

TEST(AggressiveRadius, Examples)
{
    const std::vector<double> flat(12, 1.0);
    EXPECT_EQ(aggressive_radius(flat, 10, 10, 0.5, 0.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(aggressive_radius(flat, 10, 10, 0.5, 1.0, 1.0), std::sqrt(2.0 * 0.5));
    std::vector<double> hist(11, 0.95);
    hist[0] = 1.0;
    hist[10] = 0.9;
    EXPECT_NEAR(aggressive_radius(hist, 10, 10, 0.5, 1e-3, 1.0), std::sqrt(2.0 * (0.999 * 0.1 + 0.001 * 0.5)), 1e-12);
    EXPECT_NEAR(aggressive_radius(hist, 10, 10, 0.5, 1e-3, 1.0), 0.448107, 1e-6);
    // Too little history falls back to the safe radius.
    EXPECT_DOUBLE_EQ(aggressive_radius(hist, 5, 10, 0.5, 1e-3, 1.0), 1.0);
}

TEST(WorkingSetScores, Examples)
{
    const Identity2 s;
    const auto d = working_set_scores(vec({0.5, 0}), s.problem(0.5));
    EXPECT_EQ(d[0], 0.0);
    EXPECT_DOUBLE_EQ(d[1], 0.5);
}

TEST(WorkingSetScores, DuplicateColumnsScoreAlikeAndZeroColumnsNeverEnter)
{
    DenseMatrix d(3, 3);
    d << 1, 1, 0, 2, 2, 0, -1, -1, 0;
    const DesignMatrix X(d);
    const auto G = GroupStructure::singletons(X);
    const QuadraticLoss loss(vec({1, 0, 1}));
    const Problem pb(X, G, loss, Penalty::l1(3.0));
    const auto scores = working_set_scores(vec({0.3, 0.2, -0.1}), pb);
    EXPECT_EQ(scores[0], scores[1]);
    EXPECT_EQ(scores[2], kInfinity);
}

TEST(KktRepair, NothingUnsafeMeansNoViolators)
{
    const Identity2 s;
    ScreenState state(2);
    state.screen(1, 0.0, 0, ScreenKind::Safe);
    EXPECT_TRUE(kkt_repair(Vector::Zero(2), s.problem(0.7), state).empty());
}

TEST(KktRepair, OptimumHasNoViolators)
{
    const Identity2 s;
    ScreenState state(2);
    state.screen(1, 0.0, 0, ScreenKind::Strong);
    EXPECT_TRUE(kkt_repair(vec({0.3, 0}), s.problem(0.7), state).empty());
}

TEST(KktRepair, WronglyDiscardedActiveFeatureIsReported)
{
    const Identity2 s;
    ScreenState state(2);
    state.screen(0, 0.0, 0, ScreenKind::Strong);
    const auto v = kkt_repair(Vector::Zero(2), s.problem(0.7), state);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], 0u);
}

// theta_ref is only known up to its gap ball; active groups sit within
// rounding of the boundary, so the test is run with the reference radius.
TEST(SafeScreen, ReferenceBallMarksComplementOfActiveSet)
{
    const Dataset ds = make_synthetic({40, 120, 8, 3.0, 21, false});
    const auto G = GroupStructure::singletons(ds.X);
    const QuadraticLoss loss(ds.y);
    const Problem base(ds.X, G, loss, Penalty::l1(1.0));
    const Problem pb = base.with_lambda(lambda_max(base) / 8);
    const ReferenceSolve ref = reference_solve(pb);
    const GroupMask in_a = oracle_active_set(ref.theta, pb);
    ScreenState state(pb.n_groups());
    const double radius = gap_safe_ball(ref.theta, ref.gap, 1.0).radius;
    ASSERT_LT(radius, 1e-4);
    safe_screen(state, SafeBall{ref.theta, radius}, pb, 0);
    for (std::size_t g = 0; g < pb.n_groups(); ++g)
        EXPECT_EQ(state.is_active(g), static_cast<bool>(in_a[g])) << "group " << g;
}

TEST(SafeScreen, OracleActiveSetIsNeverScreened)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = make_synthetic({40, 100, 6, 3.0, 30 + seed, false});
        const auto G = GroupStructure::contiguous(ds.X, 4);
        const QuadraticLoss loss(ds.y);
        const Problem base(ds.X, G, loss, Penalty::group_l2(1.0));
        const Problem pb = base.with_lambda(lambda_max(base) / 5);
        const ReferenceSolve ref = reference_solve(pb);
        const GroupMask in_a = oracle_active_set(ref.theta, pb);
        SolveOptions opts;
        opts.tol_eps = 1e-10;
        opts.record_masks = true;
        const SolveOutput out = solve(pb, opts);
        for (const auto& e : out.trace.entries)
            for (std::size_t g = 0; g < pb.n_groups(); ++g)
                if (in_a[g]) {
                    EXPECT_TRUE(e.active[g]) << "seed " << seed << " epoch " << e.epoch << " group " << g;
                }
    }
}
