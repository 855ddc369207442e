#pragma once

#include <cmath>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenkit/solver.hpp"

namespace screenkit {

struct PathSpec {
    std::vector<double> lambdas;

    void validate() const
    {
        if (lambdas.empty())
            throw std::invalid_argument("empty lambda grid");
        for (std::size_t t = 0; t < lambdas.size(); ++t) {
            if (!(lambdas[t] > 0.0) || !std::isfinite(lambdas[t]))
                throw std::invalid_argument("lambda grid values must be positive and finite");
            if (t > 0 && !(lambdas[t] < lambdas[t - 1]))
                throw std::invalid_argument("lambda grid must be strictly decreasing");
        }
    }
};

/// lambda_t = lambda_max * ratio^(t / (T - 1)), t = 0..T-1.
inline PathSpec lambda_grid(double lambda_max, double ratio = 0.01, std::size_t count = 100)
{
    if (count < 2)
        throw std::invalid_argument("lambda grid needs at least two points");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("lambda grid ratio must lie strictly between 0 and 1");
    if (!(lambda_max > 0.0))
        throw std::invalid_argument("lambda_max must be positive");
    PathSpec spec;
    spec.lambdas.reserve(count);
    for (std::size_t t = 0; t < count; ++t)
        spec.lambdas.push_back(lambda_max *
                               std::pow(ratio, static_cast<double>(t) / static_cast<double>(count - 1)));
    spec.lambdas.back() = lambda_max * ratio;
    spec.validate();
    return spec;
}

struct PathPoint {
    double lambda = 0.0;
    std::optional<SolveOutput> result;
    /// Groups removed by the sequential screen before the solve started.
    std::size_t n_sequential = 0;
    std::string error;
};

struct PathResult {
    std::vector<PathPoint> points;
};

/**
 * Sequential safe screening: the previous solution is re-evaluated in the
 * problem at the new weight. dual_point rescales its residual with a fresh
 * alpha, so the center is dual feasible for the new problem.
 */
inline ScreenState sequential_screen(const Problem& pb, const Vector& beta_prev)
{
    ScreenState state(pb.n_groups());
    prescreen_zero_groups(state, pb);
    const Vector resid = residual(pb, beta_prev);
    const DualPoint dp = dual_point(pb, resid, state.active());
    const GapEval ev = duality_gap(pb, beta_prev, resid, dp.theta, state.active());
    safe_screen(state, gap_safe_ball(dp.theta, screening_gap(pb, ev), pb.loss().dual_strong_concavity()), pb, 0);
    return state;
}

/**
 * Solves along a decreasing grid with warm starts. Safe masks are specific to
 * one lambda and are rebuilt at every point; only the iterate and the dual
 * point carry over. A failure at one lambda is recorded and the path goes on.
 */
inline PathResult solve_path(const Problem& pb, const PathSpec& spec, const SolveOptions& opts)
{
    spec.validate();
    opts.validate();
    PathResult out;
    std::optional<Vector> beta_prev;
    std::optional<Vector> theta_prev;
    std::optional<double> lambda_prev;
    for (double lambda : spec.lambdas) {
        PathPoint point;
        point.lambda = lambda;
        try {
            const Problem pt = pb.with_lambda(lambda);
            SolveInit init;
            init.beta = beta_prev;
            if (beta_prev && opts.rule != Rule::None) {
                init.state = sequential_screen(pt, *beta_prev);
                point.n_sequential = init.state->n_safe();
            }
            init.theta_prev = theta_prev;
            init.lambda_prev = lambda_prev;
            SolveOutput res = solve(pt, opts, init);
            beta_prev = res.solution.beta;
            theta_prev = dual_point(pt, res.solution.beta).theta;
            lambda_prev = lambda;
            point.result = std::move(res);
        } catch (const std::exception& e) {
            point.error = e.what();
        }
        out.points.push_back(std::move(point));
    }
    return out;
}

} // namespace screenkit
