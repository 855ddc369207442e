#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "screenkit/duality.hpp"
#include "screenkit/screening.hpp"

namespace screenkit {

enum class Rule { None, Static, DynamicGap, StrongThenSafe, AggressiveThenSafe, WorkingSet };

inline std::string_view to_string(Rule r)
{
    switch (r) {
    case Rule::None: return "none";
    case Rule::Static: return "static";
    case Rule::DynamicGap: return "dynamic_gap";
    case Rule::StrongThenSafe: return "strong_then_safe";
    case Rule::AggressiveThenSafe: return "aggressive_then_safe";
    case Rule::WorkingSet: return "working_set";
    }
    return "?";
}

inline std::optional<Rule> parse_rule(std::string_view s)
{
    for (Rule r : {Rule::None, Rule::Static, Rule::DynamicGap, Rule::StrongThenSafe, Rule::AggressiveThenSafe,
                   Rule::WorkingSet})
        if (to_string(r) == s)
            return r;
    return std::nullopt;
}

struct SolveOptions {
    /// Stop once gap <= tol_eps * ||y||^2.
    double tol_eps = 1e-6;
    std::size_t max_epochs = 20000;
    /// Gap evaluation and screening cadence, in epochs.
    std::size_t screen_every = 10;
    Rule rule = Rule::DynamicGap;
    std::size_t aggressive_s = kAggressiveDelay;
    double aggressive_eta = kAggressiveEta;
    /// Reserved for randomized variants; the cyclic solver is deterministic.
    std::uint64_t seed = 0;
    std::size_t ws_initial = 100;
    double ws_growth_factor = 2.0;
    /// Keep the active mask / iterate at every logged epoch in the trace.
    bool record_masks = false;
    bool record_iterates = false;

    void validate() const
    {
        if (!(tol_eps > 0.0))
            throw std::invalid_argument("tol_eps must be positive");
        if (screen_every < 1)
            throw std::invalid_argument("screen_every must be at least 1");
        if (!(aggressive_eta >= 0.0 && aggressive_eta <= 1.0))
            throw std::invalid_argument("aggressive_eta must lie in [0, 1]");
        if (ws_initial < 1 || !(ws_growth_factor > 1.0))
            throw std::invalid_argument("working set needs ws_initial >= 1 and growth factor > 1");
    }
};

struct TraceEntry {
    long epoch = 0;
    /// 0 = full-problem solve; 1 = unsafe / restricted phase.
    int phase = 0;
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double radius = 0.0;
    std::size_t n_screened = 0;
    std::size_t n_unsafe = 0;
    double ms = 0.0;
    GroupMask active;
    Vector beta;
    /// Dual point the radius is centered on.
    Vector theta;
};

struct SolveTrace {
    std::vector<TraceEntry> entries;
    /// P(b_k) after every epoch k (index 0 is the starting point).
    std::vector<double> primal_per_epoch;
};

struct Solution {
    Vector beta;
    DualPoint dual;
    double final_gap = kInfinity;
    std::size_t epochs_used = 0;
    bool converged = false;
    ScreenState state;
    /// Unsafely discarded groups flagged by the KKT check after the unsafe phase.
    std::vector<std::size_t> unsafe_violators;
};

struct SolveOutput {
    Solution solution;
    SolveTrace trace;
};

/// Optional warm start for `solve`.
struct SolveInit {
    std::optional<Vector> beta;
    /// Safe screening already performed for this problem (e.g. sequential).
    std::optional<ScreenState> state;
    /// Dual point and weight of the previous path step, used by the strong rule.
    std::optional<Vector> theta_prev;
    std::optional<double> lambda_prev;
};

namespace detail {

inline double scalar_prox(const Penalty& pen, double v, double step)
{
    switch (pen.kind) {
    case PenaltyKind::L1: return soft_threshold(v, step * pen.lambda);
    case PenaltyKind::ElasticNet: return soft_threshold(v, step * pen.lambda) / (1.0 + step * pen.lambda * pen.alpha);
    case PenaltyKind::GroupL2: {
        const double t = step * pen.lambda;
        return std::abs(v) <= t ? 0.0 : v - std::copysign(t, v);
    }
    case PenaltyKind::NonNegative: return std::max(v, 0.0);
    case PenaltyKind::Box: return std::clamp(v, pen.lo, pen.hi);
    }
    return v;
}

/// Whether b_g sits on an anchor, and which one.
inline std::optional<double> anchor_of(const Penalty& pen, const Vector& b)
{
    if (pen.kind == PenaltyKind::Box) {
        if ((b.array() == pen.lo).all())
            return pen.lo;
        if ((b.array() == pen.hi).all())
            return pen.hi;
        return std::nullopt;
    }
    if (b.isZero(0.0))
        return 0.0;
    return std::nullopt;
}

} // namespace detail

/**
 * One cyclic pass of proximal block coordinate descent over the active
 * groups, with block step 1 / (nu_f ||X_g||^2). `resid` = y - Xb is updated
 * in place.
 */
inline void cd_epoch(const Problem& pb, Vector& beta, Vector& resid, const GroupMask& active)
{
    const auto& X = pb.X();
    const auto& groups = pb.groups();
    const auto& pen = pb.penalty();
    const double nu = pb.loss().smoothness();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!active[g])
            continue;
        const double gnorm = groups.norm(g);
        if (gnorm == 0.0)
            throw std::logic_error("active group " + std::to_string(g) + " has a zero design block");
        const double step = 1.0 / (nu * gnorm * gnorm);
        const auto& cols = groups.members(g);
        if (cols.size() == 1) {
            const std::size_t j = cols.front();
            const double old = beta[static_cast<Eigen::Index>(j)];
            const double updated = detail::scalar_prox(pen, old + step * X.col_dot(j, resid), step);
            if (updated != old) {
                beta[static_cast<Eigen::Index>(j)] = updated;
                X.col_axpy(j, old - updated, resid);
            }
            continue;
        }
        const Vector old = gather(beta, cols);
        const Vector updated = prox(pen, old + step * group_adjoint(X, groups, g, resid), step);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const double delta = updated[static_cast<Eigen::Index>(k)] - old[static_cast<Eigen::Index>(k)];
            if (delta != 0.0) {
                beta[static_cast<Eigen::Index>(cols[k])] = updated[static_cast<Eigen::Index>(k)];
                X.col_axpy(cols[k], -delta, resid);
            }
        }
    }
}

namespace detail {

enum class ScreenMode { None, Once, Dynamic, Aggressive };

struct PhaseResult {
    bool converged = false;
    GapEval last;
    DualPoint dual;
};

/// Mutable state of one solve: iterate, residual cache, epoch clock, trace.
class CdEngine {
public:
    CdEngine(const Problem& pb, const SolveOptions& opts, Vector beta)
        : pb_(pb), opts_(opts), beta_(std::move(beta)), start_(std::chrono::steady_clock::now())
    {
        resid_ = residual(pb_, beta_);
        trace_.primal_per_epoch.push_back(primal_value(pb_, beta_, resid_));
    }

    const Vector& beta() const { return beta_; }
    const Vector& resid() const { return resid_; }
    std::size_t epoch() const { return epoch_; }
    SolveTrace& trace() { return trace_; }
    bool budget_left() const { return epoch_ < opts_.max_epochs; }

    /// Puts screened groups exactly on their anchors.
    void apply_anchors(const ScreenState& state)
    {
        for (std::size_t g = 0; g < pb_.n_groups(); ++g) {
            if (state.is_active(g))
                continue;
            for (std::size_t j : pb_.groups().members(g)) {
                const auto jj = static_cast<Eigen::Index>(j);
                const double delta = state.fixed_value(g) - beta_[jj];
                if (delta != 0.0) {
                    beta_[jj] = state.fixed_value(g);
                    pb_.X().col_axpy(j, -delta, resid_);
                }
            }
        }
    }

    /// Gap evaluation plus optional screening; logs one trace entry.
    bool evaluate(ScreenState& state, ScreenMode mode, ScreenKind tag, double tol_abs, int phase, PhaseResult& out)
    {
        const double mu_dual = pb_.loss().dual_strong_concavity();
        DualPoint dp = dual_point(pb_, resid_, state.active());
        GapEval ev = duality_gap(pb_, beta_, resid_, dp.theta, state.active());
        const double sgap = screening_gap(pb_, ev);
        double radius = gap_safe_ball(dp.theta, sgap, mu_dual).radius;
        if (mode == ScreenMode::Aggressive && ev.finite())
            radius = aggressive_radius(trace_.primal_per_epoch, epoch_, opts_.aggressive_s, sgap,
                                       opts_.aggressive_eta, mu_dual);
        if (mode != ScreenMode::None) {
            if (safe_screen(state, SafeBall{dp.theta, radius}, pb_, static_cast<long>(epoch_), tag).count > 0)
                apply_anchors(state);
        }
        log(ev, radius, state, phase, dp.theta);
        out.last = ev;
        out.dual = std::move(dp);
        out.converged = ev.gap <= tol_abs;
        return out.converged;
    }

    PhaseResult probe(ScreenState& state, ScreenMode mode, ScreenKind tag, double tol_abs, int phase)
    {
        apply_anchors(state);
        PhaseResult out;
        evaluate(state, mode, tag, tol_abs, phase, out);
        return out;
    }

    PhaseResult run(ScreenState& state, ScreenMode mode, ScreenKind tag, double tol_abs, int phase)
    {
        apply_anchors(state);
        PhaseResult out;
        if (evaluate(state, mode, tag, tol_abs, phase, out))
            return out;
        // A static rule screens with the first ball only.
        const ScreenMode later = mode == ScreenMode::Once ? ScreenMode::None : mode;
        while (epoch_ < opts_.max_epochs) {
            cd_epoch(pb_, beta_, resid_, state.active());
            ++epoch_;
            if (epoch_ % 100 == 0)
                resid_ = residual(pb_, beta_);
            const double primal = primal_value(pb_, beta_, resid_);
            if (std::isnan(primal))
                throw std::runtime_error("NaN primal objective at epoch " + std::to_string(epoch_));
            trace_.primal_per_epoch.push_back(primal);
            if ((epoch_ % opts_.screen_every == 0 || epoch_ == opts_.max_epochs) &&
                evaluate(state, later, tag, tol_abs, phase, out))
                return out;
        }
        return out;
    }

private:
    void log(const GapEval& ev, double radius, const ScreenState& state, int phase, const Vector& theta)
    {
        TraceEntry e;
        e.epoch = static_cast<long>(epoch_);
        e.phase = phase;
        e.primal = ev.primal;
        e.dual = ev.dual;
        e.gap = ev.gap;
        e.radius = radius;
        e.n_screened = state.n_safe();
        e.n_unsafe = state.n_unsafe();
        e.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        if (opts_.record_masks)
            e.active = state.active();
        if (opts_.record_iterates) {
            e.beta = beta_;
            e.theta = theta;
        }
        trace_.entries.push_back(std::move(e));
    }

    Problem pb_;
    const SolveOptions& opts_;
    Vector beta_;
    Vector resid_;
    std::size_t epoch_ = 0;
    SolveTrace trace_;
    std::chrono::steady_clock::time_point start_;
};

inline Vector project_start(const Problem& pb, const std::optional<Vector>& beta)
{
    if (!beta)
        return pb.feasible_start();
    if (static_cast<std::size_t>(beta->size()) != pb.p())
        throw DimensionError("warm start has the wrong length");
    Vector b = *beta;
    if (pb.penalty().kind == PenaltyKind::Box)
        b = b.cwiseMax(pb.penalty().lo).cwiseMin(pb.penalty().hi);
    else if (pb.penalty().kind == PenaltyKind::NonNegative)
        b = b.cwiseMax(0.0);
    return b;
}

inline ScreenState initial_state(const Problem& pb, const SolveInit& init)
{
    ScreenState st = init.state ? *init.state : ScreenState(pb.n_groups());
    if (st.size() != pb.n_groups())
        throw DimensionError("initial screen state has the wrong number of groups");
    prescreen_zero_groups(st, pb);
    return st;
}

inline Solution finish(const Problem& pb, CdEngine& eng, const PhaseResult& res, ScreenState state)
{
    Solution sol;
    sol.beta = eng.beta();
    sol.dual = res.dual;
    sol.final_gap = res.last.gap;
    sol.epochs_used = eng.epoch();
    sol.converged = res.converged;
    sol.state = std::move(state);
    (void)pb;
    return sol;
}

inline SolveOutput solve_working_set(const Problem& pb, const SolveOptions& opts, const SolveInit& init)
{
    const double tol_abs = opts.tol_eps * pb.y_sq_norm();
    CdEngine eng(pb, opts, project_start(pb, init.beta));
    ScreenState safe = initial_state(pb, init);
    std::size_t ws_size = opts.ws_initial;
    PhaseResult outer;
    for (;;) {
        // Full-problem check with safe screening; a restricted solve follows.
        outer = eng.probe(safe, ScreenMode::Dynamic, ScreenKind::Safe, tol_abs, 0);
        if (outer.converged || !eng.budget_left())
            break;
        const std::vector<double> scores = working_set_scores(outer.dual.theta, pb);
        std::vector<std::size_t> order;
        ScreenState restricted = safe;
        std::size_t n_forced = 0;
        for (std::size_t g = 0; g < pb.n_groups(); ++g) {
            if (!safe.is_active(g))
                continue;
            if (!anchor_of(pb.penalty(), gather(eng.beta(), pb.groups().members(g))))
                ++n_forced;
            else
                order.push_back(g);
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
        const std::size_t admit = ws_size > n_forced ? ws_size - n_forced : 0;
        for (std::size_t k = admit; k < order.size(); ++k) {
            const std::size_t g = order[k];
            restricted.screen(g, *anchor_of(pb.penalty(), gather(eng.beta(), pb.groups().members(g))),
                              static_cast<long>(eng.epoch()), ScreenKind::WorkingSet);
        }
        const double inner_tol = std::max(tol_abs, 0.3 * outer.last.gap);
        eng.run(restricted, ScreenMode::Dynamic, ScreenKind::WorkingSet, inner_tol, 1);
        if (!eng.budget_left()) {
            outer = eng.probe(safe, ScreenMode::Dynamic, ScreenKind::Safe, tol_abs, 0);
            break;
        }
        ws_size = static_cast<std::size_t>(std::ceil(static_cast<double>(ws_size) * opts.ws_growth_factor));
    }
    SolveOutput out;
    out.solution = finish(pb, eng, outer, safe);
    out.trace = std::move(eng.trace());
    return out;
}

} // namespace detail

/**
 * Proximal cyclic (block) coordinate descent with gap-based stopping and the
 * screening strategy selected by opts.rule.
 *
 * Unsafe strategies (strong, aggressive) first solve a restricted problem to
 * 10 * tol, then warm-start a dynamic gap safe solve on the full problem.
 */
inline SolveOutput solve(const Problem& pb, const SolveOptions& opts, const SolveInit& init = {})
{
    opts.validate();
    if (opts.rule == Rule::WorkingSet)
        return detail::solve_working_set(pb, opts, init);

    using detail::ScreenMode;
    const double tol_abs = opts.tol_eps * pb.y_sq_norm();
    detail::CdEngine eng(pb, opts, detail::project_start(pb, init.beta));
    ScreenState state = detail::initial_state(pb, init);
    std::vector<std::size_t> violators;

    if (opts.rule == Rule::StrongThenSafe || opts.rule == Rule::AggressiveThenSafe) {
        ScreenState unsafe = state;
        if (opts.rule == Rule::StrongThenSafe) {
            const double lmax = lambda_max(pb);
            const double lambda_prev = init.lambda_prev.value_or(std::max(lmax, pb.penalty().lambda));
            const Vector theta_prev = init.theta_prev.value_or(pb.loss().y());
            const GroupMask discard = strong_rule_set(theta_prev, lambda_prev, pb.penalty().lambda, pb);
            for (std::size_t g = 0; g < pb.n_groups(); ++g)
                if (discard[g] && unsafe.is_active(g))
                    unsafe.screen(g, 0.0, 0, ScreenKind::Strong);
            eng.run(unsafe, ScreenMode::Dynamic, ScreenKind::Strong, 10.0 * tol_abs, 1);
        } else {
            eng.run(unsafe, ScreenMode::Aggressive, ScreenKind::Aggressive, 10.0 * tol_abs, 1);
        }
        violators = kkt_repair(eng.beta(), pb, unsafe);
    }

    ScreenMode mode = ScreenMode::Dynamic;
    if (opts.rule == Rule::None)
        mode = ScreenMode::None;
    else if (opts.rule == Rule::Static)
        mode = ScreenMode::Once;
    const auto res = eng.run(state, mode, ScreenKind::Safe, tol_abs, 0);
    SolveOutput out;
    out.solution = detail::finish(pb, eng, res, state);
    out.solution.unsafe_violators = std::move(violators);
    out.trace = std::move(eng.trace());
    return out;
}

// ---------------------------------------------------------------------------
// Linear SVM: min_b sum_i max(0, 1 - y_i x_i^T b) + lambda/2 ||b||^2, solved by
// dual coordinate ascent on theta in [0,1]^n with b = Z^T theta / lambda,
// Z_i = y_i x_i. P is lambda-strongly convex, so B(b, sqrt(2 gap / lambda))
// contains the primal optimum and gives sample-wise screening.
// ---------------------------------------------------------------------------

struct SvmSolution {
    Vector beta;
    Vector theta;
    double final_gap = kInfinity;
    std::size_t epochs_used = 0;
    bool converged = false;
    /// Per-sample screening; fixed_value is the identified theta_i (0 or 1).
    ScreenState samples;
};

struct SvmOutput {
    SvmSolution solution;
    SolveTrace trace;
};

inline double svm_primal(const DenseMatrix& Z, double lambda, const Vector& beta)
{
    const Vector margins = Z * beta;
    return (1.0 - margins.array()).max(0.0).sum() + 0.5 * lambda * beta.squaredNorm();
}

inline double svm_dual(const DenseMatrix& Z, double lambda, const Vector& theta)
{
    return theta.sum() - 0.5 / lambda * (Z.transpose() * theta).squaredNorm();
}

/**
 * Sample screening test against the primal ball B(center, radius):
 * +1 when every b in the ball has margin y_i x_i^T b > 1 (theta_i = 0),
 * -1 when every b has margin < 1 (theta_i = 1), 0 otherwise.
 */
inline int svm_sample_test(double margin_at_center, double row_norm, double radius)
{
    if (!std::isfinite(radius))
        return 0;
    if (margin_at_center - radius * row_norm > 1.0)
        return 1;
    if (margin_at_center + radius * row_norm < 1.0)
        return -1;
    return 0;
}

inline SvmOutput solve_svm(const DesignMatrix& X, const Vector& labels, double lambda, const SolveOptions& opts)
{
    opts.validate();
    if (!(lambda > 0.0))
        throw std::invalid_argument("svm regularization lambda must be positive");
    if (static_cast<std::size_t>(labels.size()) != X.n_rows())
        throw DimensionError("label count does not match the number of rows");
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        if (labels[i] != 1.0 && labels[i] != -1.0)
            throw std::invalid_argument("svm labels must be +1 or -1");

    const auto start = std::chrono::steady_clock::now();
    const DenseMatrix Z = labels.asDiagonal() * X.to_dense();
    const auto n = static_cast<std::size_t>(Z.rows());
    const Vector row_sq = Z.rowwise().squaredNorm();
    const Vector row_norm = row_sq.cwiseSqrt();
    const double tol_abs = opts.tol_eps * static_cast<double>(n);

    SvmOutput out;
    auto& sol = out.solution;
    sol.theta = Vector::Zero(static_cast<Eigen::Index>(n));
    sol.samples = ScreenState(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (row_sq[static_cast<Eigen::Index>(i)] == 0.0) {
            sol.samples.screen(i, 1.0, 0, ScreenKind::Safe);
            sol.theta[static_cast<Eigen::Index>(i)] = 1.0;
        }
    }
    sol.beta = Z.transpose() * sol.theta / lambda;

    auto evaluate = [&](std::size_t epoch) {
        const double primal = svm_primal(Z, lambda, sol.beta);
        const double dual = svm_dual(Z, lambda, sol.theta);
        if (std::isnan(primal) || std::isnan(dual))
            throw std::runtime_error("NaN in svm objective");
        double gap = primal - dual;
        if (gap < 0.0) {
            if (-gap > 1e-10 * std::max(1.0, static_cast<double>(n)))
                throw std::logic_error("negative svm duality gap");
            gap = 0.0;
        }
        const double sgap = screening_gap(GapEval{primal, dual, gap}, n + static_cast<std::size_t>(Z.cols()));
        const double radius = std::sqrt(2.0 * sgap / lambda);
        if (opts.rule != Rule::None) {
            const Vector margins = Z * sol.beta;
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (!sol.samples.is_active(i))
                    continue;
                const int t = svm_sample_test(margins[static_cast<Eigen::Index>(i)],
                                              row_norm[static_cast<Eigen::Index>(i)], radius);
                if (t == 0)
                    continue;
                const double fixed = t > 0 ? 0.0 : 1.0;
                sol.samples.screen(i, fixed, static_cast<long>(epoch), ScreenKind::Safe);
                const double delta = fixed - sol.theta[static_cast<Eigen::Index>(i)];
                if (delta != 0.0) {
                    sol.theta[static_cast<Eigen::Index>(i)] = fixed;
                    changed = true;
                }
            }
            if (changed)
                sol.beta = Z.transpose() * sol.theta / lambda;
        }
        TraceEntry e;
        e.epoch = static_cast<long>(epoch);
        e.primal = primal;
        e.dual = dual;
        e.gap = gap;
        e.radius = radius;
        e.n_screened = sol.samples.n_safe();
        e.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (opts.record_masks)
            e.active = sol.samples.active();
        out.trace.entries.push_back(std::move(e));
        sol.final_gap = gap;
        return gap <= tol_abs;
    };

    std::size_t epoch = 0;
    sol.converged = evaluate(0);
    while (!sol.converged && epoch < opts.max_epochs) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            if (!sol.samples.is_active(i))
                continue;
            const double grad = 1.0 - Z.row(ii).dot(sol.beta);
            const double updated = std::clamp(sol.theta[ii] + lambda * grad / row_sq[ii], 0.0, 1.0);
            const double delta = updated - sol.theta[ii];
            if (delta != 0.0) {
                sol.theta[ii] = updated;
                sol.beta.noalias() += (delta / lambda) * Z.row(ii).transpose();
            }
        }
        ++epoch;
        if (epoch % 50 == 0)
            sol.beta = Z.transpose() * sol.theta / lambda;
        out.trace.primal_per_epoch.push_back(svm_primal(Z, lambda, sol.beta));
        if (epoch % opts.screen_every == 0 || epoch == opts.max_epochs)
            sol.converged = evaluate(epoch);
    }
    sol.epochs_used = epoch;
    return out;
}

} // namespace screenkit
