#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "screenkit/duality.hpp"

namespace screenkit {

enum class ScreenKind { None, Safe, Strong, Aggressive, WorkingSet };

/**
 * Cumulative record of screened groups. Safe eliminations are permanent;
 * groups removed by an unsafe heuristic keep their tag so they can be
 * reactivated.
 */
class ScreenState {
public:
    ScreenState() = default;
    explicit ScreenState(std::size_t n_groups)
        : active_(n_groups, true), fixed_(n_groups, 0.0), epoch_(n_groups, -1), kind_(n_groups, ScreenKind::None)
    {
    }

    const GroupMask& active() const { return active_; }
    bool is_active(std::size_t g) const { return active_[g]; }
    double fixed_value(std::size_t g) const { return fixed_[g]; }
    long screened_at(std::size_t g) const { return epoch_[g]; }
    ScreenKind kind(std::size_t g) const { return kind_[g]; }
    std::size_t size() const { return active_.size(); }

    void screen(std::size_t g, double anchor, long epoch, ScreenKind kind)
    {
        if (!active_[g])
            return;
        active_[g] = false;
        fixed_[g] = anchor;
        epoch_[g] = epoch;
        kind_[g] = kind;
    }

    /// Unsafe eliminations only; a safely screened group stays screened.
    bool reactivate(std::size_t g)
    {
        if (active_[g] || kind_[g] == ScreenKind::Safe)
            return false;
        active_[g] = true;
        epoch_[g] = -1;
        kind_[g] = ScreenKind::None;
        return true;
    }

    std::size_t count(ScreenKind kind) const
    {
        std::size_t c = 0;
        for (std::size_t g = 0; g < kind_.size(); ++g)
            c += (!active_[g] && kind_[g] == kind) ? 1 : 0;
        return c;
    }
    std::size_t n_safe() const { return count(ScreenKind::Safe); }
    std::size_t n_unsafe() const { return n_screened() - n_safe(); }
    std::size_t n_screened() const { return active_.size() - n_active(); }
    std::size_t n_active() const
    {
        std::size_t c = 0;
        for (bool a : active_)
            c += a ? 1 : 0;
        return c;
    }

private:
    GroupMask active_;
    std::vector<double> fixed_;
    std::vector<long> epoch_;
    std::vector<ScreenKind> kind_;
};

struct ScreenResult {
    std::size_t count = 0;
    std::vector<std::size_t> groups;
};

/**
 * Sphere test on every active group against a ball that contains the dual
 * optimum. Groups that pass are fixed at their anchor; nothing is ever
 * un-screened here.
 */
inline ScreenResult safe_screen(ScreenState& state, const SafeBall& ball, const Problem& pb, long epoch,
                                ScreenKind kind = ScreenKind::Safe)
{
    ScreenResult res;
    if (!std::isfinite(ball.radius))
        return res;
    // Tests are independent; commit after evaluating all of them.
    std::vector<std::pair<std::size_t, double>> hits;
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        if (!state.is_active(g))
            continue;
        const Vector c = group_adjoint(pb.X(), pb.groups(), g, ball.center);
        if (auto d = sphere_test(pb.penalty(), c, ball.radius, pb.groups().norm(g)))
            hits.emplace_back(g, d.anchor);
    }
    for (auto [g, anchor] : hits) {
        state.screen(g, anchor, epoch, kind);
        res.groups.push_back(g);
    }
    res.count = res.groups.size();
    return res;
}

/// Groups with ||X_g|| = 0 do not affect the fit; they are fixed at the anchor.
inline std::size_t prescreen_zero_groups(ScreenState& state, const Problem& pb)
{
    std::size_t count = 0;
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        if (state.is_active(g) && pb.groups().norm(g) == 0.0) {
            const double anchor = pb.penalty().kind == PenaltyKind::Box ? pb.penalty().lo : 0.0;
            state.screen(g, anchor, 0, ScreenKind::Safe);
            ++count;
        }
    }
    return count;
}

namespace detail {

inline void require_lambda(const Penalty& pen, const char* what)
{
    if (!pen.has_lambda())
        throw std::invalid_argument(std::string(what) + " needs an l1, elastic-net or group penalty");
}

} // namespace detail

/**
 * Generalized strong rule: discard g when
 * sigma(X_g^T theta_prev) + |lambda_prev - lambda_new| < lambda_new.
 * Unsafe; returns a discard mask (true = discard).
 */
inline GroupMask strong_rule_set(const Vector& theta_prev, double lambda_prev, double lambda_new,
                                 const Problem& pb)
{
    detail::require_lambda(pb.penalty(), "strong rule");
    if (lambda_new > lambda_prev)
        throw std::invalid_argument("strong rule expects lambda_new <= lambda_prev");
    const Penalty pen = pb.penalty().with_lambda(lambda_new);
    const double step = std::abs(lambda_prev - lambda_new);
    GroupMask discard(pb.n_groups(), false);
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        const Vector c = group_adjoint(pb.X(), pb.groups(), g, theta_prev);
        discard[g] = boundary_slack(pen, c) > step;
    }
    return discard;
}

/// Discard g when sigma(X_g^T theta_prev) < lambda_new. Unsafe.
inline GroupMask previous_active_set(const Vector& theta_prev, double lambda_new, const Problem& pb)
{
    detail::require_lambda(pb.penalty(), "previous active set rule");
    const Penalty pen = pb.penalty().with_lambda(lambda_new);
    GroupMask discard(pb.n_groups(), false);
    for (std::size_t g = 0; g < pb.n_groups(); ++g)
        discard[g] = boundary_slack(pen, group_adjoint(pb.X(), pb.groups(), g, theta_prev)) > 0.0;
    return discard;
}

inline constexpr std::size_t kAggressiveDelay = 10;
inline constexpr double kAggressiveEta = 1e-3;

/**
 * Radius from the primal-progress estimate
 *   E_k = (1 - eta) |P(b_{k-s}) - P(b_k)| + eta * gap_k,
 * i.e. sqrt(2 E_k / mu_D). `primal_history[i]` is P(b_i). Falls back to the
 * gap radius while fewer than s epochs are available.
 */
inline double aggressive_radius(std::span<const double> primal_history, std::size_t k, std::size_t delay,
                                double gap, double eta, double mu_dual)
{
    if (k < delay || k >= primal_history.size())
        return std::sqrt(2.0 * std::max(gap, 0.0) / mu_dual);
    const double progress = std::abs(primal_history[k - delay] - primal_history[k]);
    const double estimate = (1.0 - eta) * progress + eta * std::max(gap, 0.0);
    return std::sqrt(2.0 * estimate / mu_dual);
}

/**
 * d_g(theta) = slack(X_g^T theta) / ||X_g||: the distance from X_g^T theta to
 * the boundary of dOmega_g(b*_g) in units of the group norm. Smaller means
 * closer to entering the model.
 */
inline std::vector<double> working_set_scores(const Vector& theta, const Problem& pb)
{
    std::vector<double> scores(pb.n_groups(), kInfinity);
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        const double nrm = pb.groups().norm(g);
        if (nrm == 0.0)
            continue;
        scores[g] = boundary_slack(pb.penalty(), group_adjoint(pb.X(), pb.groups(), g, theta)) / nrm;
    }
    return scores;
}

/**
 * Unsafely screened groups that violate the optimality condition at b:
 * X_g^T(-grad f(Xb)) must stay inside dOmega_g(b*_g), up to `tol`.
 */
inline std::vector<std::size_t> kkt_repair(const Vector& beta, const Problem& pb, const ScreenState& state,
                                           double tol = 1e-9)
{
    std::vector<std::size_t> violators;
    const Vector resid = residual(pb, beta);
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        if (state.is_active(g) || state.kind(g) == ScreenKind::Safe)
            continue;
        if (anchor_slack(pb.penalty(), group_adjoint(pb.X(), pb.groups(), g, resid), state.fixed_value(g)) <= tol)
            violators.push_back(g);
    }
    return violators;
}

} // namespace screenkit
