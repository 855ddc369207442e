#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "screenkit/linalg.hpp"
#include "screenkit/losses.hpp"
#include "screenkit/penalties.hpp"

namespace screenkit {

/// true = group still active (not fixed at its anchor).
using GroupMask = std::vector<bool>;

/**
 * min_b f(Xb) + sum_g Omega_g(b_g). A cheap, copyable view: the matrix,
 * groups and loss are borrowed and must outlive it.
 */
class Problem {
public:
    Problem(const DesignMatrix& X, const GroupStructure& groups, const QuadraticLoss& loss, Penalty penalty)
        : X_(&X), groups_(&groups), loss_(&loss), penalty_(penalty)
    {
        if (X.n_rows() != loss.size())
            throw DimensionError("X has " + std::to_string(X.n_rows()) + " rows but y has " +
                                 std::to_string(loss.size()) + " entries");
        if (groups.size() == 0 && X.n_cols() > 0)
            throw DimensionError("empty group structure");
        if (penalty.kind != PenaltyKind::GroupL2 && groups.max_group_size() > 1 &&
            penalty.kind != PenaltyKind::L1)
            throw DimensionError("only L1 and group penalties accept multi-column groups");
    }

    const DesignMatrix& X() const { return *X_; }
    const GroupStructure& groups() const { return *groups_; }
    const QuadraticLoss& loss() const { return *loss_; }
    const Penalty& penalty() const { return penalty_; }
    std::size_t n() const { return X_->n_rows(); }
    std::size_t p() const { return X_->n_cols(); }
    std::size_t n_groups() const { return groups_->size(); }
    double y_sq_norm() const { return loss_->y().squaredNorm(); }

    Problem with_lambda(double lambda) const
    {
        Problem out = *this;
        out.penalty_ = penalty_.with_lambda(lambda);
        return out;
    }

    /// Zero vector projected into dom Omega (clamped into the box for Box).
    Vector feasible_start() const
    {
        Vector b = Vector::Zero(static_cast<Eigen::Index>(p()));
        if (penalty_.kind == PenaltyKind::Box)
            b = b.cwiseMax(penalty_.lo).cwiseMin(penalty_.hi);
        return b;
    }

private:
    const DesignMatrix* X_;
    const GroupStructure* groups_;
    const QuadraticLoss* loss_;
    Penalty penalty_;
};

inline GroupMask all_active(const Problem& pb) { return GroupMask(pb.n_groups(), true); }

struct DualPoint {
    Vector theta;
    /// Rescaling alpha >= 1 applied to the negative gradient.
    double scale = 1.0;
    /// Translation along the all-ones direction (non-negativity constraint only).
    double shift = 0.0;
};

struct SafeBall {
    Vector center;
    double radius = kInfinity;
};

struct GapEval {
    double primal = kInfinity;
    double dual = -kInfinity;
    double gap = kInfinity;
    bool finite() const { return std::isfinite(gap); }
};

inline Vector residual(const Problem& pb, const Vector& beta) { return pb.loss().y() - matvec(pb.X(), beta); }

/// P(b) given the residual y - Xb.
inline double primal_value(const Problem& pb, const Vector& beta, const Vector& resid)
{
    double pen = 0.0;
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        pen += penalty_value(pb.penalty(), gather(beta, pb.groups().members(g)));
        if (std::isinf(pen))
            return kInfinity;
    }
    return 0.5 * resid.squaredNorm() + pen;
}

namespace detail {

// Omega_g*(v) for a v built to lie in dom Omega_g*; rounding at the level of
// 1e-12 relative is absorbed instead of producing +inf.
inline double conjugate_on_domain(const Penalty& pen, const Vector& v)
{
    constexpr double slack = 1e-12;
    switch (pen.kind) {
    case PenaltyKind::L1: return v.lpNorm<Eigen::Infinity>() <= pen.lambda * (1.0 + slack) ? 0.0 : kInfinity;
    case PenaltyKind::GroupL2: return v.norm() <= pen.lambda * (1.0 + slack) ? 0.0 : kInfinity;
    case PenaltyKind::ElasticNet:
        if (pen.alpha == 0.0)
            return v.lpNorm<Eigen::Infinity>() <= pen.lambda * (1.0 + slack) ? 0.0 : kInfinity;
        return penalty_conjugate(pen, v);
    case PenaltyKind::NonNegative: {
        const double tol = slack * std::max(1.0, v.cwiseAbs().maxCoeff());
        return (v.array() <= tol).all() ? 0.0 : kInfinity;
    }
    case PenaltyKind::Box: return penalty_conjugate(pen, v);
    }
    return kInfinity;
}

} // namespace detail

/**
 * D(theta) for the problem reduced to the active groups: screened groups sit
 * at their anchors b*_g and contribute the linear term <X_g^T theta, b*_g>
 * (zero for norm penalties). With every group active this is the full dual.
 */
inline double dual_value(const Problem& pb, const Vector& theta, const GroupMask& active, const Vector& beta)
{
    double d = theta.dot(pb.loss().y()) - 0.5 * theta.squaredNorm();
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        const auto& cols = pb.groups().members(g);
        if (active[g]) {
            d -= detail::conjugate_on_domain(pb.penalty(), group_adjoint(pb.X(), pb.groups(), g, theta));
        } else {
            const Vector anchor = gather(beta, cols);
            if (anchor.isZero(0.0))
                continue;
            const Vector c = group_adjoint(pb.X(), pb.groups(), g, theta);
            d -= c.dot(anchor) - penalty_value(pb.penalty(), anchor);
        }
        if (std::isinf(d))
            return -kInfinity;
    }
    return d;
}

/**
 * Dual feasible point by rescaled gradient mapping:
 * theta = -grad f(Xb) / alpha with alpha = max(1, gauge(X^T(-grad f))).
 * Only active groups constrain the scaling.
 *
 * dom Omega* is a cone for the non-negativity constraint, so rescaling
 * cannot restore feasibility there; instead the residual is translated
 * along the all-ones vector, which works whenever every active column has a
 * positive sum. Otherwise theta = 0, which is always feasible.
 */
inline DualPoint dual_point(const Problem& pb, const Vector& resid, const GroupMask& active)
{
    const auto& pen = pb.penalty();
    const auto& X = pb.X();
    DualPoint out;
    if (pen.kind == PenaltyKind::NonNegative) {
        const Vector ones = Vector::Ones(static_cast<Eigen::Index>(pb.n()));
        double tau = 0.0;
        bool translatable = true;
        for (std::size_t g = 0; g < pb.n_groups(); ++g) {
            if (!active[g])
                continue;
            for (std::size_t j : pb.groups().members(g)) {
                const double corr = X.col_dot(j, resid);
                const double mass = X.col_dot(j, ones);
                if (mass > 0.0)
                    tau = std::max(tau, corr / mass);
                else if (mass < 0.0 || corr > 0.0)
                    translatable = false;
            }
        }
        if (!translatable) {
            out.theta = Vector::Zero(resid.size());
            out.scale = kInfinity;
            return out;
        }
        out.theta = resid - tau * ones;
        out.shift = tau;
        return out;
    }
    double gauge = 0.0;
    if (pen.bounded_conjugate_domain()) {
        for (std::size_t g = 0; g < pb.n_groups(); ++g) {
            if (!active[g])
                continue;
            const Vector c = group_adjoint(X, pb.groups(), g, resid);
            const double nrm = pen.kind == PenaltyKind::GroupL2 ? c.norm() : c.lpNorm<Eigen::Infinity>();
            gauge = std::max(gauge, nrm / pen.lambda);
        }
    }
    out.scale = std::max(1.0, gauge);
    out.theta = resid / out.scale;
    return out;
}

inline DualPoint dual_point(const Problem& pb, const Vector& beta)
{
    return dual_point(pb, residual(pb, beta), all_active(pb));
}

/**
 * P(b) - D(theta). Rounding-level negatives (|gap| <= 1e-10 ||y||^2) are
 * clamped to zero; anything more negative means an inconsistent state.
 */
inline GapEval duality_gap(const Problem& pb, const Vector& beta, const Vector& resid, const Vector& theta,
                           const GroupMask& active)
{
    GapEval ev;
    ev.primal = primal_value(pb, beta, resid);
    ev.dual = dual_value(pb, theta, active, beta);
    if (std::isnan(ev.primal) || std::isnan(ev.dual))
        throw std::runtime_error("NaN in primal or dual objective");
    if (!std::isfinite(ev.primal) || !std::isfinite(ev.dual)) {
        ev.gap = kInfinity;
        return ev;
    }
    ev.gap = ev.primal - ev.dual;
    if (ev.gap < 0.0) {
        if (-ev.gap <= 1e-10 * std::max(pb.y_sq_norm(), 1e-300))
            ev.gap = 0.0;
        else
            throw std::logic_error("negative duality gap " + std::to_string(ev.gap) + ": weak duality violated");
    }
    return ev;
}

inline GapEval duality_gap(const Problem& pb, const Vector& beta, const DualPoint& dp)
{
    return duality_gap(pb, beta, residual(pb, beta), dp.theta, all_active(pb));
}

/// B(theta, sqrt(2 gap / mu_D)); an infinite gap gives an infinite radius.
inline SafeBall gap_safe_ball(const Vector& theta, double gap, double mu_dual)
{
    SafeBall ball;
    ball.center = theta;
    if (!std::isfinite(gap)) {
        ball.radius = kInfinity;
        return ball;
    }
    ball.radius = std::sqrt(2.0 * std::max(gap, 0.0) / mu_dual);
    return ball;
}

/**
 * Gap used for screening: the computed gap raised to the worst-case rounding
 * error of the sums behind P and D. When P and D agree to the last bit the raw
 * gap is 0 and a zero radius would screen groups sitting on the boundary.
 */
inline double screening_gap(const GapEval& ev, std::size_t n_terms)
{
    if (!ev.finite())
        return kInfinity;
    const double floor = static_cast<double>(n_terms) * std::numeric_limits<double>::epsilon() *
                         (std::abs(ev.primal) + std::abs(ev.dual));
    return std::max(ev.gap, floor);
}

inline double screening_gap(const Problem& pb, const GapEval& ev) { return screening_gap(ev, pb.n() + pb.p()); }

/// Smallest lambda for which b = 0 is optimal.
inline double lambda_max(const Problem& pb)
{
    const auto& pen = pb.penalty();
    if (!pen.has_lambda())
        throw std::invalid_argument("lambda_max is only defined for l1, elastic-net and group penalties");
    double out = 0.0;
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        const Vector c = group_adjoint(pb.X(), pb.groups(), g, pb.loss().y());
        out = std::max(out, pen.kind == PenaltyKind::GroupL2 ? c.norm() : c.lpNorm<Eigen::Infinity>());
    }
    return out;
}

} // namespace screenkit
