#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "screenkit/linalg.hpp"

namespace screenkit {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class PenaltyKind { L1, ElasticNet, GroupL2, NonNegative, Box };

inline std::string_view to_string(PenaltyKind k)
{
    switch (k) {
    case PenaltyKind::L1: return "l1";
    case PenaltyKind::ElasticNet: return "enet";
    case PenaltyKind::GroupL2: return "group";
    case PenaltyKind::NonNegative: return "nonneg";
    case PenaltyKind::Box: return "box";
    }
    return "?";
}

/**
 * Separable penalty Omega = sum_g Omega_g, one kind shared by every group.
 *
 *   L1          lambda |b_j|
 *   ElasticNet  lambda (|b_j| + alpha b_j^2 / 2)
 *   GroupL2     lambda ||b_g||_2
 *   NonNegative indicator of b_j >= 0
 *   Box         indicator of lo <= b_j <= hi
 *
 * Infinite values are returned as +inf, never thrown.
 */
struct Penalty {
    PenaltyKind kind = PenaltyKind::L1;
    double lambda = 1.0;
    double alpha = 0.0;
    double lo = 0.0;
    double hi = 1.0;

    static Penalty l1(double lambda) { return checked({PenaltyKind::L1, lambda, 0.0, 0.0, 0.0}); }
    static Penalty elastic_net(double lambda, double alpha)
    {
        return checked({PenaltyKind::ElasticNet, lambda, alpha, 0.0, 0.0});
    }
    static Penalty group_l2(double lambda) { return checked({PenaltyKind::GroupL2, lambda, 0.0, 0.0, 0.0}); }
    static Penalty non_negative() { return checked({PenaltyKind::NonNegative, 0.0, 0.0, 0.0, 0.0}); }
    static Penalty box(double lo, double hi) { return checked({PenaltyKind::Box, 0.0, 0.0, lo, hi}); }

    /// Penalties scaled by a regularization weight lambda.
    bool has_lambda() const
    {
        return kind == PenaltyKind::L1 || kind == PenaltyKind::ElasticNet || kind == PenaltyKind::GroupL2;
    }

    /// True when dom Omega* is bounded, i.e. when a dual point needs rescaling.
    bool bounded_conjugate_domain() const
    {
        return kind == PenaltyKind::L1 || kind == PenaltyKind::GroupL2 ||
               (kind == PenaltyKind::ElasticNet && alpha == 0.0);
    }

    double strong_convexity() const { return kind == PenaltyKind::ElasticNet ? lambda * alpha : 0.0; }

    Penalty with_lambda(double new_lambda) const
    {
        Penalty p = *this;
        p.lambda = new_lambda;
        return checked(p);
    }

    static Penalty checked(Penalty p)
    {
        if (p.has_lambda() && !(p.lambda > 0.0))
            throw std::invalid_argument("penalty weight lambda must be positive");
        if (p.kind == PenaltyKind::ElasticNet && !(p.alpha >= 0.0))
            throw std::invalid_argument("elastic-net ridge weight alpha must be nonnegative");
        if (p.kind == PenaltyKind::Box && !(p.lo < p.hi))
            throw std::invalid_argument("box penalty needs lo < hi");
        return p;
    }
};

inline double soft_threshold(double v, double t)
{
    if (v > t)
        return v - t;
    if (v < -t)
        return v + t;
    return 0.0;
}

/// Omega_g(b_g)
inline double penalty_value(const Penalty& pen, const Vector& b)
{
    switch (pen.kind) {
    case PenaltyKind::L1: return pen.lambda * b.lpNorm<1>();
    case PenaltyKind::ElasticNet: return pen.lambda * (b.lpNorm<1>() + 0.5 * pen.alpha * b.squaredNorm());
    case PenaltyKind::GroupL2: return pen.lambda * b.norm();
    case PenaltyKind::NonNegative: return (b.array() >= 0.0).all() ? 0.0 : kInfinity;
    case PenaltyKind::Box: return ((b.array() >= pen.lo) && (b.array() <= pen.hi)).all() ? 0.0 : kInfinity;
    }
    return kInfinity;
}

/// argmin_u 1/2 ||u - v||^2 + step * Omega_g(u)
inline Vector prox(const Penalty& pen, const Vector& v, double step)
{
    if (!(step > 0.0))
        throw std::invalid_argument("prox step must be positive");
    Vector u(v.size());
    switch (pen.kind) {
    case PenaltyKind::L1:
        for (Eigen::Index i = 0; i < v.size(); ++i)
            u[i] = soft_threshold(v[i], step * pen.lambda);
        return u;
    case PenaltyKind::ElasticNet: {
        const double shrink = 1.0 + step * pen.lambda * pen.alpha;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            u[i] = soft_threshold(v[i], step * pen.lambda) / shrink;
        return u;
    }
    case PenaltyKind::GroupL2: {
        const double nv = v.norm();
        const double t = step * pen.lambda;
        if (nv <= t)
            return Vector::Zero(v.size());
        return (1.0 - t / nv) * v;
    }
    case PenaltyKind::NonNegative: return v.cwiseMax(0.0);
    case PenaltyKind::Box: return v.cwiseMax(pen.lo).cwiseMin(pen.hi);
    }
    return v;
}

/// Omega_g*(v)
inline double penalty_conjugate(const Penalty& pen, const Vector& v)
{
    switch (pen.kind) {
    case PenaltyKind::L1: return v.lpNorm<Eigen::Infinity>() <= pen.lambda ? 0.0 : kInfinity;
    case PenaltyKind::ElasticNet: {
        if (pen.alpha == 0.0)
            return v.lpNorm<Eigen::Infinity>() <= pen.lambda ? 0.0 : kInfinity;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double excess = std::max(std::abs(v[i]) - pen.lambda, 0.0);
            acc += excess * excess;
        }
        return acc / (2.0 * pen.lambda * pen.alpha);
    }
    case PenaltyKind::GroupL2: return v.norm() <= pen.lambda ? 0.0 : kInfinity;
    case PenaltyKind::NonNegative: return (v.array() <= 0.0).all() ? 0.0 : kInfinity;
    case PenaltyKind::Box: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            acc += std::max(pen.lo * v[i], pen.hi * v[i]);
        return acc;
    }
    }
    return kInfinity;
}

/**
 * Gauge of dom Omega* evaluated at v (length p): the smallest t with
 * v / t in dom Omega*. Zero when dom Omega* is the whole space. For the
 * non-negativity cone this is 0 inside R_-^p and +inf otherwise, since no
 * positive rescaling leaves the cone.
 */
inline double dual_gauge(const Penalty& pen, const GroupStructure& groups, const Vector& v)
{
    double gauge = 0.0;
    switch (pen.kind) {
    case PenaltyKind::L1: return v.lpNorm<Eigen::Infinity>() / pen.lambda;
    case PenaltyKind::ElasticNet:
        return pen.alpha == 0.0 ? v.lpNorm<Eigen::Infinity>() / pen.lambda : 0.0;
    case PenaltyKind::GroupL2:
        for (std::size_t g = 0; g < groups.size(); ++g)
            gauge = std::max(gauge, gather(v, groups.members(g)).norm() / pen.lambda);
        return gauge;
    case PenaltyKind::NonNegative: return (v.array() <= 0.0).all() ? 0.0 : kInfinity;
    case PenaltyKind::Box: return 0.0;
    }
    return gauge;
}

/**
 * Signed distance of c_g = X_g^T theta to the boundary of the subdifferential
 * at the anchor, in the worst direction: positive means X_g^T theta lies in
 * the interior of dOmega_g(b*_g).
 *
 *   norms      lambda - ||c_g||
 *   nonneg     -c_j
 *   box        |c_j|   (anchor lo when c_j < 0, hi when c_j > 0)
 */
inline double boundary_slack(const Penalty& pen, const Vector& c)
{
    switch (pen.kind) {
    case PenaltyKind::L1:
    case PenaltyKind::ElasticNet: return pen.lambda - c.lpNorm<Eigen::Infinity>();
    case PenaltyKind::GroupL2: return pen.lambda - c.norm();
    case PenaltyKind::NonNegative: return -c.maxCoeff();
    case PenaltyKind::Box: return c.cwiseAbs().minCoeff();
    }
    return -kInfinity;
}

/// Slack of c_g relative to a specific anchor (matters for Box only).
inline double anchor_slack(const Penalty& pen, const Vector& c, double anchor)
{
    if (pen.kind == PenaltyKind::Box)
        return anchor == pen.lo ? -c.maxCoeff() : c.minCoeff();
    return boundary_slack(pen, c);
}

/// Anchor b*_g for a group whose correlation is c_g; only Box depends on c_g.
inline double anchor_value(const Penalty& pen, const Vector& c)
{
    if (pen.kind == PenaltyKind::Box)
        return c.sum() < 0.0 ? pen.lo : pen.hi;
    return 0.0;
}

struct ScreenDecision {
    bool screened = false;
    /// b*_g every coordinate of the group is fixed to (meaningful if screened).
    double anchor = 0.0;

    explicit operator bool() const { return screened; }
};

/**
 * Sphere test for the ball B(c, r): c_g = X_g^T c, group_norm = ||X_g||.
 * Strict inequalities only, no slack.
 */
inline ScreenDecision sphere_test(const Penalty& pen, const Vector& c_g, double radius, double group_norm)
{
    if (radius < 0.0 || std::isnan(radius))
        throw std::invalid_argument("sphere test radius must be nonnegative");
    if (std::isinf(radius))
        return {};
    const double spread = radius * group_norm;
    switch (pen.kind) {
    case PenaltyKind::L1:
    case PenaltyKind::ElasticNet:
        for (Eigen::Index i = 0; i < c_g.size(); ++i)
            if (!(std::abs(c_g[i]) + spread < pen.lambda))
                return {};
        return {true, 0.0};
    case PenaltyKind::GroupL2:
        if (c_g.norm() + spread < pen.lambda)
            return {true, 0.0};
        return {};
    case PenaltyKind::NonNegative:
        for (Eigen::Index i = 0; i < c_g.size(); ++i)
            if (!(c_g[i] + spread < 0.0))
                return {};
        return {true, 0.0};
    case PenaltyKind::Box: {
        bool all_lo = true;
        bool all_hi = true;
        for (Eigen::Index i = 0; i < c_g.size(); ++i) {
            all_lo = all_lo && (c_g[i] + spread < 0.0);
            all_hi = all_hi && (-c_g[i] + spread < 0.0);
        }
        if (all_lo)
            return {true, pen.lo};
        if (all_hi)
            return {true, pen.hi};
        return {};
    }
    }
    return {};
}

} // namespace screenkit
