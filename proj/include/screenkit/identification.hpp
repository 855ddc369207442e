#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "screenkit/solver.hpp"

namespace screenkit {

/// A = {g : slack(X_g^T theta_ref) <= tol}; true = in A.
inline GroupMask oracle_active_set(const Vector& theta_ref, const Problem& pb, double tol = 1e-9)
{
    GroupMask in_a(pb.n_groups(), false);
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        if (pb.groups().norm(g) == 0.0)
            continue;
        in_a[g] = boundary_slack(pb.penalty(), group_adjoint(pb.X(), pb.groups(), g, theta_ref)) <= tol;
    }
    return in_a;
}

/// delta_Z = min_{g not in A} slack(X_g^T theta_ref) / (2 ||X_g||); +inf if Z is empty.
inline double delta_z(const Vector& theta_ref, const Problem& pb, const GroupMask& in_a)
{
    if (in_a.size() != pb.n_groups())
        throw DimensionError("active set mask has the wrong number of groups");
    double delta = kInfinity;
    for (std::size_t g = 0; g < pb.n_groups(); ++g) {
        const double nrm = pb.groups().norm(g);
        if (in_a[g] || nrm == 0.0)
            continue;
        const double slack = boundary_slack(pb.penalty(), group_adjoint(pb.X(), pb.groups(), g, theta_ref));
        delta = std::min(delta, std::max(slack, 0.0) / (2.0 * nrm));
    }
    return delta;
}

struct K0Measure {
    /// First logged epoch from which the active mask equals A for good.
    std::optional<long> measured;
    /// First logged epoch whose safe radius is below delta_Z.
    std::optional<long> radius;
};

/**
 * Reads the full-problem entries (phase 0) of a trace recorded with
 * record_masks. Groups with a zero design block never enter A and are
 * ignored in the comparison.
 */
inline K0Measure measure_k0(const SolveTrace& trace, const GroupMask& in_a, double delta, const Problem& pb)
{
    std::vector<const TraceEntry*> rows;
    for (const auto& e : trace.entries)
        if (e.phase == 0)
            rows.push_back(&e);
    for (const auto* e : rows)
        if (e->active.size() != in_a.size())
            throw std::invalid_argument("trace entries carry no mask; solve with record_masks");

    auto matches = [&](const TraceEntry& e) {
        for (std::size_t g = 0; g < in_a.size(); ++g)
            if (pb.groups().norm(g) > 0.0 && e.active[g] != in_a[g])
                return false;
        return true;
    };
    K0Measure out;
    for (auto it = rows.rbegin(); it != rows.rend() && matches(**it); ++it)
        out.measured = (*it)->epoch;
    for (const auto* e : rows) {
        if (e->radius < delta) {
            out.radius = e->epoch;
            break;
        }
    }
    return out;
}

namespace detail {

inline std::optional<std::pair<double, double>> least_squares_line(const std::vector<double>& x,
                                                                   const std::vector<double>& y)
{
    const auto m = static_cast<double>(x.size());
    if (x.size() < 3)
        return std::nullopt;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = m * sxx - sx * sx;
    if (den == 0.0)
        return std::nullopt;
    const double slope = (m * sxy - sx * sy) / den;
    return std::make_pair(slope, (sy - slope * sx) / m);
}

} // namespace detail

/**
 * kappa_hat from a least-squares fit of log E_k = log E_0 - kappa k over the
 * last `tail` fraction of epochs, keeping only E_k above `floor`.
 */
inline std::optional<double> fit_linear_rate(const std::vector<double>& primal_per_epoch, double p_ref,
                                             double tail = 0.5, double floor = 1e-13)
{
    const std::size_t count = primal_per_epoch.size();
    const auto first = static_cast<std::size_t>(std::floor(static_cast<double>(count) * (1.0 - tail)));
    std::vector<double> ks;
    std::vector<double> logs;
    for (std::size_t k = first; k < count; ++k) {
        const double e = primal_per_epoch[k] - p_ref;
        if (e > floor) {
            ks.push_back(static_cast<double>(k));
            logs.push_back(std::log(e));
        }
    }
    const auto line = detail::least_squares_line(ks, logs);
    if (!line || !(line->first < 0.0))
        return std::nullopt;
    return -line->first;
}

/// (C, gamma) from a fit of log E_k = log C - gamma log k over k >= 1.
inline std::optional<std::pair<double, double>> fit_sublinear_rate(const std::vector<double>& primal_per_epoch,
                                                                   double p_ref, double floor = 1e-13)
{
    std::vector<double> logk;
    std::vector<double> loge;
    for (std::size_t k = 1; k < primal_per_epoch.size(); ++k) {
        const double e = primal_per_epoch[k] - p_ref;
        if (e > floor) {
            logk.push_back(std::log(static_cast<double>(k)));
            loge.push_back(std::log(e));
        }
    }
    const auto line = detail::least_squares_line(logk, loge);
    if (!line || !(line->first < 0.0))
        return std::nullopt;
    return std::make_pair(std::exp(line->second), -line->first);
}

/**
 * C = (||X||^2 nu_f + mu_Omega) / mu_Omega: Gap_k <= C E_k when Omega is
 * mu_Omega-strongly convex. `x_norm` is the spectral norm of X.
 */
inline double sandwich_constant(double mu_omega, double nu_f, double x_norm)
{
    if (!(mu_omega > 0.0))
        throw std::invalid_argument("sandwich constant needs a strongly convex penalty");
    return (x_norm * x_norm * nu_f + mu_omega) / mu_omega;
}

/**
 * Epoch after which the gap safe radius is below delta_Z when
 * E_k <= E_0 exp(-kappa k): (1/kappa) log(C (2/mu_D) E_0 / delta_Z^2),
 * clamped at zero.
 */
inline double k0_bound_linear(double kappa, double mu_omega, double nu_f, double x_norm, double mu_dual,
                              double delta, double e0)
{
    if (!(kappa > 0.0))
        throw std::invalid_argument("linear rate kappa must be positive");
    if (!(delta > 0.0))
        throw std::invalid_argument("delta_Z must be positive");
    if (!(e0 >= 0.0))
        throw std::invalid_argument("initial suboptimality must be nonnegative");
    if (std::isinf(delta) || e0 == 0.0)
        return 0.0;
    const double c = sandwich_constant(mu_omega, nu_f, x_norm);
    return std::max(0.0, std::log(c * (2.0 / mu_dual) * e0 / (delta * delta)) / kappa);
}

/// Radius L of dom Omega for the box constraint: max(|lo|, |hi|) sqrt(p).
inline double bounded_support_radius(const Penalty& pen, std::size_t p)
{
    if (pen.kind != PenaltyKind::Box)
        throw std::invalid_argument("bounded support radius needs a box constraint");
    return std::max(std::abs(pen.lo), std::abs(pen.hi)) * std::sqrt(static_cast<double>(p));
}

/// (8 nu_f ||X||^2 L^2 C / (mu_D delta_Z^2)^2)^(1/gamma) for E_k <= C / k^gamma.
inline double k0_bound_sublinear(double c, double gamma, double nu_f, double x_norm, double radius_l,
                                 double mu_dual, double delta)
{
    if (!(gamma > 0.0) || !(c >= 0.0))
        throw std::invalid_argument("sublinear rate needs C >= 0 and gamma > 0");
    if (!(delta > 0.0))
        throw std::invalid_argument("delta_Z must be positive");
    if (!std::isfinite(radius_l))
        throw std::invalid_argument("sublinear bound needs a penalty with bounded support");
    const double denom = mu_dual * delta * delta;
    return std::pow(8.0 * nu_f * x_norm * x_norm * radius_l * radius_l * c / (denom * denom), 1.0 / gamma);
}

struct IdentificationReport {
    GroupMask oracle_active;
    double delta_z = kInfinity;
    std::optional<long> k0_measured;
    std::optional<long> k0_radius;
    std::optional<double> k0_bound_linear;
    std::optional<double> k0_bound_sublinear;
    std::optional<double> kappa_hat;
    double reference_gap = kInfinity;
    std::size_t epochs = 0;

    std::size_t active_size() const { return static_cast<std::size_t>(std::count(oracle_active.begin(), oracle_active.end(), true)); }
};

struct ReferenceSolve {
    Vector beta;
    Vector theta;
    double primal = kInfinity;
    double gap = kInfinity;
};

/// Unscreened solve to gap <= eps_ref ||y||^2, the ground truth for diagnostics.
inline ReferenceSolve reference_solve(const Problem& pb, double eps_ref = 1e-12, std::size_t max_epochs = 200000)
{
    SolveOptions ref;
    ref.rule = Rule::None;
    ref.tol_eps = eps_ref;
    ref.max_epochs = max_epochs;
    ref.screen_every = 10;
    const SolveOutput out = solve(pb, ref);
    ReferenceSolve r;
    r.beta = out.solution.beta;
    r.theta = dual_point(pb, r.beta).theta;
    r.primal = primal_value(pb, r.beta, residual(pb, r.beta));
    r.gap = duality_gap(pb, r.beta, dual_point(pb, r.beta)).gap;
    return r;
}

/**
 * Reference solve, oracle A and delta_Z, then a tracked dynamic gap solve
 * whose mask history gives the measured identification epochs and the
 * fitted rate plugged into the complexity bounds.
 */
inline IdentificationReport identify(const Problem& pb, SolveOptions opts, double x_norm)
{
    const ReferenceSolve ref = reference_solve(pb);
    IdentificationReport rep;
    rep.reference_gap = ref.gap;
    rep.oracle_active = oracle_active_set(ref.theta, pb);
    rep.delta_z = delta_z(ref.theta, pb, rep.oracle_active);

    opts.rule = Rule::DynamicGap;
    opts.record_masks = true;
    const SolveOutput run = solve(pb, opts);
    rep.epochs = run.solution.epochs_used;
    const K0Measure k0 = measure_k0(run.trace, rep.oracle_active, rep.delta_z, pb);
    rep.k0_measured = k0.measured;
    rep.k0_radius = k0.radius;

    const auto& hist = run.trace.primal_per_epoch;
    rep.kappa_hat = fit_linear_rate(hist, ref.primal);
    const double mu_dual = pb.loss().dual_strong_concavity();
    const double mu_omega = pb.penalty().strong_convexity();
    const double e0 = std::max(hist.front() - ref.primal, 0.0);
    if (mu_omega > 0.0 && rep.kappa_hat && rep.delta_z > 0.0)
        rep.k0_bound_linear =
            k0_bound_linear(*rep.kappa_hat, mu_omega, pb.loss().smoothness(), x_norm, mu_dual, rep.delta_z, e0);
    if (pb.penalty().kind == PenaltyKind::Box && rep.delta_z > 0.0 && std::isfinite(rep.delta_z)) {
        if (const auto fit = fit_sublinear_rate(hist, ref.primal))
            rep.k0_bound_sublinear = k0_bound_sublinear(fit->first, fit->second, pb.loss().smoothness(), x_norm,
                                                        bounded_support_radius(pb.penalty(), pb.p()), mu_dual,
                                                        rep.delta_z);
    }
    return rep;
}

} // namespace screenkit
