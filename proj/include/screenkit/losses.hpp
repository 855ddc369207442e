#pragma once

#include <cstddef>

#include "screenkit/linalg.hpp"

namespace screenkit {

/**
 * Least-squares data fit f(z) = 1/2 ||y - z||^2.
 *
 * f is 1-smooth, so the dual objective is 1-strongly concave. Other smooth
 * losses would plug in through the same value/gradient/conjugate surface.
 */
class QuadraticLoss {
public:
    QuadraticLoss() = default;
    explicit QuadraticLoss(Vector y) : y_(std::move(y)) {}

    const Vector& y() const { return y_; }
    std::size_t size() const { return static_cast<std::size_t>(y_.size()); }

    double smoothness() const { return 1.0; }
    double dual_strong_concavity() const { return 1.0 / smoothness(); }

    double value(const Vector& z) const
    {
        check(z);
        return 0.5 * (y_ - z).squaredNorm();
    }

    Vector gradient(const Vector& z) const
    {
        check(z);
        return z - y_;
    }

    /// f*(w) = 1/2 ||w||^2 + <w, y>
    double conjugate(const Vector& w) const
    {
        check(w);
        return 0.5 * w.squaredNorm() + w.dot(y_);
    }

private:
    void check(const Vector& v) const
    {
        if (v.size() != y_.size())
            throw DimensionError("loss: vector length does not match the number of observations");
    }

    Vector y_;
};

inline double loss_value(const QuadraticLoss& loss, const Vector& z) { return loss.value(z); }
inline Vector loss_gradient(const QuadraticLoss& loss, const Vector& z) { return loss.gradient(z); }
inline double loss_conjugate(const QuadraticLoss& loss, const Vector& w) { return loss.conjugate(w); }

} // namespace screenkit
