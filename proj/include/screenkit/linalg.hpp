#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace screenkit {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Observation matrix X (n x p), stored dense (column-major) or as
 * compressed sparse columns. Immutable after construction; column norms are
 * computed once here.
 */
class DesignMatrix {
public:
    DesignMatrix() = default;

    explicit DesignMatrix(DenseMatrix dense) : storage_(std::move(dense)) { cache_norms(); }

    explicit DesignMatrix(SparseMatrix sparse) : storage_(std::move(sparse))
    {
        auto& sp = std::get<SparseMatrix>(storage_);
        sp.makeCompressed();
        cache_norms();
    }

    /// Builds a CSC matrix from raw arrays. Row indices must be strictly
    /// increasing within each column and offsets nondecreasing.
    static DesignMatrix from_csc(std::size_t n_rows, std::size_t n_cols, std::span<const double> values,
                                 std::span<const int> row_indices, std::span<const int> col_offsets)
    {
        if (col_offsets.size() != n_cols + 1)
            throw DimensionError("column offsets must have n_cols + 1 entries");
        if (values.size() != row_indices.size() || col_offsets.back() != static_cast<int>(values.size()))
            throw DimensionError("values/row_indices/offsets are inconsistent");
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(values.size());
        for (std::size_t j = 0; j < n_cols; ++j) {
            if (col_offsets[j] > col_offsets[j + 1])
                throw DimensionError("column offsets must be nondecreasing");
            for (int k = col_offsets[j]; k < col_offsets[j + 1]; ++k) {
                if (row_indices[k] < 0 || row_indices[k] >= static_cast<int>(n_rows))
                    throw DimensionError("row index out of range");
                if (k > col_offsets[j] && row_indices[k] <= row_indices[k - 1])
                    throw DimensionError("row indices must be strictly increasing within a column");
                triplets.emplace_back(row_indices[k], static_cast<int>(j), values[k]);
            }
        }
        SparseMatrix sp(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
        sp.setFromTriplets(triplets.begin(), triplets.end());
        return DesignMatrix(std::move(sp));
    }

    std::size_t n_rows() const
    {
        return std::visit([](const auto& m) { return static_cast<std::size_t>(m.rows()); }, storage_);
    }
    std::size_t n_cols() const
    {
        return std::visit([](const auto& m) { return static_cast<std::size_t>(m.cols()); }, storage_);
    }
    bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }

    const DenseMatrix& dense() const { return std::get<DenseMatrix>(storage_); }
    const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }

    const std::vector<double>& col_norms() const { return col_norms_; }
    double col_norm(std::size_t j) const { return col_norms_[j]; }

    /// Number of stored entries (n*p for dense storage).
    std::size_t nnz() const
    {
        if (is_sparse())
            return static_cast<std::size_t>(sparse().nonZeros());
        return n_rows() * n_cols();
    }

    /// X_j^T v
    double col_dot(std::size_t j, const Vector& v) const
    {
        if (is_sparse()) {
            double acc = 0.0;
            for (SparseMatrix::InnerIterator it(sparse(), static_cast<Eigen::Index>(j)); it; ++it)
                acc += it.value() * v[it.index()];
            return acc;
        }
        return dense().col(static_cast<Eigen::Index>(j)).dot(v);
    }

    /// v += a * X_j
    void col_axpy(std::size_t j, double a, Vector& v) const
    {
        if (a == 0.0)
            return;
        if (is_sparse()) {
            for (SparseMatrix::InnerIterator it(sparse(), static_cast<Eigen::Index>(j)); it; ++it)
                v[it.index()] += a * it.value();
            return;
        }
        v.noalias() += a * dense().col(static_cast<Eigen::Index>(j));
    }

    DenseMatrix to_dense() const
    {
        if (is_sparse())
            return DenseMatrix(sparse());
        return dense();
    }

private:
    void cache_norms()
    {
        col_norms_.assign(n_cols(), 0.0);
        if (is_sparse()) {
            const auto& sp = sparse();
            for (Eigen::Index j = 0; j < sp.outerSize(); ++j) {
                double ss = 0.0;
                for (SparseMatrix::InnerIterator it(sp, j); it; ++it)
                    ss += it.value() * it.value();
                col_norms_[static_cast<std::size_t>(j)] = std::sqrt(ss);
            }
        } else {
            const auto& d = dense();
            for (Eigen::Index j = 0; j < d.cols(); ++j)
                col_norms_[static_cast<std::size_t>(j)] = d.col(j).norm();
        }
    }

    std::variant<DenseMatrix, SparseMatrix> storage_{DenseMatrix{}};
    std::vector<double> col_norms_;
};

inline Vector matvec(const DesignMatrix& X, const Vector& beta)
{
    if (static_cast<std::size_t>(beta.size()) != X.n_cols())
        throw DimensionError("matvec: beta has " + std::to_string(beta.size()) + " entries, X has " +
                             std::to_string(X.n_cols()) + " columns");
    if (X.is_sparse())
        return X.sparse() * beta;
    return X.dense() * beta;
}

/// X^T v
inline Vector adjoint(const DesignMatrix& X, const Vector& v)
{
    if (static_cast<std::size_t>(v.size()) != X.n_rows())
        throw DimensionError("adjoint: vector length does not match n_rows");
    if (X.is_sparse())
        return X.sparse().transpose() * v;
    return X.dense().transpose() * v;
}

struct PowerIterationResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

// Power iteration on A^T A where `apply` computes A^T A v for a vector of
// size `dim`. Returns the square root of the dominant eigenvalue.
template <class ApplyGram>
PowerIterationResult power_iteration(std::size_t dim, ApplyGram&& apply, int max_iter, double tol)
{
    PowerIterationResult out;
    if (dim == 0)
        return {0.0, true, 0};
    Vector v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i)
        v[static_cast<Eigen::Index>(i)] = 1.0 + 0.01 * static_cast<double>(i % 97);
    v.normalize();
    double rayleigh = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Vector w = apply(v);
        const double next = v.dot(w);
        const double wn = w.norm();
        out.iterations = it;
        if (wn == 0.0) {
            rayleigh = 0.0;
            out.converged = true;
            break;
        }
        v = w / wn;
        const bool small_change = std::abs(next - rayleigh) <= tol * std::max(1.0, std::abs(next));
        rayleigh = next;
        if (small_change && it > 1) {
            out.converged = true;
            break;
        }
    }
    out.value = std::sqrt(std::max(rayleigh, 0.0));
    return out;
}

} // namespace detail

/// Largest singular value sigma_X by power iteration on X^T X.
/// A non-converged result still carries the best estimate.
inline PowerIterationResult spectral_norm(const DesignMatrix& X, int max_iter = 1000, double tol = 1e-10)
{
    return detail::power_iteration(
        X.n_cols(), [&](const Vector& v) { return adjoint(X, matvec(X, v)); }, max_iter, tol);
}

/**
 * Ordered partition of the columns into groups, with the operator norm
 * ||X_g|| of each block. Singleton groups use the exact column norm.
 */
class GroupStructure {
public:
    GroupStructure() = default;

    GroupStructure(const DesignMatrix& X, std::vector<std::vector<std::size_t>> groups)
        : groups_(std::move(groups))
    {
        const std::size_t p = X.n_cols();
        std::vector<int> owner(p, -1);
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            if (groups_[g].empty())
                throw DimensionError("group " + std::to_string(g) + " is empty");
            for (std::size_t j : groups_[g]) {
                if (j >= p)
                    throw DimensionError("group " + std::to_string(g) + " references column " +
                                         std::to_string(j) + " >= p");
                if (owner[j] != -1)
                    throw DimensionError("column " + std::to_string(j) + " belongs to two groups");
                owner[j] = static_cast<int>(g);
            }
        }
        if (std::find(owner.begin(), owner.end(), -1) != owner.end())
            throw DimensionError("groups do not cover every column");
        group_of_.assign(owner.begin(), owner.end());
        norms_.resize(groups_.size());
        for (std::size_t g = 0; g < groups_.size(); ++g)
            norms_[g] = block_norm(X, groups_[g]);
    }

    static GroupStructure singletons(const DesignMatrix& X)
    {
        std::vector<std::vector<std::size_t>> gs(X.n_cols());
        for (std::size_t j = 0; j < gs.size(); ++j)
            gs[j] = {j};
        return GroupStructure(X, std::move(gs));
    }

    /// Contiguous blocks of `size` columns (the last one may be shorter).
    static GroupStructure contiguous(const DesignMatrix& X, std::size_t size)
    {
        if (size == 0)
            throw DimensionError("group size must be positive");
        std::vector<std::vector<std::size_t>> gs;
        for (std::size_t start = 0; start < X.n_cols(); start += size) {
            std::vector<std::size_t> g;
            for (std::size_t j = start; j < std::min(X.n_cols(), start + size); ++j)
                g.push_back(j);
            gs.push_back(std::move(g));
        }
        return GroupStructure(X, std::move(gs));
    }

    std::size_t size() const { return groups_.size(); }
    const std::vector<std::size_t>& members(std::size_t g) const
    {
        if (g >= groups_.size())
            throw std::out_of_range("unknown group id " + std::to_string(g));
        return groups_[g];
    }
    double norm(std::size_t g) const { return norms_.at(g); }
    const std::vector<double>& norms() const { return norms_; }
    std::size_t group_of(std::size_t j) const { return group_of_.at(j); }
    std::size_t max_group_size() const
    {
        std::size_t m = 0;
        for (const auto& g : groups_)
            m = std::max(m, g.size());
        return m;
    }

private:
    static double block_norm(const DesignMatrix& X, const std::vector<std::size_t>& cols)
    {
        if (cols.size() == 1)
            return X.col_norm(cols.front());
        auto apply = [&](const Vector& v) {
            Vector xv = Vector::Zero(static_cast<Eigen::Index>(X.n_rows()));
            for (std::size_t k = 0; k < cols.size(); ++k)
                X.col_axpy(cols[k], v[static_cast<Eigen::Index>(k)], xv);
            Vector out(static_cast<Eigen::Index>(cols.size()));
            for (std::size_t k = 0; k < cols.size(); ++k)
                out[static_cast<Eigen::Index>(k)] = X.col_dot(cols[k], xv);
            return out;
        };
        return detail::power_iteration(cols.size(), apply, 1000, 1e-14).value;
    }

    std::vector<std::vector<std::size_t>> groups_;
    std::vector<std::size_t> group_of_;
    std::vector<double> norms_;
};

/// X_g^T v
inline Vector group_adjoint(const DesignMatrix& X, const GroupStructure& groups, std::size_t g, const Vector& v)
{
    if (static_cast<std::size_t>(v.size()) != X.n_rows())
        throw DimensionError("group_adjoint: vector length does not match n_rows");
    const auto& cols = groups.members(g);
    Vector out(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = X.col_dot(cols[k], v);
    return out;
}

inline Vector gather(const Vector& full, const std::vector<std::size_t>& cols)
{
    Vector out(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = full[static_cast<Eigen::Index>(cols[k])];
    return out;
}

inline void scatter(const Vector& block, const std::vector<std::size_t>& cols, Vector& full)
{
    for (std::size_t k = 0; k < cols.size(); ++k)
        full[static_cast<Eigen::Index>(cols[k])] = block[static_cast<Eigen::Index>(k)];
}

} // namespace screenkit
