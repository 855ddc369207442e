#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "screenkit/solver.hpp"

namespace screenkit {

/// Malformed or unreadable input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    DesignMatrix X;
    Vector y;
    std::vector<std::string> feature_names;
    std::string source;
    std::string format;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_index(std::string_view s, long& out)
{
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/**
 * libsvm text: one `label idx:val ...` line per sample, 1-based feature
 * indices. Indices may come in any order within a line but not twice.
 * Blank lines and `#` comments are skipped. `n_features` widens the matrix
 * beyond the largest index seen.
 */
inline Dataset parse_libsvm(std::istream& in, const std::string& source = "<stream>", std::size_t n_features = 0)
{
    std::vector<Eigen::Triplet<double, int>> triplets;
    std::vector<double> labels;
    std::string line;
    std::size_t lineno = 0;
    long max_index = 0;
    auto fail = [&](const std::string& msg) {
        throw DataError(source + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos)
            body = body.substr(0, hash);
        body = detail::trim(body);
        if (body.empty())
            continue;
        std::istringstream tokens{std::string(body)};
        std::string tok;
        tokens >> tok;
        double label = 0.0;
        if (!detail::parse_double(tok, label))
            fail("bad label '" + tok + "'");
        const int row = static_cast<int>(labels.size());
        std::vector<std::pair<long, double>> entries;
        while (tokens >> tok) {
            const auto colon = tok.find(':');
            long idx = 0;
            double val = 0.0;
            if (colon == std::string::npos || !detail::parse_index(std::string_view(tok).substr(0, colon), idx) ||
                !detail::parse_double(std::string_view(tok).substr(colon + 1), val))
                fail("bad feature '" + tok + "'");
            if (idx < 1)
                fail("feature index must be >= 1, got " + std::to_string(idx));
            entries.emplace_back(idx, val);
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 1; k < entries.size(); ++k)
            if (entries[k].first == entries[k - 1].first)
                fail("duplicate feature index " + std::to_string(entries[k].first));
        for (const auto& [idx, val] : entries) {
            triplets.emplace_back(row, static_cast<int>(idx - 1), val);
            max_index = std::max(max_index, idx);
        }
        labels.push_back(label);
    }
    if (labels.empty())
        throw DataError(source + ": no samples");
    const auto cols = std::max<std::size_t>(static_cast<std::size_t>(max_index), n_features);
    SparseMatrix sp(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(cols));
    sp.setFromTriplets(triplets.begin(), triplets.end());
    sp.makeCompressed();
    Dataset ds{DesignMatrix(std::move(sp)), Eigen::Map<const Vector>(labels.data(), static_cast<Eigen::Index>(labels.size())), {}, source, "libsvm"};
    return ds;
}

inline Dataset load_libsvm(const std::string& path, std::size_t n_features = 0)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    return parse_libsvm(in, path, n_features);
}

/// Writes stored entries only (explicit zeros of a sparse matrix included).
inline void write_libsvm(const Dataset& ds, std::ostream& out)
{
    const std::size_t n = ds.X.n_rows();
    if (static_cast<std::size_t>(ds.y.size()) != n)
        throw DimensionError("label count does not match the number of rows");
    if (ds.X.is_sparse()) {
        const Eigen::SparseMatrix<double, Eigen::RowMajor, int> rows = ds.X.sparse();
        for (Eigen::Index i = 0; i < rows.outerSize(); ++i) {
            out << detail::fmt(ds.y[i]);
            for (decltype(rows)::InnerIterator it(rows, i); it; ++it)
                out << ' ' << (it.col() + 1) << ':' << detail::fmt(it.value());
            out << '\n';
        }
        return;
    }
    const DenseMatrix& d = ds.X.dense();
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        out << detail::fmt(ds.y[i]);
        for (Eigen::Index j = 0; j < d.cols(); ++j)
            if (d(i, j) != 0.0)
                out << ' ' << (j + 1) << ':' << detail::fmt(d(i, j));
        out << '\n';
    }
}

inline void write_libsvm(const Dataset& ds, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    write_libsvm(ds, out);
}

/// Numeric CSV with a header row; `target` names the response column.
inline Dataset parse_csv(std::istream& in, const std::string& target, const std::string& source = "<stream>")
{
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw DataError(source + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (!std::getline(in, line))
        throw DataError(source + ": empty file");
    ++lineno;
    std::vector<std::string> header;
    for (auto cell : detail::split(line, ','))
        header.emplace_back(detail::trim(cell));
    const auto target_it = std::find(header.begin(), header.end(), target);
    if (target_it == header.end())
        fail("no column named '" + target + "'");
    const auto target_col = static_cast<std::size_t>(target_it - header.begin());

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size())
            fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t k = 0; k < cells.size(); ++k)
            if (!detail::parse_double(cells[k], row[k]))
                fail("non-numeric or non-finite cell '" + std::string(detail::trim(cells[k])) + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw DataError(source + ": no data rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(header.size() - 1);
    DenseMatrix X(n, p);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index j = 0;
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (k == target_col)
                y[i] = rows[static_cast<std::size_t>(i)][k];
            else
                X(i, j++) = rows[static_cast<std::size_t>(i)][k];
        }
    }
    Dataset ds{DesignMatrix(std::move(X)), std::move(y), {}, source, "csv"};
    for (std::size_t k = 0; k < header.size(); ++k)
        if (k != target_col)
            ds.feature_names.push_back(header[k]);
    return ds;
}

inline Dataset load_csv(const std::string& path, const std::string& target)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    return parse_csv(in, target, path);
}

struct SyntheticSpec {
    std::size_t n = 50;
    std::size_t p = 200;
    std::size_t k_true = 10;
    /// ||X b_true|| / ||noise||; infinity means no noise.
    double snr = 3.0;
    std::uint64_t seed = 0;
    /// |Gaussian| design and positive coefficients (NNLS instances).
    bool nonnegative = false;
};

/**
 * Gaussian design with unit-norm columns, k_true coefficients of magnitude
 * one at random positions, noise scaled to the requested SNR. With
 * k_true = 0 the response is standard Gaussian noise.
 */
inline Dataset make_synthetic(const SyntheticSpec& spec)
{
    if (spec.k_true > spec.p)
        throw std::invalid_argument("k_true cannot exceed p");
    if (spec.n == 0 || spec.p == 0)
        throw std::invalid_argument("synthetic data needs n, p >= 1");
    if (!(spec.snr > 0.0))
        throw std::invalid_argument("snr must be positive");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.p);
    DenseMatrix X(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            X(i, j) = spec.nonnegative ? std::abs(normal(rng)) : normal(rng);
        const double nrm = X.col(j).norm();
        if (nrm > 0.0)
            X.col(j) /= nrm;
    }
    std::vector<std::size_t> idx(spec.p);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    Vector beta = Vector::Zero(p);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t k = 0; k < spec.k_true; ++k)
        beta[static_cast<Eigen::Index>(idx[k])] = (spec.nonnegative || coin(rng)) ? 1.0 : -1.0;
    Vector noise(n);
    for (Eigen::Index i = 0; i < n; ++i)
        noise[i] = normal(rng);
    Vector signal = X * beta;
    Vector y = signal;
    if (std::isinf(spec.snr)) {
        // y = X b_true exactly
    } else if (signal.norm() == 0.0) {
        y = noise;
    } else {
        y += noise * (signal.norm() / (spec.snr * noise.norm()));
    }
    Dataset ds{DesignMatrix(std::move(X)), std::move(y), {}, "synthetic", "synthetic"};
    return ds;
}

/**
 * Two Gaussian classes for the SVM: labels alternate +1/-1, and each row is
 * y_i * (separation / sqrt(p)) * 1 + N(0, I).
 */
inline Dataset make_two_class(std::size_t n, std::size_t p, double separation, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto nn = static_cast<Eigen::Index>(n);
    const auto pp = static_cast<Eigen::Index>(p);
    DenseMatrix X(nn, pp);
    Vector y(nn);
    const double shift = separation / std::sqrt(static_cast<double>(p));
    for (Eigen::Index i = 0; i < nn; ++i) {
        y[i] = (i % 2 == 0) ? 1.0 : -1.0;
        for (Eigen::Index j = 0; j < pp; ++j)
            X(i, j) = y[i] * shift + normal(rng);
    }
    Dataset ds{DesignMatrix(std::move(X)), std::move(y), {}, "two_class", "synthetic"};
    return ds;
}

inline constexpr const char* kTraceHeader = "epoch,primal,dual,gap,radius,n_screened,ms";

/// One row per epoch; when phases hand over at the same epoch the last entry wins.
inline void write_trace_csv(const SolveTrace& trace, std::ostream& out)
{
    out << kTraceHeader << '\n';
    const auto& rows = trace.entries;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (k + 1 < rows.size() && rows[k + 1].epoch == rows[k].epoch)
            continue;
        const TraceEntry& e = rows[k];
        out << e.epoch << ',' << detail::fmt(e.primal) << ',' << detail::fmt(e.dual) << ',' << detail::fmt(e.gap)
            << ',' << detail::fmt(e.radius) << ',' << e.n_screened << ',' << detail::fmt(e.ms) << '\n';
    }
}

inline void write_trace_csv(const SolveTrace& trace, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path);
    write_trace_csv(trace, out);
}

/// FNV-1a over round(b_j * 1e5); equal for solutions that agree to ~1e-5.
inline std::string beta_hash(const Vector& beta)
{
    std::uint64_t h = 14695981039346656037ull;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const auto q = static_cast<std::int64_t>(std::llround(beta[j] * 1e5));
        for (int b = 0; b < 8; ++b) {
            h ^= static_cast<std::uint64_t>(q >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

} // namespace screenkit
