#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evosr/errors.hpp"

namespace evosr {

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Dense square system A x = b. Immutable after construction, so instances
/// can be shared freely across worker threads.
///
/// Construction enforces the invariants every solver operation relies on:
/// the matrix is n-by-n, every entry is finite, and no diagonal entry is
/// zero (the relaxation sweep divides by it).
class LinearSystem {
public:
    LinearSystem(std::size_t n, std::vector<double> a_flat, std::vector<double> rhs)
        : n_(n), a_(std::move(a_flat)), b_(std::move(rhs)) {
        validate();
    }

    LinearSystem(const std::vector<std::vector<double>>& rows, std::vector<double> rhs)
        : n_(rows.size()), b_(std::move(rhs)) {
        a_.reserve(n_ * n_);
        for (const auto& r : rows) {
            if (r.size() != n_) throw InvariantViolation("coefficient matrix is not square");
            a_.insert(a_.end(), r.begin(), r.end());
        }
        validate();
    }

    std::size_t size() const { return n_; }

    double a(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
    double b(std::size_t i) const { return b_[i]; }

    std::span<const double> row(std::size_t i) const { return {a_.data() + i * n_, n_}; }
    std::span<const double> rhs() const { return b_; }
    std::span<const double> coefficients() const { return a_; }

    friend bool operator==(const LinearSystem& lhs, const LinearSystem& rhs) {
        return lhs.n_ == rhs.n_ && lhs.a_ == rhs.a_ && lhs.b_ == rhs.b_;
    }

private:
    void validate() const {
        if (n_ == 0) throw InvariantViolation("system dimension must be positive");
        if (a_.size() != n_ * n_) throw InvariantViolation("coefficient matrix is not n by n");
        if (b_.size() != n_) throw InvariantViolation("right-hand side length does not match n");
        if (!all_finite(a_) || !all_finite(b_))
            throw InvariantViolation("system contains a non-finite entry");
        for (std::size_t i = 0; i < n_; ++i)
            if (a(i, i) == 0.0)
                throw ZeroDiagonal("zero diagonal entry at row " + std::to_string(i + 1));
    }

    std::size_t n_ = 0;
    std::vector<double> a_;
    std::vector<double> b_;
};

/// L1 residual: sum over rows of |(A x - b)_i|. Zero exactly when x solves
/// the system; +infinity when the evaluation overflows or x is non-finite.
inline double residual_error(const LinearSystem& sys, std::span<const double> x) {
    const std::size_t n = sys.size();
    if (x.size() != n)
        throw DimensionMismatch("solution vector length " + std::to_string(x.size()) +
                                " does not match system dimension " + std::to_string(n));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = sys.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += row[j] * x[j];
        total += std::abs(dot - sys.b(i));
    }
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

/// One weighted Jacobi sweep:
///   x'_i = x_i + (omega / a_ii) * (b_i - sum_j a_ij x_j)
/// Every component is computed from the old vector (simultaneous update).
/// omega = 0 is the identity map. Non-finite components in the result signal
/// divergence; callers treat such an individual's error as +infinity.
inline std::vector<double> jacobi_sr_step(const LinearSystem& sys, std::span<const double> x,
                                          double omega) {
    const std::size_t n = sys.size();
    if (x.size() != n)
        throw DimensionMismatch("solution vector length " + std::to_string(x.size()) +
                                " does not match system dimension " + std::to_string(n));
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = sys.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += row[j] * x[j];
        next[i] = x[i] + (omega / sys.a(i, i)) * (sys.b(i) - dot);
    }
    return next;
}

struct JacobiOperator {
    std::vector<std::vector<double>> h;  // iteration matrix
    std::vector<double> v;               // constant term
};

/// Matrix form of the same sweep: x' = H x + V with
///   H = (1 - omega) I - omega D^{-1} (L + U),  V = omega D^{-1} b.
/// Kept as the independent algebraic route against which the component-wise
/// sweep is checked.
inline JacobiOperator jacobi_operator(const LinearSystem& sys, double omega) {
    const std::size_t n = sys.size();
    JacobiOperator op;
    op.h.assign(n, std::vector<double>(n, 0.0));
    op.v.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double dii = sys.a(i, i);
        for (std::size_t j = 0; j < n; ++j)
            op.h[i][j] = (i == j) ? (1.0 - omega) : -omega * sys.a(i, j) / dii;
        op.v[i] = omega * sys.b(i) / dii;
    }
    return op;
}

inline std::vector<double> apply_operator(const JacobiOperator& op, std::span<const double> x) {
    const std::size_t n = op.v.size();
    if (x.size() != n) throw DimensionMismatch("operator/vector dimension mismatch");
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = op.v[i];
        for (std::size_t j = 0; j < n; ++j) acc += op.h[i][j] * x[j];
        next[i] = acc;
    }
    return next;
}

}  // namespace evosr
