#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace teb {

/// Cholesky factor L (lower-triangular, A = L L^T) of a symmetric
/// positive-definite matrix, maintained under rank-one updates A += x x^T.
/// All the ridge-model queries reduce to triangular solves against L.
class CholeskyFactor {
public:
    CholeskyFactor() = default;

    CholeskyFactor(int dim, double ridge) : dim_(dim), l_(dim * dim, 0.0) {
        if (dim < 1) throw std::invalid_argument("CholeskyFactor: dim must be >= 1");
        if (!(ridge > 0.0)) throw std::invalid_argument("CholeskyFactor: ridge must be > 0");
        const double root = std::sqrt(ridge);
        for (int i = 0; i < dim; ++i) at_mut(i, i) = root;
    }

    static CholeskyFactor from_lower(int dim, std::vector<double> l) {
        CholeskyFactor f;
        f.dim_ = dim;
        f.l_ = std::move(l);
        return f;
    }

    int dim() const { return dim_; }

    double at(int r, int c) const { return l_[r * dim_ + c]; }

    /// LINPACK-style positive rank-one update of the factor.
    void rank_one_update(std::span<const double> x) {
        check_dim(x);
        work_.assign(x.begin(), x.end());
        for (int k = 0; k < dim_; ++k) {
            const double lkk = at(k, k);
            const double wk = work_[k];
            const double r = std::hypot(lkk, wk);
            const double c = r / lkk;
            const double s = wk / lkk;
            at_mut(k, k) = r;
            for (int i = k + 1; i < dim_; ++i) {
                at_mut(i, k) = (at(i, k) + s * work_[i]) / c;
                work_[i] = c * work_[i] - s * at(i, k);
            }
        }
    }

    /// Solves L y = b.
    std::vector<double> solve_lower(std::span<const double> b) const {
        check_dim(b);
        std::vector<double> y(dim_);
        for (int i = 0; i < dim_; ++i) {
            double acc = b[i];
            for (int j = 0; j < i; ++j) acc -= at(i, j) * y[j];
            y[i] = acc / at(i, i);
        }
        return y;
    }

    /// Solves L^T z = b.
    std::vector<double> solve_upper(std::span<const double> b) const {
        check_dim(b);
        std::vector<double> z(dim_);
        for (int i = dim_ - 1; i >= 0; --i) {
            double acc = b[i];
            for (int j = i + 1; j < dim_; ++j) acc -= at(j, i) * z[j];
            z[i] = acc / at(i, i);
        }
        return z;
    }

    /// Solves A v = b via the two triangular solves.
    std::vector<double> solve(std::span<const double> b) const {
        const std::vector<double> y = solve_lower(b);
        return solve_upper(y);
    }

    /// x^T A^{-1} x = ||L^{-1} x||^2.
    double quadform_inv(std::span<const double> x) const {
        const std::vector<double> y = solve_lower(x);
        double q = 0.0;
        for (double v : y) q += v * v;
        return q;
    }

private:
    double& at_mut(int r, int c) { return l_[r * dim_ + c]; }

    void check_dim(std::span<const double> v) const {
        if (static_cast<int>(v.size()) != dim_)
            throw std::invalid_argument("CholeskyFactor: dimension mismatch");
    }

    int dim_ = 0;
    std::vector<double> l_;
    mutable std::vector<double> work_;
};

/// Dense Cholesky of a full symmetric matrix; throws if not positive
/// definite. Used as the verification route against the incremental factor.
inline CholeskyFactor cholesky(const std::vector<double>& a, int dim) {
    if (static_cast<int>(a.size()) != dim * dim)
        throw std::invalid_argument("cholesky: bad matrix size");
    std::vector<double> l(dim * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j <= i; ++j) {
            double acc = a[i * dim + j];
            for (int k = 0; k < j; ++k) acc -= l[i * dim + k] * l[j * dim + k];
            if (i == j) {
                if (acc <= 0.0)
                    throw std::runtime_error("cholesky: matrix not positive definite");
                l[i * dim + i] = std::sqrt(acc);
            } else {
                l[i * dim + j] = acc / l[j * dim + j];
            }
        }
    }
    return CholeskyFactor::from_lower(dim, std::move(l));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace teb
