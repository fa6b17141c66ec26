#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace levyexit {

/// Dense square matrix, row-major.
class DenseMatrix {
public:
    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }
    double* row(std::size_t i) noexcept { return a_.data() + i * n_; }
    const double* row(std::size_t i) const noexcept { return a_.data() + i * n_; }

    std::vector<double> multiply(const std::vector<double>& x) const {
        std::vector<double> y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* r = row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += r[j] * x[j];
            y[i] = acc;
        }
        return y;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

struct LinearSystem {
    DenseMatrix matrix;
    std::vector<double> rhs;
};

struct GmresOptions {
    int restart = 30;
    double tol = 1e-12;
    int max_iterations = 500;
};

/// Linear solve method selector: direct LU with partial pivoting, or
/// unpreconditioned restarted GMRES.
struct LinearMethod {
    enum class Kind { lu, gmres };
    Kind kind = Kind::lu;
    GmresOptions gmres_options{};

    static LinearMethod lu() { return {}; }
    static LinearMethod gmres(int restart = 30, double tol = 1e-12, int max_iterations = 500) {
        return {Kind::gmres, {restart, tol, max_iterations}};
    }
};

class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GmresError : public std::runtime_error {
public:
    GmresError(double residual, int iterations)
        : std::runtime_error("GMRES failed to converge after " + std::to_string(iterations) +
                             " iterations, relative residual " + std::to_string(residual)),
          residual_(residual) {}
    double final_residual() const noexcept { return residual_; }

private:
    double residual_;
};

namespace detail {

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace detail

/// Solve A x = b by LU factorization with partial pivoting. Throws
/// SingularMatrixError when a pivot vanishes.
inline std::vector<double> lu_solve(DenseMatrix a, std::vector<double> b) {
    const std::size_t n = a.size();
    if (b.size() != n) throw std::invalid_argument("lu_solve: dimension mismatch");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = std::abs(a(i, k));
            if (m > best) {
                best = m;
                piv = i;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best))
            throw SingularMatrixError("lu_solve: singular matrix at column " + std::to_string(k));
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        const double inv_pivot = 1.0 / a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double factor = a(i, k) * inv_pivot;
            if (factor == 0.0) continue;
            a(i, k) = factor;
            double* ri = a.row(i);
            const double* rk = a.row(k);
            for (std::size_t j = k + 1; j < n; ++j) ri[j] -= factor * rk[j];
            b[i] -= factor * b[k];
        }
    }

    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = b[ii];
        const double* r = a.row(ii);
        for (std::size_t j = ii + 1; j < n; ++j) acc -= r[j] * x[j];
        x[ii] = acc / r[ii];
    }
    return x;
}

/// Restarted GMRES(m) with modified Gram-Schmidt and Givens rotations.
/// Iterates until ||Ax-b|| / ||b|| <= tol; throws GmresError (carrying the
/// final relative residual) if max_iterations inner steps do not get there.
inline std::vector<double> gmres_solve(const DenseMatrix& a, const std::vector<double>& b,
                                       const GmresOptions& opt = {}) {
    const std::size_t n = a.size();
    if (b.size() != n) throw std::invalid_argument("gmres_solve: dimension mismatch");
    if (opt.restart < 1 || opt.max_iterations < 1 || !(opt.tol > 0.0))
        throw std::invalid_argument("gmres_solve: bad options");

    const double bnorm = detail::norm2(b);
    std::vector<double> x(n, 0.0);
    if (bnorm == 0.0) return x;

    const std::size_t m = static_cast<std::size_t>(opt.restart);
    std::vector<std::vector<double>> v(m + 1, std::vector<double>(n));
    std::vector<std::vector<double>> hess(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), g(m + 1);

    int total_iters = 0;
    double rel_res = 1.0;
    while (total_iters < opt.max_iterations) {
        // residual for this cycle
        std::vector<double> r = a.multiply(x);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        const double rnorm = detail::norm2(r);
        rel_res = rnorm / bnorm;
        if (rel_res <= opt.tol) return x;

        for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / rnorm;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = rnorm;

        std::size_t k = 0;
        for (; k < m && total_iters < opt.max_iterations; ++k, ++total_iters) {
            std::vector<double> w = a.multiply(v[k]);
            for (std::size_t i = 0; i <= k; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += w[j] * v[i][j];
                hess[i][k] = dot;
                for (std::size_t j = 0; j < n; ++j) w[j] -= dot * v[i][j];
            }
            const double wnorm = detail::norm2(w);
            hess[k + 1][k] = wnorm;
            if (wnorm > 0.0)
                for (std::size_t j = 0; j < n; ++j) v[k + 1][j] = w[j] / wnorm;

            // apply stored rotations to the new column, then form a new one
            for (std::size_t i = 0; i < k; ++i) {
                const double t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            const double denom = std::hypot(hess[k][k], hess[k + 1][k]);
            if (denom == 0.0) {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = cs[k] * hess[k][k] + sn[k] * hess[k + 1][k];
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            rel_res = std::abs(g[k + 1]) / bnorm;
            if (rel_res <= opt.tol || wnorm == 0.0) {
                ++k;
                ++total_iters;
                break;
            }
        }

        // back-substitute y from the k x k triangular system, update x
        std::vector<double> y(k, 0.0);
        for (std::size_t ii = k; ii-- > 0;) {
            double acc = g[ii];
            for (std::size_t j = ii + 1; j < k; ++j) acc -= hess[ii][j] * y[j];
            if (hess[ii][ii] == 0.0)
                throw SingularMatrixError("gmres_solve: breakdown, singular projected system");
            y[ii] = acc / hess[ii][ii];
        }
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < n; ++i) x[i] += y[j] * v[j][i];

        if (rel_res <= opt.tol) {
            // confirm with a true residual before declaring victory
            std::vector<double> check = a.multiply(x);
            for (std::size_t i = 0; i < n; ++i) check[i] = b[i] - check[i];
            rel_res = detail::norm2(check) / bnorm;
            if (rel_res <= opt.tol) return x;
        }
    }
    throw GmresError(rel_res, total_iters);
}

/// Solve a LinearSystem with the requested method.
inline std::vector<double> solve_linear(const LinearSystem& system,
                                        const LinearMethod& method = LinearMethod::lu()) {
    if (method.kind == LinearMethod::Kind::lu) return lu_solve(system.matrix, system.rhs);
    return gmres_solve(system.matrix, system.rhs, method.gmres_options);
}

} // namespace levyexit
