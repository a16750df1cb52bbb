#pragma once

#include "llot/core.hpp"

#include <Eigen/LU>

namespace llot {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

template <typename Scalar>
struct LpResult {
    LpStatus status = LpStatus::iteration_limit;
    Vector<Scalar> x;      // primal solution
    Vector<Scalar> y;      // equality-constraint duals: c - A^T y >= 0 at optimum
    Scalar value = 0;
    Index iterations = 0;
    std::vector<Index> basis;
};

/// min c^T x subject to A x = b, x >= 0, by a dense two-phase tableau simplex with
/// Bland's rule. Artificial variables left at zero level are driven out of the basis,
/// or their rows dropped as redundant. The final basic solution and duals are recomputed
/// from an LU factorization of the basis matrix.
template <typename Scalar>
LpResult<Scalar> solve_standard_lp(const Matrix<Scalar>& a_in, const Vector<Scalar>& b_in,
                                   const Vector<Scalar>& c, Index max_iterations = 1000000,
                                   Scalar tol = Scalar(1e-11))
{
    using Tableau = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Index m = a_in.rows(), n = a_in.cols();
    if (b_in.size() != m || c.size() != n) throw ValidationError("LP dimensions are inconsistent");

    Matrix<Scalar> a = a_in;
    Vector<Scalar> b = b_in;
    for (Index i = 0; i < m; ++i)
        if (b[i] < 0) {
            a.row(i) *= -1;
            b[i] = -b[i];
        }

    // Columns: n structural, m artificial, then the right-hand side. Last row: objective.
    const Index rhs = n + m;
    Tableau t = Tableau::Zero(m + 1, n + m + 1);
    t.topLeftCorner(m, n) = a;
    t.block(0, n, m, m).setIdentity();
    t.col(rhs).head(m) = b;
    std::vector<Index> basis(m);
    for (Index i = 0; i < m; ++i) basis[i] = n + i;
    std::vector<bool> row_alive(m, true);

    LpResult<Scalar> result;

    auto pivot = [&](Index r, Index q) {
        t.row(r) /= t(r, q);
        for (Index i = 0; i <= m; ++i) {
            if (i == r) continue;
            const Scalar f = t(i, q);
            if (f != 0) t.row(i) -= f * t.row(r);
        }
        basis[r] = q;
        ++result.iterations;
    };

    // Bland: lowest-index entering column with negative reduced cost; ratio ties broken by
    // lowest basic index.
    auto run = [&](Index columns) -> LpStatus {
        while (true) {
            if (result.iterations >= max_iterations) return LpStatus::iteration_limit;
            Index q = -1;
            for (Index j = 0; j < columns; ++j)
                if (t(m, j) < -tol) {
                    q = j;
                    break;
                }
            if (q < 0) return LpStatus::optimal;
            Index r = -1;
            Scalar best = 0;
            for (Index i = 0; i < m; ++i) {
                if (!row_alive[i] || t(i, q) <= tol) continue;
                const Scalar ratio = t(i, rhs) / t(i, q);
                if (r < 0 || ratio < best - tol || (ratio <= best + tol && basis[i] < basis[r])) {
                    r = i;
                    best = ratio;
                }
            }
            if (r < 0) return LpStatus::unbounded;
            pivot(r, q);
        }
    };

    // Phase 1: minimize the sum of artificials.
    t.row(m).setZero();
    for (Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
    for (Index j = n; j < n + m; ++j) t(m, j) = 0;
    const Scalar scale = std::max<Scalar>(1, b.cwiseAbs().maxCoeff());
    auto status = run(n + m);
    if (status == LpStatus::iteration_limit) {
        result.status = status;
        return result;
    }
    if (-t(m, rhs) > tol * scale * Scalar(m)) {
        result.status = LpStatus::infeasible;
        return result;
    }
    for (Index i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        Index q = -1;
        for (Index j = 0; j < n; ++j)
            if (std::abs(t(i, j)) > tol) {
                q = j;
                break;
            }
        if (q >= 0)
            pivot(i, q);
        else
            row_alive[i] = false;
    }

    // Phase 2: original costs with artificial columns excluded.
    t.row(m).setZero();
    t.row(m).head(n) = c.transpose();
    for (Index i = 0; i < m; ++i)
        if (row_alive[i]) t.row(m) -= c[basis[i]] * t.row(i);
    status = run(n);
    result.status = status;
    if (status != LpStatus::optimal) return result;

    std::vector<Index> rows, cols;
    for (Index i = 0; i < m; ++i)
        if (row_alive[i]) {
            rows.push_back(i);
            cols.push_back(basis[i]);
        }
    const Index k = Index(rows.size());
    Matrix<Scalar> bmat(k, k);
    Vector<Scalar> bb(k), cb(k);
    for (Index i = 0; i < k; ++i) {
        bb[i] = b[rows[i]];
        cb[i] = c[cols[i]];
        for (Index j = 0; j < k; ++j) bmat(i, j) = a(rows[i], cols[j]);
    }
    Eigen::PartialPivLU<Matrix<Scalar>> lu(bmat);
    const Vector<Scalar> xb = lu.solve(bb);
    const Vector<Scalar> yb = lu.transpose().solve(cb);

    result.x = Vector<Scalar>::Zero(n);
    // degenerate basics come back at roundoff level; snap them to zero
    const Scalar floor = tol * scale * Scalar(1e-1);
    for (Index j = 0; j < k; ++j) result.x[cols[j]] = xb[j] > floor ? xb[j] : Scalar(0);
    result.y = Vector<Scalar>::Zero(m);
    for (Index i = 0; i < k; ++i) result.y[rows[i]] = (b_in[rows[i]] < 0 ? -1 : 1) * yb[i];
    result.value = c.dot(result.x);
    result.basis = cols;
    return result;
}

}  // namespace llot
