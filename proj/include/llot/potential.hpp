#pragma once

#include "llot/core.hpp"

#include <functional>
#include <limits>

namespace llot {

/// Symmetric N-particle test function with optional coordinate-block derivatives.
/// gradient(X) is d x N (column j holds grad_j Phi); hessian(X) is dN x dN with
/// block (j, k) = grad_j grad_k Phi.
template <typename Scalar>
struct Potential {
    std::string name;
    std::function<Scalar(const Configuration<Scalar>&)> value;
    std::function<Configuration<Scalar>(const Configuration<Scalar>&)> gradient;
    std::function<Matrix<Scalar>(const Configuration<Scalar>&)> hessian;

    bool has_derivatives() const { return bool(gradient) && bool(hessian); }
};

/// Phi(X) = sum_{j<k} |x_j - x_k|^{-1}; +inf on the diagonal.
template <typename Scalar>
Potential<Scalar> coulomb()
{
    Potential<Scalar> p;
    p.name = "coulomb";
    p.value = [](const Configuration<Scalar>& x) {
        Scalar v = 0;
        for (Index j = 0; j < x.cols(); ++j)
            for (Index k = j + 1; k < x.cols(); ++k) {
                const Scalar r = (x.col(j) - x.col(k)).norm();
                if (r == 0) return std::numeric_limits<Scalar>::infinity();
                v += 1 / r;
            }
        return v;
    };
    p.gradient = [](const Configuration<Scalar>& x) {
        Configuration<Scalar> g = Configuration<Scalar>::Zero(x.rows(), x.cols());
        for (Index j = 0; j < x.cols(); ++j)
            for (Index k = 0; k < x.cols(); ++k) {
                if (j == k) continue;
                const Vector<Scalar> r = x.col(j) - x.col(k);
                const Scalar n = r.norm();
                g.col(j) -= r / (n * n * n);
            }
        return g;
    };
    p.hessian = [](const Configuration<Scalar>& x) {
        const Index d = x.rows(), n = x.cols();
        Matrix<Scalar> hess = Matrix<Scalar>::Zero(d * n, d * n);
        const Matrix<Scalar> id = Matrix<Scalar>::Identity(d, d);
        for (Index j = 0; j < n; ++j)
            for (Index k = j + 1; k < n; ++k) {
                const Vector<Scalar> r = x.col(j) - x.col(k);
                const Scalar r2 = r.squaredNorm();
                const Scalar r5 = r2 * r2 * std::sqrt(r2);
                const Matrix<Scalar> b = (3 * r * r.transpose() - r2 * id) / r5;
                hess.block(j * d, j * d, d, d) += b;
                hess.block(k * d, k * d, d, d) += b;
                hess.block(j * d, k * d, d, d) -= b;
                hess.block(k * d, j * d, d, d) -= b;
            }
        return hess;
    };
    return p;
}

/// Phi(X) = sum_j phi(x_j) with user-supplied gradient and Hessian of phi.
template <typename Scalar>
Potential<Scalar> one_body_sum(std::function<Scalar(const Vector<Scalar>&)> phi,
                               std::function<Vector<Scalar>(const Vector<Scalar>&)> grad,
                               std::function<Matrix<Scalar>(const Vector<Scalar>&)> hess)
{
    Potential<Scalar> p;
    p.name = "one_body_sum";
    p.value = [phi](const Configuration<Scalar>& x) {
        Scalar v = 0;
        for (Index j = 0; j < x.cols(); ++j) v += phi(x.col(j));
        return v;
    };
    if (grad)
        p.gradient = [grad](const Configuration<Scalar>& x) {
            Configuration<Scalar> g(x.rows(), x.cols());
            for (Index j = 0; j < x.cols(); ++j) g.col(j) = grad(x.col(j));
            return g;
        };
    if (hess)
        p.hessian = [hess](const Configuration<Scalar>& x) {
            const Index d = x.rows();
            Matrix<Scalar> h = Matrix<Scalar>::Zero(d * x.cols(), d * x.cols());
            for (Index j = 0; j < x.cols(); ++j) h.block(j * d, j * d, d, d) = hess(x.col(j));
            return h;
        };
    return p;
}

template <typename Scalar>
Potential<Scalar> constant_potential(Scalar c)
{
    Potential<Scalar> p;
    p.name = "constant";
    p.value = [c](const Configuration<Scalar>&) { return c; };
    p.gradient = [](const Configuration<Scalar>& x) {
        return Configuration<Scalar>::Zero(x.rows(), x.cols()).eval();
    };
    p.hessian = [](const Configuration<Scalar>& x) {
        return Matrix<Scalar>::Zero(x.size(), x.size()).eval();
    };
    return p;
}

/// Spectral norm of a small dense block.
template <typename Scalar>
Scalar block_norm(const Eigen::Ref<const Matrix<Scalar>>& b)
{
    if (b.size() == 1) return std::abs(b(0, 0));
    Eigen::JacobiSVD<Matrix<Scalar>> svd(b);
    return svd.singularValues()(0);
}

}  // namespace llot
