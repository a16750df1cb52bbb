#pragma once

#include "llot/core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace llot {

template <typename Scalar>
struct QuadratureResult {
    Scalar value = 0;
    Scalar error = 0;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar, typename F>
QuadratureResult<Scalar> gauss_kronrod_15(F&& f, Scalar a, Scalar b)
{
    const Scalar centre = (a + b) / 2;
    const Scalar half = (b - a) / 2;
    const Scalar fc = f(centre);
    Scalar kronrod = fc * Scalar(kKronrodWeights[7]);
    Scalar gauss = fc * Scalar(kGaussWeights[3]);
    for (int j = 0; j < 7; ++j) {
        const Scalar dx = half * Scalar(kKronrodNodes[j]);
        const Scalar sum = f(centre - dx) + f(centre + dx);
        kronrod += Scalar(kKronrodWeights[j]) * sum;
        if (j % 2 == 1) gauss += Scalar(kGaussWeights[j / 2]) * sum;
    }
    return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

template <typename Scalar, typename F>
QuadratureResult<Scalar> adaptive_gk(F& f, Scalar a, Scalar b, Scalar tol, int depth, int max_depth)
{
    const auto whole = gauss_kronrod_15<Scalar>(f, a, b);
    if (whole.error <= tol || depth >= max_depth) return whole;
    const Scalar mid = (a + b) / 2;
    const auto left = adaptive_gk<Scalar>(f, a, mid, tol / 2, depth + 1, max_depth);
    const auto right = adaptive_gk<Scalar>(f, mid, b, tol / 2, depth + 1, max_depth);
    return {left.value + right.value, left.error + right.error};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (G7/K15) on [a, b] with bisection. Throws when the
/// accumulated error estimate stays above `tol`.
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate(F f, Scalar a, Scalar b, Scalar tol, int max_depth = 40)
{
    auto result = detail::adaptive_gk<Scalar>(f, a, b, tol, 0, max_depth);
    if (!(result.error <= tol)) {
        std::ostringstream msg;
        msg << "quadrature did not converge: achieved error estimate " << result.error
            << " above tolerance " << tol;
        throw NumericalError(msg.str());
    }
    return result;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
template <typename Scalar>
struct GaussLegendre {
    std::vector<Scalar> nodes;
    std::vector<Scalar> weights;

    explicit GaussLegendre(int order) : nodes(order), weights(order)
    {
        for (int i = 0; i < order; ++i) {
            Scalar x = std::cos(std::numbers::pi_v<Scalar> * (Scalar(i) + Scalar(0.75)) /
                                (Scalar(order) + Scalar(0.5)));
            Scalar dp = 0;
            for (int iter = 0; iter < 100; ++iter) {
                Scalar p0 = 1, p1 = x;
                for (int k = 2; k <= order; ++k) {
                    const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = order * (x * p1 - p0) / (x * x - 1);
                const Scalar step = p1 / dp;
                x -= step;
                if (std::abs(step) < 4 * std::numeric_limits<Scalar>::epsilon()) break;
            }
            nodes[i] = x;
            weights[i] = 2 / ((1 - x * x) * dp * dp);
        }
    }

    /// Rule mapped to [a, b], appended to `xs`/`ws`.
    void map(Scalar a, Scalar b, std::vector<Scalar>& xs, std::vector<Scalar>& ws) const
    {
        const Scalar c = (a + b) / 2, half = (b - a) / 2;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            xs.push_back(c + half * nodes[i]);
            ws.push_back(half * weights[i]);
        }
    }
};

}  // namespace llot
