#pragma once

#include "llot/grid.hpp"
#include "llot/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace llot {

/// Radial bump chi(x) = c exp(-1 / (1 - |x|^2)) on the open unit ball of R^d,
/// normalized so that the integral of chi^2 is 1.
template <typename Scalar>
class BumpProfile {
public:
    explicit BumpProfile(int dim = 1) : dim_(dim)
    {
        if (dim < 1) throw ValidationError("bump dimension must be at least 1");
        const auto sq = radial_integral([](Scalar r) { return unnormalized(r) * unnormalized(r); },
                                        Scalar(1e-16));
        c_ = 1 / std::sqrt(sq.value);
    }

    int dim() const { return dim_; }
    Scalar normalization() const { return c_; }

    /// Surface area of the unit sphere in R^d.
    Scalar sphere_area() const
    {
        return 2 * std::pow(std::numbers::pi_v<Scalar>, Scalar(dim_) / 2) /
               std::tgamma(Scalar(dim_) / 2);
    }

    Scalar radial(Scalar r) const { return c_ * unnormalized(r); }

    /// d chi / d r.
    Scalar radial_derivative(Scalar r) const
    {
        if (!(r < 1)) return 0;
        const Scalar s = 1 - r * r;
        return c_ * std::exp(-1 / s) * (-2 * r / (s * s));
    }

    template <typename Derived>
    Scalar operator()(const Eigen::MatrixBase<Derived>& x) const
    {
        return radial(x.norm());
    }

    /// Integral of f(|u|) over the unit ball: sphere area times the radial integral.
    template <typename F>
    QuadratureResult<Scalar> radial_integral(F f, Scalar tol) const
    {
        const int d = dim_;
        auto integrand = [&](Scalar r) { return f(r) * std::pow(r, Scalar(d - 1)); };
        auto res = integrate<Scalar>(integrand, Scalar(0), Scalar(1), tol);
        const Scalar area = sphere_area();
        return {res.value * area, res.error * area};
    }

private:
    static Scalar unnormalized(Scalar r)
    {
        if (!(r < 1)) return 0;
        return std::exp(-1 / (1 - r * r));
    }

    int dim_ = 1;
    Scalar c_ = 1;
};

/// chi_eps(x) = eps^{-d/2} chi(x / eps); support radius eps.
template <typename Scalar>
class ScaledMollifier {
public:
    ScaledMollifier(BumpProfile<Scalar> base, Scalar eps) : base_(std::move(base)), eps_(eps)
    {
        if (!(eps > 0)) throw ValidationError("mollifier width must be positive");
        amplitude_ = std::pow(eps_, -Scalar(base_.dim()) / 2);
    }

    const BumpProfile<Scalar>& base() const { return base_; }
    Scalar eps() const { return eps_; }
    int dim() const { return base_.dim(); }

    Scalar radial(Scalar r) const { return amplitude_ * base_.radial(r / eps_); }

    Scalar radial_derivative(Scalar r) const
    {
        return amplitude_ * base_.radial_derivative(r / eps_) / eps_;
    }

    template <typename Derived>
    Scalar operator()(const Eigen::MatrixBase<Derived>& x) const
    {
        return radial(x.norm());
    }

    template <typename Derived>
    Vector<Scalar> gradient(const Eigen::MatrixBase<Derived>& x) const
    {
        const Scalar r = x.norm();
        Vector<Scalar> g = Vector<Scalar>::Zero(x.size());
        if (r > 0 && r < eps_) g = radial_derivative(r) / r * x;
        return g;
    }

private:
    BumpProfile<Scalar> base_;
    Scalar eps_;
    Scalar amplitude_ = 1;
};

template <typename Scalar, typename Derived>
Scalar eval_chi(const ScaledMollifier<Scalar>& m, const Eigen::MatrixBase<Derived>& x)
{
    return m(x);
}

template <typename Scalar>
struct MollifierMoments {
    Scalar grad_sq = 0;          // integral of |grad chi|^2
    Scalar grad_sq_error = 0;
    Scalar second_moment = 0;    // integral of |u|^2 chi(u)^2
    Scalar second_moment_error = 0;

    /// Moments of chi_eps: grad_sq scales as eps^-2, second_moment as eps^2.
    MollifierMoments scaled(Scalar eps) const
    {
        return {grad_sq / (eps * eps), grad_sq_error / (eps * eps), second_moment * eps * eps,
                second_moment_error * eps * eps};
    }
};

template <typename Scalar>
MollifierMoments<Scalar> moments(const BumpProfile<Scalar>& b, Scalar tol = Scalar(1e-12))
{
    const auto grad = b.radial_integral(
        [&](Scalar r) {
            const Scalar d = b.radial_derivative(r);
            return d * d;
        },
        tol);
    const auto second = b.radial_integral(
        [&](Scalar r) {
            const Scalar v = b.radial(r);
            return r * r * v * v;
        },
        tol);
    return {grad.value, grad.error, second.value, second.error};
}

inline constexpr double kTapCutoff = 1e-100;

/// chi_eps^2 sampled on grid offsets with |u| < eps, renormalized so that
/// sum(kappa) * h^d == 1.
template <typename Scalar>
struct DiscreteKernel {
    struct Tap {
        std::vector<Index> offset;
        Scalar value;
    };

    Index radius = 0;  // largest R with R h < eps
    std::vector<Tap> taps;
    Vector<Scalar> table;  // dense values on [-R, R]^d, axis 0 most significant

    DiscreteKernel(const Grid<Scalar>& grid, const ScaledMollifier<Scalar>& m)
    {
        const Scalar h = grid.spacing();
        const int d = grid.dim();
        if (m.dim() != d) throw ValidationError("mollifier and grid dimensions differ");
        if (m.eps() < h) throw ValidationError("kernel unresolved: mollifier width below grid spacing");
        radius = static_cast<Index>(std::ceil(m.eps() / h)) - 1;
        if (Scalar(radius + 1) * h < m.eps()) ++radius;

        // taps below kTapCutoff times the centre value are dropped
        const Scalar centre = m.radial(0) * m.radial(0);
        std::vector<Index> off(d, -radius);
        Scalar total = 0;
        while (true) {
            Scalar r2 = 0;
            for (int a = 0; a < d; ++a) r2 += Scalar(off[a] * off[a]);
            const Scalar r = std::sqrt(r2) * h;
            if (r < m.eps()) {
                const Scalar v = m.radial(r);
                if (v * v > Scalar(kTapCutoff) * centre) {
                    taps.push_back({off, v * v});
                    total += v * v;
                }
            }
            int a = d - 1;
            while (a >= 0 && off[a] == radius) off[a--] = -radius;
            if (a < 0) break;
            ++off[a];
        }
        const Scalar norm = total * grid.cell_volume();
        const Index side = 2 * radius + 1;
        Index cells = 1;
        for (int a = 0; a < d; ++a) cells *= side;
        table = Vector<Scalar>::Zero(cells);
        for (auto& t : taps) {
            t.value /= norm;
            table[table_index(t.offset)] = t.value;
        }
    }

    /// Value at an integer offset (zero outside the support).
    Scalar at(std::span<const Index> offset) const
    {
        for (Index u : offset)
            if (u < -radius || u > radius) return 0;
        return table[table_index(offset)];
    }

private:
    Index table_index(std::span<const Index> offset) const
    {
        Index flat = 0;
        for (Index u : offset) flat = flat * (2 * radius + 1) + (u + radius);
        return flat;
    }
};

/// rho * chi_eps^2 with the renormalized discrete kernel; mass is preserved
/// exactly when the kernel footprint of the support stays on the grid.
template <typename Scalar>
GridDensity<Scalar> convolve_sq(const GridDensity<Scalar>& rho, const ScaledMollifier<Scalar>& m)
{
    const auto& g = rho.grid;
    const DiscreteKernel<Scalar> kernel(g, m);
    const Scalar vol = g.cell_volume();
    Vector<Scalar> out = Vector<Scalar>::Zero(g.node_count());
    for (Index x = 0; x < g.node_count(); ++x) {
        const Scalar rx = rho.values[x];
        if (rx == 0) continue;
        for (const auto& t : kernel.taps) {
            const Index z = g.offset(x, t.offset);
            if (z >= 0) out[z] += rx * t.value * vol;
        }
    }
    return GridDensity<Scalar>(g, std::move(out), rho.convention);
}

/// Binned marginal, optionally smoothed with chi_bandwidth^2 (for plotting).
template <typename Scalar>
GridDensity<Scalar> marginal(const AtomicPlan<Scalar>& plan, const Grid<Scalar>& grid,
                             Scalar bandwidth)
{
    if (bandwidth < 0) throw ValidationError("bandwidth must be nonnegative");
    auto binned = marginal(plan, grid);
    if (bandwidth == 0) return binned;
    return convolve_sq(binned, ScaledMollifier<Scalar>(BumpProfile<Scalar>(grid.dim()), bandwidth));
}

}  // namespace llot
