#pragma once

#include "llot/core.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>

namespace llot {

/// Uniform tensor grid on R^d: node(i) = origin + i * spacing componentwise.
/// Flat indices order nodes lexicographically by multi-index, axis 0 most significant.
template <typename Scalar>
class Grid {
public:
    Grid() = default;

    Grid(Vector<Scalar> origin, Scalar spacing, Index points_per_axis)
        : origin_(std::move(origin)), spacing_(spacing), points_(points_per_axis)
    {
        if (origin_.size() < 1) throw ValidationError("grid dimension must be at least 1");
        if (!(spacing_ > 0)) throw ValidationError("grid spacing must be positive");
        if (points_ < 2) throw ValidationError("grid needs at least 2 points per axis");
        count_ = 1;
        for (int a = 0; a < dim(); ++a) count_ *= points_;
    }

    /// One-dimensional convenience constructor.
    static Grid line(Scalar origin, Scalar spacing, Index points)
    {
        Vector<Scalar> o(1);
        o << origin;
        return Grid(o, spacing, points);
    }

    int dim() const { return static_cast<int>(origin_.size()); }
    const Vector<Scalar>& origin() const { return origin_; }
    Scalar spacing() const { return spacing_; }
    Index points_per_axis() const { return points_; }
    Index node_count() const { return count_; }
    Scalar cell_volume() const { return std::pow(spacing_, dim()); }

    Index stride(int axis) const
    {
        Index s = 1;
        for (int a = axis + 1; a < dim(); ++a) s *= points_;
        return s;
    }

    Index coordinate(Index flat, int axis) const { return (flat / stride(axis)) % points_; }

    Vector<Scalar> node(Index flat) const
    {
        Vector<Scalar> x(dim());
        for (int a = 0; a < dim(); ++a)
            x[a] = origin_[a] + Scalar(coordinate(flat, a)) * spacing_;
        return x;
    }

    /// Flat index of the nearest node; throws if `x` lies more than half a cell outside.
    Index locate(const Eigen::Ref<const Vector<Scalar>>& x) const
    {
        if (x.size() != dim()) throw ValidationError("point dimension does not match grid");
        Index flat = 0;
        for (int a = 0; a < dim(); ++a) {
            const Scalar t = (x[a] - origin_[a]) / spacing_;
            const auto i = static_cast<Index>(std::llround(t));
            if (i < 0 || i >= points_) {
                std::ostringstream msg;
                msg << "point coordinate " << x[a] << " lies outside the grid on axis " << a;
                throw ValidationError(msg.str());
            }
            flat += i * stride(a);
        }
        return flat;
    }

    /// Neighbour along `axis` at offset `step`, or -1 when it falls off the grid.
    Index neighbour(Index flat, int axis, Index step) const
    {
        const Index c = coordinate(flat, axis) + step;
        if (c < 0 || c >= points_) return -1;
        return flat + step * stride(axis);
    }

    /// Node displaced by the integer vector `delta`, or -1 when it falls off the grid.
    Index offset(Index flat, std::span<const Index> delta) const
    {
        Index out = flat;
        for (int a = 0; a < dim(); ++a) {
            const Index c = coordinate(flat, a) + delta[a];
            if (c < 0 || c >= points_) return -1;
            out += delta[a] * stride(a);
        }
        return out;
    }

    bool operator==(const Grid& other) const
    {
        return points_ == other.points_ && spacing_ == other.spacing_ && origin_ == other.origin_;
    }

private:
    Vector<Scalar> origin_;
    Scalar spacing_ = 1;
    Index points_ = 2;
    Index count_ = 0;
};

enum class MassConvention { probability, particle_number };

/// Nonnegative samples of a one-particle density on a grid.
template <typename Scalar>
struct GridDensity {
    Grid<Scalar> grid;
    Vector<Scalar> values;
    MassConvention convention = MassConvention::probability;

    GridDensity() = default;
    GridDensity(Grid<Scalar> g, Vector<Scalar> v,
                MassConvention c = MassConvention::probability)
        : grid(std::move(g)), values(std::move(v)), convention(c)
    {
        if (values.size() != grid.node_count())
            throw ValidationError("density sample count does not match grid");
        for (Index i = 0; i < values.size(); ++i)
            if (!(values[i] >= 0)) throw ValidationError("density values must be nonnegative");
    }

    Scalar mass() const { return values.sum() * grid.cell_volume(); }

    /// Throws unless the mass matches the convention (1, or `n_particles`).
    void check_mass(int n_particles, Scalar tol = Scalar(1e-10)) const
    {
        const Scalar expected =
            convention == MassConvention::probability ? Scalar(1) : Scalar(n_particles);
        if (std::abs(mass() - expected) > tol * expected) {
            std::ostringstream msg;
            msg << "density mass " << mass() << " does not match expected " << expected;
            throw ValidationError(msg.str());
        }
    }

    /// Probability-convention copy (divides by N under the particle-number convention).
    GridDensity to_probability(int n_particles) const
    {
        if (convention == MassConvention::probability) return *this;
        return GridDensity(grid, values / Scalar(n_particles), MassConvention::probability);
    }
};

template <typename Scalar>
Scalar l1_distance(const GridDensity<Scalar>& a, const GridDensity<Scalar>& b)
{
    if (!(a.grid == b.grid)) throw ValidationError("densities live on different grids");
    return (a.values - b.values).cwiseAbs().sum() * a.grid.cell_volume();
}

template <typename Scalar>
struct Atom {
    Configuration<Scalar> x;  // d x N
    Scalar w = 0;
};

/// Finitely supported N-particle probability measure.
template <typename Scalar>
struct AtomicPlan {
    int n_particles = 1;
    int dim = 1;
    std::vector<Atom<Scalar>> atoms;

    Scalar total_weight() const
    {
        Scalar s = 0;
        for (const auto& a : atoms) s += a.w;
        return s;
    }

    void validate(Scalar tol = Scalar(1e-12)) const
    {
        if (n_particles < 1) throw ValidationError("plan needs at least one particle");
        if (atoms.empty()) throw ValidationError("empty measure");
        for (const auto& a : atoms) {
            if (a.x.rows() != dim || a.x.cols() != n_particles)
                throw ValidationError("atom shape does not match plan dimensions");
            if (!(a.w > 0)) throw ValidationError("atom weights must be positive");
        }
        if (std::abs(total_weight() - 1) > tol) {
            std::ostringstream msg;
            msg << "plan weights sum to " << total_weight() << ", expected 1";
            throw ValidationError(msg.str());
        }
    }
};

/// Minimum pairwise distance over all atoms.
template <typename Scalar>
struct SeparationReport {
    Scalar min_distance = 0;
    std::size_t argmin_atom = 0;
    std::optional<Configuration<Scalar>> violating_atom;  // set when min_distance == 0
};

namespace detail {

template <typename Scalar>
std::vector<Scalar> configuration_key(const Configuration<Scalar>& x)
{
    return std::vector<Scalar>(x.data(), x.data() + x.size());
}

}  // namespace detail

/// Average the weights over all N! coordinate permutations. Atoms with identical
/// configurations are merged; output is ordered by configuration.
template <typename Scalar>
AtomicPlan<Scalar> symmetrize(const AtomicPlan<Scalar>& plan)
{
    const PermutationTable table(plan.n_particles);
    const Scalar share = Scalar(1) / Scalar(table.size());
    std::map<std::vector<Scalar>, Scalar> merged;
    for (const auto& atom : plan.atoms) {
        for (const auto& perm : table.perms) {
            Configuration<Scalar> y(plan.dim, plan.n_particles);
            for (int k = 0; k < plan.n_particles; ++k) y.col(k) = atom.x.col(perm[k]);
            merged[detail::configuration_key(y)] += atom.w * share;
        }
    }
    AtomicPlan<Scalar> out{plan.n_particles, plan.dim, {}};
    out.atoms.reserve(merged.size());
    for (const auto& [key, w] : merged) {
        Configuration<Scalar> x =
            Eigen::Map<const Configuration<Scalar>>(key.data(), plan.dim, plan.n_particles);
        out.atoms.push_back({std::move(x), w});
    }
    return out;
}

template <typename Scalar>
SeparationReport<Scalar> separation(const AtomicPlan<Scalar>& plan)
{
    if (plan.n_particles < 2) throw ValidationError("separation undefined for single particle");
    if (plan.atoms.empty()) throw ValidationError("empty measure");
    SeparationReport<Scalar> report;
    report.min_distance = std::numeric_limits<Scalar>::infinity();
    for (std::size_t a = 0; a < plan.atoms.size(); ++a) {
        const auto& x = plan.atoms[a].x;
        for (int i = 0; i < plan.n_particles; ++i)
            for (int j = i + 1; j < plan.n_particles; ++j) {
                const Scalar d = (x.col(i) - x.col(j)).norm();
                if (d < report.min_distance) {
                    report.min_distance = d;
                    report.argmin_atom = a;
                }
            }
    }
    if (report.min_distance == 0) report.violating_atom = plan.atoms[report.argmin_atom].x;
    return report;
}

/// One-particle marginal with every coordinate binned to its nearest node
/// (probability convention, values are mass per cell volume).
template <typename Scalar>
GridDensity<Scalar> marginal(const AtomicPlan<Scalar>& plan, const Grid<Scalar>& grid)
{
    if (plan.atoms.empty()) throw ValidationError("empty measure");
    if (plan.dim != grid.dim()) throw ValidationError("plan and grid dimensions differ");
    Vector<Scalar> values = Vector<Scalar>::Zero(grid.node_count());
    const Scalar scale = Scalar(1) / (Scalar(plan.n_particles) * grid.cell_volume());
    for (const auto& atom : plan.atoms)
        for (int k = 0; k < plan.n_particles; ++k)
            values[grid.locate(atom.x.col(k))] += atom.w * scale;
    return GridDensity<Scalar>(grid, std::move(values));
}

namespace detail {

// Derivative of sqrt(v) along one axis at a node with positive value: central in the
// interior of the support, one-sided towards the support at its edges. Nodes with no
// positive neighbour along the axis contribute nothing.
template <typename Scalar>
Scalar sqrt_axis_derivative(const Scalar* sq, Index flat, Index coord, Index n, Index stride,
                            Scalar h)
{
    const bool has_left = coord > 0 && sq[flat - stride] > 0;
    const bool has_right = coord + 1 < n && sq[flat + stride] > 0;
    if (has_left && has_right) return (sq[flat + stride] - sq[flat - stride]) / (2 * h);
    if (has_right) return (sq[flat + stride] - sq[flat]) / h;
    if (has_left) return (sq[flat] - sq[flat - stride]) / h;
    return 0;
}

}  // namespace detail

/// Integral of |grad sqrt(v)|^2 for a nonnegative array on an `axes`-dimensional
/// tensor grid with `n` points per axis and spacing `h`.
template <typename Scalar>
Scalar sqrt_gradient_energy(const Eigen::Ref<const Vector<Scalar>>& v, int axes, Index n, Scalar h)
{
    Vector<Scalar> sq = v.cwiseMax(Scalar(0)).cwiseSqrt();
    Scalar total = 0;
    for (int axis = 0; axis < axes; ++axis) {
        Index stride = 1;
        for (int a = axis + 1; a < axes; ++a) stride *= n;
        Scalar axis_sum = 0;
        for (Index flat = 0; flat < sq.size(); ++flat) {
            if (!(sq[flat] > 0)) continue;
            const Index coord = (flat / stride) % n;
            const Scalar g = detail::sqrt_axis_derivative(sq.data(), flat, coord, n, stride, h);
            axis_sum += g * g;
        }
        total += axis_sum;
    }
    return total * std::pow(h, axes);
}

/// Integral of |grad sqrt(rho)|^2 by finite differences.
template <typename Scalar>
Scalar h1_seminorm_sqrt(const GridDensity<Scalar>& rho)
{
    return sqrt_gradient_energy<Scalar>(rho.values, rho.grid.dim(), rho.grid.points_per_axis(),
                                        rho.grid.spacing());
}

/// Integral of |grad rho| with central differences (one-sided at the grid boundary).
template <typename Scalar>
Scalar gradient_l1(const GridDensity<Scalar>& rho)
{
    const auto& g = rho.grid;
    const Scalar h = g.spacing();
    Scalar total = 0;
    for (Index flat = 0; flat < g.node_count(); ++flat) {
        Scalar norm2 = 0;
        for (int a = 0; a < g.dim(); ++a) {
            const Index l = g.neighbour(flat, a, -1);
            const Index r = g.neighbour(flat, a, +1);
            Scalar d = 0;
            if (l >= 0 && r >= 0)
                d = (rho.values[r] - rho.values[l]) / (2 * h);
            else if (r >= 0)
                d = (rho.values[r] - rho.values[flat]) / h;
            else if (l >= 0)
                d = (rho.values[flat] - rho.values[l]) / h;
            norm2 += d * d;
        }
        total += std::sqrt(norm2);
    }
    return total * g.cell_volume();
}

/// True when the density jumps from zero to a non-negligible value between
/// neighbouring nodes, i.e. its gradient is not resolved by the grid.
template <typename Scalar>
bool gradient_unresolved(const GridDensity<Scalar>& rho, Scalar rel = Scalar(0.05))
{
    const auto& g = rho.grid;
    const Scalar peak = rho.values.maxCoeff();
    for (Index flat = 0; flat < g.node_count(); ++flat) {
        if (!(rho.values[flat] > rel * peak)) continue;
        for (int a = 0; a < g.dim(); ++a)
            for (Index step : {Index(-1), Index(1)}) {
                const Index nb = g.neighbour(flat, a, step);
                if (nb >= 0 && rho.values[nb] == 0) return true;
            }
    }
    return false;
}

}  // namespace llot
