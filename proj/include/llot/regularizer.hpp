#pragma once

#include "llot/mollifier.hpp"
#include "llot/potential.hpp"

#include <limits>
#include <map>

namespace llot {

inline constexpr double kDenomFloor = 1e-300;
inline constexpr Index kDefaultTensorLimit = Index(1) << 26;

namespace detail {

/// Enumerates the Cartesian product of N lists, calling f(choice) for each.
template <typename F>
void for_each_choice(const std::vector<Index>& sizes, F&& f)
{
    std::vector<Index> choice(sizes.size(), 0);
    for (Index s : sizes)
        if (s == 0) return;
    while (true) {
        f(choice);
        int k = static_cast<int>(sizes.size()) - 1;
        while (k >= 0 && ++choice[k] == sizes[k]) choice[k--] = 0;
        if (k < 0) return;
    }
}

inline Index checked_power(Index base, int exponent, Index limit)
{
    Index out = 1;
    for (int i = 0; i < exponent; ++i) {
        if (out > limit / base) return limit + 1;
        out *= base;
    }
    return out;
}

}  // namespace detail

/// Q_eps(z) = sum_atoms w prod_k kappa(z_k - y_k) on grid nodes.
template <typename Scalar>
class SmoothedPlan {
public:
    SmoothedPlan(AtomicPlan<Scalar> plan, const Grid<Scalar>& grid, ScaledMollifier<Scalar> m)
        : source_(std::move(plan)), grid_(grid), m_(std::move(m)), kernel_(grid_, m_)
    {
        source_.validate();
        for (const auto& a : source_.atoms) {
            std::vector<Index> nodes(source_.n_particles);
            for (int k = 0; k < source_.n_particles; ++k) nodes[k] = grid_.locate(a.x.col(k));
            atom_nodes_.push_back(std::move(nodes));
        }
    }

    const AtomicPlan<Scalar>& source() const { return source_; }
    const ScaledMollifier<Scalar>& mollifier() const { return m_; }

    Scalar evaluate_nodes(std::span<const Index> z) const
    {
        const int d = grid_.dim();
        std::vector<Index> off(d);
        Scalar total = 0;
        for (std::size_t a = 0; a < source_.atoms.size(); ++a) {
            Scalar prod = source_.atoms[a].w;
            for (int k = 0; k < source_.n_particles && prod != 0; ++k) {
                for (int ax = 0; ax < d; ++ax)
                    off[ax] = grid_.coordinate(z[k], ax) - grid_.coordinate(atom_nodes_[a][k], ax);
                prod *= kernel_.at(off);
            }
            total += prod;
        }
        return total;
    }

    /// One-particle marginal: rho_P convolved with the discrete kernel.
    GridDensity<Scalar> density() const { return convolve_sq(marginal(source_, grid_), m_); }

private:
    AtomicPlan<Scalar> source_;
    Grid<Scalar> grid_;
    ScaledMollifier<Scalar> m_;
    DiscreteKernel<Scalar> kernel_;
    std::vector<std::vector<Index>> atom_nodes_;
};

/// P_eps(X) = sum_atoms w prod_k F(x_k, y_k) with
/// F(x, y) = rho(x) sum_z kappa(x - z) kappa(z - y) / denom(z) h^d,
/// where rho is the binned plan marginal and denom = rho * kappa.
template <typename Scalar>
class RegularizedPlan {
public:
    struct SiteFactor {
        Index node;                                    // flat index of y
        std::vector<std::pair<Index, Scalar>> values;  // (x node, F(x, y)) with F > 0
        Scalar mass = 0;                               // sum_x F(x, y) h^d
    };

    RegularizedPlan(AtomicPlan<Scalar> plan, GridDensity<Scalar> rho, ScaledMollifier<Scalar> m)
        : source_(std::move(plan)), rho_(std::move(rho)), m_(std::move(m)),
          kernel_(rho_.grid, m_), denom_(convolve_sq(rho_, m_))
    {
        const auto& g = rho_.grid;
        alpha_ = source_.n_particles > 1 ? separation(source_).min_distance
                                         : std::numeric_limits<Scalar>::infinity();
        if (!(m_.eps() < alpha_ / 4)) {
            std::ostringstream msg;
            msg << "mollifier too wide for separation " << alpha_ << ": need eps < " << alpha_ / 4
                << ", got " << m_.eps();
            throw ValidationError(msg.str());
        }
        const Index r = kernel_.radius;
        for (Index x = 0; x < g.node_count(); ++x) {
            if (rho_.values[x] == 0) continue;
            for (int ax = 0; ax < g.dim(); ++ax) {
                const Index c = g.coordinate(x, ax);
                if (c < r || c + r >= g.points_per_axis())
                    throw ValidationError(
                        "density support must stay at least the kernel radius inside the grid");
            }
        }

        std::map<Index, Index> site_of_node;
        for (const auto& a : source_.atoms) {
            std::vector<Index> sites(source_.n_particles);
            for (int k = 0; k < source_.n_particles; ++k) {
                const Index node = g.locate(a.x.col(k));
                auto [it, inserted] = site_of_node.try_emplace(node, Index(sites_.size()));
                if (inserted) sites_.push_back(build_site(node));
                sites[k] = it->second;
            }
            atom_sites_.push_back(std::move(sites));
        }
    }

    const AtomicPlan<Scalar>& source() const { return source_; }
    const GridDensity<Scalar>& rho() const { return rho_; }
    const Grid<Scalar>& grid() const { return rho_.grid; }
    const ScaledMollifier<Scalar>& mollifier() const { return m_; }
    const DiscreteKernel<Scalar>& kernel() const { return kernel_; }
    const GridDensity<Scalar>& denom() const { return denom_; }
    Scalar eps() const { return m_.eps(); }
    Scalar separation_distance() const { return alpha_; }
    int n_particles() const { return source_.n_particles; }
    std::size_t atom_count() const { return source_.atoms.size(); }
    Scalar weight(std::size_t a) const { return source_.atoms[a].w; }
    const std::vector<Index>& atom_sites(std::size_t a) const { return atom_sites_[a]; }
    const SiteFactor& site(Index s) const { return sites_[s]; }
    std::size_t site_count() const { return sites_.size(); }

    /// F(x, y_site) for a grid node x.
    Scalar factor(Index s, Index x) const
    {
        const auto& v = sites_[s].values;
        auto it = std::lower_bound(v.begin(), v.end(), x,
                                   [](const auto& p, Index key) { return p.first < key; });
        return (it != v.end() && it->first == x) ? it->second : Scalar(0);
    }

    /// P_eps at a configuration of grid nodes.
    Scalar evaluate_nodes(std::span<const Index> x) const
    {
        Scalar total = 0;
        for (std::size_t a = 0; a < atom_sites_.size(); ++a) {
            Scalar prod = source_.atoms[a].w;
            for (int k = 0; k < n_particles() && prod != 0; ++k)
                prod *= factor(atom_sites_[a][k], x[k]);
            total += prod;
        }
        return total;
    }

    /// P_eps at the nearest grid configuration.
    Scalar evaluate(const Configuration<Scalar>& x) const
    {
        if (x.cols() != n_particles() || x.rows() != grid().dim())
            throw ValidationError("configuration shape does not match plan");
        std::vector<Index> nodes(n_particles());
        for (int k = 0; k < n_particles(); ++k) nodes[k] = grid().locate(x.col(k));
        return evaluate_nodes(nodes);
    }

    /// Visits every nonzero term w * prod_k F(x_k, y_k) of every atom as (atom, nodes, value).
    template <typename F>
    void for_each_term(F&& f) const
    {
        const int n = n_particles();
        std::vector<Index> sizes(n), nodes(n);
        for (std::size_t a = 0; a < atom_sites_.size(); ++a) {
            const auto& sites = atom_sites_[a];
            for (int k = 0; k < n; ++k) sizes[k] = Index(sites_[sites[k]].values.size());
            const Scalar w = source_.atoms[a].w;
            detail::for_each_choice(sizes, [&](const std::vector<Index>& c) {
                Scalar prod = w;
                for (int k = 0; k < n; ++k) {
                    const auto& entry = sites_[sites[k]].values[c[k]];
                    nodes[k] = entry.first;
                    prod *= entry.second;
                }
                f(a, std::span<const Index>(nodes), prod);
            });
        }
    }

private:
    SiteFactor build_site(Index y) const
    {
        const auto& g = rho_.grid;
        const Scalar vol = g.cell_volume();
        std::map<Index, Scalar> acc;
        for (const auto& t : kernel_.taps) {
            const Index z = g.offset(y, t.offset);
            if (z < 0) throw ValidationError("plan support too close to the grid boundary");
            const Scalar den = denom_.values[z];
            if (!(den > Scalar(kDenomFloor)))
                throw ValidationError("density vanishes near plan support");
            const Scalar c = t.value / den * vol;
            for (const auto& s : kernel_.taps) {
                const Index x = g.offset(z, s.offset);
                if (x < 0 || rho_.values[x] == 0) continue;
                acc[x] += rho_.values[x] * s.value * c;
            }
        }
        SiteFactor out;
        out.node = y;
        out.values.assign(acc.begin(), acc.end());
        for (const auto& [x, v] : out.values) out.mass += v;
        out.mass *= vol;
        return out;
    }

    AtomicPlan<Scalar> source_;
    GridDensity<Scalar> rho_;
    ScaledMollifier<Scalar> m_;
    DiscreteKernel<Scalar> kernel_;
    GridDensity<Scalar> denom_;
    Scalar alpha_ = 0;
    std::vector<SiteFactor> sites_;
    std::vector<std::vector<Index>> atom_sites_;
};

/// Builds P_eps. `rho` must match the binned plan marginal within `marginal_tol` in L1;
/// the binned marginal itself is then pinned, so the marginal identity is exact.
template <typename Scalar>
RegularizedPlan<Scalar> build_regularized(const AtomicPlan<Scalar>& plan, const GridDensity<Scalar>& rho,
                                          Scalar eps, Scalar marginal_tol = Scalar(1e-8))
{
    plan.validate();
    const auto prob = rho.to_probability(plan.n_particles);
    auto pinned = marginal(plan, prob.grid);
    const Scalar dist = l1_distance(pinned, prob);
    if (dist > marginal_tol) {
        std::ostringstream msg;
        msg << "density does not match the plan marginal (L1 distance " << dist << ")";
        throw ValidationError(msg.str());
    }
    ScaledMollifier<Scalar> m(BumpProfile<Scalar>(prob.grid.dim()), eps);
    return RegularizedPlan<Scalar>(symmetrize(plan), std::move(pinned), std::move(m));
}

/// One-particle marginal of P_eps, by the factorized sum over atoms.
template <typename Scalar>
GridDensity<Scalar> density_of(const RegularizedPlan<Scalar>& rp)
{
    const auto& g = rp.grid();
    const int n = rp.n_particles();
    Vector<Scalar> out = Vector<Scalar>::Zero(g.node_count());
    for (std::size_t a = 0; a < rp.atom_count(); ++a) {
        const auto& sites = rp.atom_sites(a);
        for (int k = 0; k < n; ++k) {
            Scalar others = rp.weight(a) / Scalar(n);
            for (int j = 0; j < n; ++j)
                if (j != k) others *= rp.site(sites[j]).mass;
            for (const auto& [x, v] : rp.site(sites[k]).values) out[x] += others * v;
        }
    }
    return GridDensity<Scalar>(g, std::move(out));
}

/// P_eps on the N-fold tensor grid (flat index = node indices concatenated, particle 0
/// most significant).
template <typename Scalar>
Vector<Scalar> materialize(const RegularizedPlan<Scalar>& rp, Index max_entries = kDefaultTensorLimit)
{
    const Index nodes = rp.grid().node_count();
    const Index size = detail::checked_power(nodes, rp.n_particles(), max_entries);
    if (size > max_entries) {
        std::ostringstream msg;
        msg << "tensor grid too large: " << nodes << "^" << rp.n_particles() << " entries (about "
            << std::pow(double(nodes), rp.n_particles()) * 8 / 1e9 << " GB), limit " << max_entries;
        throw NumericalError(msg.str());
    }
    Vector<Scalar> t = Vector<Scalar>::Zero(size);
    rp.for_each_term([&](std::size_t, std::span<const Index> x, Scalar v) {
        Index flat = 0;
        for (Index node : x) flat = flat * nodes + node;
        t[flat] += v;
    });
    return t;
}

/// Integral of |grad sqrt(P_eps)|^2 by finite differences on the tensor grid.
template <typename Scalar>
Scalar kinetic_of_sqrt(const RegularizedPlan<Scalar>& rp, Index max_entries = kDefaultTensorLimit)
{
    const auto t = materialize(rp, max_entries);
    const auto& g = rp.grid();
    return sqrt_gradient_energy<Scalar>(t, g.dim() * rp.n_particles(), g.points_per_axis(),
                                        g.spacing());
}

/// N (int |grad sqrt(rho)|^2 + eps^-2 int |grad chi|^2).
template <typename Scalar>
Scalar kinetic_bound(const RegularizedPlan<Scalar>& rp)
{
    const auto mom = moments(rp.mollifier().base());
    return Scalar(rp.n_particles()) *
           (h1_seminorm_sqrt(rp.rho()) + mom.grad_sq / (rp.eps() * rp.eps()));
}

template <typename Scalar>
Configuration<Scalar> nodes_to_configuration(const Grid<Scalar>& g, std::span<const Index> x)
{
    Configuration<Scalar> c(g.dim(), Index(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) c.col(Index(k)) = g.node(x[k]);
    return c;
}

/// Integral of Phi against P_eps over the tensor grid (terms with zero weight skipped).
template <typename Scalar>
Scalar integrate_potential(const RegularizedPlan<Scalar>& rp, const Potential<Scalar>& phi)
{
    const auto& g = rp.grid();
    const Scalar vol = std::pow(g.cell_volume(), rp.n_particles());
    Scalar total = 0;
    rp.for_each_term([&](std::size_t, std::span<const Index> x, Scalar v) {
        if (v != 0) total += v * phi.value(nodes_to_configuration(g, x));
    });
    return total * vol;
}

/// Integral of Phi against the atomic plan.
template <typename Scalar>
Scalar integrate_potential(const AtomicPlan<Scalar>& plan, const Potential<Scalar>& phi)
{
    Scalar total = 0;
    for (const auto& a : plan.atoms) total += a.w * phi.value(a.x);
    return total;
}

template <typename Scalar>
struct PotentialErrorReport {
    Scalar lhs = 0;
    Scalar bound = 0;
    Scalar integral_regularized = 0;
    Scalar integral_plan = 0;
    Scalar gradient_sup_sum = 0;  // sum_j sup |grad_j Phi|
    Scalar hessian_sup_sum = 0;   // sum_{j,k} sup |grad_j grad_k Phi|
    Scalar gradient_l1 = 0;       // int |grad rho|
    Scalar second_moment = 0;     // int |u|^2 chi^2
    bool gradient_unresolved = false;
};

/// Sup-norms of the derivative blocks of Phi sampled on the boxes |x_k - y_k| <= 2 eps
/// around every atom, `per_axis` points per coordinate axis including the endpoints.
template <typename Scalar>
std::pair<Scalar, Scalar> derivative_sups(const AtomicPlan<Scalar>& plan, Scalar eps,
                                          const Potential<Scalar>& phi, int per_axis)
{
    if (!phi.has_derivatives()) throw ValidationError("potential lacks derivatives");
    const int d = plan.dim, n = plan.n_particles;
    std::vector<Scalar> grad_sup(n, 0);
    Matrix<Scalar> hess_sup = Matrix<Scalar>::Zero(n, n);
    const std::vector<Index> sizes(std::size_t(d * n), Index(per_axis));
    for (const auto& atom : plan.atoms) {
        detail::for_each_choice(sizes, [&](const std::vector<Index>& c) {
            Configuration<Scalar> x = atom.x;
            for (int k = 0; k < n; ++k)
                for (int ax = 0; ax < d; ++ax) {
                    const Scalar t = Scalar(-1) + 2 * Scalar(c[k * d + ax]) / Scalar(per_axis - 1);
                    x(ax, k) += 2 * eps * t;
                }
            const auto gr = phi.gradient(x);
            const auto he = phi.hessian(x);
            for (int j = 0; j < n; ++j) {
                grad_sup[j] = std::max(grad_sup[j], gr.col(j).norm());
                for (int k = 0; k < n; ++k)
                    hess_sup(j, k) =
                        std::max(hess_sup(j, k), block_norm<Scalar>(he.block(j * d, k * d, d, d)));
            }
        });
    }
    Scalar gsum = 0;
    for (Scalar v : grad_sup) gsum += v;
    return {gsum, hess_sup.sum()};
}

/// |int Phi dP_eps - int Phi dP| against eps^2 { sum_j |grad_j Phi| int|grad rho| int|u|^2chi^2
/// + 2 sum_{j,k} |grad_j grad_k Phi| }.
template <typename Scalar>
PotentialErrorReport<Scalar> potential_error(const RegularizedPlan<Scalar>& rp,
                                             const Potential<Scalar>& phi, int per_axis = 0)
{
    if (!phi.has_derivatives()) throw ValidationError("potential lacks derivatives");
    PotentialErrorReport<Scalar> r;
    r.integral_regularized = integrate_potential(rp, phi);
    r.integral_plan = integrate_potential(rp.source(), phi);
    r.lhs = std::abs(r.integral_regularized - r.integral_plan);

    const int dn = rp.grid().dim() * rp.n_particles();
    if (per_axis <= 0) per_axis = std::max(3, int(std::floor(std::pow(4096.0, 1.0 / dn))));
    std::tie(r.gradient_sup_sum, r.hessian_sup_sum) =
        derivative_sups(rp.source(), rp.eps(), phi, per_axis);
    r.gradient_l1 = gradient_l1(rp.rho());
    r.second_moment = moments(rp.mollifier().base()).second_moment;
    r.gradient_unresolved = gradient_unresolved(rp.rho());
    const Scalar e2 = rp.eps() * rp.eps();
    r.bound = e2 * (r.gradient_sup_sum * r.gradient_l1 * r.second_moment + 2 * r.hessian_sup_sum);
    return r;
}

}  // namespace llot
