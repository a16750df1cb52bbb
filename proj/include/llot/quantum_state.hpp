#pragma once

#include "llot/regularizer.hpp"

#include <functional>
#include <random>
#include <set>

namespace llot {

/// Orbitals phi_k(x) = a(x) chi_eps(x - z_k) with a common amplitude a (default 1).
template <typename Scalar>
struct OrbitalSet {
    ScaledMollifier<Scalar> m;
    std::vector<Vector<Scalar>> centres;
    std::function<Scalar(const Vector<Scalar>&)> amplitude;

    Scalar operator()(std::size_t k, const Vector<Scalar>& x) const
    {
        const Scalar a = amplitude ? amplitude(x) : Scalar(1);
        return a * m(x - centres[k]);
    }

    std::size_t size() const { return centres.size(); }

    Scalar min_centre_distance() const
    {
        Scalar best = std::numeric_limits<Scalar>::infinity();
        for (std::size_t i = 0; i < centres.size(); ++i)
            for (std::size_t j = i + 1; j < centres.size(); ++j)
                best = std::min(best, (centres[i] - centres[j]).norm());
        return best;
    }
};

/// (1/sqrt(N!)) det(phi_i(x_j)).
template <typename Scalar>
Scalar slater(const OrbitalSet<Scalar>& orb, const Configuration<Scalar>& x)
{
    const Index n = x.cols();
    if (Index(orb.size()) != n) throw ValidationError("orbital count must match particle count");
    Matrix<Scalar> a(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) a(i, j) = orb(std::size_t(i), x.col(j));
    return a.determinant() / std::sqrt(Scalar(factorial(int(n))));
}

template <typename Scalar>
struct IdentityPair {
    Scalar lhs = 0;
    Scalar rhs = 0;
};

/// det(chi_eps(x_j - z_i))^2 against sum_sigma prod_k chi_eps(x_k - z_sigma(k))^2.
template <typename Scalar>
IdentityPair<Scalar> det_square_identity(const OrbitalSet<Scalar>& orb, const Configuration<Scalar>& x)
{
    const Index n = x.cols();
    if (Index(orb.size()) != n) throw ValidationError("orbital count must match particle count");
    if (orb.min_centre_distance() < 2 * orb.m.eps())
        throw ValidationError("identity requires disjoint supports");
    Matrix<Scalar> a(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) a(i, j) = orb.m(x.col(j) - orb.centres[i]);
    const Scalar det = a.determinant();
    IdentityPair<Scalar> out;
    out.lhs = det * det;
    const PermutationTable table{int(n)};
    for (const auto& sigma : table.perms) {
        Scalar prod = 1;
        for (Index k = 0; k < n; ++k) {
            const Scalar v = orb.m(x.col(k) - orb.centres[sigma[k]]);
            prod *= v * v;
        }
        out.rhs += prod;
    }
    return out;
}

/// Gamma_eps through its (y, z) quadrature: orbitals sqrt(rho) sqrt(kappa(. - z)) with
/// z on grid nodes around each plan site.
template <typename Scalar>
class MixedStateKernel {
public:
    explicit MixedStateKernel(RegularizedPlan<Scalar> rp)
        : rp_(std::move(rp)), sqrt_rho_(rp_.rho().values.cwiseSqrt())
    {
    }

    const RegularizedPlan<Scalar>& regularized() const { return rp_; }
    const Vector<Scalar>& sqrt_rho() const { return sqrt_rho_; }

    /// sum_z sqrt(kappa(x - z)) sqrt(kappa(x' - z)) kappa(z - y) / denom(z) h^d.
    Scalar orbital_overlap(Index y, Index x, Index xp) const
    {
        const auto& g = rp_.grid();
        const auto& kernel = rp_.kernel();
        const int d = g.dim();
        std::vector<Index> u(d), v(d);
        Scalar sum = 0;
        for (const auto& t : kernel.taps) {
            const Index z = g.offset(y, t.offset);
            for (int a = 0; a < d; ++a) {
                u[a] = g.coordinate(x, a) - g.coordinate(z, a);
                v[a] = g.coordinate(xp, a) - g.coordinate(z, a);
            }
            const Scalar ku = kernel.at(u), kv = kernel.at(v);
            if (ku == 0 || kv == 0) continue;
            sum += (std::sqrt(ku) * std::sqrt(kv)) * (t.value / rp_.denom().values[z]);
        }
        return sum * g.cell_volume();
    }

    /// Gamma_eps(X; X') at grid-node configurations.
    Scalar evaluate_nodes(std::span<const Index> x, std::span<const Index> xp) const
    {
        const int n = rp_.n_particles();
        const Scalar reach = 2 * rp_.eps();
        std::vector<int> inv(n), invp(n);
        Scalar total = 0;
        for (std::size_t a = 0; a < rp_.atom_count(); ++a) {
            const auto& sites = rp_.atom_sites(a);
            if (!assign(x, sites, reach, inv) || !assign(xp, sites, reach, invp)) continue;
            Scalar prod = rp_.weight(a);
            for (int k = 0; k < n && prod != 0; ++k) {
                const Index xk = x[inv[k]], xpk = xp[invp[k]];
                prod *= (sqrt_rho_[xk] * sqrt_rho_[xpk]) * orbital_overlap(rp_.site(sites[k]).node, xk, xpk);
            }
            total += Scalar(assignment_sign(inv) * assignment_sign(invp)) * prod;
        }
        return total / Scalar(factorial(n));
    }

    Scalar evaluate(const Configuration<Scalar>& x, const Configuration<Scalar>& xp) const
    {
        const int n = rp_.n_particles();
        std::vector<Index> a(n), b(n);
        for (int k = 0; k < n; ++k) {
            a[k] = rp_.grid().locate(x.col(k));
            b[k] = rp_.grid().locate(xp.col(k));
        }
        return evaluate_nodes(a, b);
    }

private:
    // inv[k] = index j of the coordinate lying within `reach` of site k; false unless this
    // is a bijection (otherwise every determinant in the z-sum vanishes).
    bool assign(std::span<const Index> x, const std::vector<Index>& sites, Scalar reach,
                std::vector<int>& inv) const
    {
        const auto& g = rp_.grid();
        const int n = rp_.n_particles();
        std::fill(inv.begin(), inv.end(), -1);
        for (int j = 0; j < n; ++j) {
            const Vector<Scalar> xj = g.node(x[j]);
            int owner = -1;
            for (int k = 0; k < n; ++k)
                if ((xj - g.node(rp_.site(sites[k]).node)).norm() < reach) {
                    owner = k;
                    break;
                }
            if (owner < 0 || inv[owner] >= 0) return false;
            inv[owner] = j;
        }
        return true;
    }

    static int assignment_sign(const std::vector<int>& inv) { return PermutationTable::sign_of(inv); }

    RegularizedPlan<Scalar> rp_;
    Vector<Scalar> sqrt_rho_;
};

template <typename Scalar>
Scalar kernel_eval(const MixedStateKernel<Scalar>& k, const Configuration<Scalar>& x,
                   const Configuration<Scalar>& xp)
{
    return k.evaluate(x, xp);
}

/// Diagonal of Gamma_eps on the N-fold tensor grid via the permutation sum
/// (1/N!) sum_atoms w sum_sigma prod_k F(x_k, y_sigma(k)).
template <typename Scalar>
Vector<Scalar> diagonal(const MixedStateKernel<Scalar>& k, Index max_entries = kDefaultTensorLimit)
{
    const auto& rp = k.regularized();
    const int n = rp.n_particles();
    const Index nodes = rp.grid().node_count();
    const Index size = detail::checked_power(nodes, n, max_entries);
    if (size > max_entries) {
        std::ostringstream msg;
        msg << "tensor grid too large: " << nodes << "^" << n << " entries, limit " << max_entries;
        throw NumericalError(msg.str());
    }
    const PermutationTable table(n);
    const Scalar share = Scalar(1) / Scalar(table.size());
    Vector<Scalar> t = Vector<Scalar>::Zero(size);
    std::vector<Index> sizes(n), sites(n);
    for (std::size_t a = 0; a < rp.atom_count(); ++a) {
        for (const auto& sigma : table.perms) {
            for (int j = 0; j < n; ++j) {
                sites[j] = rp.atom_sites(a)[sigma[j]];
                sizes[j] = Index(rp.site(sites[j]).values.size());
            }
            const Scalar w = rp.weight(a) * share;
            detail::for_each_choice(sizes, [&](const std::vector<Index>& c) {
                Scalar prod = w;
                Index flat = 0;
                for (int j = 0; j < n; ++j) {
                    const auto& e = rp.site(sites[j]).values[c[j]];
                    prod *= e.second;
                    flat = flat * nodes + e.first;
                }
                t[flat] += prod;
            });
        }
    }
    return t;
}

/// Tensor-grid quadrature of the diagonal.
template <typename Scalar>
Scalar trace(const MixedStateKernel<Scalar>& k, Index max_entries = kDefaultTensorLimit)
{
    const auto& g = k.regularized().grid();
    return diagonal(k, max_entries).sum() * std::pow(g.cell_volume(), k.regularized().n_particles());
}

/// Partial trace of the diagonal over particles 2..N.
template <typename Scalar>
GridDensity<Scalar> one_particle_density(const MixedStateKernel<Scalar>& k,
                                         Index max_entries = kDefaultTensorLimit)
{
    const auto& rp = k.regularized();
    const auto& g = rp.grid();
    const Index nodes = g.node_count();
    const auto t = diagonal(k, max_entries);
    const Index rest = t.size() / nodes;
    Vector<Scalar> out = Vector<Scalar>::Zero(nodes);
    for (Index x = 0; x < nodes; ++x) out[x] = t.segment(x * rest, rest).sum();
    out *= std::pow(g.cell_volume(), rp.n_particles() - 1);
    return GridDensity<Scalar>(g, std::move(out));
}

template <typename Scalar>
struct KineticTrace {
    Scalar analytic = 0;
    Scalar quadrature = 0;
};

namespace detail {

// Quadrature nodes on [lo, hi] per axis, split at the breakpoints y +- eps and
// (half-node positions) +- eps where the integrand loses smoothness.
template <typename Scalar>
void axis_rule(Scalar lo, Scalar hi, Scalar origin, Scalar h, Scalar eps, const GaussLegendre<Scalar>& gl,
               std::vector<Scalar>& xs, std::vector<Scalar>& ws)
{
    std::vector<Scalar> cuts{lo, hi};
    const Scalar half = h / 2;
    for (Scalar shift : {-eps, eps}) {
        const auto first = static_cast<Index>(std::ceil((lo - shift - origin) / half));
        for (Index k = first;; ++k) {
            const Scalar c = origin + Scalar(k) * half + shift;
            if (c >= hi) break;
            if (c > lo) cuts.push_back(c);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] - cuts[i] > Scalar(1e-14) * h) gl.map(cuts[i], cuts[i + 1], xs, ws);
}

}  // namespace detail

/// The kinetic trace two ways: analytic = N (int|grad sqrt rho|^2 + eps^-2 int|grad chi|^2); quadrature =
/// sum_atoms w sum_j I(y_j) prod_{k != j} J(y_k), with
///   I(y) = int T(z) chi_eps(z - y)^2 / D(z) dz,  J(y) = int chi_eps(z - y)^2 dz,
///   T(z) = int |grad(sqrt(rho) chi_eps(. - z))|^2,  D(z) = sum_x rho(x) chi_eps(x - z)^2 h^d,
/// where T uses cell-midpoint differences of sqrt(rho) and the analytic chi_eps, grad chi_eps.
template <typename Scalar>
KineticTrace<Scalar> kinetic_trace(const MixedStateKernel<Scalar>& k, int order = 6)
{
    const auto& rp = k.regularized();
    const auto& g = rp.grid();
    const auto& m = rp.mollifier();
    const auto& s = k.sqrt_rho();
    const auto& rho = rp.rho().values;
    const int d = g.dim();
    const Scalar h = g.spacing(), eps = m.eps(), vol = g.cell_volume();
    const Index n_axis = g.points_per_axis();

    KineticTrace<Scalar> out;
    out.analytic = kinetic_bound(rp);

    const GaussLegendre<Scalar> gl(order);
    // Grid index range [lo, hi] on each axis within distance r of point p.
    auto index_range = [&](Scalar p, Scalar o, Scalar r) {
        const auto lo = std::max<Index>(0, Index(std::ceil((p - r - o) / h)));
        const auto hi = std::min<Index>(n_axis - 1, Index(std::floor((p + r - o) / h)));
        return std::pair<Index, Index>(lo, hi);
    };

    auto d_and_t = [&](const Vector<Scalar>& z) {
        std::vector<Index> lo(d), hi(d), sizes(d);
        for (int a = 0; a < d; ++a) {
            std::tie(lo[a], hi[a]) = index_range(z[a], g.origin()[a], eps + h);
            sizes[a] = std::max<Index>(0, hi[a] - lo[a] + 1);
        }
        Scalar dz = 0, tz = 0;
        Vector<Scalar> xn(d);
        detail::for_each_choice(sizes, [&](const std::vector<Index>& c) {
            Index flat = 0;
            for (int a = 0; a < d; ++a) {
                const Index i = lo[a] + c[a];
                flat += i * g.stride(a);
                xn[a] = g.origin()[a] + Scalar(i) * h;
            }
            if (rho[flat] > 0) {
                const Scalar chi = m(xn - z);
                dz += rho[flat] * chi * chi;
            }
            for (int a = 0; a < d; ++a) {
                const Index nb = g.neighbour(flat, a, 1);
                if (nb < 0 || (s[flat] == 0 && s[nb] == 0)) continue;
                Vector<Scalar> mid = xn;
                mid[a] += h / 2;
                const Vector<Scalar> u = mid - z;
                const Scalar chi = m(u);
                const Scalar dchi = m.gradient(u)[a];
                if (chi == 0 && dchi == 0) continue;
                const Scalar along = (s[nb] - s[flat]) / h * chi + (s[nb] + s[flat]) / 2 * dchi;
                tz += along * along;
            }
        });
        return std::pair<Scalar, Scalar>(dz * vol, tz * vol);
    };

    std::vector<Scalar> site_i(rp.site_count()), site_j(rp.site_count());
    for (std::size_t si = 0; si < rp.site_count(); ++si) {
        const Vector<Scalar> y = g.node(rp.site(Index(si)).node);
        std::vector<std::vector<Scalar>> xs(d), ws(d);
        std::vector<Index> sizes(d);
        for (int a = 0; a < d; ++a) {
            detail::axis_rule(y[a] - eps, y[a] + eps, g.origin()[a], h, eps, gl, xs[a], ws[a]);
            sizes[a] = Index(xs[a].size());
        }
        Scalar i_sum = 0, j_sum = 0;
        Vector<Scalar> z(d);
        detail::for_each_choice(sizes, [&](const std::vector<Index>& c) {
            Scalar w = 1;
            for (int a = 0; a < d; ++a) {
                z[a] = xs[a][c[a]];
                w *= ws[a][c[a]];
            }
            const Scalar chi = m(z - y);
            if (chi == 0) return;
            const auto [dz, tz] = d_and_t(z);
            j_sum += w * chi * chi;
            if (dz > 0) i_sum += w * tz * chi * chi / dz;
        });
        site_i[si] = i_sum;
        site_j[si] = j_sum;
    }

    const int n = rp.n_particles();
    for (std::size_t a = 0; a < rp.atom_count(); ++a) {
        const auto& sites = rp.atom_sites(a);
        Scalar sum = 0;
        for (int j = 0; j < n; ++j) {
            Scalar term = site_i[sites[j]];
            for (int q = 0; q < n; ++q)
                if (q != j) term *= site_j[sites[q]];
            sum += term;
        }
        out.quadrature += rp.weight(a) * sum;
    }
    return out;
}

template <typename Scalar>
struct PositivityReport {
    Index dimension = 0;            // number of configurations in the dense block
    bool sampled = false;           // true: a random principal block of the support tensor
    Scalar min_eigenvalue = 0;
    Scalar max_eigenvalue = 0;
    Scalar min_rayleigh = 0;        // min over random psi of <psi, Gamma psi> / |psi|^2
    Scalar max_hermitian_defect = 0;
};

/// Dense Gamma_eps on configurations with every coordinate in the support of rho. When
/// support^N exceeds `max_dimension`, `max_dimension` distinct configurations are drawn at
/// random instead; the result is then a principal block, positive whenever Gamma_eps is.
template <typename Scalar>
Matrix<Scalar> dense_block(const MixedStateKernel<Scalar>& k, std::vector<std::vector<Index>>& configs,
                           Index max_dimension, std::uint64_t seed, bool& sampled)
{
    const auto& rp = k.regularized();
    const int n = rp.n_particles();
    std::vector<Index> support;
    for (Index x = 0; x < rp.grid().node_count(); ++x)
        if (rp.rho().values[x] > 0) support.push_back(x);
    const Index full = detail::checked_power(Index(support.size()), n, max_dimension);
    configs.clear();
    sampled = full > max_dimension;
    if (sampled) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
        std::set<std::vector<Index>> chosen;
        while (Index(chosen.size()) < max_dimension) {
            std::vector<Index> x(static_cast<std::size_t>(n));
            for (auto& v : x) v = support[pick(rng)];
            chosen.insert(std::move(x));
        }
        configs.assign(chosen.begin(), chosen.end());
    } else {
        detail::for_each_choice(std::vector<Index>(n, Index(support.size())), [&](const std::vector<Index>& c) {
            std::vector<Index> x(n);
            for (int j = 0; j < n; ++j) x[j] = support[c[j]];
            configs.push_back(std::move(x));
        });
    }
    const Index dim = Index(configs.size());
    Matrix<Scalar> gamma(dim, dim);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) gamma(i, j) = k.evaluate_nodes(configs[i], configs[j]);
    return gamma;
}

/// Spectrum of the dense block plus Rayleigh quotients of `samples` Gaussian test vectors,
/// all in the L2(h^{dN}) inner product.
template <typename Scalar>
PositivityReport<Scalar> positivity(const MixedStateKernel<Scalar>& k, int samples, std::uint64_t seed,
                                    Index max_dimension = 512)
{
    std::vector<std::vector<Index>> configs;
    PositivityReport<Scalar> r;
    const Matrix<Scalar> gamma = dense_block(k, configs, max_dimension, seed, r.sampled);
    const Scalar vol = std::pow(k.regularized().grid().cell_volume(), k.regularized().n_particles());
    r.dimension = gamma.rows();
    r.max_hermitian_defect = (gamma - gamma.transpose()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gamma, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff() * vol;
    r.max_eigenvalue = es.eigenvalues().maxCoeff() * vol;
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<Scalar> normal;
    r.min_rayleigh = std::numeric_limits<Scalar>::infinity();
    Vector<Scalar> psi(gamma.rows());
    for (int s = 0; s < samples; ++s) {
        for (Index i = 0; i < psi.size(); ++i) psi[i] = normal(rng);
        const Scalar q = psi.dot(gamma * psi) / psi.squaredNorm() * vol;
        r.min_rayleigh = std::min(r.min_rayleigh, q);
    }
    return r;
}

}  // namespace llot
