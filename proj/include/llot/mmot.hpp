#pragma once

#include "llot/grid.hpp"
#include "llot/potential.hpp"
#include "llot/simplex.hpp"

#include <optional>
#include <random>

namespace llot {

inline constexpr double kPruneThreshold = 1e-9;
inline constexpr Index kLpVariableLimit = 200000;

/// Symmetric N-marginal problem with a pinned one-particle marginal (probability convention).
template <typename Scalar>
struct TransportProblem {
    int n_particles = 2;
    GridDensity<Scalar> marginal;
    Potential<Scalar> cost = coulomb<Scalar>();

    /// Nodes carrying positive mass and their masses.
    std::vector<Index> sites() const
    {
        std::vector<Index> out;
        for (Index i = 0; i < marginal.values.size(); ++i)
            if (marginal.values[i] > 0) out.push_back(i);
        return out;
    }

    Vector<Scalar> site_masses(const std::vector<Index>& s) const
    {
        Vector<Scalar> mu(Index(s.size()));
        for (std::size_t i = 0; i < s.size(); ++i)
            mu[Index(i)] = marginal.values[s[i]] * marginal.grid.cell_volume();
        return mu;
    }

    void validate() const
    {
        if (n_particles < 2) throw ValidationError("transport problem needs at least 2 particles");
        marginal.check_mass(n_particles);
        if (marginal.convention != MassConvention::probability)
            throw ValidationError("transport marginal must use the probability convention");
    }
};

enum class TransportSolver { lp, sinkhorn };

template <typename Scalar>
struct TransportSolution {
    AtomicPlan<Scalar> plan;
    Scalar value = 0;
    std::vector<Index> sites;               // support nodes, indexing dual_potential
    std::optional<Vector<Scalar>> dual_potential;
    TransportSolver solver = TransportSolver::lp;
    Scalar marginal_residual = 0;           // L1 distance of the plan marginal to the target
    std::optional<Scalar> duality_gap;
    Index iterations = 0;
    Scalar beta = 0;                        // sinkhorn only
    bool converged = true;
};

namespace detail {

/// All size-n subsets of {0..s-1} in lexicographic order.
inline std::vector<std::vector<int>> combinations(int s, int n)
{
    std::vector<std::vector<int>> out;
    if (n > s) return out;
    std::vector<int> c(n);
    for (int i = 0; i < n; ++i) c[i] = i;
    while (true) {
        out.push_back(c);
        int i = n - 1;
        while (i >= 0 && c[i] == s - n + i) --i;
        if (i < 0) break;
        ++c[i];
        for (int j = i + 1; j < n; ++j) c[j] = c[j - 1] + 1;
    }
    return out;
}

inline Index binomial(Index s, Index n)
{
    if (n < 0 || n > s) return 0;
    double v = 1;
    for (Index i = 1; i <= n; ++i) v = v * double(s - n + i) / double(i);
    return Index(std::llround(v));
}

template <typename Scalar>
Configuration<Scalar> combination_configuration(const Grid<Scalar>& g, const std::vector<Index>& sites,
                                                const std::vector<int>& c)
{
    Configuration<Scalar> x(g.dim(), Index(c.size()));
    for (std::size_t k = 0; k < c.size(); ++k) x.col(Index(k)) = g.node(sites[c[k]]);
    return x;
}

/// Adds every ordering of `c` with weight w / N! to the plan.
template <typename Scalar>
void add_symmetric_atoms(AtomicPlan<Scalar>& plan, const Grid<Scalar>& g, const std::vector<Index>& sites,
                         const std::vector<int>& c, Scalar w, const PermutationTable& table)
{
    const Scalar share = w / Scalar(table.size());
    for (const auto& perm : table.perms) {
        std::vector<int> ordered(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) ordered[k] = c[perm[k]];
        plan.atoms.push_back({combination_configuration(g, sites, ordered), share});
    }
}

template <typename Scalar>
void finish_plan(TransportSolution<Scalar>& sol, const TransportProblem<Scalar>& p)
{
    const Scalar total = sol.plan.total_weight();
    for (auto& a : sol.plan.atoms) a.w /= total;
    sol.value = 0;
    for (const auto& a : sol.plan.atoms) sol.value += a.w * p.cost.value(a.x);
    sol.marginal_residual = l1_distance(marginal(sol.plan, p.marginal.grid), p.marginal);
}

}  // namespace detail

/// Exact LP over symmetric plans on the marginal's support: one variable per set of N
/// distinct sites (coincident sites carry infinite Coulomb cost and are excluded),
/// constraints sum_{c containing i} p_c = N mu_i.
template <typename Scalar>
TransportSolution<Scalar> solve_lp(const TransportProblem<Scalar>& p)
{
    p.validate();
    const auto sites = p.sites();
    const int s = int(sites.size()), n = p.n_particles;
    if (s < n) throw ValidationError("no finite-cost feasible plan: fewer support sites than particles");
    const Index count = detail::binomial(s, n);
    if (count > kLpVariableLimit) {
        std::ostringstream msg;
        msg << "LP would need " << count << " variables (limit " << kLpVariableLimit
            << "); use the sinkhorn solver for this instance";
        throw NumericalError(msg.str());
    }
    const auto combos = detail::combinations(s, n);
    const auto mu = p.site_masses(sites);
    const auto& g = p.marginal.grid;

    Matrix<Scalar> a = Matrix<Scalar>::Zero(s, Index(combos.size()));
    Vector<Scalar> cost(Index(combos.size()));
    for (std::size_t j = 0; j < combos.size(); ++j) {
        for (int i : combos[j]) a(i, Index(j)) = 1;
        cost[Index(j)] = p.cost.value(detail::combination_configuration(g, sites, combos[j]));
        if (!std::isfinite(cost[Index(j)])) throw ValidationError("cost is infinite off the diagonal");
    }
    const Vector<Scalar> rhs = Scalar(n) * mu;
    const auto lp = solve_standard_lp<Scalar>(a, rhs, cost);
    if (lp.status == LpStatus::infeasible) throw ValidationError("no finite-cost feasible plan");
    if (lp.status != LpStatus::optimal) throw NumericalError("simplex did not reach an optimum");

    TransportSolution<Scalar> sol;
    sol.solver = TransportSolver::lp;
    sol.sites = sites;
    sol.iterations = lp.iterations;
    sol.plan = AtomicPlan<Scalar>{n, g.dim(), {}};
    const PermutationTable table(n);
    for (std::size_t j = 0; j < combos.size(); ++j)
        if (lp.x[Index(j)] > 0)
            detail::add_symmetric_atoms(sol.plan, g, sites, combos[j], lp.x[Index(j)], table);
    detail::finish_plan(sol, p);
    sol.dual_potential = lp.y;
    sol.duality_gap = sol.value - Scalar(n) * lp.y.dot(mu);
    return sol;
}

enum class SinkhornMode { log_domain, kernel };

template <typename Scalar>
struct SinkhornOptions {
    Scalar beta = 100;
    Index max_iter = 200000;
    Scalar tol = Scalar(1e-8);
    SinkhornMode mode = SinkhornMode::log_domain;
    std::vector<Scalar> anneal;  // increasing betas solved before `beta`, warm-started
    Scalar prune_threshold = Scalar(kPruneThreshold);
};

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(const std::vector<Scalar>& v)
{
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Scalar x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    Scalar s = 0;
    for (Scalar x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace detail

/// Symmetric multi-marginal Sinkhorn on the Gibbs kernel exp(-beta Phi) over tuples of
/// distinct sites, with a single shared potential f:
///   P(X) = exp(sum_k f(x_k) - beta Phi(X)),  f <- f + (log mu - log marginal(P)) / N.
template <typename Scalar>
TransportSolution<Scalar> solve_sinkhorn(const TransportProblem<Scalar>& p, const SinkhornOptions<Scalar>& opt)
{
    p.validate();
    if (!(opt.beta > 0)) throw ValidationError("beta must be positive");
    if (!(opt.tol > 0)) throw ValidationError("tolerance must be positive");
    if (opt.mode == SinkhornMode::kernel && opt.beta > 50)
        throw NumericalError("kernel-mode Sinkhorn overflows above beta = 50; use log-domain mode");
    const auto sites = p.sites();
    const int s = int(sites.size()), n = p.n_particles;
    if (s < n) throw ValidationError("no finite-cost feasible plan: fewer support sites than particles");
    const Index count = detail::binomial(s, n);
    if (count > 20 * kLpVariableLimit) throw NumericalError("too many site tuples for Sinkhorn");
    const auto combos = detail::combinations(s, n);
    const auto mu = p.site_masses(sites);
    const auto& g = p.marginal.grid;
    std::vector<Scalar> cost(combos.size());
    for (std::size_t j = 0; j < combos.size(); ++j)
        cost[j] = p.cost.value(detail::combination_configuration(g, sites, combos[j]));
    std::vector<std::vector<std::size_t>> incident(s);
    for (std::size_t j = 0; j < combos.size(); ++j)
        for (int i : combos[j]) incident[i].push_back(j);
    // each set of N sites stands for N! ordered tuples; (N-1)! of them start at a given site
    const Scalar log_orderings = std::lgamma(Scalar(n));

    Vector<Scalar> f = Vector<Scalar>::Zero(s);
    Vector<Scalar> logmu = mu.array().log();
    Vector<Scalar> ell(s);
    TransportSolution<Scalar> sol;
    sol.solver = TransportSolver::sinkhorn;
    sol.sites = sites;
    sol.converged = false;

    std::vector<Scalar> betas = opt.anneal;
    betas.push_back(opt.beta);
    Scalar prev_beta = 0;
    std::vector<Scalar> exps;
    for (Scalar beta : betas) {
        if (opt.mode == SinkhornMode::kernel && beta > 50)
            throw NumericalError("kernel-mode Sinkhorn overflows above beta = 50; use log-domain mode");
        if (prev_beta > 0) f *= beta / prev_beta;
        prev_beta = beta;
        sol.converged = false;
        for (Index it = 0; it < opt.max_iter; ++it) {
            if (opt.mode == SinkhornMode::log_domain) {
                for (int i = 0; i < s; ++i) {
                    exps.clear();
                    for (std::size_t j : incident[i]) {
                        Scalar e = -beta * cost[j];
                        for (int q : combos[j]) e += f[q];
                        exps.push_back(e);
                    }
                    ell[i] = log_orderings + detail::log_sum_exp(exps);
                }
            } else {
                for (int i = 0; i < s; ++i) {
                    Scalar sum = 0;
                    for (std::size_t j : incident[i]) {
                        Scalar prod = std::exp(-beta * cost[j]);
                        for (int q : combos[j]) prod *= std::exp(f[q]);
                        sum += prod;
                    }
                    if (!std::isfinite(sum) || sum <= 0)
                        throw NumericalError("Sinkhorn kernel under/overflow; use log-domain mode");
                    ell[i] = log_orderings + std::log(sum);
                }
            }
            const Scalar residual = (ell.array().exp() - mu.array()).abs().sum();
            ++sol.iterations;
            if (residual <= opt.tol) {
                sol.converged = true;
                break;
            }
            f += (logmu - ell) / Scalar(n);
        }
    }
    sol.beta = opt.beta;

    const PermutationTable table(n);
    sol.plan = AtomicPlan<Scalar>{n, g.dim(), {}};
    std::vector<Scalar> weights(combos.size());
    Scalar total = 0;
    for (std::size_t j = 0; j < combos.size(); ++j) {
        Scalar e = -opt.beta * cost[j];
        for (int q : combos[j]) e += f[q];
        weights[j] = std::exp(e + std::lgamma(Scalar(n + 1)));
        total += weights[j];
    }
    for (std::size_t j = 0; j < combos.size(); ++j)
        if (weights[j] >= opt.prune_threshold * total)
            detail::add_symmetric_atoms(sol.plan, g, sites, combos[j], weights[j], table);
    if (sol.plan.atoms.empty()) throw NumericalError("all Sinkhorn weights fell below the prune threshold");
    detail::finish_plan(sol, p);
    return sol;
}

template <typename Scalar>
struct DualReport {
    bool feasible = true;
    Scalar max_violation = 0;                 // max of sum_j v(x_j) - Phi(X)
    std::vector<Index> worst_configuration;   // grid nodes
    Scalar complementary_slackness = 0;       // max |Phi - sum v| on the plan support
    Scalar duality_gap = 0;
    Index checked = 0;
};

/// Checks sum_j v(x_j) <= Phi(X) + tol over all site tuples (or `samples` random ones when
/// positive) and complementary slackness on the plan's support.
template <typename Scalar>
DualReport<Scalar> check_dual(const TransportSolution<Scalar>& sol, const TransportProblem<Scalar>& p,
                              Index samples = 0, std::uint64_t seed = 0, Scalar tol = Scalar(1e-8))
{
    if (!sol.dual_potential) throw ValidationError("solution carries no dual potential");
    const auto& v = *sol.dual_potential;
    const auto& g = p.marginal.grid;
    const int s = int(sol.sites.size()), n = p.n_particles;
    DualReport<Scalar> r;
    r.max_violation = -std::numeric_limits<Scalar>::infinity();
    auto visit = [&](const std::vector<int>& c) {
        const Scalar phi = p.cost.value(detail::combination_configuration(g, sol.sites, c));
        Scalar sum = 0;
        for (int i : c) sum += v[i];
        const Scalar viol = sum - phi;
        ++r.checked;
        if (viol > r.max_violation) {
            r.max_violation = viol;
            r.worst_configuration.clear();
            for (int i : c) r.worst_configuration.push_back(sol.sites[i]);
        }
    };
    if (samples > 0) {
        std::mt19937_64 rng(seed);
        std::vector<int> idx(s);
        std::iota(idx.begin(), idx.end(), 0);
        for (Index k = 0; k < samples; ++k) {
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<int> c(idx.begin(), idx.begin() + n);
            std::sort(c.begin(), c.end());
            visit(c);
        }
    } else {
        for (const auto& c : detail::combinations(s, n)) visit(c);
    }
    r.feasible = r.max_violation <= tol;

    std::map<Index, int> site_index;
    for (int i = 0; i < s; ++i) site_index[sol.sites[i]] = i;
    Scalar mass_dot = 0;
    const auto mu = p.site_masses(sol.sites);
    for (int i = 0; i < s; ++i) mass_dot += v[i] * mu[i];
    for (const auto& a : sol.plan.atoms) {
        Scalar sum = 0;
        for (int k = 0; k < n; ++k) sum += v[site_index.at(g.locate(a.x.col(k)))];
        r.complementary_slackness = std::max(r.complementary_slackness, std::abs(p.cost.value(a.x) - sum));
    }
    r.duality_gap = sol.value - Scalar(n) * mass_dot;
    return r;
}

/// Separation of the plan after dropping atoms below the prune threshold.
template <typename Scalar>
SeparationReport<Scalar> plan_separation(const TransportSolution<Scalar>& sol,
                                         Scalar prune = Scalar(kPruneThreshold))
{
    AtomicPlan<Scalar> kept{sol.plan.n_particles, sol.plan.dim, {}};
    const Scalar total = sol.plan.total_weight();
    for (const auto& a : sol.plan.atoms)
        if (a.w >= prune * total) kept.atoms.push_back(a);
    if (kept.atoms.empty()) throw ValidationError("every atom of the plan was pruned");
    return separation(kept);
}

}  // namespace llot
