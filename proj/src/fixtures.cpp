#include "llot/fixtures.hpp"

#include <algorithm>
#include <numbers>
#include <random>

namespace llot::fixtures {

GridDensity<double> bump_density(const Grid<double>& grid, const std::vector<Index>& centres,
                                 double half_width, int power)
{
    if (grid.dim() != 1) throw ValidationError("bump fixtures are one-dimensional");
    const Index n = grid.points_per_axis();
    const auto reach = static_cast<Index>(std::ceil(half_width));
    std::vector<double> profile(std::size_t(2 * reach + 1), 0.0);
    for (Index u = -reach; u <= reach; ++u) {
        const double t = double(u) / half_width;
        if (std::abs(t) < 1) profile[std::size_t(u + reach)] = std::pow(std::cos(std::numbers::pi * t / 2), power);
    }
    Vector<double> v = Vector<double>::Zero(n);
    for (Index c : centres)
        for (Index u = -reach; u <= reach; ++u) {
            const Index i = c + u;
            if (i < 0 || i >= n) throw ValidationError("bump leaves the grid");
            v[i] += profile[std::size_t(u + reach)];
        }
    v /= v.sum() * grid.cell_volume();
    return GridDensity<double>(grid, std::move(v));
}

AtomicPlan<double> translation_plan(const GridDensity<double>& rho, const std::vector<Index>& centres)
{
    const int n = int(centres.size());
    const auto& g = rho.grid;
    const PermutationTable table(n);
    AtomicPlan<double> plan{n, 1, {}};
    const Index first = centres.front();
    const Index half = (centres.size() > 1 ? centres[1] - centres[0] : g.points_per_axis()) / 2;
    for (Index i = std::max<Index>(0, first - half); i < std::min(g.points_per_axis(), first + half); ++i) {
        if (rho.values[i] == 0) continue;
        // one bump carries mass 1/n, shared by n! orderings
        const double w = rho.values[i] * g.cell_volume() / double(factorial(n - 1));
        for (const auto& perm : table.perms) {
            Configuration<double> x(1, n);
            for (int k = 0; k < n; ++k) x(0, k) = g.node(i + centres[perm[k]] - first)[0];
            plan.atoms.push_back({std::move(x), w});
        }
    }
    return plan;
}

AtomicPlan<double> permutation_plan(const Grid<double>& grid, const std::vector<Index>& nodes)
{
    const int n = int(nodes.size());
    const PermutationTable table(n);
    AtomicPlan<double> plan{n, grid.dim(), {}};
    for (const auto& perm : table.perms) {
        Configuration<double> x(grid.dim(), n);
        for (int k = 0; k < n; ++k) x.col(k) = grid.node(nodes[perm[k]]);
        plan.atoms.push_back({std::move(x), 1.0 / double(table.size())});
    }
    return plan;
}

AtomicPlan<double> single_particle_plan(const GridDensity<double>& rho)
{
    AtomicPlan<double> plan{1, rho.grid.dim(), {}};
    for (Index i = 0; i < rho.values.size(); ++i)
        if (rho.values[i] > 0) plan.atoms.push_back({rho.grid.node(i), rho.values[i] * rho.grid.cell_volume()});
    return plan;
}

namespace {

Instance from_plan(std::string name, AtomicPlan<double> plan, const Grid<double>& g, std::vector<double> eps)
{
    auto rho = marginal(plan, g);
    return {std::move(name), std::move(plan), std::move(rho), std::move(eps)};
}

}  // namespace

std::vector<Instance> desk_instances()
{
    std::vector<Instance> out;
    {
        const auto g = Grid<double>::line(0.0, 1.0 / 32, 32);
        const auto rho = bump_density(g, {16}, 8, 4);
        const double h = g.spacing();
        out.push_back(from_plan("single_bump_n1", single_particle_plan(rho), g, {3 * h, 1.5 * h}));
    }
    {
        const auto g = Grid<double>::line(0.0, 1.0 / 32, 32);
        const double a = 20 * g.spacing();
        out.push_back(from_plan("two_site_n2", permutation_plan(g, {6, 26}), g, {a / 8, a / 16}));
    }
    {
        const auto g = Grid<double>::line(0.0, 1.0 / 64, 64);
        const std::vector<Index> c{20, 44};
        const auto rho = bump_density(g, c, 6, 4);
        const double a = 24 * g.spacing();
        out.push_back(from_plan("two_bump_n2", translation_plan(rho, c), g, {a / 8, a / 16}));
    }
    {
        const auto g = Grid<double>::line(0.0, 1.0 / 48, 48);
        const double a = 18 * g.spacing();
        out.push_back(from_plan("three_site_n3", permutation_plan(g, {6, 24, 42}), g, {a / 8, a / 16}));
    }
    {
        const auto g = Grid<double>::line(0.0, 1.0 / 64, 64);
        const std::vector<Index> c{14, 32, 50};
        const auto rho = bump_density(g, c, 5, 4);
        const double a = 18 * g.spacing();
        out.push_back(from_plan("three_bump_n3", translation_plan(rho, c), g, {a / 8, a / 16}));
    }
    return out;
}

Instance kinetic_instance(Index nodes)
{
    const double length = 4.5;
    const double h = length / double(nodes);
    const auto g = Grid<double>::line(-length / 2, h, nodes);
    const auto shift = static_cast<Index>(std::llround(2.0 / h));
    const Index left = nodes / 2 - shift / 2;
    const std::vector<Index> c{left, left + shift};
    const auto rho = bump_density(g, c, 0.9 / h, 6);
    return from_plan("kinetic_two_bump_" + std::to_string(nodes), translation_plan(rho, c), g, {0.3});
}

Instance potential_sweep_instance()
{
    const Index nodes = 1024;
    const double h = 4.0 / double(nodes);
    const auto g = Grid<double>::line(-2.0, h, nodes);
    const Index shift = 512;
    const Index left = nodes / 2 - shift / 2;
    const std::vector<Index> c{left, left + shift};
    const auto rho = bump_density(g, c, 0.4 / h, 4);
    return from_plan("potential_sweep", translation_plan(rho, c), g, {0.1, 0.05, 0.025});
}

GridDensity<double> semiclassical_density(double spacing)
{
    const Index nodes = 200;
    const auto g = Grid<double>::line(-spacing * double(nodes) / 2, spacing, nodes);
    return bump_density(g, {68, 132}, 24, 4);
}

GridDensity<double> gaussian_sites(Index n)
{
    const auto g = Grid<double>::line(0.0, 0.1, n);
    Vector<double> v(n);
    const double centre = 0.05 * double(n - 1);
    for (Index i = 0; i < n; ++i) {
        const double x = 0.1 * double(i);
        v[i] = std::exp(-(x - centre) * (x - centre) / 0.18);
    }
    v /= v.sum() * g.cell_volume();
    return GridDensity<double>(g, std::move(v));
}

GridDensity<double> equal_sites(Index n)
{
    const auto g = Grid<double>::line(0.0, 1.0, n);
    Vector<double> v = Vector<double>::Constant(n, 1.0 / double(n));
    return GridDensity<double>(g, std::move(v));
}

std::vector<std::vector<Index>> sample_configurations(const RegularizedPlan<double>& rp, Index count,
                                                      std::uint64_t seed)
{
    const auto& g = rp.grid();
    const int n = rp.n_particles(), d = g.dim();
    const Index r = rp.kernel().radius;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_atom(0, rp.atom_count() - 1);
    std::uniform_int_distribution<Index> shift(-r, r), any(0, g.node_count() - 1);
    std::uniform_int_distribution<int> tenth(0, 9);
    std::vector<std::vector<Index>> out;
    out.reserve(std::size_t(count));
    std::vector<Index> delta(static_cast<std::size_t>(d));
    while (Index(out.size()) < count) {
        std::vector<Index> x(static_cast<std::size_t>(n));
        if (tenth(rng) == 0) {
            for (auto& v : x) v = any(rng);
        } else {
            const auto& sites = rp.atom_sites(pick_atom(rng));
            bool inside = true;
            for (int k = 0; k < n; ++k) {
                for (auto& v : delta) v = shift(rng);
                x[std::size_t(k)] = g.offset(rp.site(sites[std::size_t(k)]).node, delta);
                inside = inside && x[std::size_t(k)] >= 0;
            }
            if (!inside) continue;
            std::shuffle(x.begin(), x.end(), rng);
        }
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace llot::fixtures
