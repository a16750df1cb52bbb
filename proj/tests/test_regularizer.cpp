#include <doctest.h>

#include "llot/fixtures.hpp"
#include "llot/regularizer.hpp"

using namespace llot;

namespace {

Configuration<double> config(std::initializer_list<double> xs)
{
    Configuration<double> x(1, Index(xs.size()));
    Index k = 0;
    for (double v : xs) x(0, k++) = v;
    return x;
}

// P_eps(x1, x2) by the triple sum over (x, z, y), with the kernel rebuilt from the profile.
Matrix<double> brute_force(const AtomicPlan<double>& plan, const GridDensity<double>& rho, double eps)
{
    const auto& g = rho.grid;
    const Index n = g.node_count();
    const double h = g.spacing();
    const ScaledMollifier<double> m(BumpProfile<double>(1), eps);
    auto raw = [&](Index u) { return std::abs(double(u)) * h < eps ? std::pow(m.radial(std::abs(double(u)) * h), 2) : 0.0; };
    double norm = 0;
    for (Index u = -n; u <= n; ++u) norm += raw(u);
    auto kappa = [&](Index u) { return raw(u) / (norm * h); };
    Vector<double> den = Vector<double>::Zero(n);
    for (Index z = 0; z < n; ++z)
        for (Index x = 0; x < n; ++x) den[z] += rho.values[x] * kappa(z - x) * h;
    auto factor = [&](Index x, Index y) {
        double s = 0;
        for (Index z = 0; z < n; ++z)
            if (den[z] > 0) s += rho.values[x] * kappa(x - z) * kappa(z - y) / den[z] * h;
        return s;
    };
    Matrix<double> out = Matrix<double>::Zero(n, n);
    for (const auto& a : plan.atoms) {
        const Index y1 = g.locate(a.x.col(0)), y2 = g.locate(a.x.col(1));
        for (Index x1 = 0; x1 < n; ++x1) {
            const double f1 = factor(x1, y1);
            if (f1 == 0) continue;
            for (Index x2 = 0; x2 < n; ++x2) out(x1, x2) += a.w * f1 * factor(x2, y2);
        }
    }
    return out;
}

void compare_with_brute_force(const AtomicPlan<double>& plan, const GridDensity<double>& rho, double eps)
{
    const auto rp = build_regularized(plan, rho, eps);
    const auto oracle = brute_force(plan, rp.rho(), eps);
    const Index n = rho.grid.node_count();
    const auto t = materialize(rp);
    double worst = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) worst = std::max(worst, std::abs(t[i * n + j] - oracle(i, j)));
    CHECK(worst <= 1e-12 * oracle.maxCoeff());
}

}  // namespace

TEST_CASE("N = 1 reproduces the density exactly")
{
    const auto inst = fixtures::desk_instances()[0];
    for (double eps : inst.eps) {
        const auto rp = build_regularized(inst.plan, inst.rho, eps);
        const auto t = materialize(rp);
        CHECK((t - rp.rho().values).cwiseAbs().maxCoeff() <= 1e-14 * rp.rho().values.maxCoeff());
        CHECK((density_of(rp).values - rp.rho().values).cwiseAbs().maxCoeff() <= 1e-14 * rp.rho().values.maxCoeff());
    }
}

TEST_CASE("pointwise values match the brute-force triple sum")
{
    // 16 nodes, two atoms
    const auto g = Grid<double>::line(0.0, 1.0, 16);
    AtomicPlan<double> plan{2, 1, {{config({4, 11}), 0.5}, {config({11, 4}), 0.5}}};
    compare_with_brute_force(plan, marginal(plan, g), 1.5);

    const auto inst = fixtures::desk_instances()[2];
    for (double eps : inst.eps) compare_with_brute_force(inst.plan, inst.rho, eps);
}

TEST_CASE("marginal is pinned for every desk instance and width")
{
    for (const auto& inst : fixtures::desk_instances())
        for (double eps : {inst.eps[0], inst.eps[1], 0.5 * (inst.eps[0] + inst.eps[1])}) {
            const auto rp = build_regularized(inst.plan, inst.rho, eps);
            CHECK(l1_distance(density_of(rp), rp.rho()) <= 1e-10);
        }
}

TEST_CASE("support stays away from the diagonal")
{
    const auto inst = fixtures::desk_instances()[2];
    const double eps = inst.eps[0];
    const auto rp = build_regularized(inst.plan, inst.rho, eps);
    const auto t = materialize(rp);
    const Index n = rp.grid().node_count();
    const double cut = rp.separation_distance() - 4 * eps;
    Index checked = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (std::abs(rp.grid().node(i)[0] - rp.grid().node(j)[0]) < cut) {
                CHECK(t[i * n + j] == 0.0);
                ++checked;
            }
    CHECK(checked > 0);
    CHECK(t.minCoeff() >= 0);
}

TEST_CASE("P_eps is symmetric under particle permutations")
{
    const auto inst = fixtures::desk_instances()[4];
    const auto rp = build_regularized(inst.plan, inst.rho, inst.eps[0]);
    const PermutationTable table{3};
    for (const auto& x : fixtures::sample_configurations(rp, 300, 3)) {
        const double v = rp.evaluate_nodes(x);
        for (const auto& p : table.perms) {
            const std::vector<Index> y{x[std::size_t(p[0])], x[std::size_t(p[1])], x[std::size_t(p[2])]};
            CHECK(std::abs(rp.evaluate_nodes(y) - v) <= 1e-15 * std::max(1.0, v));
        }
    }
}

TEST_CASE("build_regularized validates its inputs")
{
    const auto inst = fixtures::desk_instances()[1];
    const double alpha = separation(inst.plan).min_distance;
    CHECK_THROWS_WITH_AS(build_regularized(inst.plan, inst.rho, alpha / 4), doctest::Contains("mollifier too wide"),
                         ValidationError);
    auto other = inst.rho;
    other.values.reverse();
    other.values[0] += 1;
    other.values /= other.mass();
    CHECK_THROWS_WITH_AS(build_regularized(inst.plan, other, inst.eps[0]), doctest::Contains("does not match"),
                         ValidationError);
    // density of mass N is accepted under the particle-number convention
    GridDensity<double> scaled(inst.rho.grid, inst.rho.values * 2, MassConvention::particle_number);
    CHECK_NOTHROW(build_regularized(inst.plan, scaled, inst.eps[0]));
}

TEST_CASE("support too close to the grid edge is rejected")
{
    const auto g = Grid<double>::line(0.0, 1.0, 16);
    AtomicPlan<double> plan{2, 1, {{config({1, 11}), 0.5}, {config({11, 1}), 0.5}}};
    CHECK_THROWS_WITH_AS(build_regularized(plan, marginal(plan, g), 2.2), doctest::Contains("kernel radius"), ValidationError);
}

TEST_CASE("kinetic energy of sqrt P_eps")
{
    const auto single = fixtures::desk_instances()[0];
    for (double eps : single.eps) {
        const auto rp = build_regularized(single.plan, single.rho, eps);
        CHECK(kinetic_of_sqrt(rp) == doctest::Approx(h1_seminorm_sqrt(rp.rho())).epsilon(1e-10));
    }
    const auto two = fixtures::desk_instances()[2];
    for (double eps : two.eps) {
        const auto rp = build_regularized(two.plan, two.rho, eps);
        CHECK(kinetic_of_sqrt(rp) <= 1.05 * kinetic_bound(rp));
    }
    const auto rp = build_regularized(two.plan, two.rho, two.eps[0]);
    CHECK_THROWS_AS(kinetic_of_sqrt(rp, 1000), NumericalError);
}

TEST_CASE("kinetic energy of sqrt P_eps converges under refinement")
{
    std::vector<double> values;
    for (Index nodes : {128, 256, 512}) {
        const auto inst = fixtures::kinetic_instance(nodes);
        values.push_back(kinetic_of_sqrt(build_regularized(inst.plan, inst.rho, inst.eps[0])));
    }
    const double ratio = std::abs(values[1] - values[0]) / std::abs(values[2] - values[1]);
    MESSAGE("refinement ratio " << ratio);
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("potential error for constant and one-body potentials")
{
    const auto inst = fixtures::desk_instances()[4];
    const auto rp = build_regularized(inst.plan, inst.rho, inst.eps[0]);
    CHECK(potential_error(rp, constant_potential(2.5)).lhs <= 1e-12);
    const auto cosine = one_body_sum<double>([](const Vector<double>& x) { return std::cos(3 * x[0]); },
                                             [](const Vector<double>& x) { return Vector<double>{{-3 * std::sin(3 * x[0])}}; },
                                             [](const Vector<double>& x) { return Matrix<double>{{-9 * std::cos(3 * x[0])}}; });
    CHECK(potential_error(rp, cosine).lhs <= 1e-10);
    Potential<double> bare = coulomb<double>();
    bare.hessian = nullptr;
    CHECK_THROWS_AS(potential_error(rp, bare), ValidationError);
}

TEST_CASE("Coulomb potential error stays below its bound")
{
    for (std::size_t i : {1u, 2u, 3u, 4u}) {
        const auto inst = fixtures::desk_instances()[i];
        for (double eps : inst.eps) {
            const auto r = potential_error(build_regularized(inst.plan, inst.rho, eps), coulomb<double>());
            CHECK(r.lhs <= r.bound);
            // point masses on single nodes have no resolved gradient
            CHECK(r.gradient_unresolved == (inst.name.find("site") != std::string::npos));
        }
    }
}
