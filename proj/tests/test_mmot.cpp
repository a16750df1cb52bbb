#include <doctest.h>

#include "llot/fixtures.hpp"
#include "llot/mmot.hpp"

using namespace llot;

namespace {

GridDensity<double> sites(std::vector<double> masses)
{
    const auto g = Grid<double>::line(0.0, 1.0, Index(masses.size()));
    Vector<double> v = Eigen::Map<Vector<double>>(masses.data(), Index(masses.size()));
    return GridDensity<double>(g, std::move(v));
}

SinkhornOptions<double> sinkhorn_at(double beta)
{
    SinkhornOptions<double> o;
    o.beta = beta;
    o.max_iter = 100000;
    return o;
}

}  // namespace

TEST_CASE("LP reference values")
{
    CHECK(solve_lp(TransportProblem<double>{2, fixtures::equal_sites(2)}).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(solve_lp(TransportProblem<double>{3, fixtures::equal_sites(3)}).value == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(solve_lp(TransportProblem<double>{2, fixtures::gaussian_sites(16)}).value ==
          doctest::Approx(2.2009405157655637).epsilon(1e-10));
    CHECK(solve_lp(TransportProblem<double>{3, fixtures::gaussian_sites(9)}).value ==
          doctest::Approx(10.3757494231169).epsilon(1e-10));
}

TEST_CASE("LP certificates")
{
    const TransportProblem<double> p{2, fixtures::gaussian_sites(16)};
    const auto sol = solve_lp(p);
    CHECK(sol.marginal_residual <= 1e-10);
    REQUIRE(sol.dual_potential);
    const auto dual = check_dual(sol, p);
    CHECK(dual.feasible);
    CHECK(std::abs(dual.duality_gap) <= 1e-8);
    CHECK(dual.complementary_slackness <= 1e-8);
    CHECK(dual.checked == 120);

    auto broken = sol;
    (*broken.dual_potential)[3] += 0.5;
    const auto bad = check_dual(broken, p);
    CHECK_FALSE(bad.feasible);
    CHECK(bad.max_violation >= 0.5 - 1e-8);
    CHECK(std::find(bad.worst_configuration.begin(), bad.worst_configuration.end(), sol.sites[3]) !=
          bad.worst_configuration.end());
}

TEST_CASE("LP errors")
{
    CHECK_THROWS_WITH_AS(solve_lp(TransportProblem<double>{2, sites({0.7, 0.3})}),
                         doctest::Contains("no finite-cost feasible plan"), ValidationError);
    CHECK_THROWS_WITH_AS(solve_lp(TransportProblem<double>{3, fixtures::equal_sites(2)}),
                         doctest::Contains("no finite-cost feasible plan"), ValidationError);
    CHECK_THROWS_WITH_AS(solve_lp(TransportProblem<double>{4, fixtures::gaussian_sites(80)}),
                         doctest::Contains("sinkhorn"), NumericalError);
    CHECK_THROWS_AS(solve_lp(TransportProblem<double>{1, fixtures::equal_sites(2)}), ValidationError);
}

TEST_CASE("symmetrizing the optimal plan keeps its value")
{
    const TransportProblem<double> p{3, fixtures::gaussian_sites(9)};
    const auto sol = solve_lp(p);
    CHECK(integrate_potential(symmetrize(sol.plan), p.cost) == doctest::Approx(sol.value).epsilon(1e-12));
    CHECK(integrate_potential(sol.plan, p.cost) == doctest::Approx(sol.value).epsilon(1e-12));
}

TEST_CASE("plan separation")
{
    CHECK(plan_separation(solve_lp(TransportProblem<double>{2, fixtures::equal_sites(2)})).min_distance ==
          doctest::Approx(1.0));
    CHECK(plan_separation(solve_lp(TransportProblem<double>{3, fixtures::equal_sites(3)})).min_distance ==
          doctest::Approx(1.0));
    CHECK(plan_separation(solve_lp(TransportProblem<double>{2, fixtures::gaussian_sites(32)})).min_distance > 0);
}

TEST_CASE("Sinkhorn on two sites")
{
    const TransportProblem<double> p{2, fixtures::equal_sites(2)};
    const auto sk = solve_sinkhorn(p, sinkhorn_at(100));
    CHECK(sk.converged);
    CHECK(std::abs(sk.value - 1.0) <= 1e-3);
    CHECK(sk.marginal_residual <= 1e-6);
}

TEST_CASE("Sinkhorn approaches the LP value as beta grows")
{
    const TransportProblem<double> p{2, fixtures::gaussian_sites(16)};
    const double lp = solve_lp(p).value;
    double previous = std::numeric_limits<double>::infinity();
    for (double beta : {25.0, 50.0, 100.0, 200.0}) {
        auto opt = sinkhorn_at(beta);
        const auto sk = solve_sinkhorn(p, opt);
        CHECK(sk.converged);
        CHECK(sk.value <= previous);
        CHECK(sk.value >= lp - 1e-6);
        previous = sk.value;
    }
    CHECK(previous - lp <= 1e-3);

    auto annealed = sinkhorn_at(200);
    annealed.anneal = {25, 50, 100};
    const auto warm = solve_sinkhorn(p, annealed);
    CHECK(warm.value == doctest::Approx(previous).epsilon(1e-6));
}

TEST_CASE("Sinkhorn kernel mode")
{
    const TransportProblem<double> p{2, fixtures::gaussian_sites(16)};
    auto opt = sinkhorn_at(20);
    const auto log_domain = solve_sinkhorn(p, opt);
    opt.mode = SinkhornMode::kernel;
    const auto kernel = solve_sinkhorn(p, opt);
    CHECK(kernel.value == doctest::Approx(log_domain.value).epsilon(1e-8));
    opt.beta = 60;
    CHECK_THROWS_WITH_AS(solve_sinkhorn(p, opt), doctest::Contains("log-domain"), NumericalError);
}
