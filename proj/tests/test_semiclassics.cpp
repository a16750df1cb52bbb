#include <doctest.h>

#include "llot/fixtures.hpp"
#include "llot/semiclassics.hpp"

using namespace llot;

namespace {

SemiclassicalSetup<double> small_setup()
{
    const auto g = Grid<double>::line(0.0, 1.0, 80);
    const auto rho = fixtures::bump_density(g, {20, 60}, 8, 4);
    return make_setup(rho, solve_lp(TransportProblem<double>{2, rho}));
}

}  // namespace

TEST_CASE("trial energy is assembled from its parts")
{
    const auto s = small_setup();
    const double eps = 0.5 * (s.eps_min() + s.eps_max()), eta = 0.01;
    const auto t = trial_energy(s, eps, eta);
    const auto rp = build_regularized(s.plan, s.rho, eps);
    const double kinetic = eta * 2 * (h1_seminorm_sqrt(s.rho) + moments(BumpProfile<double>(1)).grad_sq / (eps * eps));
    CHECK(t.kinetic_term == doctest::Approx(kinetic).epsilon(1e-12));
    CHECK(t.potential_term == doctest::Approx(integrate_potential(rp, coulomb<double>())).epsilon(1e-12));
    CHECK(t.total == doctest::Approx(kinetic + t.potential_term).epsilon(1e-12));
    CHECK(t.potential_term >= s.e_ot - 1e-10);
}

TEST_CASE("eta = 0 reduces to the regularized transport cost")
{
    const auto s = small_setup();
    const auto t = trial_energy(s, s.eps_min(), 0.0);
    CHECK(t.kinetic_term == 0.0);
    CHECK(t.total >= s.e_ot - 1e-10);
}

TEST_CASE("optimal width grows with eta")
{
    const auto s = small_setup();
    double previous = 0;
    for (double eta : {1e-4, 1e-3, 1e-2, 1e-1}) {
        const auto o = optimize_eps(s, eta);
        CHECK(o.energy.eps >= s.eps_min());
        CHECK(o.energy.eps <= s.eps_max());
        CHECK(o.energy.eps >= previous * (1 - 1e-6));
        previous = o.energy.eps;
    }
    CHECK(optimize_eps(s, 1e4).energy.eps == doctest::Approx(s.eps_max()).epsilon(1e-5));
}

TEST_CASE("minimizer on a synthetic trade-off")
{
    const double a = 2, b = 3, eta = 0.05;
    const auto r = minimize_unimodal<double>([&](double e) { return a * eta / (e * e) + b * e * e; }, 0.01, 10.0);
    CHECK(r.unimodal);
    CHECK(r.argmin == doctest::Approx(std::pow(a * eta / b, 0.25)).epsilon(1e-4));

    const auto bumpy = minimize_unimodal<double>([](double e) { return std::sin(10 * e); }, 0.1, 10.0);
    CHECK_FALSE(bumpy.unimodal);
    CHECK(bumpy.evaluations == 32);
}

TEST_CASE("slope fit")
{
    SweepResult<double> r;
    for (double eta : log_space(1e-4, 1e-1, 7)) r.records.push_back({eta, 0, 0, 0, 3 * std::sqrt(eta)});
    fit_slope(r);
    CHECK(r.slope_valid);
    CHECK(r.fitted_slope == doctest::Approx(0.5).epsilon(1e-12));
    for (auto& rec : r.records) rec.gap *= 1000;
    fit_slope(r);
    CHECK(r.fitted_slope == doctest::Approx(0.5).epsilon(1e-12));
    r.records.resize(1);
    fit_slope(r);
    CHECK_FALSE(r.slope_valid);
}

TEST_CASE("log spacing")
{
    const auto v = log_space(1e-4, 1e-1, 4);
    REQUIRE(v.size() == 4);
    CHECK(v[0] == 1e-4);
    CHECK(v[1] == doctest::Approx(1e-3));
    CHECK(v[3] == doctest::Approx(1e-1));
    CHECK_THROWS_AS(log_space(0.0, 1.0, 3), ValidationError);
}

TEST_CASE("width validation")
{
    const auto s = small_setup();
    CHECK_THROWS_AS(trial_energy(s, s.eps_min() / 2, 0.01), ValidationError);
    CHECK_THROWS_AS(trial_energy(s, s.alpha / 4, 0.01), ValidationError);
    CHECK_THROWS_AS(trial_energy(s, s.eps_min(), -1.0), ValidationError);
    auto cramped = s;
    cramped.alpha = 4 * s.eps_min();
    CHECK_THROWS_WITH_AS(optimize_eps(cramped, 0.01), doctest::Contains("empty feasible eps interval"), ValidationError);
}

TEST_CASE("sweep is independent of the thread count")
{
    const auto s = small_setup();
    const auto etas = log_space(1e-4, 1e-1, 5);
    const auto one = sweep(s, etas, 1);
    const auto three = sweep(s, etas, 3);
    REQUIRE(one.records.size() == three.records.size());
    for (std::size_t i = 0; i < one.records.size(); ++i) {
        CHECK(one.records[i].error.empty());
        CHECK(one.records[i].eps_opt == three.records[i].eps_opt);
        CHECK(one.records[i].gap == three.records[i].gap);
        CHECK(one.records[i].gap >= -1e-8);
        CHECK(one.records[i].gap <= one.records[i].assembled_C * (std::sqrt(one.records[i].eta) + one.records[i].eta));
        if (i > 0) CHECK(one.records[i].gap >= one.records[i - 1].gap - 1e-8);
    }
    CHECK(one.fitted_slope == three.fitted_slope);
}
