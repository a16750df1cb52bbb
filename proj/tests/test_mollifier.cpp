#include <doctest.h>

#include "llot/mollifier.hpp"
#include "llot/quadrature.hpp"

#include <numbers>
#include <random>

using namespace llot;

namespace {

// Reference values from 30-digit adaptive quadrature of the normalized bump.
constexpr double kC1 = 2.74115514570697231;
constexpr double kGradSq1 = 3.07760913123177715;
constexpr double kSecond1 = 0.114927245845481897;
constexpr double kC3 = 3.22576097031051654;
constexpr double kGradSq3 = 12.3017353736704818;

}  // namespace

TEST_CASE("bump normalization constants")
{
    CHECK(BumpProfile<double>(1).normalization() == doctest::Approx(kC1).epsilon(1e-12));
    CHECK(BumpProfile<double>(3).normalization() == doctest::Approx(kC3).epsilon(1e-12));
}

TEST_CASE("scaled mollifier has unit L2 norm")
{
    const BumpProfile<double> b(1);
    for (double eps : {1.0, 0.1, 0.01}) {
        const ScaledMollifier<double> m(b, eps);
        const auto r = integrate([&](double x) { return std::pow(m.radial(std::abs(x)), 2); }, -eps, eps, 1e-14);
        CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));
    }
    const ScaledMollifier<double> m3(BumpProfile<double>(3), 0.1);
    const auto r3 = integrate([&](double r) { return 4 * std::numbers::pi * r * r * std::pow(m3.radial(r), 2); },
                              0.0, 0.1, 1e-14);
    CHECK(r3.value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("eval_chi support, centre value and symmetry")
{
    const BumpProfile<double> b(1);
    const ScaledMollifier<double> unit(b, 1.0);
    CHECK(eval_chi(unit, Vector<double>{{0.0}}) == doctest::Approx(kC1 * std::exp(-1.0)).epsilon(1e-12));
    const ScaledMollifier<double> m(b, 0.2);
    CHECK(eval_chi(m, Vector<double>{{0.2}}) == 0.0);
    CHECK(eval_chi(m, Vector<double>{{-0.25}}) == 0.0);

    const ScaledMollifier<double> m2(BumpProfile<double>(2), 0.5);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int i = 0; i < 1000; ++i) {
        const Vector<double> x{{u(rng), u(rng)}};
        CHECK(eval_chi(m2, x) == eval_chi(m2, Vector<double>(-x)));
    }
}

TEST_CASE("moments against reference values")
{
    const auto mom = moments(BumpProfile<double>(1));
    CHECK(mom.grad_sq == doctest::Approx(kGradSq1).epsilon(1e-11));
    CHECK(mom.second_moment == doctest::Approx(kSecond1).epsilon(1e-11));
    CHECK(mom.grad_sq_error <= 1e-9);
    CHECK(mom.second_moment_error <= 1e-9);
    CHECK(mom.second_moment < 1);
    CHECK(moments(BumpProfile<double>(3)).grad_sq == doctest::Approx(kGradSq3).epsilon(1e-11));

    const auto s = mom.scaled(0.1);
    CHECK(s.grad_sq == doctest::Approx(kGradSq1 * 100).epsilon(1e-8));
    CHECK(s.second_moment == doctest::Approx(kSecond1 * 0.01).epsilon(1e-8));
}

TEST_CASE("moments of the scaled profile scale with eps")
{
    const double eps = 0.05;
    const ScaledMollifier<double> m(BumpProfile<double>(1), eps);
    const auto g = integrate([&](double x) { return std::pow(m.radial_derivative(std::abs(x)), 2); }, -eps, eps, 1e-12);
    CHECK(g.value == doctest::Approx(kGradSq1 / (eps * eps)).epsilon(1e-8));
    const auto s = integrate([&](double x) { return x * x * std::pow(m.radial(std::abs(x)), 2); }, -eps, eps, 1e-16);
    CHECK(s.value == doctest::Approx(kSecond1 * eps * eps).epsilon(1e-8));
}

TEST_CASE("moments match a brute-force trapezoid rule")
{
    const BumpProfile<double> b(1);
    const Index n = 1000000;
    const double h = 2.0 / double(n);
    double grad = 0, second = 0;
    for (Index i = 1; i < n; ++i) {
        const double x = -1 + double(i) * h;
        const double d = b.radial_derivative(std::abs(x));
        const double v = b.radial(std::abs(x));
        grad += d * d;
        second += x * x * v * v;
    }
    const auto mom = moments(b);
    CHECK(grad * h == doctest::Approx(mom.grad_sq).epsilon(1e-8));
    CHECK(second * h == doctest::Approx(mom.second_moment).epsilon(1e-8));
}

TEST_CASE("discrete kernel is renormalized and requires resolution")
{
    const auto g = Grid<double>::line(0.0, 0.01, 200);
    const ScaledMollifier<double> m(BumpProfile<double>(1), 0.057);
    const DiscreteKernel<double> k(g, m);
    CHECK(k.radius == 5);
    double sum = 0;
    for (const auto& t : k.taps) sum += t.value;
    CHECK(sum * g.spacing() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_WITH_AS(DiscreteKernel<double>(g, ScaledMollifier<double>(BumpProfile<double>(1), 0.009)),
                         doctest::Contains("kernel unresolved"), ValidationError);
}

TEST_CASE("convolve_sq with a point mass and a constant")
{
    const auto g = Grid<double>::line(0.0, 0.01, 101);
    const ScaledMollifier<double> m(BumpProfile<double>(1), 0.045);
    const DiscreteKernel<double> k(g, m);

    Vector<double> delta = Vector<double>::Zero(101);
    delta[50] = 1 / g.spacing();
    const auto c = convolve_sq(GridDensity<double>(g, delta), m);
    for (Index i = 0; i < 101; ++i) {
        const std::array<Index, 1> u{i - 50};
        const double want = std::abs(u[0]) <= k.radius ? k.at(u) : 0.0;
        CHECK(c.values[i] == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(c.mass() == doctest::Approx(1.0).epsilon(1e-14));

    const GridDensity<double> flat(g, Vector<double>::Constant(101, 2.0));
    const auto cf = convolve_sq(flat, m);
    for (Index i = k.radius; i + k.radius < 101; ++i) CHECK(std::abs(cf.values[i] - 2.0) <= 1e-12);
}

TEST_CASE("convolve_sq converges to the density at second order")
{
    const Index n = 4097;
    const double h = 4.0 / double(n - 1);
    const auto g = Grid<double>::line(-2.0, h, n);
    Vector<double> v(n);
    for (Index i = 0; i < n; ++i) {
        const double x = g.node(i)[0];
        v[i] = std::exp(-4 * x * x);
    }
    const GridDensity<double> rho(g, v / (v.sum() * h));
    std::vector<double> eps{0.2, 0.1, 0.05}, err;
    for (double e : eps) {
        const auto c = convolve_sq(rho, ScaledMollifier<double>(BumpProfile<double>(1), e));
        err.push_back(l1_distance(c, rho));
    }
    CHECK(err[0] > err[1]);
    CHECK(err[1] > err[2]);
    CHECK(loglog_slope(eps, err) >= 1.8);
}

TEST_CASE("adaptive quadrature and Gauss-Legendre rules")
{
    const auto r = integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-13);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-13));
    const GaussLegendre<double> gl(6);
    std::vector<double> xs, ws;
    gl.map(0.0, 2.0, xs, ws);
    double s = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += ws[i] * std::pow(xs[i], 11);
    CHECK(s == doctest::Approx(std::pow(2.0, 12) / 12).epsilon(1e-13));
}
