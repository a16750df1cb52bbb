#include "llot/selftest.hpp"

#include "llot/fixtures.hpp"
#include "llot/mmot.hpp"
#include "llot/quantum_state.hpp"

#include <algorithm>
#include <random>

namespace llot {

namespace {

using Json = nlohmann::ordered_json;

class CheckLog {
public:
    void record(const std::string& name, const std::string& instance, double eps, double value,
                double limit, bool pass)
    {
        Json c;
        c["name"] = name;
        c["instance"] = instance;
        c["eps"] = eps;
        c["value"] = value;
        c["limit"] = limit;
        c["status"] = pass ? "pass" : "fail";
        checks_.push_back(std::move(c));
        ++(pass ? passed_ : failed_);
    }

    void fail(const std::string& name, const std::string& instance, double eps, const std::string& why)
    {
        Json c;
        c["name"] = name;
        c["instance"] = instance;
        c["eps"] = eps;
        c["status"] = "fail";
        c["reason"] = why;
        checks_.push_back(std::move(c));
        ++failed_;
    }

    Json checks() const { return checks_; }
    int passed() const { return passed_; }
    int failed() const { return failed_; }

private:
    Json checks_ = Json::array();
    int passed_ = 0, failed_ = 0;
};

constexpr Index kDiagonalSamples = 1000;
constexpr int kPositivitySamples = 100;

void check_instance(CheckLog& log, const fixtures::Instance& inst, double eps, std::uint64_t seed)
{
    const auto rp = build_regularized(inst.plan, inst.rho, eps);
    const MixedStateKernel<double> k(rp);
    const int n = rp.n_particles();

    const double marginal_l1 = l1_distance(density_of(rp), rp.rho());
    log.record("marginal_l1", inst.name, eps, marginal_l1, 1e-10, marginal_l1 <= 1e-10);

    const double tr = trace(k);
    log.record("trace_defect", inst.name, eps, std::abs(tr - 1), 1e-10, std::abs(tr - 1) <= 1e-10);
    const double density_l1 = l1_distance(one_particle_density(k), rp.rho());
    log.record("density_l1", inst.name, eps, density_l1, 1e-10, density_l1 <= 1e-10);

    const double peak = materialize(rp).maxCoeff();
    const auto xs = fixtures::sample_configurations(rp, kDiagonalSamples, seed);
    double diag_err = 0;
    for (const auto& x : xs) diag_err = std::max(diag_err, std::abs(k.evaluate_nodes(x, x) - rp.evaluate_nodes(x)));
    log.record("diagonal_identity", inst.name, eps, diag_err / peak, 1e-12, diag_err <= 1e-12 * peak);

    // Off-diagonal pairs: X' either reorders X or displaces each coordinate within the kernel
    // radius; reordering keeps pairs nonzero on single-node supports.
    std::mt19937_64 rng(seed + 1);
    const Index r = rp.kernel().radius;
    std::uniform_int_distribution<Index> shift(-r, r);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<Index> delta(static_cast<std::size_t>(rp.grid().dim()));
    double herm = 0, scale = 0;
    Index sign_errors = 0, nonzero = 0;
    for (const auto& x : xs) {
        auto xp = x;
        if (coin(rng) == 0) {
            std::shuffle(xp.begin(), xp.end(), rng);
        } else {
            for (auto& v : xp) {
                for (auto& s : delta) s = shift(rng);
                const Index moved = rp.grid().offset(v, delta);
                if (moved >= 0) v = moved;
            }
        }
        const double g = k.evaluate_nodes(x, xp);
        herm = std::max(herm, std::abs(g - k.evaluate_nodes(xp, x)));
        scale = std::max(scale, std::abs(g));
        if (g != 0) ++nonzero;
        for (int i = 0; i + 1 < n; ++i) {
            auto t = x;
            std::swap(t[std::size_t(i)], t[std::size_t(i + 1)]);
            if (k.evaluate_nodes(t, xp) != -g) ++sign_errors;
        }
    }
    if (n > 1) {
        log.record("transposition_sign_flip", inst.name, eps, double(sign_errors), 0, sign_errors == 0);
        log.record("offdiagonal_nonzero_pairs", inst.name, eps, double(nonzero), 1, nonzero >= 1);
    }
    log.record("hermitian_defect", inst.name, eps, scale > 0 ? herm / scale : herm, 1e-14,
               herm <= 1e-14 * scale);

    const double kos = kinetic_of_sqrt(rp);
    const double bound = kinetic_bound(rp);
    const auto kt = kinetic_trace(k);
    log.record("kinetic_sqrt_vs_bound", inst.name, eps, kos / bound, 1.05, kos <= 1.05 * bound);
    log.record("kinetic_sqrt_vs_quadrature", inst.name, eps, kos / kt.quadrature, 1.05,
               kos <= 1.05 * kt.quadrature);

    if (n > 1) {
        const auto pe = potential_error(rp, coulomb<double>());
        log.record("potential_error_vs_bound", inst.name, eps, pe.lhs / pe.bound, 1, pe.lhs <= pe.bound);
    }

    const auto pos = positivity(k, kPositivitySamples, seed + 2);
    log.record(pos.sampled ? "positivity_min_rayleigh_sampled_block" : "positivity_min_rayleigh", inst.name, eps,
               pos.min_rayleigh, -1e-12, pos.min_rayleigh >= -1e-12);
}

void check_transport(CheckLog& log)
{
    struct Case {
        std::string name;
        TransportProblem<double> problem;
        double expected;
    };
    std::vector<Case> cases;
    cases.push_back({"two_site_n2", {2, fixtures::equal_sites(2)}, 1.0});
    cases.push_back({"three_site_n3", {3, fixtures::equal_sites(3)}, 2.5});
    cases.push_back({"gaussian_16_n2", {2, fixtures::gaussian_sites(16)}, 2.2009405157655637});
    for (const auto& c : cases) {
        const auto sol = solve_lp(c.problem);
        const double err = std::abs(sol.value - c.expected);
        log.record("lp_value", c.name, 0, err, 1e-8, err <= 1e-8);
        const auto dual = check_dual(sol, c.problem);
        log.record("lp_duality_gap", c.name, 0, std::abs(dual.duality_gap), 1e-8,
                   std::abs(dual.duality_gap) <= 1e-8);
        log.record("dual_feasibility", c.name, 0, dual.max_violation, 1e-8, dual.feasible);
        log.record("lp_marginal_residual", c.name, 0, sol.marginal_residual, 1e-10,
                   sol.marginal_residual <= 1e-10);
    }
    SinkhornOptions<double> opt;
    opt.beta = 200;
    opt.anneal = {25, 50, 100};
    opt.max_iter = 100000;
    const auto sk = solve_sinkhorn(cases[2].problem, opt);
    const double gap = std::abs(sk.value - cases[2].expected);
    log.record("sinkhorn_beta200_vs_lp", cases[2].name, 0, gap, 1e-3, gap <= 1e-3 && sk.converged);
}

}  // namespace

SelftestOutcome run_selftest(std::uint64_t seed)
{
    CheckLog log;
    for (const auto& inst : fixtures::desk_instances())
        for (double eps : inst.eps) {
            try {
                check_instance(log, inst, eps, seed);
            } catch (const std::exception& e) {
                log.fail("instance_error", inst.name, eps, e.what());
            }
        }
    try {
        check_transport(log);
    } catch (const std::exception& e) {
        log.fail("transport_error", "mmot", 0, e.what());
    }

    SelftestOutcome out;
    Json& j = out.report;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "selftest";
    j["config"] = {{"seed", seed},
                   {"diagonal_samples", kDiagonalSamples},
                   {"positivity_samples", kPositivitySamples}};
    j["checks"] = log.checks();
    j["summary"] = {{"passed", log.passed()}, {"failed", log.failed()}};
    out.passed = log.failed() == 0;
    j["passed"] = out.passed;
    return out;
}

}  // namespace llot
