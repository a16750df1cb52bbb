#include "llot/cli.hpp"

#include "llot/fixtures.hpp"
#include "llot/io.hpp"
#include "llot/quantum_state.hpp"
#include "llot/selftest.hpp"
#include "llot/semiclassics.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace llot::cli {

namespace {

using Json = nlohmann::ordered_json;

struct Common {
    std::string mass_convention = "auto";
    int threads = 1;
};

Json grid_json(const Grid<double>& g)
{
    Json j;
    j["dim"] = g.dim();
    j["origin"] = std::vector<double>(g.origin().data(), g.origin().data() + g.dim());
    j["spacing"] = g.spacing();
    j["points_per_axis"] = g.points_per_axis();
    return j;
}

Json header(const std::string& command, Json config, const Common& common)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command;
    config["mass_convention"] = common.mass_convention;
    config["threads"] = common.threads;
    j["config"] = std::move(config);
    return j;
}

// Reports go to `path`, or to stdout when the path is empty.
void emit(const Json& report, const std::string& path, std::ostream& out)
{
    const std::string text = report.dump(2) + "\n";
    if (path.empty())
        out << text;
    else
        io::write_file(path, text);
}

void require_file(const std::string& path, const std::string& what)
{
    if (!std::filesystem::is_regular_file(path)) throw ValidationError(what + " '" + path + "' does not exist");
}

void require_writable(const std::string& path)
{
    if (path.empty()) return;
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty() && !std::filesystem::is_directory(dir))
        throw ValidationError("output directory '" + dir.string() + "' does not exist");
}

GridDensity<double> load_density(const std::string& path, int n, const Common& common)
{
    require_file(path, "density file");
    auto rho = io::read_density_csv(path);
    io::apply_convention(rho, n, io::parse_convention(common.mass_convention));
    return rho;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

std::vector<std::string> dimension_notes(int dim)
{
    if (dim == 3) return {};
    return {"Coulomb cost |x - y|^-1 evaluated in d = " + std::to_string(dim) +
            " rather than physical d = 3"};
}

// ---- regularize ----

struct RegularizeArgs {
    std::string plan, density, out, checks = "marginal,kinetic,potential";
    double eps = 0;
};

int regularize(const RegularizeArgs& a, const Common& c, std::ostream& out)
{
    const auto checks = split_list(a.checks);
    for (const auto& k : checks)
        if (k != "marginal" && k != "kinetic" && k != "potential")
            throw ValidationError("unknown check '" + k + "' (marginal, kinetic, potential)");
    require_writable(a.out);
    require_file(a.plan, "plan file");
    const auto plan = io::read_plan_json(a.plan);
    const auto rho = load_density(a.density, plan.n_particles, c);
    const auto rp = build_regularized(plan, rho, a.eps);

    Json report = header("regularize",
                         {{"plan", a.plan}, {"density", a.density}, {"eps", a.eps}, {"checks", checks}}, c);
    report["input"] = {{"n_particles", plan.n_particles},
                       {"atoms", plan.atoms.size()},
                       {"grid", grid_json(rho.grid)},
                       {"density_convention", io::to_string(rho.convention)},
                       {"separation", rp.separation_distance()},
                       {"kernel_radius_nodes", rp.kernel().radius}};
    Json results;
    for (const auto& k : checks) {
        if (k == "marginal") {
            const double l1 = l1_distance(density_of(rp), rp.rho());
            results["marginal"] = {{"l1_error", l1}, {"limit", 1e-10}, {"passed", l1 <= 1e-10}};
        } else if (k == "kinetic") {
            const double lhs = kinetic_of_sqrt(rp), rhs = kinetic_bound(rp);
            results["kinetic"] = {{"lhs", lhs}, {"rhs", rhs}, {"ratio", lhs / rhs}, {"passed", lhs <= 1.05 * rhs}};
        } else if (plan.n_particles > 1) {
            const auto pe = potential_error(rp, coulomb<double>());
            results["potential"] = {{"potential", "coulomb"},
                                    {"lhs", pe.lhs},
                                    {"bound", pe.bound},
                                    {"integral_regularized", pe.integral_regularized},
                                    {"integral_plan", pe.integral_plan},
                                    {"gradient_sup_sum", pe.gradient_sup_sum},
                                    {"hessian_sup_sum", pe.hessian_sup_sum},
                                    {"gradient_l1", pe.gradient_l1},
                                    {"second_moment", pe.second_moment},
                                    {"gradient_unresolved", pe.gradient_unresolved},
                                    {"passed", pe.lhs <= pe.bound}};
        } else {
            results["potential"] = {{"skipped", "Coulomb potential needs at least 2 particles"}};
        }
    }
    report["results"] = std::move(results);
    report["notes"] = dimension_notes(rho.grid.dim());
    emit(report, a.out, out);
    return 0;
}

// ---- quantum-check ----

struct QuantumArgs {
    std::string plan, density, out;
    double eps = 0;
    Index samples = 1000;
    int positivity_samples = 100;
    std::uint64_t seed = 1;
};

int quantum_check(const QuantumArgs& a, const Common& c, std::ostream& out)
{
    require_writable(a.out);
    require_file(a.plan, "plan file");
    const auto plan = io::read_plan_json(a.plan);
    const auto rho = load_density(a.density, plan.n_particles, c);
    const auto rp = build_regularized(plan, rho, a.eps);
    const MixedStateKernel<double> k(rp);

    Json report = header("quantum-check",
                         {{"plan", a.plan},
                          {"density", a.density},
                          {"eps", a.eps},
                          {"samples", a.samples},
                          {"positivity_samples", a.positivity_samples},
                          {"seed", a.seed}},
                         c);
    const double tr = trace(k);
    const double dens = l1_distance(one_particle_density(k), rp.rho());
    const double peak = materialize(rp).maxCoeff();
    double diag = 0;
    for (const auto& x : fixtures::sample_configurations(rp, a.samples, a.seed))
        diag = std::max(diag, std::abs(k.evaluate_nodes(x, x) - rp.evaluate_nodes(x)));
    const auto kt = kinetic_trace(k);
    Json results;
    results["trace"] = tr;
    results["density_l1_error"] = dens;
    results["diagonal_max_error"] = diag;
    results["diagonal_max_relative_error"] = diag / peak;
    results["kinetic"] = {{"analytic", kt.analytic},
                          {"quadrature", kt.quadrature},
                          {"relative_mismatch", std::abs(kt.analytic - kt.quadrature) / kt.analytic}};
    const auto pos = positivity(k, a.positivity_samples, a.seed + 1);
    results["positivity"] = {{"dimension", pos.dimension},
                             {"sampled_block", pos.sampled},
                             {"min_eigenvalue", pos.min_eigenvalue},
                             {"max_eigenvalue", pos.max_eigenvalue},
                             {"min_rayleigh", pos.min_rayleigh},
                             {"max_hermitian_defect", pos.max_hermitian_defect}};
    report["results"] = std::move(results);
    emit(report, a.out, out);
    return 0;
}

// ---- mmot ----

struct MmotArgs {
    std::string density, out, report, solver = "lp", anneal, mode = "log";
    int n = 2;
    double beta = 100, tol = 1e-8;
    Index max_iter = 200000;
};

std::vector<double> parse_anneal(const std::string& s)
{
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("invalid anneal value '" + item + "'");
        }
    }
    return out;
}

TransportSolution<double> solve(const TransportProblem<double>& p, const MmotArgs& a)
{
    if (a.solver == "lp") return solve_lp(p);
    SinkhornOptions<double> opt;
    opt.beta = a.beta;
    opt.tol = a.tol;
    opt.max_iter = a.max_iter;
    opt.mode = a.mode == "kernel" ? SinkhornMode::kernel : SinkhornMode::log_domain;
    opt.anneal = parse_anneal(a.anneal);
    return solve_sinkhorn(p, opt);
}

Json solution_json(const TransportSolution<double>& sol, const TransportProblem<double>& p)
{
    Json j;
    j["solver"] = sol.solver == TransportSolver::lp ? "lp" : "sinkhorn";
    j["value"] = sol.value;
    j["atoms"] = sol.plan.atoms.size();
    j["marginal_residual"] = sol.marginal_residual;
    j["iterations"] = sol.iterations;
    j["converged"] = sol.converged;
    if (sol.solver == TransportSolver::sinkhorn) j["beta"] = sol.beta;
    j["separation"] = plan_separation(sol).min_distance;
    if (sol.dual_potential) {
        const auto dual = check_dual(sol, p);
        j["duality_gap"] = dual.duality_gap;
        j["dual_check"] = {{"feasible", dual.feasible},
                           {"max_violation", dual.max_violation},
                           {"worst_configuration", dual.worst_configuration},
                           {"complementary_slackness", dual.complementary_slackness},
                           {"checked", dual.checked}};
        Json v = Json::array();
        for (std::size_t i = 0; i < sol.sites.size(); ++i) {
            const auto x = p.marginal.grid.node(sol.sites[i]);
            v.push_back({{"x", std::vector<double>(x.data(), x.data() + x.size())},
                         {"v", (*sol.dual_potential)[Index(i)]}});
        }
        j["dual_potential"] = std::move(v);
    }
    return j;
}

void validate_solver(const MmotArgs& a)
{
    if (a.solver != "lp" && a.solver != "sinkhorn") throw ValidationError("solver must be lp or sinkhorn");
    if (a.mode != "log" && a.mode != "kernel") throw ValidationError("mode must be log or kernel");
    if (!(a.tol > 0)) throw ValidationError("tolerance must be positive");
    if (!(a.beta > 0)) throw ValidationError("beta must be positive");
}

Json solver_config(const MmotArgs& a)
{
    Json j = {{"density", a.density}, {"n", a.n}, {"solver", a.solver}};
    if (a.solver == "sinkhorn") {
        j["beta"] = a.beta;
        j["tol"] = a.tol;
        j["max_iter"] = a.max_iter;
        j["mode"] = a.mode;
        j["anneal"] = parse_anneal(a.anneal);
    }
    return j;
}

int mmot(const MmotArgs& a, const Common& c, std::ostream& out)
{
    validate_solver(a);
    require_writable(a.out);
    require_writable(a.report);
    const auto rho = load_density(a.density, a.n, c);
    const TransportProblem<double> p{a.n, rho.to_probability(a.n)};
    const auto sol = solve(p, a);

    Json config = solver_config(a);
    config["out"] = a.out;
    Json report = header("mmot", std::move(config), c);
    report["input"] = {{"grid", grid_json(rho.grid)}, {"density_convention", io::to_string(rho.convention)}};
    report["results"] = solution_json(sol, p);
    report["notes"] = dimension_notes(rho.grid.dim());
    if (!a.out.empty()) io::write_file(a.out, io::plan_to_json(sol.plan).dump(2) + "\n");
    emit(report, a.report, out);
    return 0;
}

// ---- sweep ----

struct SweepArgs {
    MmotArgs solver;
    std::string etas = "1e-4:1e-1:10", out, report;
};

std::vector<double> parse_etas(const std::string& s)
{
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw ValidationError("etas must be lo:hi:count");
    try {
        const double lo = std::stod(parts[0]), hi = std::stod(parts[1]);
        const int count = std::stoi(parts[2]);
        if (count < 5) throw ValidationError("an eta sweep needs at least 5 points");
        return log_space(lo, hi, count);
    } catch (const std::logic_error&) {
        throw ValidationError("etas must be lo:hi:count");
    }
}

int sweep_command(const SweepArgs& a, const Common& c, std::ostream& out)
{
    validate_solver(a.solver);
    const auto etas = parse_etas(a.etas);
    require_writable(a.out);
    require_writable(a.report);
    const int n = a.solver.n;
    const auto rho = load_density(a.solver.density, n, c).to_probability(n);
    const TransportProblem<double> p{n, rho};
    const auto sol = solve(p, a.solver);
    // A Sinkhorn plan only approximately carries rho; its own marginal is pinned instead.
    const auto setup = make_setup(sol.solver == TransportSolver::lp ? rho : marginal(sol.plan, rho.grid), sol);
    const auto result = sweep(setup, etas, c.threads);

    Json config = solver_config(a.solver);
    config["etas"] = a.etas;
    config["out"] = a.out;
    Json report = header("sweep", std::move(config), c);
    report["transport"] = solution_json(sol, p);
    report["setup"] = {{"e_ot", setup.e_ot},
                       {"separation", setup.alpha},
                       {"eps_min", setup.eps_min()},
                       {"eps_max", setup.eps_max()},
                       {"kinetic_rho", setup.kinetic_rho},
                       {"grad_sq", setup.grad_sq},
                       {"second_moment", setup.second_moment},
                       {"gradient_l1", setup.gradient_l1},
                       {"gradient_unresolved", gradient_unresolved(setup.rho)}};
    Json records = Json::array();
    std::string csv = "eta,eps_opt,e_ot,trial_total,gap,assembled_C\n";
    bool gaps_ok = true, bound_ok = true;
    for (const auto& r : result.records) {
        Json j = {{"eta", r.eta}};
        if (!r.error.empty()) {
            j["error"] = r.error;
            records.push_back(std::move(j));
            continue;
        }
        j["eps_opt"] = r.eps_opt;
        j["trial_total"] = r.trial_total;
        j["kinetic_term"] = r.kinetic_term;
        j["potential_term"] = r.potential_term;
        j["gap"] = r.gap;
        j["assembled_C"] = r.assembled_C;
        j["bound"] = r.assembled_C * (std::sqrt(r.eta) + r.eta);
        j["unimodal"] = r.unimodal;
        gaps_ok = gaps_ok && r.gap >= -1e-8;
        bound_ok = bound_ok && r.gap <= r.assembled_C * (std::sqrt(r.eta) + r.eta);
        records.push_back(std::move(j));
        csv += io::format_double(r.eta) + "," + io::format_double(r.eps_opt) + "," + io::format_double(r.e_ot) +
               "," + io::format_double(r.trial_total) + "," + io::format_double(r.gap) + "," +
               io::format_double(r.assembled_C) + "\n";
    }
    report["records"] = std::move(records);
    report["fit"] = {{"slope", result.slope_valid ? Json(result.fitted_slope) : Json(nullptr)},
                     {"gaps_nonnegative", gaps_ok},
                     {"gaps_within_bound", bound_ok}};
    report["notes"] = dimension_notes(rho.grid.dim());
    if (!a.out.empty()) io::write_file(a.out, csv);
    emit(report, a.report, out);
    return 0;
}

// ---- selftest ----

int selftest(const std::string& path, std::uint64_t seed, std::ostream& out)
{
    require_writable(path);
    const auto outcome = run_selftest(seed);
    emit(outcome.report, path, out);
    return outcome.passed ? 0 : 2;
}

void add_solver_options(CLI::App* sub, MmotArgs& a)
{
    sub->add_option("--density", a.density, "density CSV (x,value)")->required();
    sub->add_option("--n", a.n, "particle count")->required()->check(CLI::Range(2, 16));
    sub->add_option("--solver", a.solver, "lp or sinkhorn")->check(CLI::IsMember({"lp", "sinkhorn"}));
    sub->add_option("--beta", a.beta, "Sinkhorn inverse temperature");
    sub->add_option("--tol", a.tol, "Sinkhorn marginal tolerance");
    sub->add_option("--max-iter", a.max_iter, "Sinkhorn iteration cap");
    sub->add_option("--anneal", a.anneal, "comma-separated betas solved first, warm-starting the next");
    sub->add_option("--mode", a.mode, "log or kernel")->check(CLI::IsMember({"log", "kernel"}));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"llot: marginal-preserving regularization, fermionic mixed states and Coulomb transport"};
    app.name("llot");
    app.require_subcommand(1);
    Common common;
    app.add_option("--threads", common.threads, "cap on internal parallelism")->check(CLI::PositiveNumber);
    app.add_option("--mass-convention", common.mass_convention, "auto, probability or particle-number")
        ->check(CLI::IsMember({"auto", "probability", "particle-number"}));

    RegularizeArgs reg;
    auto* sub_reg = app.add_subcommand("regularize", "build P_eps and check its marginal, kinetic and potential bounds");
    sub_reg->add_option("--plan", reg.plan, "plan JSON")->required();
    sub_reg->add_option("--density", reg.density, "density CSV")->required();
    sub_reg->add_option("--eps", reg.eps, "mollifier width")->required()->check(CLI::PositiveNumber);
    sub_reg->add_option("--checks", reg.checks, "comma-separated subset of marginal,kinetic,potential");
    sub_reg->add_option("--out", reg.out, "report path (stdout when omitted)");

    QuantumArgs qa;
    auto* sub_q = app.add_subcommand("quantum-check", "trace, density, diagonal, kinetic and positivity of Gamma_eps");
    sub_q->add_option("--plan", qa.plan, "plan JSON")->required();
    sub_q->add_option("--density", qa.density, "density CSV")->required();
    sub_q->add_option("--eps", qa.eps, "mollifier width")->required()->check(CLI::PositiveNumber);
    sub_q->add_option("--samples", qa.samples, "sampled configurations for the diagonal check");
    sub_q->add_option("--positivity-samples", qa.positivity_samples, "random test vectors");
    sub_q->add_option("--seed", qa.seed, "seed for sampled checks");
    sub_q->add_option("--out", qa.out, "report path (stdout when omitted)");

    MmotArgs ma;
    auto* sub_m = app.add_subcommand("mmot", "solve the symmetric Coulomb multi-marginal transport problem");
    add_solver_options(sub_m, ma);
    sub_m->add_option("--out", ma.out, "optimal plan JSON");
    sub_m->add_option("--report", ma.report, "report path (stdout when omitted)");

    SweepArgs sa;
    auto* sub_s = app.add_subcommand("sweep", "trial-state upper bound over a range of eta");
    add_solver_options(sub_s, sa.solver);
    sub_s->add_option("--etas", sa.etas, "lo:hi:count, log-spaced");
    sub_s->add_option("--out", sa.out, "sweep CSV");
    sub_s->add_option("--report", sa.report, "report path (stdout when omitted)");

    std::string st_out;
    std::uint64_t st_seed = 20240601;
    auto* sub_t = app.add_subcommand("selftest", "property suite on built-in desk fixtures");
    sub_t->add_option("--out", st_out, "report path (stdout when omitted)");
    sub_t->add_option("--seed", st_seed, "seed for sampled checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*sub_reg) return regularize(reg, common, out);
        if (*sub_q) return quantum_check(qa, common, out);
        if (*sub_m) return mmot(ma, common, out);
        if (*sub_s) return sweep_command(sa, common, out);
        return selftest(st_out, st_seed, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace llot::cli
