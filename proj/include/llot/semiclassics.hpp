#pragma once

#include "llot/mmot.hpp"
#include "llot/regularizer.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace llot {

/// Everything the trial-state bound needs that does not depend on (eps, eta).
template <typename Scalar>
struct SemiclassicalSetup {
    GridDensity<Scalar> rho;   // probability convention
    AtomicPlan<Scalar> plan;   // optimal plan for E_OT(rho)
    Scalar e_ot = 0;
    Scalar alpha = 0;          // separation of the plan
    Scalar kinetic_rho = 0;    // int |grad sqrt rho|^2
    Scalar grad_sq = 0;        // int |grad chi|^2
    Scalar second_moment = 0;  // int |u|^2 chi^2
    Scalar gradient_l1 = 0;    // int |grad rho|
    int n_particles = 2;

    Scalar eps_min() const { return 2 * rho.grid.spacing(); }
    Scalar eps_max() const { return alpha / 4 * (1 - Scalar(1e-6)); }
};

template <typename Scalar>
SemiclassicalSetup<Scalar> make_setup(const GridDensity<Scalar>& rho, const TransportSolution<Scalar>& sol)
{
    SemiclassicalSetup<Scalar> s;
    s.n_particles = sol.plan.n_particles;
    s.rho = rho.to_probability(s.n_particles);
    s.plan = sol.plan;
    s.e_ot = sol.value;
    s.alpha = plan_separation(sol).min_distance;
    s.kinetic_rho = h1_seminorm_sqrt(s.rho);
    const auto mom = moments(BumpProfile<Scalar>(rho.grid.dim()));
    s.grad_sq = mom.grad_sq;
    s.second_moment = mom.second_moment;
    s.gradient_l1 = gradient_l1(s.rho);
    return s;
}

template <typename Scalar>
struct TrialEnergy {
    Scalar eta = 0;
    Scalar eps = 0;
    Scalar kinetic_term = 0;    // eta N (int|grad sqrt rho|^2 + eps^-2 int|grad chi|^2)
    Scalar potential_term = 0;  // int Phi dP_eps
    Scalar total = 0;
};

template <typename Scalar>
TrialEnergy<Scalar> trial_energy(const SemiclassicalSetup<Scalar>& s, Scalar eps, Scalar eta)
{
    if (!(eta >= 0)) throw ValidationError("eta must be nonnegative");
    if (!(eps >= s.eps_min()) || !(eps < s.alpha / 4)) {
        std::ostringstream msg;
        msg << "eps = " << eps << " outside [" << s.eps_min() << ", " << s.alpha / 4 << ")";
        throw ValidationError(msg.str());
    }
    const auto rp = build_regularized(s.plan, s.rho, eps);
    TrialEnergy<Scalar> t;
    t.eta = eta;
    t.eps = eps;
    t.kinetic_term = eta * Scalar(s.n_particles) * (s.kinetic_rho + s.grad_sq / (eps * eps));
    t.potential_term = integrate_potential(rp, coulomb<Scalar>());
    t.total = t.kinetic_term + t.potential_term;
    return t;
}

template <typename Scalar>
struct MinimizeResult {
    Scalar argmin = 0;
    Scalar value = 0;
    bool unimodal = true;  // false: golden section skipped, best scan point returned
    int evaluations = 0;
};

/// Minimizes f on [lo, hi]: a log-spaced pre-scan of `scan` points, then golden-section
/// search on the bracket around the best scan point when the scan is unimodal.
template <typename Scalar, typename F>
MinimizeResult<Scalar> minimize_unimodal(F&& f, Scalar lo, Scalar hi, int scan = 32,
                                         Scalar rel_tol = Scalar(1e-7))
{
    if (!(lo > 0) || !(hi > lo)) throw ValidationError("empty feasible eps interval");
    MinimizeResult<Scalar> r;
    std::vector<Scalar> xs(scan), fs(scan);
    const Scalar ratio = std::log(hi / lo) / Scalar(scan - 1);
    for (int i = 0; i < scan; ++i) {
        xs[i] = i == scan - 1 ? hi : lo * std::exp(ratio * Scalar(i));
        fs[i] = f(xs[i]);
        ++r.evaluations;
    }
    const int best = int(std::min_element(fs.begin(), fs.end()) - fs.begin());
    for (int i = 0; i + 1 < scan; ++i) {
        const bool rising = fs[i + 1] > fs[i];
        if ((i < best && rising) || (i >= best && !rising && fs[i + 1] < fs[i])) r.unimodal = false;
    }
    r.argmin = xs[best];
    r.value = fs[best];
    if (!r.unimodal) return r;

    Scalar a = xs[std::max(best - 1, 0)], b = xs[std::min(best + 1, scan - 1)];
    const Scalar inv_phi = (std::sqrt(Scalar(5)) - 1) / 2;
    Scalar c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    Scalar fc = f(c), fd = f(d);
    r.evaluations += 2;
    while (b - a > rel_tol * b) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++r.evaluations;
    }
    const Scalar x = fc <= fd ? c : d;
    const Scalar fx = std::min(fc, fd);
    if (fx < r.value) {
        r.argmin = x;
        r.value = fx;
    }
    return r;
}

template <typename Scalar>
struct OptimizedTrial {
    TrialEnergy<Scalar> energy;
    bool unimodal = true;
    int evaluations = 0;
};

template <typename Scalar>
OptimizedTrial<Scalar> optimize_eps(const SemiclassicalSetup<Scalar>& s, Scalar eta, int scan = 32)
{
    if (!(eta > 0)) throw ValidationError("eta must be positive");
    if (!(s.eps_max() > s.eps_min())) {
        std::ostringstream msg;
        msg << "empty feasible eps interval: separation/4 = " << s.alpha / 4
            << " <= minimum resolved width " << s.eps_min();
        throw ValidationError(msg.str());
    }
    auto m = minimize_unimodal<Scalar>([&](Scalar e) { return trial_energy(s, e, eta).total; },
                                       s.eps_min(), s.eps_max(), scan);
    return {trial_energy(s, m.argmin, eta), m.unimodal, m.evaluations};
}

/// Error-bound constant at (eta, eps) with the Coulomb derivative bounds
/// N^3 / (alpha - 4 eps)^2 and N^4 / (alpha - 4 eps)^3.
template <typename Scalar>
Scalar assembled_constant(const SemiclassicalSetup<Scalar>& s, Scalar eta, Scalar eps)
{
    const Scalar n = Scalar(s.n_particles);
    const Scalar gap = s.alpha - 4 * eps;
    const Scalar kinetic = eta * n * (s.kinetic_rho + s.grad_sq / (eps * eps));
    const Scalar potential = eps * eps *
                             (n * n * n * s.second_moment * s.gradient_l1 / (gap * gap) +
                              2 * n * n * n * n / (gap * gap * gap));
    return (kinetic + potential) / (std::sqrt(eta) + eta);
}

template <typename Scalar>
struct SweepRecord {
    Scalar eta = 0;
    Scalar eps_opt = 0;
    Scalar e_ot = 0;
    Scalar trial_total = 0;
    Scalar gap = 0;
    Scalar assembled_C = 0;
    Scalar kinetic_term = 0;
    Scalar potential_term = 0;
    bool unimodal = true;
    std::string error;  // nonempty when this eta failed
};

template <typename Scalar>
struct SweepResult {
    std::vector<SweepRecord<Scalar>> records;  // ordered by eta
    Scalar fitted_slope = 0;
    bool slope_valid = false;
};

/// Log-log slope of gap against eta over the successful records with positive gap.
template <typename Scalar>
void fit_slope(SweepResult<Scalar>& r)
{
    std::vector<Scalar> x, y;
    for (const auto& rec : r.records)
        if (rec.error.empty() && rec.gap > 0) {
            x.push_back(rec.eta);
            y.push_back(rec.gap);
        }
    r.slope_valid = x.size() >= 2;
    r.fitted_slope = r.slope_valid ? loglog_slope(x, y) : Scalar(0);
}

/// Runs optimize_eps for every eta (at most `threads` at a time) and fits the rate.
template <typename Scalar>
SweepResult<Scalar> sweep(const SemiclassicalSetup<Scalar>& s, std::vector<Scalar> etas, int threads = 1)
{
    std::sort(etas.begin(), etas.end());
    SweepResult<Scalar> out;
    out.records.resize(etas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < etas.size(); i = next++) {
            auto& rec = out.records[i];
            rec.eta = etas[i];
            rec.e_ot = s.e_ot;
            try {
                const auto opt = optimize_eps(s, etas[i]);
                rec.eps_opt = opt.energy.eps;
                rec.trial_total = opt.energy.total;
                rec.kinetic_term = opt.energy.kinetic_term;
                rec.potential_term = opt.energy.potential_term;
                rec.gap = opt.energy.total - s.e_ot;
                rec.unimodal = opt.unimodal;
                rec.assembled_C = assembled_constant(s, etas[i], rec.eps_opt);
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(threads, int(etas.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    fit_slope(out);
    return out;
}

/// n log-spaced values from lo to hi inclusive.
template <typename Scalar>
std::vector<Scalar> log_space(Scalar lo, Scalar hi, int n)
{
    if (!(lo > 0) || !(hi >= lo) || n < 1) throw ValidationError("invalid log-spaced range");
    std::vector<Scalar> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = n == 1 ? lo : lo * std::pow(hi / lo, Scalar(i) / Scalar(n - 1));
    return out;
}

}  // namespace llot
