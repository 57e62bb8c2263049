#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sublin/errors.hpp"
#include "sublin/gbsde.hpp"
#include "sublin/path_functional.hpp"

namespace sublin {

/// Lower barrier psi(t, x).
struct Obstacle {
    std::function<double(double, double)> psi;
    double terminal_compat_tol = 1e-12;

    static Obstacle inactive() {
        return {[](double, double) { return -1e6; }, 1e-12};
    }

    double operator()(double t, double x) const { return psi(t, x); }

    double sup_norm(const Lattice& lattice) const {
        double m = 0.0;
        for (int k = 0; k <= lattice.n_steps; ++k)
            for (std::size_t i = 0; i < lattice.size(); ++i)
                m = std::max(m, std::abs(psi(lattice.t(k), lattice.x(i))));
        return m;
    }
};

/// Reflected solution: base.lift is the nodewise increment of A.
struct ReflectedSurface {
    SolutionSurface base;
    Obstacle obstacle;

    double y0() const { return base.y0(); }
};

struct NormReport {
    double Y_sup_norm = 0.0;       // E[sup_t |Y_t|^alpha]
    double Z_l2_norm = 0.0;        // E[(sum |Z|^2 dt)^{alpha/2}]
    double A_terminal_norm = 0.0;  // E[|A_T|^alpha]
};

struct PicardRun {
    std::vector<ReflectedSurface> iterates;  // Y^1, Y^2, ...
    std::vector<double> deltas;              // sup |Y^{n+1} - Y^n|, n = 1, 2, ...
    std::vector<NormReport> norm_trace;      // per iterate, when tracked
};

struct PenalizationRun {
    std::vector<double> schedule;
    std::vector<SolutionSurface> surfaces;  // raw penalized surfaces, lift = L increments
    std::vector<double> gaps;               // sup (Y^n - psi)^-
    std::vector<double> penalty_mass;       // E[L^n_T] under the optimizer policy
    std::vector<double> residuals;          // E[n sum ((Y^n - psi)^-)^2 dt] before the final sweep
    std::vector<NormReport> norms;          // per rate, when tracked
};

// ---------------------------------------------------------------------------
// Monitors
// ---------------------------------------------------------------------------

struct MartingaleConditionReport {
    double max_complementarity_violation = 0.0;
    bool pass = false;
};

/// max nodewise |lift (Y - psi)|. Zero means the discrete Skorohod condition
/// holds, so -sum (Y - psi) dA is identically zero and in particular a
/// nonincreasing G-martingale.
inline MartingaleConditionReport martingale_condition_check(const SolutionSurface& s, const Obstacle& psi,
                                                            double tol = 1e-12) {
    MartingaleConditionReport r;
    for (std::size_t k = 0; k < s.Y.size(); ++k) {
        const double t = s.lattice.t(static_cast<int>(k));
        for (std::size_t i = 0; i < s.Y[k].size(); ++i) {
            const double v = std::abs(s.lift[k][i] * (s.Y[k][i] - psi(t, s.lattice.x(i))));
            r.max_complementarity_violation = std::max(r.max_complementarity_violation, v);
        }
    }
    r.pass = r.max_complementarity_violation <= tol;
    return r;
}

inline MartingaleConditionReport martingale_condition_check(const ReflectedSurface& s, double tol = 1e-12) {
    return martingale_condition_check(s.base, s.obstacle, tol);
}

/// sup over nodes of (Y - psi)^-.
inline double obstacle_gap(const SolutionSurface& s, const Obstacle& psi) {
    double gap = 0.0;
    for (std::size_t k = 0; k < s.Y.size(); ++k) {
        const double t = s.lattice.t(static_cast<int>(k));
        for (std::size_t i = 0; i < s.Y[k].size(); ++i)
            gap = std::max(gap, psi(t, s.lattice.x(i)) - s.Y[k][i]);
    }
    return gap;
}

/// Norm proxies under the surface's own maximizing policy, each computed as a
/// path functional by backward induction with an augmented state.
inline NormReport apriori_norms(const SolutionSurface& s, double alpha = 2.0, int levels = 201) {
    if (!(alpha >= 2.0)) throw PreconditionError("apriori_norms: alpha must be >= 2");
    const auto n = static_cast<std::size_t>(s.lattice.n_steps);
    const double dt = s.lattice.dt();
    NormReport r;

    PathFunctional y;
    y.mode = Accumulator::running_max;
    y.levels = levels;
    for (const auto& slice : s.Y) {
        std::vector<double> row(slice.size());
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = std::pow(std::abs(slice[i]), alpha);
        y.contributions.push_back(std::move(row));
    }
    r.Y_sup_norm = path_functional_expectation(y, s.band, s.lattice, &s.policy);

    PathFunctional z;
    z.mode = Accumulator::running_sum;
    z.levels = levels;
    z.terminal_map = [alpha](double acc) { return std::pow(std::max(acc, 0.0), alpha / 2.0); };
    for (std::size_t k = 0; k <= n; ++k) {
        std::vector<double> row(s.Z[k].size(), 0.0);
        if (k < n)
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = s.Z[k][i] * s.Z[k][i] * dt;
        z.contributions.push_back(std::move(row));
    }
    r.Z_l2_norm = path_functional_expectation(z, s.band, s.lattice, &s.policy);

    PathFunctional a;
    a.mode = Accumulator::running_sum;
    a.levels = levels;
    a.terminal_map = [alpha](double acc) { return std::pow(std::abs(acc), alpha); };
    for (const auto& slice : s.lift) a.contributions.push_back(slice.values);
    r.A_terminal_norm = path_functional_expectation(a, s.band, s.lattice, &s.policy);
    return r;
}

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

/// Reflected G-BSDE with Lipschitz generator: v = one G-BSDE step,
/// Y = max(psi, v), lift = Y - v.
inline ReflectedSurface solve_reflected_lipschitz(const GeneratorSpec& spec, const Obstacle& psi,
                                                  const TerminalSpec& xi, const VolBand& band,
                                                  const Lattice& lattice,
                                                  const SolveOptions& options = {}) {
    if (!spec.modulus.is_lipschitz())
        throw PreconditionError("solve_reflected_lipschitz: modulus '" + spec.modulus.label +
                                "' is not Lipschitz");
    if (!xi.payoff || !psi.psi) throw PreconditionError("solve_reflected_lipschitz: missing data");
    lattice.require_cfl(band);
    if (options.check_generator) detail::require_generator_condition(spec, lattice);
    detail::SweepOptions opt;
    opt.constraint = detail::Constraint::reflect;
    opt.obstacle = psi.psi;
    opt.terminal_compat_tol = psi.terminal_compat_tol;
    return {detail::backward_sweep(spec, xi.payoff, band, lattice, opt), psi};
}

struct PicardOptions {
    double stop_tol = 1e-6;
    int max_iter = 50;
    bool keep_iterates = true;
    bool track_norms = false;
    double alpha = 2.0;
    bool check_generator = true;
};

struct PicardResult {
    ReflectedSurface surface;
    PicardRun run;
};

namespace detail {

inline double sup_distance(const std::vector<GridSlice>& a, const std::vector<GridSlice>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].size(); ++i) d = std::max(d, std::abs(a[k][i] - b[k][i]));
    return d;
}

inline std::vector<GridSlice> zero_levels(const Lattice& lattice) {
    std::vector<GridSlice> z(static_cast<std::size_t>(lattice.n_steps) + 1);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = GridSlice{k, std::vector<double>(lattice.size(), 0.0)};
    return z;
}

}  // namespace detail

/// Picard iteration Y^0 = 0; Y^n solves the reflected problem whose generator
/// has y frozen at Y^{n-1}. Stops when sup |Y^{n+1} - Y^n| <= stop_tol.
inline PicardResult solve_picard(const GeneratorSpec& spec, const Obstacle& psi, const TerminalSpec& xi,
                                 const VolBand& band, const Lattice& lattice,
                                 const PicardOptions& options = {}) {
    if (!xi.payoff || !psi.psi) throw PreconditionError("solve_picard: missing data");
    if (options.max_iter < 1) throw PreconditionError("solve_picard: max_iter must be >= 1");
    lattice.require_cfl(band);
    if (options.check_generator) detail::require_generator_condition(spec, lattice);

    detail::SweepOptions opt;
    opt.constraint = detail::Constraint::reflect;
    opt.obstacle = psi.psi;
    opt.terminal_compat_tol = psi.terminal_compat_tol;

    PicardRun run;
    auto record = [&](const SolutionSurface& s) {
        if (options.keep_iterates) run.iterates.push_back({s, psi});
        if (options.track_norms) run.norm_trace.push_back(apriori_norms(s, options.alpha));
    };

    const auto zero = detail::zero_levels(lattice);
    opt.frozen_y = &zero;
    SolutionSurface current = detail::backward_sweep(spec, xi.payoff, band, lattice, opt);
    record(current);
    for (int it = 1; it <= options.max_iter; ++it) {
        opt.frozen_y = &current.Y;
        SolutionSurface next = detail::backward_sweep(spec, xi.payoff, band, lattice, opt);
        const double delta = detail::sup_distance(next.Y, current.Y);
        run.deltas.push_back(delta);
        current = std::move(next);
        record(current);
        if (delta <= options.stop_tol) return {ReflectedSurface{std::move(current), psi}, std::move(run)};
    }
    std::ostringstream os;
    os << "solve_picard: no convergence after " << options.max_iter << " iterations (last delta "
       << run.deltas.back() << " > " << options.stop_tol << ")";
    throw ConvergenceFailure(os.str(), run.deltas);
}

inline std::vector<double> default_penalty_schedule() {
    std::vector<double> s;
    for (int p = 0; p <= 10; ++p) s.push_back(std::ldexp(1.0, p));
    return s;
}

struct PenaltyOptions {
    std::vector<double> schedule = default_penalty_schedule();
    bool track_norms = false;
    double alpha = 2.0;
    double monotone_tol = 1e-10;
    double final_gap_factor = 1e-2;  // final gap must be <= factor (1 + ||psi||_sup)
    bool check_generator = true;
};

struct PenalizedResult {
    ReflectedSurface surface;
    PenalizationRun run;
};

/// Penalization: for each rate n solve the G-BSDE with generator
/// f + n (y - psi)^-, record gaps and penalty statistics, then project the
/// last surface onto the obstacle with lift = max(0, psi - continuation).
inline PenalizedResult solve_penalized(const GeneratorSpec& spec, const Obstacle& psi, const TerminalSpec& xi,
                                       const VolBand& band, const Lattice& lattice,
                                       const PenaltyOptions& options = {}) {
    const auto& sched = options.schedule;
    if (sched.empty()) throw PreconditionError("solve_penalized: empty schedule");
    for (std::size_t m = 0; m < sched.size(); ++m) {
        if (!(sched[m] > 0.0) || (m > 0 && !(sched[m] > sched[m - 1])))
            throw PreconditionError("solve_penalized: schedule must be positive and strictly increasing");
    }
    if (!xi.payoff || !psi.psi) throw PreconditionError("solve_penalized: missing data");
    lattice.require_cfl(band);
    if (options.check_generator) detail::require_generator_condition(spec, lattice);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        const double x = lattice.x(i);
        if (psi(lattice.horizon, x) > xi.payoff(x) + psi.terminal_compat_tol)
            throw PreconditionError("solve_penalized: obstacle exceeds terminal value");
    }

    const std::size_t m_count = sched.size();
    PenalizationRun run;
    run.schedule = sched;
    run.surfaces.resize(m_count);
    std::vector<std::vector<GridSlice>> continuation(m_count);
    detail::parallel_for(static_cast<std::ptrdiff_t>(m_count), [&](std::ptrdiff_t mm) {
        const auto m = static_cast<std::size_t>(mm);
        detail::SweepOptions opt;
        opt.constraint = detail::Constraint::penalize;
        opt.obstacle = psi.psi;
        opt.penalty_rate = sched[m];
        opt.continuation = &continuation[m];
        run.surfaces[m] = detail::backward_sweep(spec, xi.payoff, band, lattice, opt);
    }, 2);

    const double psi_norm = psi.sup_norm(lattice);
    for (std::size_t m = 0; m < m_count; ++m) {
        const auto& s = run.surfaces[m];
        run.gaps.push_back(obstacle_gap(s, psi));
        std::vector<std::vector<double>> steps;
        for (std::size_t k = 0; k + 1 < s.lift.size(); ++k) steps.push_back(s.lift[k].values);
        run.penalty_mass.push_back(detail::policy_path_sum(steps, s.policy, lattice));
        std::vector<std::vector<double>> sq(steps.size(), std::vector<double>(lattice.size()));
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const double t = lattice.t(static_cast<int>(k));
            for (std::size_t i = 0; i < lattice.size(); ++i) {
                const double below = std::max(psi(t, lattice.x(i)) - s.Y[k][i], 0.0);
                sq[k][i] = sched[m] * below * below * lattice.dt();
            }
        }
        run.residuals.push_back(detail::policy_path_sum(sq, s.policy, lattice));
        if (options.track_norms) run.norms.push_back(apriori_norms(s, options.alpha));
        if (m > 0 && run.gaps[m] > run.gaps[m - 1] + options.monotone_tol * (1.0 + psi_norm)) {
            std::ostringstream os;
            os << "solve_penalized: gap increased from " << run.gaps[m - 1] << " (n=" << sched[m - 1]
               << ") to " << run.gaps[m] << " (n=" << sched[m] << ")";
            throw NumericalFailure(os.str());
        }
    }
    const double limit = options.final_gap_factor * (1.0 + psi_norm);
    if (run.gaps.back() > limit) {
        std::ostringstream os;
        os << "solve_penalized: final gap " << run.gaps.back() << " exceeds " << limit << " at n="
           << sched.back();
        throw ConvergenceFailure(os.str(), run.gaps);
    }

    // Final reflected sweep over the last penalized surface.
    const auto& last = run.surfaces.back();
    const auto& cont = continuation.back();
    SolutionSurface out = last;
    out.penalty_rate.reset();
    const std::size_t n = static_cast<std::size_t>(lattice.n_steps);
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = lattice.t(static_cast<int>(k));
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            const double p = psi(t, lattice.x(i));
            const double v = cont[k][i];
            if (v < p) {
                out.Y[k][i] = p;
                out.lift[k][i] = p - v;
            } else {
                out.Y[k][i] = last.Y[k][i];
                out.lift[k][i] = 0.0;
            }
        }
        out.Z[k] = detail::derivative_slice(out.Y[k], lattice.dx);
    }
    return {ReflectedSurface{std::move(out), psi}, std::move(run)};
}

/// max over consecutive schedule entries and nodes of Y^{n_prev} - Y^{n_next};
/// nonpositive when the penalized family is nodewise nondecreasing in n.
inline double penalty_monotonicity_defect(const PenalizationRun& run) {
    double worst = 0.0;
    for (std::size_t m = 1; m < run.surfaces.size(); ++m) {
        const auto& a = run.surfaces[m - 1].Y;
        const auto& b = run.surfaces[m].Y;
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t i = 0; i < a[k].size(); ++i) worst = std::max(worst, a[k][i] - b[k][i]);
    }
    return worst;
}

struct TrendReport {
    double spread = 1.0;  // max / min
    double slope = 0.0;   // least-squares slope of log value against log abscissa
    bool within_band = false;
    bool flat = false;
    bool pass = false;
};

/// Declared-threshold boundedness proxy for a norm sequence: max/min below
/// band_factor and fitted log-log slope at most slope_allowance. An all-zero
/// sequence passes; a sequence mixing zeros and positive values has infinite
/// spread.
inline TrendReport trend_check(const std::vector<double>& abscissa, const std::vector<double>& values,
                               double band_factor = 10.0, double slope_allowance = 0.1) {
    if (abscissa.size() != values.size() || values.empty())
        throw PreconditionError("trend_check: need matching nonempty sequences");
    TrendReport r;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (!(*lo >= 0.0)) throw PreconditionError("trend_check: norms must be nonnegative");
    if (*hi == 0.0) {
        r.within_band = r.flat = r.pass = true;
        return r;
    }
    r.spread = *lo > 0.0 ? *hi / *lo : HUGE_VAL;
    r.within_band = r.spread <= band_factor;
    if (*lo > 0.0 && values.size() > 1) {
        double mx = 0.0, my = 0.0;
        const double m = static_cast<double>(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            mx += std::log(abscissa[i]) / m;
            my += std::log(values[i]) / m;
        }
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double dx = std::log(abscissa[i]) - mx;
            sxy += dx * (std::log(values[i]) - my);
            sxx += dx * dx;
        }
        r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    } else if (*lo == 0.0) {
        r.slope = HUGE_VAL;
    }
    r.flat = r.slope <= slope_allowance;
    r.pass = r.within_band && r.flat;
    return r;
}

// ---------------------------------------------------------------------------
// Cross-checks
// ---------------------------------------------------------------------------

enum class Method { picard, penalized, lipschitz };

inline Method parse_method(const std::string& name) {
    if (name == "picard") return Method::picard;
    if (name == "penalized") return Method::penalized;
    if (name == "lipschitz") return Method::lipschitz;
    throw PreconditionError("unknown method '" + name + "' (expected picard, penalized or lipschitz)");
}

inline ReflectedSurface solve_reflected(Method method, const GeneratorSpec& spec, const Obstacle& psi,
                                        const TerminalSpec& xi, const VolBand& band, const Lattice& lattice,
                                        const PicardOptions& picard = {}, const PenaltyOptions& penalty = {}) {
    switch (method) {
        case Method::picard: {
            PicardOptions p = picard;
            p.keep_iterates = false;
            return solve_picard(spec, psi, xi, band, lattice, p).surface;
        }
        case Method::penalized: return solve_penalized(spec, psi, xi, band, lattice, penalty).surface;
        default: return solve_reflected_lipschitz(spec, psi, xi, band, lattice);
    }
}

struct UniquenessReport {
    double sup_Y_diff = 0.0;
    double Z_l2_diff = 0.0;
    bool pass = false;
};

struct UniquenessOptions {
    double tol = 1e-2;
    PicardOptions picard{};
    PenaltyOptions penalty{};
};

/// Runs both constructions on identical data and compares Y (sup norm) and
/// Z (root of the expected sum of squared differences times dt under the
/// Picard surface's policy).
inline UniquenessReport uniqueness_crosscheck(const GeneratorSpec& spec, const Obstacle& psi,
                                              const TerminalSpec& xi, const VolBand& band,
                                              const Lattice& lattice, const UniquenessOptions& options = {}) {
    PicardOptions po = options.picard;
    po.keep_iterates = false;
    const auto pic = solve_picard(spec, psi, xi, band, lattice, po);
    const auto pen = solve_penalized(spec, psi, xi, band, lattice, options.penalty);
    UniquenessReport r;
    r.sup_Y_diff = detail::sup_distance(pic.surface.base.Y, pen.surface.base.Y);
    const auto n = static_cast<std::size_t>(lattice.n_steps);
    std::vector<std::vector<double>> sq(n, std::vector<double>(lattice.size()));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            const double d = pic.surface.base.Z[k][i] - pen.surface.base.Z[k][i];
            sq[k][i] = d * d * lattice.dt();
        }
    r.Z_l2_diff = std::sqrt(std::max(0.0, detail::policy_path_sum(sq, pic.surface.base.policy, lattice)));
    r.pass = r.sup_Y_diff <= options.tol;
    return r;
}

struct StabilityReport {
    std::vector<double> eps;
    std::vector<double> sup_diff;  // sup |Y(xi + eps) - Y(xi)|
    std::vector<double> ratios;    // sup_diff / eps (0 when eps == 0)
    bool bounded = false;
    bool vanishing = false;
    bool pass = false;
};

/// Perturbs the terminal value by each eps and reports sup |Y-hat| / eps.
inline StabilityReport stability_check(const GeneratorSpec& spec, const Obstacle& psi, const TerminalSpec& xi,
                                       const VolBand& band, const Lattice& lattice,
                                       const std::vector<double>& eps_list, Method method = Method::picard,
                                       double ratio_bound = 10.0) {
    if (eps_list.empty()) throw PreconditionError("stability_check: empty perturbation list");
    for (double e : eps_list)
        if (!(e >= 0.0)) throw PreconditionError("stability_check: perturbations must be nonnegative");
    const auto base = solve_reflected(method, spec, psi, xi, band, lattice);
    StabilityReport r;
    r.eps = eps_list;
    std::sort(r.eps.begin(), r.eps.end(), std::greater<>());
    for (double e : r.eps) {
        TerminalSpec shifted{[p = xi.payoff, e](double x) { return p(x) + e; }};
        const auto s = solve_reflected(method, spec, psi, shifted, band, lattice);
        const double d = detail::sup_distance(s.base.Y, base.base.Y);
        r.sup_diff.push_back(d);
        r.ratios.push_back(e > 0.0 ? d / e : 0.0);
    }
    r.bounded = std::all_of(r.ratios.begin(), r.ratios.end(), [&](double q) { return q <= ratio_bound; });
    r.vanishing = true;
    for (std::size_t m = 1; m < r.sup_diff.size(); ++m)
        r.vanishing = r.vanishing && r.sup_diff[m] <= r.sup_diff[m - 1] + 1e-12;
    r.pass = r.bounded && r.vanishing;
    return r;
}

inline ComparisonReport comparison_reflected(const ReflectedSurface& s1, const ReflectedSurface& s2, double tol) {
    return comparison_gbsde(s1.base, s2.base, tol);
}

}  // namespace sublin
