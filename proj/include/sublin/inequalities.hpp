#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "sublin/errors.hpp"
#include "sublin/gexpect.hpp"
#include "sublin/path_functional.hpp"
#include "sublin/sampling.hpp"

namespace sublin {

// ---------------------------------------------------------------------------
// Jensen
// ---------------------------------------------------------------------------

struct JensenReport {
    double lhs = 0.0;  // Ê[h(X)]
    double rhs = 0.0;  // h(Ê[X])
    bool h_nondecreasing = false;
    bool pass = false;
};

/// Ê[h(X)] <= h(Ê[X]) for X = payoff(B_T) and concave h.
///
/// Concavity of h is sampled on the range of X over the terminal nodes and a
/// failure is a PreconditionError. Monotonicity is only reported.
inline JensenReport jensen_check(const std::function<double(double)>& h, const Payoff& payoff,
                                 const VolBand& band, const Lattice& lattice, double tol = 1e-9) {
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        const double v = payoff(lattice.x(i));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const auto grid = detail::linear_grid(lo, hi, 1001);
    const double defect = detail::midpoint_concavity_defect(h, grid);
    if (defect > 1e-9) {
        std::ostringstream os;
        os << "jensen_check: h fails midpoint concavity sampling (defect " << defect << ")";
        throw PreconditionError(os.str());
    }
    JensenReport r;
    r.h_nondecreasing = detail::monotone_defect(h, grid) <= 1e-12;
    r.lhs = g_expectation([&](double x) { return h(payoff(x)); }, band, lattice);
    r.rhs = h(g_expectation(payoff, band, lattice));
    r.pass = r.lhs <= r.rhs + tol * (1.0 + std::abs(r.rhs));
    return r;
}

// ---------------------------------------------------------------------------
// Doob maximal inequality
// ---------------------------------------------------------------------------

struct SeriesValue {
    double value = 0.0;
    long terms = 0;
    double tail_bound = 0.0;
};

/// sum_{i>=1} i^{-s} for s > 1: partial sum up to N plus the integral tail with
/// Euler-Maclaurin end corrections; N grows until the remainder bound is below
/// tail_tol.
inline SeriesValue power_series_constant(double s, double tail_tol = 1e-10) {
    if (!(s > 1.0)) {
        std::ostringstream os;
        os << "series sum i^{-s} diverges for s=" << s << " <= 1";
        throw PreconditionError(os.str());
    }
    long n = 16;
    auto remainder = [s](double N) { return s * (s + 1.0) * (s + 2.0) * std::pow(N, -s - 3.0) / 720.0; };
    while (remainder(static_cast<double>(n)) > tail_tol) {
        n *= 2;
        if (n > (1L << 40)) throw PreconditionError("series tail tolerance unreachable");
    }
    double partial = 0.0;
    for (long i = n; i >= 1; --i) partial += std::pow(static_cast<double>(i), -s);
    const double N = static_cast<double>(n);
    const double tail = std::pow(N, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(N, -s) +
                        s * std::pow(N, -s - 1.0) / 12.0;
    return {partial + tail, n, remainder(N)};
}

struct DoobReport {
    double lhs = 0.0;  // Ê[sup_t Ê_t[|xi|^alpha]]
    double rhs = 0.0;
    double norm = 0.0;  // ||xi||_{L^{alpha+delta}}
    double series = 0.0;
    bool pass = false;
};

/// Maximal inequality under G-expectation for xi = payoff(B_T).
inline DoobReport doob_check(const Payoff& payoff, double alpha, double delta, double gamma,
                             const VolBand& band, const Lattice& lattice,
                             double tail_tol = 1e-10, int accumulator_levels = 201) {
    if (!(alpha >= 1.0) || !(delta > 0.0))
        throw PreconditionError("doob_check: need alpha >= 1 and delta > 0");
    const double ratio = (alpha + delta) / alpha;
    if (!(gamma > 1.0 && gamma < ratio && gamma <= 2.0)) {
        std::ostringstream os;
        os << "doob_check: gamma=" << gamma << " outside 1 < gamma < (alpha+delta)/alpha=" << ratio
           << ", gamma <= 2";
        throw PreconditionError(os.str());
    }
    const auto series = power_series_constant(ratio / gamma, tail_tol);

    DoobReport r;
    r.series = series.value;
    const double p = alpha + delta;
    const double moment = g_expectation([&](double x) { return std::pow(std::abs(payoff(x)), p); },
                                        band, lattice);
    r.norm = std::pow(std::max(moment, 0.0), 1.0 / p);
    const double gamma_star = gamma / (gamma - 1.0);
    r.rhs = gamma_star * (std::pow(r.norm, alpha) +
                          std::pow(14.0, 1.0 / gamma) * series.value * std::pow(r.norm, p / gamma));

    auto conditional = g_expectation_surface(
        [&](double x) { return std::pow(std::abs(payoff(x)), alpha); }, band, lattice);
    PathFunctional pf;
    pf.mode = Accumulator::running_max;
    pf.levels = accumulator_levels;
    pf.contributions.reserve(conditional.levels.size());
    for (auto& lvl : conditional.levels) pf.contributions.push_back(std::move(lvl.values));
    r.lhs = path_functional_expectation(pf, band, lattice);
    r.pass = r.lhs <= r.rhs;
    return r;
}

// ---------------------------------------------------------------------------
// BDG, p = 2
// ---------------------------------------------------------------------------

/// Deterministic step function: values[m] on [breaks[m], breaks[m+1]).
struct StepIntegrand {
    std::vector<double> breaks;
    std::vector<double> values;

    static StepIntegrand constant(double v, double horizon) { return {{0.0, horizon}, {v}}; }

    void validate(double horizon) const {
        if (breaks.size() != values.size() + 1 || values.empty())
            throw PreconditionError("step integrand: need breaks.size() == values.size() + 1");
        if (breaks.front() > 0.0 || breaks.back() < horizon)
            throw PreconditionError("step integrand: breaks must cover [0, T]");
        for (std::size_t m = 0; m + 1 < breaks.size(); ++m)
            if (!(breaks[m] < breaks[m + 1]))
                throw PreconditionError("step integrand: breaks must be strictly increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw PreconditionError("step integrand: non-finite value");
    }

    /// Integral of eta^2 over [a, b].
    double square_integral(double a, double b) const {
        double acc = 0.0;
        for (std::size_t m = 0; m < values.size(); ++m) {
            const double lo = std::max(a, breaks[m]), hi = std::min(b, breaks[m + 1]);
            if (hi > lo) acc += values[m] * values[m] * (hi - lo);
        }
        return acc;
    }
};

struct BdgReport {
    double value = 0.0;  // Ê[(int eta dB)^2]
    double lower = 0.0;  // sigma_low^2 int eta^2
    double upper = 0.0;  // sigma_high^2 int eta^2
    bool pass = false;
};

/// Lattice value of Ê[(int_0^T eta dB)^2] for deterministic eta, computed by
/// backward induction for the generator G(eta_k^2 d_xx) with eta_k^2 the
/// step average of eta^2.
inline BdgReport bdg_check(const StepIntegrand& eta, const VolBand& band, const Lattice& lattice,
                           double tol = 1e-9) {
    eta.validate(lattice.horizon);
    lattice.require_cfl(band);
    const auto n = static_cast<std::size_t>(lattice.n_steps);
    const double dt = lattice.dt();
    const double inv_dx2 = 1.0 / (lattice.dx * lattice.dx);
    std::vector<double> u(lattice.size()), nu(lattice.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = lattice.x(i) * lattice.x(i);
    for (std::size_t k = n; k-- > 0;) {
        const double weight = eta.square_integral(lattice.t(static_cast<int>(k)),
                                                  lattice.t(static_cast<int>(k) + 1)) / dt;
        if (weight * band.var_high() * dt > lattice.dx * lattice.dx * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "bdg_check: CFL violated at step " << k << ": eta^2*sigma_high^2*dt > dx^2";
            throw NumericalFailure(os.str());
        }
        for (std::size_t i = 0; i < u.size(); ++i)
            nu[i] = u[i] + dt * g_value(weight * detail::second_difference(u, i, inv_dx2), band);
        std::swap(u, nu);
    }
    BdgReport r;
    r.value = u[lattice.origin()];
    const double energy = eta.square_integral(0.0, lattice.horizon);
    r.lower = band.var_low() * energy;
    r.upper = band.var_high() * energy;
    const double slack = tol * (1.0 + r.upper);
    r.pass = std::isfinite(r.value) && r.lower - slack <= r.value && r.value <= r.upper + slack;
    return r;
}

}  // namespace sublin
