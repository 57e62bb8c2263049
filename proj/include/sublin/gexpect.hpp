#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "sublin/errors.hpp"
#include "sublin/lattice.hpp"
#include "sublin/parallel.hpp"

namespace sublin {

using Payoff = std::function<double(double)>;

/// G(a) = 1/2 (sigma_high^2 a^+ - sigma_low^2 a^-).
inline double g_value(double a, const VolBand& band) {
    return 0.5 * (band.var_high() * std::max(a, 0.0) - band.var_low() * std::max(-a, 0.0));
}

/// Variance attaining sup_s s*a over the band; ties go to sigma_high^2.
inline double maximizing_variance(double a, const VolBand& band) {
    return a < 0.0 ? band.var_low() : band.var_high();
}

namespace detail {

// Central second difference scaled by 1/dx^2; zero at the two boundary nodes
// (ghost node by linear extrapolation of the two outermost values).
inline double second_difference(const std::vector<double>& u, std::size_t i, double inv_dx2) {
    if (i == 0 || i + 1 >= u.size()) return 0.0;
    return (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
}

// Central first difference, one-sided at the boundary nodes.
inline double first_difference(const std::vector<double>& u, std::size_t i, double dx) {
    const std::size_t n = u.size();
    if (n < 2) return 0.0;
    if (i == 0) return (u[1] - u[0]) / dx;
    if (i + 1 == n) return (u[n - 1] - u[n - 2]) / dx;
    return (u[i + 1] - u[i - 1]) / (2.0 * dx);
}

inline GridSlice terminal_slice(const Payoff& payoff, const Lattice& lattice) {
    GridSlice s{static_cast<std::size_t>(lattice.n_steps), std::vector<double>(lattice.size())};
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = payoff(lattice.x(i));
    require_finite(s, "terminal payoff");
    return s;
}

}  // namespace detail

struct StepResult {
    GridSlice slice;
    std::vector<double> policy;  // maximizing variance per node
};

/// One explicit backward step of d_t u + G(d_xx u) = 0.
inline StepResult step_backward(const GridSlice& next, const VolBand& band, const Lattice& lattice) {
    lattice.require_cfl(band);
    if (next.size() != lattice.size())
        throw PreconditionError("step_backward: slice length does not match the lattice");
    if (next.time_index == 0)
        throw PreconditionError("step_backward: slice is already at time index 0");
    const double dt = lattice.dt();
    const double inv_dx2 = 1.0 / (lattice.dx * lattice.dx);
    StepResult out{GridSlice{next.time_index - 1, std::vector<double>(next.size())},
                   std::vector<double>(next.size())};
    detail::parallel_for(static_cast<std::ptrdiff_t>(next.size()), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double a = detail::second_difference(next.values, i, inv_dx2);
        out.slice[i] = next[i] + dt * g_value(a, band);
        out.policy[i] = maximizing_variance(a, band);
    });
    return out;
}

/// Full backward surface of Ê_t[payoff(B_T)] on the lattice.
struct ExpectationSurface {
    std::vector<GridSlice> levels;  // levels[k] holds u(t_k, .)
    ScenarioPolicy policy;
    std::size_t origin = 0;

    double value() const { return levels.front()[origin]; }
};

inline ExpectationSurface g_expectation_surface(const Payoff& payoff, const VolBand& band,
                                                const Lattice& lattice) {
    lattice.require_cfl(band);
    const auto n = static_cast<std::size_t>(lattice.n_steps);
    ExpectationSurface s;
    s.origin = lattice.origin();
    s.levels.resize(n + 1);
    s.policy.variance.resize(n);
    s.levels[n] = detail::terminal_slice(payoff, lattice);
    for (std::size_t k = n; k-- > 0;) {
        auto step = step_backward(s.levels[k + 1], band, lattice);
        s.levels[k] = std::move(step.slice);
        s.policy.variance[k] = std::move(step.policy);
    }
    require_finite(s.levels.front(), "g_expectation");
    return s;
}

/// Ê[payoff(B_T)] = u(0, 0).
inline double g_expectation(const Payoff& payoff, const VolBand& band, const Lattice& lattice) {
    return g_expectation_surface(payoff, band, lattice).value();
}

/// Exhaustive sup over per-node variance choices on the recombining tree,
/// evaluated by plain recursion. Exponential; refuses more than 5 steps.
inline double brute_force_expectation(const Payoff& payoff, const VolBand& band,
                                      const Lattice& lattice) {
    constexpr int kMaxSteps = 5;
    if (lattice.n_steps > kMaxSteps) {
        std::ostringstream os;
        os << "brute_force_expectation: n_steps=" << lattice.n_steps << " exceeds " << kMaxSteps;
        throw PreconditionError(os.str());
    }
    lattice.require_cfl(band);
    const double dt = lattice.dt();
    const double dx2 = lattice.dx * lattice.dx;
    const int last = static_cast<int>(lattice.size()) - 1;
    const double choices[2] = {band.var_low(), band.var_high()};

    std::function<double(int, int)> value = [&](int k, int i) -> double {
        if (k == lattice.n_steps) return payoff(lattice.x(static_cast<std::size_t>(i)));
        if (i == 0 || i == last) return value(k + 1, i);
        const double up = value(k + 1, i + 1);
        const double mid = value(k + 1, i);
        const double down = value(k + 1, i - 1);
        double best = -HUGE_VAL;
        for (double s : choices) {
            const double p = s * dt / dx2;
            best = std::max(best, 0.5 * p * up + (1.0 - p) * mid + 0.5 * p * down);
        }
        return best;
    };
    return value(0, static_cast<int>(lattice.origin()));
}

}  // namespace sublin
