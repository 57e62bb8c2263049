#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "sublin/errors.hpp"
#include "sublin/gexpect.hpp"
#include "sublin/lattice.hpp"
#include "sublin/moduli.hpp"
#include "sublin/parallel.hpp"

namespace sublin {

/// Terminal value xi = payoff(B_T).
struct TerminalSpec {
    Payoff payoff;
};

/// Y, Z and the per-node reflection/penalty increments over the lattice.
///
/// Z[k] is the discrete space derivative of Y[k]. lift[k] is the increment
/// added at level k on top of the one-step continuation value; it is zero for
/// plain G-BSDEs. drive holds the argument b = d_xx Y / 2 + g of the one-step
/// sup, so scenario-relative K statistics can be recovered afterwards.
struct SolutionSurface {
    Lattice lattice;
    VolBand band;
    std::vector<GridSlice> Y, Z, lift;
    ScenarioPolicy policy;
    std::vector<std::vector<double>> drive;
    std::optional<double> penalty_rate;

    double y0() const { return Y.front()[lattice.origin()]; }
};

namespace detail {

enum class Constraint { none, reflect, penalize };

struct SweepOptions {
    Constraint constraint = Constraint::none;
    std::function<double(double, double)> obstacle;
    double penalty_rate = 0.0;
    // Picard: evaluate f, g at this surface's Y[k+1] instead of the current one.
    const std::vector<GridSlice>* frozen_y = nullptr;
    // Filled with the unconstrained continuation value per level when set.
    std::vector<GridSlice>* continuation = nullptr;
    double terminal_compat_tol = 1e-12;
};

inline GridSlice derivative_slice(const GridSlice& y, double dx) {
    GridSlice z{y.time_index, std::vector<double>(y.size())};
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = first_difference(y.values, i, dx);
    return z;
}

// Explicit backward recursion
//   v = u + dt f(t_k, x, u, z) + 2 dt G(d_xx u / 2 + g(t_k, x, u, z)),
// u = Y[k+1], z its central difference, followed by the constraint.
inline SolutionSurface backward_sweep(const GeneratorSpec& spec, const Payoff& terminal,
                                      const VolBand& band, const Lattice& lattice,
                                      const SweepOptions& opt) {
    lattice.require_cfl(band);
    const auto n = static_cast<std::size_t>(lattice.n_steps);
    const std::size_t nodes = lattice.size();
    const double dt = lattice.dt();
    const double inv_dx2 = 1.0 / (lattice.dx * lattice.dx);
    const bool constrained = opt.constraint != Constraint::none;
    if (constrained && !opt.obstacle) throw PreconditionError("constrained sweep needs an obstacle");
    if (opt.frozen_y && opt.frozen_y->size() != n + 1)
        throw PreconditionError("frozen surface does not match the lattice");

    SolutionSurface s{lattice, band, {}, {}, {}, {}, {}, std::nullopt};
    s.Y.resize(n + 1);
    s.Z.resize(n + 1);
    s.lift.resize(n + 1);
    s.policy.variance.assign(n, std::vector<double>(nodes));
    s.drive.assign(n, std::vector<double>(nodes));
    if (opt.constraint == Constraint::penalize) s.penalty_rate = opt.penalty_rate;
    if (opt.continuation) opt.continuation->assign(n + 1, GridSlice{});

    GridSlice last = terminal_slice(terminal, lattice);
    s.lift[n] = GridSlice{n, std::vector<double>(nodes, 0.0)};
    if (opt.continuation) (*opt.continuation)[n] = last;
    if (opt.constraint == Constraint::reflect) {
        const double T = lattice.horizon;
        for (std::size_t i = 0; i < nodes; ++i) {
            const double psi = opt.obstacle(T, lattice.x(i));
            if (psi > last[i] + opt.terminal_compat_tol) {
                std::ostringstream os;
                os << "obstacle exceeds terminal value at x=" << lattice.x(i) << ": psi(T,x)=" << psi
                   << " > xi=" << last[i];
                throw PreconditionError(os.str());
            }
            if (psi > last[i]) {
                s.lift[n][i] = psi - last[i];
                last[i] = psi;
            }
        }
    }
    s.Y[n] = std::move(last);

    for (std::size_t k = n; k-- > 0;) {
        const std::vector<double>& u = s.Y[k + 1].values;
        const std::vector<double>& y_arg = opt.frozen_y ? (*opt.frozen_y)[k + 1].values : u;
        const double t = lattice.t(static_cast<int>(k));
        GridSlice out{k, std::vector<double>(nodes)};
        GridSlice lift{k, std::vector<double>(nodes, 0.0)};
        GridSlice cont{k, std::vector<double>(nodes)};
        auto& pol = s.policy.variance[k];
        auto& drv = s.drive[k];
        parallel_for(static_cast<std::ptrdiff_t>(nodes), [&](std::ptrdiff_t ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double x = lattice.x(i);
            const double z = first_difference(u, i, lattice.dx);
            const double fv = spec.f(t, x, y_arg[i], z);
            const double gv = spec.g(t, x, y_arg[i], z);
            const double b = 0.5 * second_difference(u, i, inv_dx2) + gv;
            const double v = u[i] + dt * fv + 2.0 * dt * g_value(b, band);
            drv[i] = b;
            pol[i] = maximizing_variance(b, band);
            cont[i] = v;
            double y = v;
            if (opt.constraint == Constraint::reflect) {
                y = std::max(opt.obstacle(t, x), v);
            } else if (opt.constraint == Constraint::penalize) {
                // n (y - psi)^- taken implicitly at the new level, solved in closed form.
                const double psi = opt.obstacle(t, x);
                if (v < psi) {
                    const double c = dt * opt.penalty_rate;
                    y = (v + c * psi) / (1.0 + c);
                }
            }
            out[i] = y;
            lift[i] = y - v;
        });
        for (std::size_t i = 0; i < nodes; ++i) {
            if (!std::isfinite(out[i])) {
                std::ostringstream os;
                os << "non-finite solution value at time_index=" << k << " node=" << i
                   << " (x=" << lattice.x(i) << ")";
                throw NumericalFailure(os.str());
            }
        }
        s.Y[k] = std::move(out);
        s.lift[k] = std::move(lift);
        if (opt.continuation) (*opt.continuation)[k] = std::move(cont);
    }
    for (std::size_t k = 0; k <= n; ++k) s.Z[k] = derivative_slice(s.Y[k], lattice.dx);
    return s;
}

inline CloudRanges default_cloud_ranges(const Lattice& lattice) {
    CloudRanges rg;
    rg.t_max = lattice.horizon;
    rg.x_lo = lattice.x(0);
    rg.x_hi = lattice.x(lattice.size() - 1);
    rg.y_lo = -100.0;
    rg.y_hi = 100.0;
    rg.z_lo = -100.0;
    rg.z_hi = 100.0;
    return rg;
}

inline void require_generator_condition(const GeneratorSpec& spec, const Lattice& lattice) {
    const auto report = check_H1(spec, make_sample_cloud(default_cloud_ranges(lattice)));
    if (!report.pass) {
        std::ostringstream os;
        os << "generator violates its declared continuity condition (modulus '" << spec.modulus.label
           << "', L=" << spec.z_lipschitz << "): max violation " << report.max_violation;
        throw PreconditionError(os.str());
    }
}

// Linear expectation of sum_k c_k(i_k) over k = 0..n-1 under fixed variances.
inline double policy_path_sum(const std::vector<std::vector<double>>& increments,
                              const ScenarioPolicy& policy, const Lattice& lattice) {
    const std::size_t nodes = lattice.size();
    const double ratio = lattice.dt() / (lattice.dx * lattice.dx);
    std::vector<double> v(nodes, 0.0), nv(nodes);
    for (std::size_t k = increments.size(); k-- > 0;) {
        for (std::size_t i = 0; i < nodes; ++i) {
            double e = v[i];
            if (i > 0 && i + 1 < nodes) {
                const double p = policy.at(static_cast<int>(k), i) * ratio;
                e = v[i] + 0.5 * p * (v[i + 1] - 2.0 * v[i] + v[i - 1]);
            }
            nv[i] = e + increments[k][i];
        }
        std::swap(v, nv);
    }
    return v[lattice.origin()];
}

}  // namespace detail

struct SolveOptions {
    bool check_generator = true;
};

/// Non-reflected G-BSDE with terminal payoff(B_T) by backward lattice induction.
inline SolutionSurface solve_gbsde(const GeneratorSpec& spec, const TerminalSpec& xi,
                                   const VolBand& band, const Lattice& lattice,
                                   const SolveOptions& options = {}) {
    if (!xi.payoff) throw PreconditionError("solve_gbsde: missing terminal payoff");
    lattice.require_cfl(band);
    if (options.check_generator) detail::require_generator_condition(spec, lattice);
    return detail::backward_sweep(spec, xi.payoff, band, lattice, {});
}

struct ComparisonReport {
    double max_excess = 0.0;  // max over nodes of Y1 - Y2
    bool pass = false;
};

inline ComparisonReport comparison_gbsde(const SolutionSurface& s1, const SolutionSurface& s2,
                                         double tol) {
    if (!s1.lattice.same_grid(s2.lattice) || s1.Y.size() != s2.Y.size())
        throw PreconditionError("comparison: surfaces live on different lattices");
    ComparisonReport r{-HUGE_VAL, false};
    for (std::size_t k = 0; k < s1.Y.size(); ++k)
        for (std::size_t i = 0; i < s1.Y[k].size(); ++i)
            r.max_excess = std::max(r.max_excess, s1.Y[k][i] - s2.Y[k][i]);
    r.pass = r.max_excess <= tol;
    return r;
}

/// Single reference measure for K statistics: the surface's own maximizing
/// policy, or a constant volatility inside the band.
struct KScenario {
    bool use_optimizer = true;
    double sigma = 0.0;

    static KScenario optimizer() { return {true, 0.0}; }
    static KScenario constant(double sigma) { return {false, sigma}; }
};

struct KStats {
    double K_terminal_mean = 0.0;
    double max_increment = 0.0;
    bool K_monotone_pass = false;
};

/// Under one scenario measure the Y-recursion leaves a residual
///   dK_k = dt (s b - 2 G(b)) <= 0
/// at each node; it is the increment of the nonincreasing G-martingale K seen
/// by that measure. Reports E_s[K_T] and whether every increment is <= tol.
inline KStats k_stats(const SolutionSurface& surface, const KScenario& scenario, double tol = 1e-12) {
    const VolBand& band = surface.band;
    const Lattice& lattice = surface.lattice;
    const auto n = static_cast<std::size_t>(lattice.n_steps);
    if (surface.drive.size() != n) throw PreconditionError("k_stats: surface lacks drive data");
    ScenarioPolicy measure = surface.policy;
    if (!scenario.use_optimizer) {
        const double s = scenario.sigma * scenario.sigma;
        if (!band.contains_variance(s)) {
            std::ostringstream os;
            os << "k_stats: scenario volatility " << scenario.sigma << " outside band ["
               << band.sigma_low << ", " << band.sigma_high << "]";
            throw PreconditionError(os.str());
        }
        for (auto& row : measure.variance) std::fill(row.begin(), row.end(), s);
    }
    const double dt = lattice.dt();
    std::vector<std::vector<double>> inc(n, std::vector<double>(lattice.size()));
    KStats st;
    st.max_increment = -HUGE_VAL;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            const double b = surface.drive[k][i];
            inc[k][i] = dt * (measure.variance[k][i] * b - 2.0 * g_value(b, band));
            st.max_increment = std::max(st.max_increment, inc[k][i]);
        }
    st.K_terminal_mean = detail::policy_path_sum(inc, measure, lattice);
    st.K_monotone_pass = st.max_increment <= tol;
    return st;
}

}  // namespace sublin
