#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "sublin/errors.hpp"

namespace sublin {

/// Volatility uncertainty interval [sigma_low, sigma_high] defining G.
struct VolBand {
    double sigma_low = 1.0;
    double sigma_high = 1.0;

    static VolBand make(double sigma_low, double sigma_high) {
        if (!(sigma_low > 0.0) || !(sigma_low <= sigma_high) || !std::isfinite(sigma_high)) {
            std::ostringstream os;
            os << "invalid volatility band: need 0 < sigma_low <= sigma_high, got ["
               << sigma_low << ", " << sigma_high << "]";
            throw PreconditionError(os.str());
        }
        return VolBand{sigma_low, sigma_high};
    }

    double var_low() const { return sigma_low * sigma_low; }
    double var_high() const { return sigma_high * sigma_high; }
    bool collapsed() const { return sigma_low == sigma_high; }
    bool contains_variance(double v) const { return v >= var_low() && v <= var_high(); }
};

/// Space-time grid on [0, T] x [-half_width*dx, half_width*dx].
///
/// Construction checks the CFL inequality sigma_bound^2 dt <= dx^2 and the
/// truncation rule half_width*dx >= coverage_factor*sigma_bound*sqrt(T).
/// Node index i in [0, 2*half_width] sits at x = (i - half_width)*dx.
struct Lattice {
    double horizon = 1.0;
    int n_steps = 1;
    double dx = 1.0;
    int half_width = 1;
    double sigma_bound = 1.0;  // largest volatility this grid is stable for
    double coverage_factor = 6.0;

    static Lattice make(double horizon, int n_steps, double dx, int half_width,
                        const VolBand& band, double coverage_factor = 6.0) {
        if (!(horizon > 0.0) || n_steps < 1 || !(dx > 0.0) || half_width < 1 ||
            !(coverage_factor >= 0.0)) {
            std::ostringstream os;
            os << "invalid lattice: horizon=" << horizon << " n_steps=" << n_steps
               << " dx=" << dx << " half_width=" << half_width
               << " coverage_factor=" << coverage_factor;
            throw PreconditionError(os.str());
        }
        Lattice l{horizon, n_steps, dx, half_width, band.sigma_high, coverage_factor};
        l.require_cfl(band);
        const double reach = coverage_factor * band.sigma_high * std::sqrt(horizon);
        if (half_width * dx < reach * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "lattice too narrow: half_width*dx=" << half_width * dx
               << " < coverage_factor*sigma_high*sqrt(T)=" << reach;
            throw PreconditionError(os.str());
        }
        return l;
    }

    /// Grid whose space step gives sigma_high^2 dt / dx^2 == cfl_number.
    static Lattice fitted(double horizon, int n_steps, const VolBand& band,
                          double cfl_number = 0.5, double coverage_factor = 6.0) {
        if (!(cfl_number > 0.0 && cfl_number <= 1.0))
            throw PreconditionError("cfl_number must lie in (0, 1]");
        if (!(horizon > 0.0) || n_steps < 1)
            throw PreconditionError("invalid lattice: need horizon > 0 and n_steps >= 1");
        const double dt = horizon / n_steps;
        const double dx = band.sigma_high * std::sqrt(dt / cfl_number);
        const double reach = coverage_factor * band.sigma_high * std::sqrt(horizon);
        int hw = static_cast<int>(std::ceil(reach / dx - 1e-9));
        if (hw < 1) hw = 1;
        return make(horizon, n_steps, dx, hw, band, coverage_factor);
    }

    double dt() const { return horizon / n_steps; }
    std::size_t size() const { return static_cast<std::size_t>(2 * half_width + 1); }
    std::size_t origin() const { return static_cast<std::size_t>(half_width); }
    double x(std::size_t i) const {
        return (static_cast<double>(i) - static_cast<double>(half_width)) * dx;
    }
    double t(int k) const { return horizon * static_cast<double>(k) / n_steps; }

    /// Throws NumericalFailure naming the violated inequality.
    void require_cfl(const VolBand& band) const {
        const double lhs = band.var_high() * dt();
        const double rhs = dx * dx;
        if (lhs > rhs * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "CFL violated: sigma_high^2*dt = " << lhs << " > dx^2 = " << rhs;
            throw NumericalFailure(os.str());
        }
    }

    bool same_grid(const Lattice& o) const {
        return horizon == o.horizon && n_steps == o.n_steps && dx == o.dx &&
               half_width == o.half_width;
    }
};

/// Values of one time level, indexed by space node.
struct GridSlice {
    std::size_t time_index = 0;
    std::vector<double> values;

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Selected one-step variance per step k in [0, n_steps) and node.
struct ScenarioPolicy {
    std::vector<std::vector<double>> variance;

    double at(int k, std::size_t i) const { return variance[static_cast<std::size_t>(k)][i]; }

    bool within(const VolBand& band) const {
        for (const auto& row : variance)
            for (double v : row)
                if (!band.contains_variance(v)) return false;
        return true;
    }
};

inline void require_finite(const GridSlice& s, const char* what) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i])) {
            std::ostringstream os;
            os << what << ": non-finite value at time_index=" << s.time_index << " node=" << i;
            throw NumericalFailure(os.str());
        }
    }
}

}  // namespace sublin
