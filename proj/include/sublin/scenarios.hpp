#pragma once

#include <cmath>
#include <string>

#include "sublin/rgbsde.hpp"

namespace sublin {

/// Complete data of one reflected problem on one lattice.
struct Problem {
    std::string name;
    GeneratorSpec spec;
    TerminalSpec terminal;
    Obstacle obstacle;
    VolBand band;
    Lattice lattice;
};

namespace scenarios {

struct PutParams {
    double spot = 100.0;
    double strike = 100.0;
    double rate = 0.05;
    double sigma_ref = 0.0;  // log-price drift correction; 0 selects sigma_high
};

/// American put on log-price coordinates x = B_t:
///   S(t, x) = spot exp(x + (rate - sigma_ref^2 / 2) t),
/// obstacle and terminal (K - S)^+, generator f = -rate y (discounting).
/// With a collapsed band and sigma_ref equal to it, S is the risk-neutral
/// geometric Brownian motion and Y_0 is the classical American put price.
inline Problem american_put(const VolBand& band, const PutParams& p, int n_steps,
                            double horizon = 1.0, double cfl_number = 0.5, double coverage = 6.0) {
    const double sref = p.sigma_ref > 0.0 ? p.sigma_ref : band.sigma_high;
    const double drift = p.rate - 0.5 * sref * sref;
    auto intrinsic = [=](double t, double x) {
        return std::max(p.strike - p.spot * std::exp(x + drift * t), 0.0);
    };
    Problem pr;
    pr.name = "american_put";
    pr.band = band;
    pr.lattice = Lattice::fitted(horizon, n_steps, band, cfl_number, coverage);
    if (p.rate > 0.0) {
        const double r = p.rate;
        pr.spec.f = [r](double, double, double y, double) { return -r * y; };
        pr.spec.modulus = make_lipschitz_modulus(r);
    }
    pr.terminal = {[=](double x) { return intrinsic(horizon, x); }};
    pr.obstacle = {intrinsic, 1e-12};
    return pr;
}

/// f(y) = rho(|y|) with rho = hlog(beta), xi = x^2, psi = x^2 - 1.
inline Problem hlog_square(const VolBand& band, int n_steps, double beta = 3.0, double horizon = 1.0,
                           double cfl_number = 0.5, double coverage = 6.0) {
    Problem pr;
    pr.name = "hlog_square";
    pr.band = band;
    pr.lattice = Lattice::fitted(horizon, n_steps, band, cfl_number, coverage);
    pr.spec.modulus = make_hlog_modulus(beta);
    auto rho = pr.spec.modulus.evaluator;
    pr.spec.f = [rho](double, double, double y, double) { return rho(std::abs(y)); };
    pr.terminal = {[](double x) { return x * x; }};
    pr.obstacle = {[](double, double x) { return x * x - 1.0; }, 1e-12};
    return pr;
}

/// y-free generator f = -drain with the tent obstacle psi = (1 - |x|)^+ = xi.
inline Problem tent_y_free(const VolBand& band, int n_steps, double drain = 1.0, double horizon = 1.0,
                           double cfl_number = 0.5, double coverage = 6.0) {
    Problem pr;
    pr.name = "tent_y_free";
    pr.band = band;
    pr.lattice = Lattice::fitted(horizon, n_steps, band, cfl_number, coverage);
    pr.spec.f = [drain](double, double, double, double) { return -drain; };
    auto tent = [](double x) { return std::max(1.0 - std::abs(x), 0.0); };
    pr.terminal = {tent};
    pr.obstacle = {[tent](double, double x) { return tent(x); }, 1e-12};
    return pr;
}

/// Smooth scenario with inactive obstacle: xi = exp(x / 2), f = -rate y.
inline Problem smooth_exp(const VolBand& band, int n_steps, double rate = 0.05, double horizon = 1.0,
                          double cfl_number = 0.5, double coverage = 6.0) {
    Problem pr;
    pr.name = "smooth_exp";
    pr.band = band;
    pr.lattice = Lattice::fitted(horizon, n_steps, band, cfl_number, coverage);
    pr.spec.f = [rate](double, double, double y, double) { return -rate * y; };
    pr.spec.modulus = make_lipschitz_modulus(rate);
    pr.terminal = {[](double x) { return std::exp(0.5 * x); }};
    pr.obstacle = Obstacle::inactive();
    return pr;
}

}  // namespace scenarios
}  // namespace sublin
