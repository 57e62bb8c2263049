#pragma once

// Reference implementations for cross-validation. Nothing here includes the
// engine headers; every recursion is written out again from scratch.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sublin::oracle {

struct AmericanPutSpec {
    double spot = 100.0;
    double strike = 100.0;
    double rate = 0.05;
    double vol = 0.2;
    double maturity = 1.0;
    int n_steps = 1000;
};

/// Cox-Ross-Rubinstein binomial price of an American put.
inline double crr_price(const AmericanPutSpec& p) {
    if (!(p.spot > 0.0 && p.strike > 0.0 && p.rate >= 0.0 && p.vol > 0.0 && p.maturity > 0.0) ||
        p.n_steps < 1)
        throw std::invalid_argument("crr_price: invalid put specification");
    const int n = p.n_steps;
    const double dt = p.maturity / n;
    const double up = std::exp(p.vol * std::sqrt(dt));
    const double down = 1.0 / up;
    const double growth = std::exp(p.rate * dt);
    const double q = (growth - down) / (up - down);
    const double disc = 1.0 / growth;
    std::vector<double> v(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) {
        const double s = p.spot * std::pow(up, j) * std::pow(down, n - j);
        v[static_cast<std::size_t>(j)] = std::max(p.strike - s, 0.0);
    }
    for (int step = n - 1; step >= 0; --step) {
        for (int j = 0; j <= step; ++j) {
            const double cont = disc * (q * v[static_cast<std::size_t>(j) + 1] + (1.0 - q) * v[static_cast<std::size_t>(j)]);
            const double s = p.spot * std::pow(up, j) * std::pow(down, step - j);
            v[static_cast<std::size_t>(j)] = std::max(cont, p.strike - s);
        }
    }
    return v[0];
}

enum class Recursion { expectation, gbsde, reflected };

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;
using Fn4 = std::function<double(double, double, double, double)>;

struct TinyTreeInputs {
    double sigma_low = 1.0;
    double sigma_high = 1.0;
    double horizon = 1.0;
    int n_steps = 1;
    double dx = 1.0;
    Fn1 terminal;
    Fn4 f;         // gbsde / reflected only
    Fn4 g;         // gbsde / reflected only
    Fn2 obstacle;  // reflected only
};

/// values[k][j + k] at x = j dx for j = -k..k.
struct TinyTreeSurface {
    std::vector<std::vector<double>> values;

    double at(int k, int j) const { return values[static_cast<std::size_t>(k)][static_cast<std::size_t>(j + k)]; }
};

/// Plain recursion over the cone of nodes reachable from the origin, with the
/// one-step sup taken over the two band endpoints by direct comparison.
inline TinyTreeSurface tiny_tree_eval(Recursion kind, const TinyTreeInputs& in) {
    constexpr int kMaxSteps = 4;
    if (in.n_steps < 1 || in.n_steps > kMaxSteps) {
        std::ostringstream os;
        os << "tiny_tree_eval: n_steps=" << in.n_steps << " outside [1, " << kMaxSteps << "]";
        throw std::invalid_argument(os.str());
    }
    if (!in.terminal) throw std::invalid_argument("tiny_tree_eval: missing terminal");
    if (kind != Recursion::expectation && (!in.f || !in.g))
        throw std::invalid_argument("tiny_tree_eval: missing generator");
    if (kind == Recursion::reflected && !in.obstacle)
        throw std::invalid_argument("tiny_tree_eval: missing obstacle");

    const double dt = in.horizon / in.n_steps;
    const double variances[2] = {in.sigma_low * in.sigma_low, in.sigma_high * in.sigma_high};

    std::function<double(int, int)> node = [&](int k, int j) -> double {
        const double x = j * in.dx;
        if (k == in.n_steps) {
            double v = in.terminal(x);
            if (kind == Recursion::reflected) v = std::max(v, in.obstacle(in.horizon, x));
            return v;
        }
        const double t = in.horizon * k / in.n_steps;
        const double a = node(k + 1, j + 1);
        const double b = node(k + 1, j);
        const double c = node(k + 1, j - 1);
        double fv = 0.0, gv = 0.0;
        if (kind != Recursion::expectation) {
            const double z = (a - c) / (2.0 * in.dx);
            fv = in.f(t, x, b, z);
            gv = in.g(t, x, b, z);
        }
        double best = -HUGE_VAL;
        for (double s : variances) {
            const double w = s * dt / (in.dx * in.dx);
            const double candidate = 0.5 * w * a + (1.0 - w) * b + 0.5 * w * c + dt * fv + dt * s * gv;
            best = std::max(best, candidate);
        }
        if (kind == Recursion::reflected) best = std::max(best, in.obstacle(t, x));
        return best;
    };

    TinyTreeSurface out;
    for (int k = 0; k <= in.n_steps; ++k) {
        std::vector<double> row;
        for (int j = -k; j <= k; ++j) row.push_back(node(k, j));
        out.values.push_back(std::move(row));
    }
    return out;
}

}  // namespace sublin::oracle
