#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sublin/errors.hpp"
#include "sublin/sampling.hpp"

namespace sublin {

enum class ModulusKind { lipschitz, hlog, custom, transformed };

/// Concave modulus rho with rho(0) = 0, rho(u) > 0 for u > 0, and the
/// exponent beta > 2 for which the Osgood-type integral condition
/// int_{0+} du / rho^beta(u^{1/beta}) = inf is claimed.
struct MaoModulus {
    std::function<double(double)> evaluator;
    std::string label;
    double beta = 3.0;
    std::map<std::string, double> params;
    ModulusKind kind = ModulusKind::custom;

    double operator()(double u) const { return evaluator(u); }
    bool is_lipschitz() const { return kind == ModulusKind::lipschitz; }
    double lipschitz_constant() const {
        if (!is_lipschitz()) throw PreconditionError("modulus '" + label + "' is not Lipschitz");
        return params.at("L");
    }
};

namespace detail {

inline std::vector<double> modulus_sample_grid() {
    auto g = log_grid(1e-9, 1e3, 500);
    auto lin = linear_grid(2.0, 1e3, 500);
    g.insert(g.end(), lin.begin(), lin.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

inline void validate_modulus(const MaoModulus& m, bool require_concave) {
    auto fail = [&](const std::string& what) {
        throw PreconditionError("modulus '" + m.label + "': " + what);
    };
    if (!m.evaluator) fail("missing evaluator");
    if (std::abs(m(0.0)) > 1e-12) fail("rho(0) != 0");
    const auto grid = modulus_sample_grid();
    for (double u : grid) {
        const double v = m(u);
        if (!std::isfinite(v)) fail("non-finite value at u=" + std::to_string(u));
        if (!(v > 0.0)) fail("rho(u) <= 0 at u=" + std::to_string(u));
    }
    if (monotone_defect(m.evaluator, grid) > 1e-12) fail("not nondecreasing on the sample grid");
    if (require_concave && midpoint_concavity_defect(m.evaluator, grid) > 1e-9)
        fail("fails midpoint concavity on the sample grid");
}

}  // namespace detail

inline MaoModulus make_lipschitz_modulus(double L, double beta = 3.0) {
    if (!(L > 0.0)) throw PreconditionError("lipschitz modulus needs L > 0");
    if (!(beta > 2.0)) throw PreconditionError("modulus beta must exceed 2");
    MaoModulus m{[L](double u) { return L * u; }, "lipschitz", beta, {{"L", L}}, ModulusKind::lipschitz};
    detail::validate_modulus(m, true);
    return m;
}

/// rho(u) = u (e + ln(1/u))^{1/beta} on (0, 1], continued by its tangent at
/// u = 1. Concave and increasing on (0, 1] for every beta > 0; non-Lipschitz
/// at 0; rho^beta(u^{1/beta}) = u (e + ln(1/u)/beta) near 0.
inline MaoModulus make_hlog_modulus(double beta) {
    if (!(beta > 2.0)) throw PreconditionError("hlog modulus needs beta > 2");
    constexpr double e = std::numbers::e;
    const double inv = 1.0 / beta;
    const double at_cap = std::pow(e, inv);
    const double slope_cap = std::pow(e, inv - 1.0) * (e - inv);
    MaoModulus m{[=](double u) {
                     if (u <= 0.0) return 0.0;
                     if (u <= 1.0) return u * std::pow(e + std::log(1.0 / u), inv);
                     return at_cap + slope_cap * (u - 1.0);
                 },
                 "hlog", beta, {{"beta", beta}, {"u0", 1.0}}, ModulusKind::hlog};
    detail::validate_modulus(m, true);
    return m;
}

inline MaoModulus make_custom_modulus(std::string label, std::function<double(double)> fn,
                                      double beta = 3.0) {
    if (!(beta > 2.0)) throw PreconditionError("modulus beta must exceed 2");
    MaoModulus m{std::move(fn), std::move(label), beta, {}, ModulusKind::custom};
    detail::validate_modulus(m, true);
    return m;
}

/// Dispatch by name: "lipschitz" (param L), "hlog" (param beta).
inline MaoModulus make_modulus(const std::string& kind, const std::map<std::string, double>& params) {
    auto get = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (kind == "lipschitz") return make_lipschitz_modulus(get("L", 1.0), get("beta", 3.0));
    if (kind == "hlog") return make_hlog_modulus(get("beta", 3.0));
    throw PreconditionError("unknown modulus kind '" + kind + "'");
}

/// x -> rho^r(x^{1/r}). Concavity is re-verified for r >= 1; for r < 1 the
/// result need not be concave and only monotonicity is checked.
inline MaoModulus transform_lemma4(const MaoModulus& rho, double r) {
    if (!(r > 0.0)) throw PreconditionError("transform exponent r must be positive");
    auto base = rho.evaluator;
    MaoModulus m{[base, r](double x) { return x <= 0.0 ? 0.0 : std::pow(base(std::pow(x, 1.0 / r)), r); },
                 rho.label + "^" + std::to_string(r), rho.beta, rho.params, ModulusKind::transformed};
    m.params["r"] = r;
    detail::validate_modulus(m, r >= 1.0);
    return m;
}

struct AffineEnvelope {
    double a = 0.0;
    double b = 0.0;
};

/// Constants with rho(u) <= a + b u; a = b = rho(1) works because rho(u)/u is
/// nonincreasing for a concave rho with rho(0) = 0.
inline AffineEnvelope affine_envelope(const MaoModulus& rho) {
    const double c = rho(1.0);
    AffineEnvelope env{c, c};
    for (double u : detail::log_grid(1e-8, 1e4, 2001)) {
        const double bound = env.a + env.b * u;
        if (rho(u) > bound * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "affine_envelope: modulus '" << rho.label << "' exceeds rho(1)(1+u) at u=" << u
               << " (not concave)";
            throw NumericalFailure(os.str());
        }
    }
    return env;
}

// ---------------------------------------------------------------------------
// Osgood divergence classifier
// ---------------------------------------------------------------------------

enum class Divergence { divergent, convergent, inconclusive };

inline const char* to_string(Divergence d) {
    switch (d) {
        case Divergence::divergent: return "divergent";
        case Divergence::convergent: return "convergent";
        default: return "inconclusive";
    }
}

struct DivergenceReport {
    Divergence classification = Divergence::inconclusive;
    std::vector<double> eps;        // 1e-2, 1e-4, ..., 1e-12
    std::vector<double> integral;   // I(eps) = int_eps^1 du / rho^beta(u^{1/beta})
    std::vector<double> increments; // I(eps/100) - I(eps)
    double increment_floor = 0.25;  // relative to the first increment
    double tail_factor = 1e-3;      // last increment relative to I
    std::string evidence;
};

/// Heuristic classification of int_{0+} du / rho^beta(u^{1/beta}).
///
/// Divergent when every increment I(eps/100) - I(eps) stays above
/// increment_floor times the first one (no decay, so the integral keeps
/// growing at least like an iterated logarithm). Convergent when increments
/// decrease and the last one is below tail_factor times the accumulated
/// integral. Otherwise inconclusive. The test is scale-free: multiplying rho
/// by a constant does not change the verdict.
inline DivergenceReport divergence_check(const MaoModulus& rho, double beta) {
    DivergenceReport r;
    if (!(beta > 0.0)) throw PreconditionError("divergence_check: beta must be positive");
    auto rho_fn = rho.evaluator;
    // Integrand in s = ln u: e^s / rho^beta(e^{s/beta}).
    auto integrand = [&](double s) {
        const double u = std::exp(s);
        return u / std::pow(rho_fn(std::exp(s / beta)), beta);
    };
    auto piece = [&](double a, double b, bool& ok) {
        double err = 0.0;
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            integrand, std::log(a), std::log(b), 15, 1e-10, &err);
        if (!std::isfinite(v) || !(err <= 1e-6 * (1.0 + std::abs(v)))) ok = false;
        return v;
    };

    bool ok = true;
    double eps = 1.0, acc = 0.0;
    for (int k = 1; k <= 6; ++k) {
        const double lower = eps * 1e-2;
        const double d = piece(lower, eps, ok);
        acc += d;
        eps = lower;
        r.eps.push_back(eps);
        r.integral.push_back(acc);
        if (k > 1) r.increments.push_back(d);
    }

    std::ostringstream ev;
    ev << "I(eps)=";
    for (std::size_t i = 0; i < r.integral.size(); ++i) ev << (i ? "," : "") << r.integral[i];
    ev << " increments=";
    for (std::size_t i = 0; i < r.increments.size(); ++i) ev << (i ? "," : "") << r.increments[i];
    ev << " floor=" << r.increment_floor << "*first tail_factor=" << r.tail_factor;

    if (!ok) {
        ev << " quadrature failed";
        r.classification = Divergence::inconclusive;
        r.evidence = ev.str();
        return r;
    }
    const double first = r.increments.front();
    const bool above_floor = std::all_of(r.increments.begin(), r.increments.end(),
                                         [&](double d) { return d >= r.increment_floor * first; });
    bool decreasing = true;
    for (std::size_t i = 1; i < r.increments.size(); ++i)
        decreasing = decreasing && r.increments[i] < r.increments[i - 1];
    const bool small_tail = r.increments.back() <= r.tail_factor * r.integral.back();

    if (first > 0.0 && above_floor)
        r.classification = Divergence::divergent;
    else if (decreasing && small_tail)
        r.classification = Divergence::convergent;
    else
        r.classification = Divergence::inconclusive;
    r.evidence = ev.str();
    return r;
}

// ---------------------------------------------------------------------------
// Backward Bihari majorant
// ---------------------------------------------------------------------------

/// Grid solution w of w_t = u0 + C int_t^T h(w_s) ds, i.e. w' = -C h(w) with
/// w(T) = u0, by classical RK4 backward from T. w[m] sits at t = m T / n_grid.
inline std::vector<double> bihari_majorant(const std::function<double(double)>& h, double u0, double C,
                                           double T, int n_grid, double overflow_guard = 1e150) {
    if (!(u0 >= 0.0) || !(C >= 0.0) || !(T > 0.0) || n_grid < 1)
        throw PreconditionError("bihari_majorant: need u0 >= 0, C >= 0, T > 0, n_grid >= 1");
    std::vector<double> w(static_cast<std::size_t>(n_grid) + 1);
    const double step = T / n_grid;
    auto rhs = [&](double v) { return C * h(v); };
    double v = u0;
    w.back() = v;
    for (int m = n_grid; m > 0; --m) {
        const double k1 = rhs(v);
        const double k2 = rhs(v + 0.5 * step * k1);
        const double k3 = rhs(v + 0.5 * step * k2);
        const double k4 = rhs(v + step * k3);
        v += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(v) || v > overflow_guard) {
            std::ostringstream os;
            os << "bihari_majorant: blow-up at t=" << (m - 1) * step;
            throw NumericalFailure(os.str());
        }
        w[static_cast<std::size_t>(m - 1)] = v;
    }
    return w;
}

// ---------------------------------------------------------------------------
// Generator continuity conditions
// ---------------------------------------------------------------------------

using GeneratorFn = std::function<double(double t, double x, double y, double z)>;

inline GeneratorFn zero_generator() {
    return [](double, double, double, double) { return 0.0; };
}

/// Generator pair (f, g) with its declared y-modulus and z-Lipschitz constant.
struct GeneratorSpec {
    GeneratorFn f = zero_generator();
    GeneratorFn g = zero_generator();
    double z_lipschitz = 0.0;
    MaoModulus modulus = make_lipschitz_modulus(1.0);
};

struct CloudPoint {
    double t, x, y, z, y2, z2;
};

struct CloudRanges {
    double t_max = 1.0;
    double x_lo = -5.0, x_hi = 5.0;
    double y_lo = -10.0, y_hi = 10.0;
    double z_lo = -10.0, z_hi = 10.0;
};

/// Fixed-seed cloud; half the pairs have |y - y'| log-uniform in
/// [1e-8, 1] to probe the modulus near 0.
inline std::vector<CloudPoint> make_sample_cloud(const CloudRanges& rg, int n = 512,
                                                 std::uint64_t seed = 0x5eed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    std::vector<CloudPoint> cloud;
    cloud.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        CloudPoint p{};
        p.t = draw(0.0, rg.t_max);
        p.x = draw(rg.x_lo, rg.x_hi);
        p.y = draw(rg.y_lo, rg.y_hi);
        p.z = draw(rg.z_lo, rg.z_hi);
        if (i % 2 == 0) {
            p.y2 = draw(rg.y_lo, rg.y_hi);
            p.z2 = draw(rg.z_lo, rg.z_hi);
        } else {
            const double gap = std::pow(10.0, draw(-8.0, 0.0));
            p.y2 = p.y + (unit(rng) < 0.5 ? -gap : gap);
            p.z2 = p.z + draw(-1.0, 1.0) * gap;
        }
        cloud.push_back(p);
    }
    return cloud;
}

struct H1Report {
    double max_violation = 0.0;
    bool pass = false;
};

/// max over the cloud of |df| + |dg| - (rho(|dy|) + L|dz|).
inline H1Report check_H1(const GeneratorSpec& spec, const std::vector<CloudPoint>& cloud,
                         double tol = 1e-9) {
    H1Report r{-HUGE_VAL, true};
    for (const auto& p : cloud) {
        const double lhs = std::abs(spec.f(p.t, p.x, p.y, p.z) - spec.f(p.t, p.x, p.y2, p.z2)) +
                           std::abs(spec.g(p.t, p.x, p.y, p.z) - spec.g(p.t, p.x, p.y2, p.z2));
        const double rhs = spec.modulus(std::abs(p.y - p.y2)) + spec.z_lipschitz * std::abs(p.z - p.z2);
        r.max_violation = std::max(r.max_violation, lhs - rhs);
    }
    r.pass = r.max_violation <= tol;
    return r;
}

/// max over the cloud of |df|^beta + |dg|^beta - (mu(|dy|^beta) + L|dz|^beta).
inline H1Report check_H1prime(const GeneratorSpec& spec, const MaoModulus& mu, double beta,
                              const std::vector<CloudPoint>& cloud, double tol = 1e-9) {
    H1Report r{-HUGE_VAL, true};
    for (const auto& p : cloud) {
        const double df = std::abs(spec.f(p.t, p.x, p.y, p.z) - spec.f(p.t, p.x, p.y2, p.z2));
        const double dg = std::abs(spec.g(p.t, p.x, p.y, p.z) - spec.g(p.t, p.x, p.y2, p.z2));
        const double lhs = std::pow(df, beta) + std::pow(dg, beta);
        const double rhs = mu(std::pow(std::abs(p.y - p.y2), beta)) +
                           spec.z_lipschitz * std::pow(std::abs(p.z - p.z2), beta);
        r.max_violation = std::max(r.max_violation, lhs - rhs);
    }
    r.pass = r.max_violation <= tol;
    return r;
}

}  // namespace sublin
