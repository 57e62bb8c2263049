#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sublin/errors.hpp"
#include "sublin/gexpect.hpp"
#include "sublin/lattice.hpp"
#include "sublin/parallel.hpp"

namespace sublin {

enum class Accumulator { running_max, running_sum };

/// Path functional phi(acc_n) where acc_0 = c_0(i_0) and
/// acc_{k+1} = op(acc_k, c_{k+1}(i_{k+1})) along lattice paths from the origin.
struct PathFunctional {
    std::vector<std::vector<double>> contributions;  // [k][i], k = 0..n_steps
    Accumulator mode = Accumulator::running_max;
    std::function<double(double)> terminal_map = [](double a) { return a; };
    int levels = 201;  // accumulator grid size
};

/// Expectation of a path functional by backward induction on the state
/// (node, accumulator). With policy == nullptr the one-step operator is the
/// sup over the band (a G-expectation); otherwise the fixed per-node
/// variances of the policy are used. The accumulator lives on a uniform grid
/// with linear interpolation; for convex terminal maps this over-estimates,
/// so inequality checks built on it are conservative.
inline double path_functional_expectation(const PathFunctional& pf, const VolBand& band,
                                          const Lattice& lattice,
                                          const ScenarioPolicy* policy = nullptr) {
    lattice.require_cfl(band);
    const auto n = static_cast<std::size_t>(lattice.n_steps);
    const std::size_t nodes = lattice.size();
    if (pf.contributions.size() != n + 1)
        throw PreconditionError("path functional: need one contribution slice per time level");
    for (const auto& row : pf.contributions)
        if (row.size() != nodes) throw PreconditionError("path functional: slice length mismatch");
    if (pf.levels < 2) throw PreconditionError("path functional: need at least 2 accumulator levels");
    if (policy && policy->variance.size() != n)
        throw PreconditionError("path functional: policy has wrong number of steps");

    double lo = 0.0, hi = 0.0;
    if (pf.mode == Accumulator::running_max) {
        lo = HUGE_VAL;
        hi = -HUGE_VAL;
        for (const auto& row : pf.contributions)
            for (double c : row) {
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
    } else {
        for (const auto& row : pf.contributions) {
            lo += std::min(0.0, *std::min_element(row.begin(), row.end()));
            hi += std::max(0.0, *std::max_element(row.begin(), row.end()));
        }
    }
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw NumericalFailure("path functional: non-finite contributions");
    if (hi - lo < 1e-300) hi = lo + 1.0;

    const auto q_count = static_cast<std::size_t>(pf.levels);
    const double span = hi - lo;
    auto level = [&](std::size_t q) { return lo + span * static_cast<double>(q) / (q_count - 1); };
    auto combine = [&](double acc, double c) {
        return pf.mode == Accumulator::running_max ? std::max(acc, c) : acc + c;
    };
    auto interp = [&](const std::vector<double>& w, std::size_t node, double a) {
        double pos = (a - lo) / span * static_cast<double>(q_count - 1);
        pos = std::clamp(pos, 0.0, static_cast<double>(q_count - 1));
        auto q0 = static_cast<std::size_t>(pos);
        if (q0 >= q_count - 1) q0 = q_count - 2;
        const double frac = pos - static_cast<double>(q0);
        const double* row = &w[node * q_count];
        return row[q0] + frac * (row[q0 + 1] - row[q0]);
    };

    std::vector<double> next(nodes * q_count), cur(nodes * q_count);
    for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t q = 0; q < q_count; ++q) next[i * q_count + q] = pf.terminal_map(level(q));

    const double ratio = lattice.dt() / (lattice.dx * lattice.dx);
    for (std::size_t k = n; k-- > 0;) {
        const auto& c_next = pf.contributions[k + 1];
        detail::parallel_for(static_cast<std::ptrdiff_t>(nodes), [&](std::ptrdiff_t ii) {
            const auto i = static_cast<std::size_t>(ii);
            const bool edge = (i == 0 || i + 1 == nodes);
            for (std::size_t q = 0; q < q_count; ++q) {
                const double a = level(q);
                const double stay = interp(next, i, combine(a, c_next[i]));
                double v = stay;
                if (!edge) {
                    const double up = interp(next, i + 1, combine(a, c_next[i + 1]));
                    const double down = interp(next, i - 1, combine(a, c_next[i - 1]));
                    const double curvature = up - 2.0 * stay + down;
                    const double s = policy ? policy->at(static_cast<int>(k), i)
                                            : maximizing_variance(curvature, band);
                    v = stay + 0.5 * s * ratio * curvature;
                }
                cur[i * q_count + q] = v;
            }
        }, 64);
        std::swap(cur, next);
    }
    const std::size_t o = lattice.origin();
    const double result = interp(next, o, pf.contributions[0][o]);
    if (!std::isfinite(result)) throw NumericalFailure("path functional: non-finite result");
    return result;
}

}  // namespace sublin
