#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace sublin::detail {

inline std::vector<double> linear_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return g;
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

// Largest relative midpoint-concavity defect, (fu+fv)/2 - f((u+v)/2), over pairs
// of grid points at spacings 1, 2, 4, ... Positive means not concave.
inline double midpoint_concavity_defect(const std::function<double(double)>& fn,
                                        const std::vector<double>& grid) {
    std::vector<double> val(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) val[i] = fn(grid[i]);
    double worst = -HUGE_VAL;
    for (std::size_t gap = 1; gap < grid.size(); gap *= 2) {
        for (std::size_t i = 0; i + gap < grid.size(); ++i) {
            const double u = grid[i], v = grid[i + gap];
            const double mid = fn(0.5 * (u + v));
            const double chord = 0.5 * (val[i] + val[i + gap]);
            const double scale = 1.0 + std::max({std::abs(mid), std::abs(val[i]), std::abs(val[i + gap])});
            worst = std::max(worst, (chord - mid) / scale);
        }
    }
    return worst;
}

// Largest relative decrease between consecutive grid points.
inline double monotone_defect(const std::function<double(double)>& fn,
                              const std::vector<double>& grid) {
    double worst = -HUGE_VAL;
    double prev = fn(grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = fn(grid[i]);
        worst = std::max(worst, (prev - cur) / (1.0 + std::abs(prev)));
        prev = cur;
    }
    return worst;
}

}  // namespace sublin::detail
