#include <gtest/gtest.h>

#include <cmath>

#include "sublin/oracle.hpp"
#include "sublin/rgbsde.hpp"
#include "sublin/scenarios.hpp"

using namespace sublin;

namespace {

const VolBand kBand = VolBand::make(0.5, 1.0);

Lattice grid(int n) { return Lattice::fitted(1.0, n, kBand); }

double tent(double x) { return std::max(1.0 - std::abs(x), 0.0); }

GeneratorSpec y_free_spec() {
    GeneratorSpec s;
    s.f = [](double, double x, double, double z) { return 0.3 * std::sin(x) + 0.5 * std::abs(z); };
    s.z_lipschitz = 0.5;
    return s;
}

void expect_reflected_invariants(const ReflectedSurface& r) {
    const auto& s = r.base;
    for (std::size_t k = 0; k < s.Y.size(); ++k) {
        const double t = s.lattice.t(static_cast<int>(k));
        for (std::size_t i = 0; i < s.Y[k].size(); ++i) {
            const double psi = r.obstacle(t, s.lattice.x(i));
            ASSERT_GE(s.Y[k][i], psi - 1e-12);
            ASSERT_GE(s.lift[k][i], 0.0);
            ASSERT_EQ(s.lift[k][i] * (s.Y[k][i] - psi), 0.0);
        }
    }
}

}  // namespace

TEST(ReflectedLipschitz, InactiveObstacleEqualsGbsde) {
    auto l = grid(80);
    auto spec = y_free_spec();
    TerminalSpec xi{[](double x) { return std::cos(x); }};
    auto plain = solve_gbsde(spec, xi, kBand, l);
    auto r = solve_reflected_lipschitz(spec, Obstacle::inactive(), xi, kBand, l);
    for (std::size_t k = 0; k < plain.Y.size(); ++k) {
        EXPECT_EQ(r.base.Y[k].values, plain.Y[k].values);
        for (double a : r.base.lift[k].values) EXPECT_EQ(a, 0.0);
    }
}

TEST(ReflectedLipschitz, ObstacleEqualsConstantTerminal) {
    auto l = grid(30);
    auto r = solve_reflected_lipschitz({}, {[](double, double) { return 2.0; }}, {[](double) { return 2.0; }}, kBand, l);
    for (std::size_t k = 0; k < r.base.Y.size(); ++k)
        for (std::size_t i = 0; i < l.size(); ++i) {
            EXPECT_EQ(r.base.Y[k][i], 2.0);
            EXPECT_EQ(r.base.lift[k][i], 0.0);
        }
}

TEST(ReflectedLipschitz, CollapsedBandAmericanPut) {
    auto band = VolBand::make(0.2, 0.2);
    auto p = scenarios::american_put(band, {}, 500);
    auto r = solve_reflected_lipschitz(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    oracle::AmericanPutSpec ap;
    ap.n_steps = 500;
    EXPECT_NEAR(r.y0() / oracle::crr_price(ap), 1.0, 1e-2);
    expect_reflected_invariants(r);
}

TEST(ReflectedLipschitz, Errors) {
    auto l = grid(20);
    GeneratorSpec hl;
    hl.modulus = make_hlog_modulus(3.0);
    EXPECT_THROW(solve_reflected_lipschitz(hl, Obstacle::inactive(), {[](double) { return 0.0; }}, kBand, l),
                 PreconditionError);
    EXPECT_THROW(solve_reflected_lipschitz({}, {[](double, double) { return 1.0; }}, {[](double) { return 0.0; }},
                                           kBand, l),
                 PreconditionError);
    EXPECT_THROW(solve_reflected_lipschitz({}, Obstacle::inactive(), {[](double) { return 0.0; }},
                                           VolBand::make(0.5, 3.0), l),
                 NumericalFailure);
}

TEST(Picard, YFreeConvergesAtFirstIteration) {
    auto l = grid(50);
    auto res = solve_picard(y_free_spec(), {[](double, double x) { return tent(x); }}, {tent}, kBand, l);
    ASSERT_EQ(res.run.deltas.size(), 1u);
    EXPECT_EQ(res.run.deltas[0], 0.0);
    expect_reflected_invariants(res.surface);
}

TEST(Picard, LipschitzMatchesDirectSolve) {
    auto p = scenarios::american_put(VolBand::make(0.1, 0.3), {}, 100);
    PicardOptions po;
    auto pic = solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po);
    auto direct = solve_reflected_lipschitz(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    EXPECT_LE(detail::sup_distance(pic.surface.base.Y, direct.base.Y), 10 * po.stop_tol);
    expect_reflected_invariants(pic.surface);
}

TEST(Picard, HlogDeltasStrictlyDecrease) {
    auto p = scenarios::hlog_square(kBand, 100);
    auto res = solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    ASSERT_GE(res.run.deltas.size(), 3u);
    for (std::size_t i = 1; i < res.run.deltas.size(); ++i) EXPECT_LT(res.run.deltas[i], res.run.deltas[i - 1]);
    EXPECT_EQ(res.run.iterates.size(), res.run.deltas.size() + 1);
}

TEST(Picard, ConvergenceFailureCarriesTrace) {
    auto p = scenarios::hlog_square(kBand, 50);
    PicardOptions po;
    po.max_iter = 2;
    try {
        solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po);
        FAIL();
    } catch (const ConvergenceFailure& e) {
        EXPECT_EQ(e.trace().size(), 2u);
        EXPECT_GT(e.trace().back(), po.stop_tol);
    }
}

TEST(Picard, NormTraceBounded) {
    auto p = scenarios::hlog_square(kBand, 60);
    PicardOptions po;
    po.track_norms = true;
    auto res = solve_picard(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po);
    std::vector<double> it, y;
    for (std::size_t m = 0; m < res.run.norm_trace.size(); ++m) {
        it.push_back(static_cast<double>(m + 1));
        y.push_back(res.run.norm_trace[m].Y_sup_norm);
    }
    EXPECT_TRUE(trend_check(it, y).within_band);
}

TEST(Penalized, InactiveObstacle) {
    auto l = grid(40);
    auto spec = y_free_spec();
    TerminalSpec xi{[](double x) { return std::cos(x); }};
    auto res = solve_penalized(spec, Obstacle::inactive(), xi, kBand, l);
    auto plain = solve_gbsde(spec, xi, kBand, l);
    for (double g : res.run.gaps) EXPECT_EQ(g, 0.0);
    for (const auto& s : res.run.surfaces)
        for (std::size_t k = 0; k < s.Y.size(); ++k) EXPECT_EQ(s.Y[k].values, plain.Y[k].values);
    EXPECT_EQ(martingale_condition_check(res.surface).max_complementarity_violation, 0.0);
}

TEST(Penalized, AmericanPutGapDecay) {
    auto p = scenarios::american_put(VolBand::make(0.1, 0.3), {}, 100);
    auto res = solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    ASSERT_EQ(res.run.gaps.size(), 11u);
    for (std::size_t m = 1; m < res.run.gaps.size(); ++m) EXPECT_LE(res.run.gaps[m], res.run.gaps[m - 1]);
    EXPECT_LT(res.run.gaps.back(), 1e-2);
    EXPECT_LE(penalty_monotonicity_defect(res.run), 1e-10);
    expect_reflected_invariants(res.surface);
}

TEST(Penalized, MonotoneInRate) {
    auto p = scenarios::tent_y_free(kBand, 60);
    auto res = solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    EXPECT_LE(penalty_monotonicity_defect(res.run), 1e-10);
    for (std::size_t m = 1; m < res.run.penalty_mass.size(); ++m)
        EXPECT_GE(res.run.penalty_mass[m], res.run.penalty_mass[m - 1]);
}

TEST(Penalized, ResidualPositiveAndDecayingOnceRateDominates) {
    auto p = scenarios::tent_y_free(kBand, 60);
    auto res = solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    for (double r : res.run.residuals) EXPECT_GT(r, 0.0);
    for (std::size_t m = 1; m < res.run.residuals.size(); ++m)
        if (res.run.schedule[m - 1] >= 8.0) EXPECT_LT(res.run.residuals[m], res.run.residuals[m - 1]);
    EXPECT_LT(res.run.residuals.back(), 1e-2 * *std::max_element(res.run.residuals.begin(), res.run.residuals.end()));
}

TEST(Penalized, ShortScheduleFailsLoudly) {
    auto p = scenarios::tent_y_free(kBand, 40);
    PenaltyOptions po;
    po.schedule = {1.0, 2.0};
    try {
        solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po);
        FAIL();
    } catch (const ConvergenceFailure& e) {
        EXPECT_EQ(e.trace().size(), 2u);
    }
}

TEST(Penalized, ScheduleValidation) {
    auto p = scenarios::tent_y_free(kBand, 20);
    PenaltyOptions po;
    po.schedule = {};
    EXPECT_THROW(solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po), PreconditionError);
    po.schedule = {4.0, 2.0};
    EXPECT_THROW(solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po), PreconditionError);
    po.schedule = {0.0, 2.0};
    EXPECT_THROW(solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po), PreconditionError);
}

TEST(MartingaleCondition, ReflectedOutputsAreExact) {
    auto p = scenarios::american_put(VolBand::make(0.1, 0.3), {}, 80);
    auto r = solve_reflected_lipschitz(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    auto rep = martingale_condition_check(r);
    EXPECT_EQ(rep.max_complementarity_violation, 0.0);
    EXPECT_TRUE(rep.pass);
    auto in = solve_reflected_lipschitz(p.spec, Obstacle::inactive(), p.terminal, p.band, p.lattice);
    EXPECT_EQ(martingale_condition_check(in).max_complementarity_violation, 0.0);
}

TEST(AprioriNorms, ConstantTerminal) {
    auto l = grid(30);
    auto r = solve_reflected_lipschitz({}, Obstacle::inactive(), {[](double) { return -3.0; }}, kBand, l);
    auto n = apriori_norms(r.base, 2.0);
    EXPECT_DOUBLE_EQ(n.Y_sup_norm, 9.0);
    EXPECT_EQ(n.Z_l2_norm, 0.0);
    EXPECT_EQ(n.A_terminal_norm, 0.0);
    EXPECT_NEAR(apriori_norms(r.base, 2.5).Y_sup_norm, std::pow(3.0, 2.5), 1e-12);
    EXPECT_THROW(apriori_norms(r.base, 1.5), PreconditionError);
}

TEST(AprioriNorms, DeterministicZ) {
    auto l = grid(40);
    auto s = solve_gbsde({}, {[](double x) { return 2.0 * x; }}, kBand, l);
    auto n = apriori_norms(s, 2.0);
    EXPECT_NEAR(n.Z_l2_norm, 4.0, 1e-9);
}

TEST(AprioriNorms, PenaltyScheduleYAndZStayBounded) {
    auto p = scenarios::american_put(VolBand::make(0.1, 0.3), {}, 100);
    PenaltyOptions po;
    po.track_norms = true;
    auto res = solve_penalized(p.spec, p.obstacle, p.terminal, p.band, p.lattice, po);
    std::vector<double> y, z;
    for (const auto& n : res.run.norms) {
        y.push_back(n.Y_sup_norm);
        z.push_back(n.Z_l2_norm);
    }
    EXPECT_TRUE(trend_check(res.run.schedule, y).pass);
    EXPECT_TRUE(trend_check(res.run.schedule, z).pass);
}

TEST(Trend, Rules) {
    EXPECT_TRUE(trend_check({1, 2, 4}, {0, 0, 0}).pass);
    EXPECT_FALSE(trend_check({1, 2, 4}, {0, 1, 1}).within_band);
    auto up = trend_check({1, 2, 4, 8}, {1, 2, 4, 8});
    EXPECT_NEAR(up.slope, 1.0, 1e-12);
    EXPECT_FALSE(up.flat);
    EXPECT_TRUE(up.within_band);
    EXPECT_TRUE(trend_check({1, 2, 4}, {5, 4, 3}).pass);
    EXPECT_THROW(trend_check({1}, {1, 2}), PreconditionError);
}

TEST(Uniqueness, InactiveObstacleBothEqualGbsde) {
    auto l = grid(60);
    auto spec = y_free_spec();
    TerminalSpec xi{[](double x) { return x * x; }};
    auto rep = uniqueness_crosscheck(spec, Obstacle::inactive(), xi, kBand, l);
    EXPECT_LE(rep.sup_Y_diff, 1e-10);
    EXPECT_TRUE(rep.pass);
    auto plain = solve_gbsde(spec, xi, kBand, l);
    auto pic = solve_picard(spec, Obstacle::inactive(), xi, kBand, l);
    EXPECT_LE(detail::sup_distance(pic.surface.base.Y, plain.Y), 1e-10);
}

TEST(Uniqueness, AmericanPutBand) {
    auto p = scenarios::american_put(VolBand::make(0.1, 0.3), {}, 100);
    auto rep = uniqueness_crosscheck(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    EXPECT_TRUE(rep.pass) << rep.sup_Y_diff;
    EXPECT_GE(rep.Z_l2_diff, 0.0);
}

TEST(Uniqueness, HlogSquare) {
    auto p = scenarios::hlog_square(kBand, 100);
    auto rep = uniqueness_crosscheck(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    EXPECT_TRUE(rep.pass) << rep.sup_Y_diff;
}

TEST(Stability, ZeroPerturbation) {
    auto p = scenarios::tent_y_free(kBand, 40);
    auto r = stability_check(p.spec, p.obstacle, p.terminal, p.band, p.lattice, {0.0});
    EXPECT_EQ(r.sup_diff[0], 0.0);
    EXPECT_EQ(r.ratios[0], 0.0);
}

TEST(Stability, ShiftInvariance) {
    auto l = grid(40);
    auto r = stability_check(y_free_spec(), Obstacle::inactive(), {[](double x) { return std::cos(x); }}, kBand, l,
                             {0.5, 0.05});
    EXPECT_NEAR(r.sup_diff[0], 0.5, 1e-12);
    EXPECT_NEAR(r.sup_diff[1], 0.05, 1e-12);
    EXPECT_TRUE(r.pass);
}

TEST(Stability, AmericanPutRatiosConsistent) {
    auto p = scenarios::american_put(VolBand::make(0.1, 0.3), {}, 100);
    auto r = stability_check(p.spec, p.obstacle, p.terminal, p.band, p.lattice, {1e-1, 1e-2, 1e-3});
    EXPECT_TRUE(r.pass);
    const auto [lo, hi] = std::minmax_element(r.ratios.begin(), r.ratios.end());
    EXPECT_LE(*hi, 2.0 * *lo);
}

TEST(Stability, RejectsBadList) {
    auto p = scenarios::tent_y_free(kBand, 20);
    EXPECT_THROW(stability_check(p.spec, p.obstacle, p.terminal, p.band, p.lattice, {}), PreconditionError);
    EXPECT_THROW(stability_check(p.spec, p.obstacle, p.terminal, p.band, p.lattice, {-1.0}), PreconditionError);
}

TEST(ComparisonReflected, IdenticalData) {
    auto p = scenarios::tent_y_free(kBand, 40);
    auto a = solve_reflected_lipschitz(p.spec, p.obstacle, p.terminal, p.band, p.lattice);
    EXPECT_EQ(comparison_reflected(a, a, 0.0).max_excess, 0.0);
}

TEST(ComparisonReflected, RaisedObstacle) {
    auto l = grid(60);
    TerminalSpec xi{[](double x) { return tent(x) + 1.0; }};
    Obstacle lo{[](double, double x) { return tent(x); }}, hi{[](double, double x) { return tent(x) + 0.5; }};
    GeneratorSpec spec;
    spec.f = [](double, double, double, double) { return -2.0; };
    auto a = solve_reflected_lipschitz(spec, lo, xi, kBand, l), b = solve_reflected_lipschitz(spec, hi, xi, kBand, l);
    auto rep = comparison_reflected(a, b, 1e-10);
    EXPECT_TRUE(rep.pass);
    for (std::size_t k = 0; k < a.base.Y.size(); ++k)
        for (std::size_t i = 0; i < l.size(); ++i) EXPECT_GE(b.base.Y[k][i], a.base.Y[k][i]);
}

TEST(ComparisonReflected, ShiftedTerminalInactiveObstacle) {
    auto l = grid(60);
    auto spec = y_free_spec();
    auto a = solve_reflected_lipschitz(spec, Obstacle::inactive(), {[](double x) { return std::cos(x); }}, kBand, l);
    auto b = solve_reflected_lipschitz(spec, Obstacle::inactive(), {[](double x) { return std::cos(x) + 1.0; }}, kBand, l);
    EXPECT_TRUE(comparison_reflected(a, b, 1e-10).pass);
    for (std::size_t k = 0; k < a.base.Y.size(); ++k)
        for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(b.base.Y[k][i] - a.base.Y[k][i], 1.0, 1e-12);
}

TEST(Methods, ParseAndDispatch) {
    EXPECT_EQ(parse_method("picard"), Method::picard);
    EXPECT_EQ(parse_method("penalized"), Method::penalized);
    EXPECT_EQ(parse_method("lipschitz"), Method::lipschitz);
    EXPECT_THROW(parse_method("newton"), PreconditionError);
}
