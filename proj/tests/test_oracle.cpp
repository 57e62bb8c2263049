#include <gtest/gtest.h>

#include <cmath>

#include "sublin/oracle.hpp"

using namespace sublin::oracle;

namespace {

TinyTreeInputs base(int n) {
    TinyTreeInputs in;
    in.sigma_low = 0.5;
    in.sigma_high = 1.0;
    in.horizon = 1.0;
    in.n_steps = n;
    in.dx = 1.0;
    in.f = [](double, double, double, double) { return 0.0; };
    in.g = [](double, double, double, double) { return 0.0; };
    return in;
}

// Pinned at first computation of this oracle.
constexpr double kPinnedPut = 6.0895952829779532;

}  // namespace

TEST(Crr, NoVolatilityNoValue) {
    AmericanPutSpec p;
    p.rate = 0.0;
    p.vol = 1e-6;
    EXPECT_NEAR(crr_price(p), 0.0, 1e-4);
}

TEST(Crr, IntrinsicFloor) {
    for (double vol : {0.05, 0.2, 0.6}) {
        AmericanPutSpec p;
        p.spot = 80.0;
        p.rate = 0.0;
        p.vol = vol;
        p.n_steps = 1;
        EXPECT_GE(crr_price(p), 20.0);
    }
}

TEST(Crr, PinnedReference) {
    EXPECT_NEAR(crr_price(AmericanPutSpec{}), kPinnedPut, 1e-12);
}

TEST(Crr, PutShape) {
    AmericanPutSpec p;
    p.n_steps = 200;
    double prev = HUGE_VAL;
    for (double spot : {70.0, 90.0, 100.0, 110.0, 140.0}) {
        p.spot = spot;
        const double v = crr_price(p);
        EXPECT_LE(v, prev);
        prev = v;
    }
    p.spot = 100.0;
    prev = -HUGE_VAL;
    for (double strike : {80.0, 95.0, 100.0, 120.0}) {
        p.strike = strike;
        const double v = crr_price(p);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Crr, Deterministic) {
    EXPECT_EQ(crr_price(AmericanPutSpec{}), crr_price(AmericanPutSpec{}));
}

TEST(Crr, InvalidSpec) {
    AmericanPutSpec p;
    p.n_steps = 0;
    EXPECT_THROW(crr_price(p), std::invalid_argument);
    p = {};
    p.spot = -1.0;
    EXPECT_THROW(crr_price(p), std::invalid_argument);
}

TEST(TinyTree, QuadraticExpectation) {
    auto in = base(2);
    in.terminal = [](double x) { return x * x; };
    EXPECT_NEAR(tiny_tree_eval(Recursion::expectation, in).at(0, 0), 1.0, 1e-15);
}

TEST(TinyTree, InactiveObstacleMatchesGbsde) {
    auto in = base(4);
    in.dx = 1.1;
    in.terminal = [](double x) { return std::sin(x) + x * x; };
    in.f = [](double, double x, double y, double z) { return 0.1 * y - 0.3 * std::abs(z) + x; };
    in.obstacle = [](double, double) { return -1e6; };
    auto a = tiny_tree_eval(Recursion::gbsde, in), b = tiny_tree_eval(Recursion::reflected, in);
    EXPECT_EQ(a.values, b.values);
}

TEST(TinyTree, UnitDriver) {
    auto in = base(3);
    in.terminal = [](double) { return 0.0; };
    in.f = [](double, double, double, double) { return 1.0; };
    EXPECT_NEAR(tiny_tree_eval(Recursion::gbsde, in).at(0, 0), 1.0, 1e-15);
}

TEST(TinyTree, ReflectedDominatesObstacle) {
    auto in = base(4);
    in.terminal = [](double x) { return std::max(1.0 - x, 0.0); };
    in.obstacle = [](double, double x) { return std::max(1.0 - x, 0.0); };
    auto s = tiny_tree_eval(Recursion::reflected, in);
    for (int k = 0; k <= 4; ++k)
        for (int j = -k; j <= k; ++j) EXPECT_GE(s.at(k, j), std::max(1.0 - j * in.dx, 0.0));
}

TEST(TinyTree, Refusals) {
    auto in = base(5);
    in.terminal = [](double x) { return x; };
    EXPECT_THROW(tiny_tree_eval(Recursion::expectation, in), std::invalid_argument);
    in.n_steps = 2;
    in.f = nullptr;
    EXPECT_THROW(tiny_tree_eval(Recursion::gbsde, in), std::invalid_argument);
    in = base(2);
    in.terminal = [](double x) { return x; };
    EXPECT_THROW(tiny_tree_eval(Recursion::reflected, in), std::invalid_argument);
}
