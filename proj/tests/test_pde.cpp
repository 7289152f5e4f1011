#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "pdmpsim/errors.hpp"

using namespace pdmpsim;
using std::numbers::pi;

namespace {

// Max-norm error of the theta = 1 scheme against exp(-pi^2 T) sin(pi x), dt = h^2 / 2.
double heat_error(std::size_t N, double T) {
    SpatialGrid g(1.0, N);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::constant_kinetics(N, {{0, 0}, {0, 0}});
    StateFields z(2, GridFunction(N, 0.0));
    ReactionTerm react(kin, z);
    MembraneState s{g.tabulate([](double x) { return std::sin(pi * x); }), 0.0};
    const auto steps = static_cast<std::size_t>(std::llround(T / (0.5 * g.h() * g.h())));
    const double dt = T / static_cast<double>(steps);
    FlowStepper stepper(op, 1.0);
    for (std::size_t n = 0; n < steps; ++n) stepper.step(s, react, dt);
    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) err = std::max(err, std::abs(s.u[i] - std::exp(-pi * pi * T) * std::sin(pi * g.x(i))));
    return err;
}

}  // namespace

TEST_CASE("heat equation oracle converges at second order in h with dt ~ h^2") {
    const double e16 = heat_error(16, 0.125), e32 = heat_error(32, 0.125), e64 = heat_error(64, 0.125);
    CHECK(e32 < e16);
    CHECK(e16 / e32 >= 3.0);
    CHECK(e16 / e32 <= 5.0);
    CHECK(e32 / e64 >= 3.0);
    CHECK(e32 / e64 <= 5.0);
}

TEST_CASE("sine modes are eigenvectors of the discrete operator") {
    SpatialGrid g(2.0, 40);
    EllipticOperator op(g, 1.0);
    for (int k = 1; k <= 5; ++k) {
        auto v = g.tabulate([&](double x) { return std::sin(k * pi * x / 2.0); });
        GridFunction Av;
        op.apply(v, Av);
        const double lam = -4.0 / (g.h() * g.h()) * std::pow(std::sin(k * pi * g.h() / 4.0), 2);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(Av[i] - lam * v[i]) < 1e-9);
    }
}

TEST_CASE("zero data is a fixed point") {
    SpatialGrid g(1.0, 16);
    EllipticOperator op(g, 0.7);
    auto kin = oracle::constant_kinetics(16, {{0, 1}, {1, 0}}, {1.0, 2.0}, {0.0, 0.0});
    StateFields z = {GridFunction(16, 0.3), GridFunction(16, 0.7)};
    ReactionTerm react(kin, z);
    MembraneState s{GridFunction(16, 0.0), 0.0};
    for (int n = 0; n < 50; ++n) s = step_flow(s, react, op, 0.01);
    for (double v : s.u) CHECK(v == 0.0);
}

TEST_CASE("reaction vanishes when z is zero") {
    auto kin = oracle::constant_kinetics(8, {{0, 1}, {1, 0}}, {1.0, 2.0}, {-1.0, 1.0});
    ReactionTerm react(kin, StateFields(2, GridFunction(8, 0.0)));
    for (std::size_t x = 0; x < 8; ++x) CHECK(react(x, 0.37) == 0.0);
}

TEST_CASE("reaction-only node relaxes exponentially") {
    SpatialGrid g(1.0, 4);
    auto op = EllipticOperator::reaction_only(g);
    auto kin = oracle::constant_kinetics(4, {{0, 1}, {1, 0}}, {0.0, 2.0}, {0.0, 1.0});
    StateFields z = {GridFunction(4, 0.25), GridFunction(4, 0.75)};
    ReactionTerm react(kin, z);
    const double rate = 2.0 * 0.75, T = 1.0;
    const double exact = 1.0 - std::exp(-rate * T);
    auto run = [&](int steps) {
        MembraneState s{GridFunction(4, 0.0), 0.0};
        FlowStepper st(op, 1.0);
        for (int n = 0; n < steps; ++n) st.step(s, react, T / steps);
        return std::abs(s.u[0] - exact);
    };
    const double e1 = run(1000), e2 = run(2000);
    CHECK(e1 < 1e-3);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("integrate_to: identity, constant and linear hazards") {
    SpatialGrid g(1.0, 8);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::constant_kinetics(8, {{0, 1}, {1, 0}});
    ReactionTerm react(kin, StateFields(2, GridFunction(8, 0.0)));
    FlowStepper st(op, 1.0);
    DtPolicy pol{0.01, 1.0, 20};

    MembraneState s{GridFunction(8, 0.1), 0.5};
    auto none = integrate_to(s, st, react, 0.5, pol, [](double, const GridFunction&) { return 2.0; });
    CHECK(none.empty());
    CHECK(s.t == 0.5);
    CHECK(s.u[3] == 0.1);

    auto constant = integrate_to(s, st, react, 1.0, pol, [](double, const GridFunction&) { return 2.0; });
    REQUIRE(constant.size() > 2);
    for (const auto& h : constant) CHECK(h.rate == 2.0);
    CHECK(constant.back().t == 1.0);
    CHECK(cumulative_hazard(constant) == doctest::Approx(1.0).epsilon(1e-12));

    MembraneState s2{GridFunction(8, 0.0), 0.0};
    const double c = 3.0, T = 0.7;
    auto linear = integrate_to(s2, st, react, T, pol, [&](double t, const GridFunction&) { return c * t; });
    CHECK(std::abs(cumulative_hazard(linear) - c * T * T / 2) < 1e-12);
}

TEST_CASE("discrete norms of sin(pi x)") {
    SpatialGrid g(1.0, 256);
    auto u = g.tabulate([](double x) { return std::sin(pi * x); });
    CHECK(std::abs(l2_norm(g, u) - std::sqrt(0.5)) < 1e-4);
    CHECK(std::abs(h1_seminorm(g, u) - pi * std::sqrt(0.5)) < 1e-3);
    GridFunction z(256, 0.0);
    CHECK(l2_norm(g, z) == 0.0);
    CHECK(h1_seminorm(g, z) == 0.0);
    GridFunction u3 = u;
    for (double& v : u3) v *= -3.0;
    CHECK(l2_norm(g, u3) == doctest::Approx(3.0 * l2_norm(g, u)).epsilon(1e-15));
    CHECK(h1_seminorm(g, u3) == doctest::Approx(3.0 * h1_seminorm(g, u)).epsilon(1e-15));
}

TEST_CASE("bound and finiteness violations are reported") {
    SpatialGrid g(1.0, 8);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::constant_kinetics(8, {{0, 1}, {1, 0}});
    ReactionTerm react(kin, StateFields(2, GridFunction(8, 0.0)));
    MembraneState high{GridFunction(8, 0.9), 0.0};
    CHECK_THROWS_AS(step_flow(high, react, op, 0.01, 1.0, BoundCheck{true, 0.0, 0.5, 1e-9}), SchemeError);
    MembraneState bad{GridFunction(8, 0.0), 0.0};
    bad.u[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(step_flow(bad, react, op, 0.01), NumericalError);
}

TEST_CASE("maximum principle holds under the reaction step constraint") {
    SpatialGrid g(1.0, 32);
    EllipticOperator op(g, 0.05);
    auto kin = oracle::constant_kinetics(32, {{0, 1}, {1, 0}}, {3.0, 5.0}, {-1.0, 2.0});
    StateFields z = {GridFunction(32, 0.5), GridFunction(32, 0.5)};
    ReactionTerm react(kin, z);
    const double dt = 1.0 / kin.max_conductance();
    FlowStepper st(op, 1.0, {true, -1.0, 2.0, 1e-9});
    MembraneState s{g.tabulate([](double x) { return std::sin(7 * x) * 0.9; }), 0.0};
    for (int n = 0; n < 200; ++n) st.step(s, react, dt);
    CHECK(st.max_excess() <= 1e-9);
}
