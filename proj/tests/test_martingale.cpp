#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pdmpsim/errors.hpp"
#include "pdmpsim/martingale.hpp"

using namespace pdmpsim;

namespace {

struct Frozen {
    SpatialGrid grid{1.0, 8};
    EllipticOperator op{grid, 1.0};
    ChannelKinetics kin = oracle::constant_kinetics(8, {{0, 2}, {1, 0}});
    Partition part = oracle::uniform_partition(grid, 1, 10);
    SolverSettings solver;
    HybridState state = HybridState::make(GridFunction(8, 0.0), ChannelConfiguration(part, 2, {{4, 6}}), part);
    ModelView view() const { return {grid, op, kin, part, solver}; }
};

}  // namespace

TEST_CASE("closed-form compensator matches enumeration on random states") {
    CounterRng rng(2024, 0);
    for (int c = 0; c < 100; ++c) {
        auto rc = oracle::random_case(rng);
        CHECK(oracle::compensator_relative_error(rc) <= 1e-12);
    }
}

TEST_CASE("frozen compensator drift and quadratic form") {
    Frozen f;
    auto d = compensator_drift(f.state, f.kin, f.part);
    for (std::size_t x = 0; x < 8; ++x) {
        CHECK(d[1][x] == doctest::Approx(oracle::kFrozenDriftZ1).epsilon(1e-14));
        CHECK(d[0][x] == doctest::Approx(-oracle::kFrozenDriftZ1).epsilon(1e-14));
    }
    auto psi = TestFunction::state_constant(f.grid, 2, 1, 1.0);
    auto Gn = empirical_Gn(f.state, f.kin, f.part);
    CHECK(Gn(psi, psi) == doctest::Approx(oracle::kFrozenGn).epsilon(1e-14));
    CHECK(Gn.provenance() == FormProvenance::empirical_Gn);
    auto one = TestFunction::constant_across_states(f.grid, 2);
    CHECK(std::abs(Gn(one, one)) < 1e-15);
    CHECK(std::abs(Gn(one, psi)) < 1e-15);
}

TEST_CASE("absorbing and balanced configurations") {
    SpatialGrid g(1.0, 8);
    auto part = oracle::uniform_partition(g, 1, 10);
    auto one_way = oracle::constant_kinetics(8, {{0, 1}, {0, 0}});
    auto s = HybridState::make(GridFunction(8, 0.0), ChannelConfiguration(part, 2, {{0, 10}}), part);
    for (const auto& field : compensator_drift(s, one_way, part))
        for (double v : field) CHECK(v == 0.0);
    auto balanced = oracle::constant_kinetics(8, {{0, 3}, {2, 0}});
    auto s2 = HybridState::make(GridFunction(8, 0.0), ChannelConfiguration(part, 2, {{4, 6}}), part);
    for (const auto& field : compensator_drift(s2, balanced, part))
        for (double v : field) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("trace over an orthonormal basis equals the jump second moment") {
    CounterRng rng(99, 0);
    for (int c = 0; c < 5; ++c) {
        auto rc = oracle::random_case(rng);
        auto q = local_rates(rc.state.membrane.u, rc.kin, rc.part);
        const double direct = jump_second_moment(rc.state.config, q, rc.part);
        auto Gn = empirical_Gn(rc.state, rc.kin, rc.part);
        double trace = 0.0;
        for (const auto& e : orthonormal_basis(rc.grid, rc.kin.states())) trace += Gn(e, e);
        CHECK(oracle::rel_diff(trace, direct) <= 1e-12);
    }
}

TEST_CASE("limit covariance on the uniform state") {
    SpatialGrid g(1.0, 32);
    auto kin = oracle::constant_kinetics(32, {{0, 1}, {1, 0}});
    StateFields p = {GridFunction(32, 0.5), GridFunction(32, 0.5)};
    GridFunction u(32, 0.0);
    auto G = limit_G(g, u, p, kin);
    auto psi = TestFunction::state_constant(g, 2, 1, 1.0);
    CHECK(G(psi, psi) == doctest::Approx(oracle::kUniformLimitG).epsilon(1e-14));
    CHECK(G.provenance() == FormProvenance::limit_G);
    auto one = TestFunction::constant_across_states(g, 2);
    CHECK(G(one, one) == 0.0);
}

TEST_CASE("limit covariance routes agree and are symmetric") {
    SpatialGrid g(1.0, 24);
    auto kin = oracle::benchmark_kinetics(24);
    auto u = g.tabulate([](double x) { return 0.3 + 0.4 * x; });
    StateFields p = {g.tabulate([](double x) { return 0.2 + 0.5 * x; }), {}};
    p[1] = GridFunction(24);
    for (std::size_t i = 0; i < 24; ++i) p[1][i] = 1.0 - p[0][i];
    auto G = limit_G(g, u, p, kin);
    auto a = TestFunction::sine_mode(g, 2, 1, 1), b = TestFunction::sine_mode(g, 2, 0, 3);
    auto c = TestFunction::bump(g, 2, 1, 0.4, 0.2);
    for (const auto& [x, y] : {std::pair{a, b}, std::pair{a, c}, std::pair{b, c}, std::pair{c, c}}) {
        const double v = G(x, y);
        CHECK(oracle::rel_diff(v, G(y, x)) <= 1e-12);
        CHECK(oracle::rel_diff(v, limit_G_four_term(g, u, p, kin, x, y)) <= 1e-12);
        CHECK(oracle::rel_diff(v, limit_G_matrix(g, u, p, kin, x, y)) <= 1e-12);
    }
    CHECK(G(a.scaled(2.0), a.scaled(2.0)) == doctest::Approx(4.0 * G(a, a)).epsilon(1e-14));
    p[0][3] += 1e-3;
    CHECK_THROWS_AS(limit_G(g, u, p, kin), InputError);
}

TEST_CASE("martingale path structure") {
    SpatialGrid g(1.0, 16);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::benchmark_kinetics(16);
    auto part = oracle::uniform_partition(g, 2, 10);
    ModelView view{g, op, kin, part, SolverSettings{}};
    auto s = HybridState::make(GridFunction(16, 0.2), ChannelConfiguration(part, 2, {{5, 5}, {8, 2}}), part);
    CounterRng rng(31, 0);
    SimulationOptions opt;
    opt.T = 0.5;
    opt.cadence = 0.1;
    auto path = simulate(view, s, rng, opt);
    REQUIRE(path.jumps.size() > 2);
    auto phi = TestFunction::sine_mode(g, 2, 1, 1);
    auto mp = martingale_path(view, path, {phi, phi.scaled(2.0)});
    REQUIRE(!mp.times.empty());
    CHECK(mp.times.front() == 0.0);
    CHECK(mp.values.front()[0] == 0.0);
    CHECK(mp.reassembly_residual <= 1e-12);
    CompartmentPairing pairing(phi, part);
    std::size_t j = 0;
    for (std::size_t i = 0; i + 1 < mp.times.size(); ++i) {
        if (mp.kinds[i] != 1) continue;
        REQUIRE(mp.kinds[i + 1] == 2);
        const auto& e = path.jumps[j++].event;
        const double expected = (pairing.integral(e.compartment, e.to) - pairing.integral(e.compartment, e.from)) / 10.0;
        CHECK(mp.values[i + 1][0] - mp.values[i][0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(mp.values[i + 1][0] - mp.values[i][0]) <= pairing.jump_bound() * (1 + 1e-12));
    }
    CHECK(j == path.jumps.size());
    for (std::size_t i = 0; i < mp.times.size(); ++i)
        CHECK(mp.values[i][1] == doctest::Approx(2.0 * mp.values[i][0]).epsilon(1e-12));
    CHECK_THROWS_AS(martingale_path(view, path, {phi}, 0.0), AnalysisError);
}

TEST_CASE("martingale vanishes without transitions") {
    SpatialGrid g(1.0, 8);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::constant_kinetics(8, {{0, 0}, {0, 0}}, {0.0, 1.0}, {0.0, 1.0});
    auto part = oracle::uniform_partition(g, 2, 5);
    ModelView view{g, op, kin, part, SolverSettings{}};
    auto s = HybridState::make(GridFunction(8, 0.0), ChannelConfiguration(part, 2, {{2, 3}, {1, 4}}), part);
    CounterRng rng(1, 0);
    SimulationOptions opt;
    opt.T = 0.3;
    auto path = simulate(view, s, rng, opt);
    auto mp = martingale_path(view, path, {TestFunction::sine_mode(g, 2, 1, 1)});
    for (const auto& v : mp.values) CHECK(v[0] == 0.0);
}

TEST_CASE("Ito isometry holds on the frozen benchmark at moderate sample size") {
    Frozen f;
    f.solver.dt_max = 1e-2;
    auto psi = TestFunction::state_constant(f.grid, 2, 1, 1.0);
    auto rep = ito_isometry_residual(f.view(), f.state, psi, 0.5, 2000, 17);
    CHECK(rep.replicates == 2000);
    CHECK(std::abs(rep.residual) <= 3 * rep.combined_stderr);
    CHECK(std::abs(rep.mean_M) <= 3 * rep.mean_M_stderr);
}
