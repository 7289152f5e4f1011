#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pdmpsim/errors.hpp"
#include "pdmpsim/limit.hpp"

using namespace pdmpsim;
using std::numbers::pi;

namespace {

// p' = Q^T p for a constant generator.
Eigen::Vector3d matexp_oracle(const std::vector<std::vector<double>>& q, const Eigen::Vector3d& p0, double T) {
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) {
                A(j, i) += q[i][j];
                A(i, i) -= q[i][j];
            }
    Eigen::Matrix3d E = (A * T).exp();
    return E * p0;
}

const std::vector<std::vector<double>> kQ3 = {{0, 2, 0.5}, {1, 0, 3}, {0.2, 0.7, 0}};

double occupancy_error(double dt) {
    SpatialGrid g(1.0, 8);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::constant_kinetics(8, kQ3);
    LimitSolver solver(g, op, kin, {dt, 1.0, 1e-8, 1e-9, true});
    LimitState s{GridFunction(8, 0.0), {GridFunction(8, 0.6), GridFunction(8, 0.3), GridFunction(8, 0.1)}, 0.0};
    auto traj = solve_limit(solver, s, 1.0, 0.0);
    auto exact = matexp_oracle(kQ3, {0.6, 0.3, 0.1}, 1.0);
    double err = 0.0;
    for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(traj.frames.back().p[i][4] - exact[i]));
    return err;
}

}  // namespace

TEST_CASE("kinetics field vanishes at stationarity") {
    auto kin = oracle::constant_kinetics(4, {{0, 2}, {1, 0}});
    StateFields p = {GridFunction(4, 1.0 / 3.0), GridFunction(4, 2.0 / 3.0)};
    auto F = kinetics_field(kin, p, GridFunction(4, 0.0));
    for (const auto& Fi : F)
        for (double v : Fi) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("kinetics field of a pure state flips") {
    auto kin = oracle::constant_kinetics(4, {{0, 1}, {1, 0}});
    StateFields p = {GridFunction(4, 1.0), GridFunction(4, 0.0)};
    auto F = kinetics_field(kin, p, GridFunction(4, 0.0));
    for (std::size_t x = 0; x < 4; ++x) {
        CHECK(F[0][x] == oracle::kFlipField[0]);
        CHECK(F[1][x] == oracle::kFlipField[1]);
    }
}

TEST_CASE("occupancy matches the matrix exponential at second order") {
    const double e1 = occupancy_error(0.02), e2 = occupancy_error(0.01), e3 = occupancy_error(0.005);
    CHECK(e2 < 1e-4);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
    CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("decoupled heat and kinetics oracles hold together") {
    SpatialGrid g(1.0, 32);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::constant_kinetics(32, kQ3);
    const double T = 0.1, dt = 0.5 * g.h() * g.h();
    LimitSolver solver(g, op, kin, {dt, 1.0, 1e-8, 1e-9, false});
    LimitState s{g.tabulate([](double x) { return std::sin(pi * x); }),
                 {GridFunction(32, 0.2), GridFunction(32, 0.2), GridFunction(32, 0.6)},
                 0.0};
    auto traj = solve_limit(solver, s, T, 0.05);
    REQUIRE(traj.frames.size() == 3);
    const auto& end = traj.frames.back();
    auto exact = matexp_oracle(kQ3, {0.2, 0.2, 0.6}, T);
    for (std::size_t x = 0; x < 32; ++x) {
        CHECK(std::abs(end.u[x] - std::exp(-pi * pi * T) * std::sin(pi * g.x(x))) < 2e-3);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(end.p[i][x] - exact[i]) < 1e-6);
    }
}

TEST_CASE("zero horizon returns the initial state") {
    SpatialGrid g(1.0, 16);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::benchmark_kinetics(16);
    LimitSolver solver(g, op, kin, {});
    LimitState s{GridFunction(16, 0.25), {GridFunction(16, 0.5), GridFunction(16, 0.5)}, 0.0};
    auto traj = solve_limit(solver, s, 0.0, 0.1);
    REQUIRE(traj.frames.size() == 1);
    CHECK(traj.frames[0].u == s.u);
    CHECK(traj.frames[0].p == s.p);
    CHECK(traj.steps == 0);
    CHECK_THROWS_AS(solve_limit(solver, s, -1.0, 0.1), InputError);
}

TEST_CASE("benchmark limit conserves mass and converges in dt") {
    SpatialGrid g(1.0, 32);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::benchmark_kinetics(32);
    auto run = [&](double dt) {
        LimitSolver solver(g, op, kin, {dt, 1.0, 1e-8, 1e-9, true});
        LimitState s{g.tabulate([](double x) { return 0.5 * std::sin(pi * x); }),
                     {GridFunction(32, 0.5), GridFunction(32, 0.5)},
                     0.0};
        auto traj = solve_limit(solver, s, 1.0, 0.0);
        CHECK(traj.max_mass_drift <= 1e-8);
        CHECK(traj.max_bound_excess <= 1e-9);
        return traj.frames.back();
    };
    auto a = run(4e-3), b = run(2e-3), c = run(1e-3);
    double d1 = 0.0, d2 = 0.0;
    for (std::size_t x = 0; x < 32; ++x) {
        d1 = std::max(d1, std::abs(a.u[x] - b.u[x]) + std::abs(a.p[1][x] - b.p[1][x]));
        d2 = std::max(d2, std::abs(b.u[x] - c.u[x]) + std::abs(b.p[1][x] - c.p[1][x]));
    }
    CHECK(d2 < d1);
    CHECK(d1 / d2 > 1.6);
    CHECK(d1 / d2 < 4.5);
    CHECK(mass_defect(c.p) <= 1e-12);
}
