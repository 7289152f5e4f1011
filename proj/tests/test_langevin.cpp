#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pdmpsim/errors.hpp"
#include "pdmpsim/langevin.hpp"
#include "pdmpsim/martingale.hpp"
#include "pdmpsim/stats.hpp"

using namespace pdmpsim;
using std::numbers::pi;

namespace {

std::vector<double> multiply(const std::vector<double>& A, const std::vector<double>& B, std::size_t m) {
    std::vector<double> C(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < m; ++j) C[i * m + j] += A[i * m + k] * B[k * m + j];
    return C;
}

LimitState benchmark_state(const SpatialGrid& g) {
    LimitState s{g.tabulate([](double x) { return 0.5 * std::sin(pi * x); }), {}, 0.0};
    s.p = {g.tabulate([](double x) { return 0.3 + 0.4 * x; }), GridFunction(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) s.p[1][i] = 1.0 - s.p[0][i];
    return s;
}

}  // namespace

TEST_CASE("PSD square root recomposes and keeps the kernel") {
    CounterRng rng(4, 4);
    for (std::size_t m = 2; m <= 4; ++m) {
        std::vector<std::vector<double>> q(m, std::vector<double>(m, 0.0));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) q[i][j] = 0.2 + rng.uniform();
        auto kq = oracle::constant_kinetics(1, q);
        std::vector<double> p(m), D(m * m), buf(m * m);
        double total = 0.0;
        for (auto& v : p) total += (v = rng.uniform());
        for (auto& v : p) v /= total;
        covariance_matrix(kq, p.data(), 0.0, D.data(), buf.data());
        auto S = psd_sqrt(D, m);
        auto SS = multiply(S, S, m);
        for (std::size_t i = 0; i < m * m; ++i) CHECK(std::abs(SS[i] - D[i]) < 1e-10);
        for (std::size_t i = 0; i < m; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < m; ++j) row += S[i * m + j];
            CHECK(std::abs(row) < 1e-10);
        }
    }
}

TEST_CASE("indefinite covariance is rejected") {
    std::vector<double> D = {1.0, 0.0, 0.0, -1.0};
    CHECK_THROWS_AS(psd_sqrt(D, 2), PsdError);
    std::vector<double> tiny = {1.0, 0.0, 0.0, -1e-15};
    CHECK_NOTHROW(psd_sqrt(tiny, 2));
}

TEST_CASE("noise scale") {
    CHECK(noise_scale_for(4.0) == 0.5);
    CHECK(noise_scale_for(std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("zero noise reproduces the deterministic limit bit for bit") {
    SpatialGrid g(1.0, 32);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::benchmark_kinetics(32);
    LimitSettings set{1e-3, 1.0, 1e-8, 1e-9, true};
    auto s0 = benchmark_state(g);
    LimitSolver solver(g, op, kin, set);
    auto det = solve_limit(solver, s0, 0.5, 0.1);
    LangevinIntegrator lang(g, op, kin, set, noise_scale_for(std::numeric_limits<double>::infinity()));
    CounterRng rng(1, 1);
    auto sto = solve_langevin(lang, s0, 0.5, rng, 0.1);
    REQUIRE(det.frames.size() == sto.frames.size());
    for (std::size_t f = 0; f < det.frames.size(); ++f) {
        CHECK(det.frames[f].t == sto.frames[f].t);
        CHECK(det.frames[f].u == sto.frames[f].u);
        CHECK(det.frames[f].p == sto.frames[f].p);
    }
}

TEST_CASE("one-step variance matches the limit covariance") {
    SpatialGrid g(1.0, 16);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::benchmark_kinetics(16);
    LimitSettings set{1e-3, 1.0, 1e-6, 1e-9, false};
    auto s0 = benchmark_state(g);
    const double alpha = 40.0, dt = 1e-3;
    auto phi = TestFunction::sine_mode(g, 2, 1, 1);
    auto pairing = [&](const StateFields& p) {
        double v = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t x = 0; x < 16; ++x) v += g.h() * phi.phi[i][x] * p[i][x];
        return v;
    };
    LimitSolver det(g, op, kin, set);
    const double base = pairing(step_limit(det, s0, dt).p);
    LangevinIntegrator lang(g, op, kin, set, noise_scale_for(alpha));
    std::vector<double> samples;
    for (std::uint64_t r = 0; r < 10000; ++r) {
        CounterRng rng(6, r);
        samples.push_back(pairing(step_langevin(lang, s0, dt, rng).p) - base);
    }
    auto sum = summarize(samples);
    const double target = dt / alpha * limit_G(g, s0.u, s0.p, kin)(phi, phi);
    CHECK(std::abs(sum.variance - target) <= 3 * sum.stderr_variance);
    CHECK(std::abs(sum.mean) <= 3 * sum.stderr_mean);
    CHECK(lang.stats().max_noise_mass == 0.0);
}

TEST_CASE("zero horizon returns the initial state") {
    SpatialGrid g(1.0, 8);
    EllipticOperator op(g, 1.0);
    auto kin = oracle::benchmark_kinetics(8);
    LangevinIntegrator lang(g, op, kin, {}, 0.3);
    auto s0 = benchmark_state(g);
    CounterRng rng(2, 2);
    auto traj = solve_langevin(lang, s0, 0.0, rng, 0.1);
    REQUIRE(traj.frames.size() == 1);
    CHECK(traj.frames[0].u == s0.u);
    CHECK(traj.frames[0].p == s0.p);
}
