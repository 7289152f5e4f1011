#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "pdmpsim/rng.hpp"
#include "pdmpsim/stats.hpp"

using namespace pdmpsim;

TEST_CASE("philox known-answer vector") {
    auto out = philox4x32({0, 0, 0, 0}, {0, 0});
    for (int i = 0; i < 4; ++i) CHECK(out[i] == oracle::kPhiloxZero[i]);
}

TEST_CASE("streams are reproducible and distinct") {
    CounterRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    std::vector<std::uint64_t> va, vb, vc, vd;
    for (int i = 0; i < 64; ++i) {
        va.push_back(a.next_u64());
        vb.push_back(b.next_u64());
        vc.push_back(c.next_u64());
        vd.push_back(d.next_u64());
    }
    CHECK(va == vb);
    CHECK(va != vc);
    CHECK(va != vd);
    std::set<std::uint64_t> ids;
    for (std::uint64_t n = 0; n < 4; ++n)
        for (std::uint64_t r = 0; r < 100; ++r)
            for (std::uint64_t s = 0; s < 4; ++s) ids.insert(replicate_stream(n, r, s));
    CHECK(ids.size() == 1600);
}

TEST_CASE("uniform, exponential and normal moments") {
    CounterRng rng(2026, 1);
    const int n = 200000;
    std::vector<double> u, e, z;
    for (int i = 0; i < n; ++i) {
        u.push_back(rng.uniform());
        e.push_back(rng.exponential());
        z.push_back(rng.normal());
    }
    for (double x : u) {
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
    auto su = summarize(u), se = summarize(e), sz = summarize(z);
    CHECK(std::abs(su.mean - 0.5) <= 4 * su.stderr_mean);
    CHECK(std::abs(su.variance - 1.0 / 12) <= 4 * su.stderr_variance);
    CHECK(std::abs(se.mean - 1.0) <= 4 * se.stderr_mean);
    CHECK(std::abs(se.variance - 1.0) <= 4 * se.stderr_variance);
    CHECK(std::abs(sz.mean) <= 4 * sz.stderr_mean);
    CHECK(std::abs(sz.variance - 1.0) <= 4 * sz.stderr_variance);
    CHECK(std::abs(sz.skew_z) < 4);
    CHECK(std::abs(sz.kurtosis_z) < 4);
}

TEST_CASE("two-sample KS separates shifted samples") {
    CounterRng rng(5, 0);
    std::vector<double> a, b, c;
    for (int i = 0; i < 5000; ++i) {
        a.push_back(rng.normal());
        b.push_back(rng.normal());
        c.push_back(rng.normal() + 0.2);
    }
    CHECK(ks_two_sample(a, b).p_value > 0.001);
    CHECK(ks_two_sample(a, c).p_value < 1e-6);
    CHECK(kolmogorov_sf(0.0) == doctest::Approx(1.0));
    CHECK(kolmogorov_sf(1.36) == doctest::Approx(0.049).epsilon(0.02));
}
