#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pdmpsim/errors.hpp"

using namespace pdmpsim;

TEST_CASE("grid weights sum to L and nodes are interior and increasing") {
    SpatialGrid g(2.5, 37);
    double s = 0.0;
    for (double w : g.weights()) s += w;
    CHECK(std::abs(s - 2.5) < 1e-13);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g.x(i) > 0.0);
        CHECK(g.x(i) < 2.5);
        if (i) CHECK(g.x(i) > g.x(i - 1));
    }
    CHECK_THROWS_AS(SpatialGrid(1.0, 3), ConfigError);
    CHECK_THROWS_AS(SpatialGrid(0.0, 8), ConfigError);
}

TEST_CASE("uniform ladder arithmetic") {
    SpatialGrid g(1.0, 256);
    LadderSpec spec;
    spec.levels = {{8, 10, {}, {}}, {16, 40, {}, {}}, {32, 160, {}, {}}};
    auto ladder = build_partition_ladder(g, spec);
    REQUIRE(ladder.size() == 3);
    const double dp[] = {1.0 / 8, 1.0 / 16, 1.0 / 32};
    const int lm[] = {10, 40, 160};
    for (int n = 0; n < 3; ++n) {
        CHECK(ladder[n].stats().delta_plus == doctest::Approx(dp[n]).epsilon(1e-14));
        CHECK(ladder[n].stats().ell_minus == lm[n]);
        CHECK(ladder[n].stats().balance == doctest::Approx(1.0));
        CHECK(ladder[n].alpha() == doctest::Approx(lm[n] / dp[n]));
        // delta_plus agrees with a brute-force maximum.
        double mx = 0.0;
        for (const auto& c : ladder[n].compartments()) mx = std::max(mx, c.cells() * g.h());
        CHECK(ladder[n].stats().delta_plus == doctest::Approx(mx).epsilon(1e-14));
    }
}

TEST_CASE("single compartment with one channel") {
    SpatialGrid g(3.0, 12);
    auto p = oracle::uniform_partition(g, 1, 1);
    const auto& s = p.stats();
    CHECK(s.delta_plus == doctest::Approx(3.0));
    CHECK(s.nu_plus == doctest::Approx(3.0));
    CHECK(s.nu_minus == doctest::Approx(3.0));
    CHECK(s.ell_plus == 1);
    CHECK(s.ell_minus == 1);
    CHECK(s.balance == doctest::Approx(1.0));
}

TEST_CASE("nonuniform level balance ratio") {
    SpatialGrid g(1.0, 256);
    LadderLevel lev;
    lev.lengths = {0.25, 0.75};
    lev.channel_counts = {10, 30};
    auto p = build_level(g, lev);
    CHECK(p.stats().balance == doctest::Approx(oracle::kNonuniformBalance).epsilon(1e-14));
    // brute-force min/max over compartments
    double lmin = 1e9, lmax = 0, nmin = 1e9, nmax = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        lmin = std::min<double>(lmin, p.channels(k));
        lmax = std::max<double>(lmax, p.channels(k));
        nmin = std::min(nmin, p.measure(k));
        nmax = std::max(nmax, p.measure(k));
    }
    CHECK(lmin * nmin / (lmax * nmax) == doctest::Approx(p.stats().balance).epsilon(1e-14));
}

TEST_CASE("ladder rejects under-resolved and inconsistent levels") {
    SpatialGrid g(1.0, 16);
    CHECK_THROWS_AS(oracle::uniform_partition(g, 16, 10), ResolutionError);  // one cell per compartment
    CHECK_THROWS_AS(oracle::uniform_partition(g, 5, 10), ResolutionError);
    LadderSpec bad;
    bad.levels = {{4, 10, {}, {}}, {4, 20, {}, {}}};
    CHECK_THROWS_AS(build_partition_ladder(g, bad), ValidationError);
    LadderSpec fewer;
    fewer.levels = {{4, 10, {}, {}}, {2, 20, {}, {}}};
    CHECK_THROWS_AS(build_partition_ladder(g, fewer), ValidationError);
    LadderSpec unbalanced;
    LadderLevel a;
    a.lengths = {0.25, 0.75};
    a.channel_counts = {10, 30};
    unbalanced.levels = {a};
    unbalanced.balance_tolerance = 0.1;
    CHECK_THROWS_AS(build_partition_ladder(g, unbalanced), ValidationError);
}

TEST_CASE("coordinate field on hand-built configurations") {
    SpatialGrid g(1.0, 8);
    auto one = oracle::uniform_partition(g, 1, 10);
    ChannelConfiguration c1(one, 2, {{4, 6}});
    auto z = coordinate_field(c1, one);
    for (std::size_t x = 0; x < g.size(); ++x) {
        CHECK(z.field(0)[x] == 0.4);
        CHECK(z.field(1)[x] == 0.6);
    }
    ChannelConfiguration all(one, 3, {{0, 10, 0}});
    auto za = coordinate_field(all, one);
    for (std::size_t x = 0; x < g.size(); ++x) {
        CHECK(za.field(0)[x] == 0.0);
        CHECK(za.field(1)[x] == 1.0);
        CHECK(za.field(2)[x] == 0.0);
    }

    LadderLevel lev;
    lev.lengths = {0.5, 0.5};
    lev.channel_counts = {2, 4};
    auto two = build_level(g, lev);
    ChannelConfiguration c2(two, 2, {{1, 1}, {3, 1}});
    auto z2 = coordinate_field(c2, two);
    CHECK(z2.value(0, 0) == 0.5);
    CHECK(z2.value(1, 0) == 0.75);
    CHECK(z2.field(0)[0] == 0.5);
    CHECK(z2.field(0)[7] == 0.75);

    CHECK_THROWS_AS(ChannelConfiguration(one, 2, {{4, 7}}), InvariantError);
    CHECK_THROWS_AS(ChannelConfiguration(one, 2, {{-1, 11}}), InvariantError);
}

TEST_CASE("empty compartments carry zero occupancy") {
    SpatialGrid g(1.0, 8);
    LadderLevel lev;
    lev.lengths = {0.5, 0.5};
    lev.channel_counts = {0, 4};
    auto p = build_level(g, lev);
    ChannelConfiguration c(p, 2, {{0, 0}, {1, 3}});
    auto z = coordinate_field(c, p);
    for (std::size_t x = 0; x < 4; ++x) CHECK(z.field(0)[x] + z.field(1)[x] == 0.0);
    for (std::size_t x = 4; x < 8; ++x) CHECK(z.field(0)[x] + z.field(1)[x] == 1.0);
}

TEST_CASE("compartment averages") {
    SpatialGrid g(1.0, 64);
    auto p = oracle::uniform_partition(g, 2, 5);
    GridFunction c(g.size(), 3.25);
    CHECK(compartment_average(c, 0, p) == doctest::Approx(3.25).epsilon(1e-15));
    CHECK(compartment_average(c, 1, p) == doctest::Approx(3.25).epsilon(1e-15));
    auto lin = g.tabulate([](double x) { return x; });
    CHECK(std::abs(compartment_average(lin, 0, p) - 0.25) < 1e-12);
    GridFunction alt(g.size());
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
    CHECK(std::abs(compartment_average(alt, 0, p)) < 1e-15);
    CHECK_THROWS_AS(compartment_average(c, 2, p), InputError);
}

TEST_CASE("jump event rates on the frozen configuration") {
    SpatialGrid g(1.0, 8);
    auto part = oracle::uniform_partition(g, 1, 10);
    auto kin = oracle::constant_kinetics(g.size(), {{0, 2}, {1, 0}});
    ChannelConfiguration c(part, 2, {{4, 6}});
    auto table = jump_event_rates(GridFunction(g.size(), 0.0), c, kin, part);
    CHECK(table.total == oracle::kFrozenTotal);
    double r01 = 0, r10 = 0;
    for (std::size_t e = 0; e < table.events.size(); ++e) {
        if (table.events[e].from == 0 && table.events[e].to == 1) r01 += table.rates[e];
        if (table.events[e].from == 1 && table.events[e].to == 0) r10 += table.rates[e];
    }
    CHECK(r01 == oracle::kFrozenRate01);
    CHECK(r10 == oracle::kFrozenRate10);
    CHECK(table.total <= rate_ceiling(kin, part));

    ChannelConfiguration empty0(part, 2, {{0, 10}});
    auto t0 = jump_event_rates(GridFunction(g.size(), 0.0), empty0, kin, part);
    for (std::size_t e = 0; e < t0.events.size(); ++e)
        if (t0.events[e].from == 0) CHECK(t0.rates[e] == 0.0);

    auto zero = oracle::constant_kinetics(g.size(), {{0, 0}, {0, 0}});
    CHECK(jump_event_rates(GridFunction(g.size(), 0.0), c, zero, part).total == 0.0);
}

TEST_CASE("rate functions stay within analytic bounds") {
    const RateFunction fs[] = {RateFunction::tanh_affine(1.0, 0.5, 1.0, 0.0), RateFunction::exponential(0.3, 0, -0.5),
                               RateFunction::sigmoid(2.0, 0.3, 0.1), RateFunction::linoid(0.5, 0.5, 0.2)};
    for (const auto& f : fs) {
        const double b = f.bound(-1.0, 1.5);
        for (int i = 0; i <= 1000; ++i) {
            const double v = -1.0 + 2.5 * i / 1000.0;
            CHECK(f(v) >= 0.0);
            CHECK(f(v) <= b * (1 + 1e-12));
        }
    }
    // linoid removable singularity at v = v_half
    CHECK(RateFunction::linoid(0.5, 0.5, 0.2)(0.5) == doctest::Approx(0.5));
    CHECK(RateFunction::linoid(0.5, 0.5, 0.2)(0.5 + 1e-10) == doctest::Approx(0.5));
}

TEST_CASE("kinetics validation names the offending rate") {
    std::vector<std::vector<std::optional<RateFunction>>> rates(2, std::vector<std::optional<RateFunction>>(2));
    rates[0][1] = RateFunction::tanh_affine(0.2, 0.5, 1.0, 0.0);  // negative for v < -0.55
    rates[1][0] = RateFunction::constant(1.0);
    ChannelKinetics kin(2, rates, {GridFunction(4, 0.0), GridFunction(4, 1.0)}, {-1.0, 1.0});
    try {
        kin.validate();
        FAIL("expected KineticsError");
    } catch (const KineticsError& e) {
        CHECK(std::string(e.what()).find("q[0->1]") != std::string::npos);
    }
    rates[0][1] = RateFunction::constant(2.0).with_declared_bound(1.0);
    ChannelKinetics under(2, rates, {GridFunction(4, 0.0), GridFunction(4, 1.0)}, {0.0, 1.0});
    CHECK_THROWS_AS(under.validate(), KineticsError);
    CHECK_THROWS_AS(ChannelKinetics(2, rates, {GridFunction(4, -1.0), GridFunction(4, 1.0)}, {0.0, 1.0}),
                    ConfigError);
}

TEST_CASE("local rates flag non-finite evaluations") {
    SpatialGrid g(1.0, 8);
    auto part = oracle::uniform_partition(g, 2, 4);
    std::vector<std::vector<std::optional<RateFunction>>> rates(2, std::vector<std::optional<RateFunction>>(2));
    rates[0][1] = RateFunction::exponential(1.0, 0.0, 1e-2);
    rates[1][0] = RateFunction::constant(1.0);
    ChannelKinetics kin(2, rates, {GridFunction(8, 0.0), GridFunction(8, 0.0)}, {0.0, 1.0});
    GridFunction u(8, 10.0);  // outside the reversal range: exp(1000) overflows
    try {
        local_rates(u, kin, part);
        FAIL("expected KineticsError");
    } catch (const KineticsError& e) {
        CHECK(std::string(e.what()).find("q[0->1]") != std::string::npos);
    }
}

TEST_CASE("initial configuration by largest remainder conserves counts") {
    SpatialGrid g(1.0, 32);
    auto part = oracle::uniform_partition(g, 4, 7);
    StateFields p = {GridFunction(32, 1.0 / 3), GridFunction(32, 1.0 / 3), GridFunction(32, 1.0 / 3)};
    auto c = ChannelConfiguration::from_fractions(part, p);
    c.check_conservation(part);
    for (std::size_t k = 0; k < 4; ++k) {
        int s = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(c.count(k, i) >= 2);
            CHECK(c.count(k, i) <= 3);
            s += c.count(k, i);
        }
        CHECK(s == 7);
    }
    StateFields exact = {GridFunction(32, 0.4), GridFunction(32, 0.6)};
    auto part10 = oracle::uniform_partition(g, 4, 10);
    auto ce = ChannelConfiguration::from_fractions(part10, exact);
    CHECK(ce.count(0, 0) == 4);
    CHECK(ce.count(0, 1) == 6);
}

TEST_CASE("jumps conserve channel numbers") {
    SpatialGrid g(1.0, 8);
    auto part = oracle::uniform_partition(g, 2, 5);
    ChannelConfiguration c(part, 3, {{1, 2, 2}, {5, 0, 0}});
    c.apply({0, 1, 2});
    CHECK(c.count(0, 1) == 1);
    CHECK(c.count(0, 2) == 3);
    CHECK(c.count(1, 0) == 5);
    c.check_conservation(part);
    CHECK_THROWS_AS(c.apply({1, 1, 0}), InternalError);
}
