#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "pdmpsim/errors.hpp"
#include "pdmpsim/report.hpp"
#include "pdmpsim/studies.hpp"

using namespace pdmpsim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_config() {
    return json::parse(R"({
      "schema_version": 1,
      "model": {
        "grid": {"L": 1.0, "N": 16},
        "diffusion": 1.0,
        "kinetics": {
          "states": 2,
          "rates": [
            {"from": 0, "to": 1, "family": "tanh_affine", "base": 1.0, "amplitude": 0.5, "slope": 1.0, "shift": 0.0},
            {"from": 1, "to": 0, "family": "constant", "value": 1.0}
          ],
          "conductance": [0.0, 1.0],
          "reversal": [0.0, 1.0]
        },
        "ladder": {"levels": [{"compartments": 2, "channels": 10}, {"compartments": 4, "channels": 40},
                              {"compartments": 8, "channels": 160}]},
        "initial": {"u": {"kind": "constant", "value": 0.0}, "p": [0.5, 0.5]}
      },
      "solver": {"dt_max": 0.005},
      "study": {"kind": "lln", "T": 0.2, "replicates": 20, "cadence": 0.05},
      "execution": {"seed": 7, "workers": 1, "out": "unused"}
    })");
}

const Metric* find(const StudyReport& rep, int level, const std::string& name) {
    for (const auto& m : rep.metrics)
        if (m.level == level && m.metric == name) return &m;
    return nullptr;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PDMPSIM_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("pdmpsim_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(parse_config(small_config()));

    auto extra = small_config();
    extra["model"]["grid"]["colour"] = "red";
    CHECK_THROWS_AS(parse_config(extra), ConfigError);

    auto top = small_config();
    top["tuning"] = 1;
    CHECK_THROWS_AS(parse_config(top), ConfigError);

    auto nover = small_config();
    nover.erase("schema_version");
    CHECK_THROWS_AS(parse_config(nover), ConfigError);

    auto badver = small_config();
    badver["schema_version"] = 99;
    CHECK_THROWS_AS(parse_config(badver), ConfigError);

    auto few = small_config();
    few["study"]["kind"] = "ito";
    few["study"]["replicates"] = 10;
    CHECK_THROWS_AS(parse_config(few), ConfigError);
    CHECK(minimum_replicates("ito") == 1000);

    auto stiff = small_config();
    stiff["model"]["kinetics"]["conductance"] = json::array({0.0, 500.0});
    CHECK_THROWS_AS(parse_config(stiff), ConfigError);

    auto mass = small_config();
    mass["model"]["initial"]["p"] = json::array({0.5, 0.6});
    CHECK_THROWS(parse_config(mass));
}

TEST_CASE("hash ignores execution details but not the seed") {
    auto a = small_config(), b = small_config(), c = small_config();
    b["execution"]["workers"] = 8;
    b["execution"]["out"] = "elsewhere";
    c["execution"]["seed"] = 8;
    CHECK(parse_config(a).hash() == parse_config(b).hash());
    CHECK(parse_config(a).hash() != parse_config(c).hash());
}

TEST_CASE("report formats") {
    StudyReport empty;
    empty.study = "lln";
    CHECK(report_csv(empty) == "study,level,metric,estimate,stderr,n,verdict\n");

    StudyReport rep;
    rep.study = "x";
    rep.add(0, "a", 1.5, 0.25, 10, Verdict::pass);
    rep.add(-1, "b", 2.0, std::nullopt, 1, Verdict::fail);
    const auto csv = report_csv(rep);
    CHECK(csv.find("x,0,a,1.5,0.25,10,pass\n") != std::string::npos);
    CHECK(csv.find("x,all,b,2,exact,1,fail\n") != std::string::npos);
    CHECK_FALSE(rep.pass());
    CHECK(rep.failures() == 1);

    Figure fig{"error", "t", "level", "err", true, {{"l2", {0, 1, 2}, {0.2, 0.1, 0.05}}, {"sup", {0, 1, 2}, {0.4, 0.2, 0.1}}}};
    const auto svg = render_svg(fig);
    std::size_t circles = 0;
    for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
    CHECK(circles == 6);
    CHECK(svg.rfind("<svg", 0) == 0);
}

TEST_CASE("study output is reproducible and independent of the worker count") {
    auto one = parse_config(small_config());
    auto again = parse_config(small_config());
    auto eight_doc = small_config();
    eight_doc["execution"]["workers"] = 8;
    auto eight = parse_config(eight_doc);
    auto r1 = run_study(one), r2 = run_study(again), r8 = run_study(eight);
    CHECK(report_csv(r1) == report_csv(r2));
    CHECK(report_csv(r1) == report_csv(r8));
    CHECK(report_json(r1).dump(2) == report_json(r8).dump(2));
    REQUIRE(!r1.figures.empty());
    for (const auto& s : r1.figures[0].series) CHECK(s.x.size() == 3);
}

TEST_CASE("doubling replicates keeps the estimate within two standard errors") {
    auto doc = small_config();
    auto r20 = run_study(parse_config(doc));
    doc["study"]["replicates"] = 40;
    auto r40 = run_study(parse_config(doc));
    for (int level = 0; level < 3; ++level) {
        auto a = find(r20, level, "l2_error"), b = find(r40, level, "l2_error");
        REQUIRE(a);
        REQUIRE(b);
        const double se = std::hypot(*a->stderr_, *b->stderr_);
        CHECK(std::abs(a->estimate - b->estimate) <= 2 * se);
    }
}

TEST_CASE("without transitions the empirical process is the limit") {
    auto doc = small_config();
    doc["model"]["kinetics"]["rates"] = json::array();
    auto rep = run_study(parse_config(doc));
    for (int level = 0; level < 3; ++level) {
        auto m = find(rep, level, "l2_error");
        REQUIRE(m);
        CHECK(m->estimate < 1e-10);
        CHECK(find(rep, level, "jumps_mean")->estimate == 0.0);
    }
}

TEST_CASE("command-line exit codes") {
    auto dir = scratch("cli");
    auto write = [&](const std::string& name, const json& doc) {
        auto p = dir / name;
        std::ofstream(p) << doc.dump(2);
        return p.string();
    };
    const auto good = write("good.json", small_config());
    auto strict_doc = small_config();
    strict_doc["study"]["tolerances"] = {{"lln_l2", 1e-9}};
    const auto strict = write("strict.json", strict_doc);
    auto broken_doc = small_config();
    broken_doc["surprise"] = true;
    const auto broken = write("broken.json", broken_doc);
    const auto out = (dir / "out").string();

    CHECK(run_cli("validate-config " + good) == 0);
    CHECK(run_cli("validate-config " + broken) == 1);
    CHECK(run_cli("validate-config " + (dir / "missing.json").string()) == 1);
    CHECK(run_cli("study lln " + good + " --out " + out) == 0);
    CHECK(fs::exists(fs::path(out) / "lln.csv"));
    CHECK(fs::exists(fs::path(out) / "lln.json"));
    CHECK(run_cli("study lln " + strict + " --out " + out) == 2);
    CHECK(run_cli("study nonsense " + good) == 1);
    CHECK(run_cli("simulate " + good + " --out " + out + " --seed 3") == 0);
    CHECK(fs::exists(fs::path(out) / "path.jsonl"));
    CHECK(run_cli("limit " + good + " --out " + out) == 0);
    CHECK(fs::exists(fs::path(out) / "limit.jsonl"));

    const auto a = slurp(fs::path(out) / "path.jsonl");
    CHECK(run_cli("simulate " + good + " --out " + out + " --seed 3") == 0);
    CHECK(slurp(fs::path(out) / "path.jsonl") == a);
    fs::remove_all(dir);
}
