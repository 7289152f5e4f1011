// pdmpsim command-line front end.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmpsim/config.hpp"
#include "pdmpsim/engine.hpp"
#include "pdmpsim/errors.hpp"
#include "pdmpsim/langevin.hpp"
#include "pdmpsim/limit.hpp"
#include "pdmpsim/report.hpp"
#include "pdmpsim/studies.hpp"

namespace {

using nlohmann::json;
using namespace pdmpsim;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<std::size_t> replicates;
    std::optional<double> T;
    std::optional<int> level;
    std::vector<std::string> sets;  // dotted.key=json
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
}

void apply_set(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key.path=value, got " + assignment);
    std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
}

ExperimentConfig load(const std::string& path, const Overrides& o, const std::string& study_kind = "") {
    json doc = read_json(path);
    for (const auto& s : o.sets) apply_set(doc, s);
    if (o.seed) doc["execution"]["seed"] = *o.seed;
    if (o.workers) doc["execution"]["workers"] = *o.workers;
    if (o.out) doc["execution"]["out"] = *o.out;
    if (!study_kind.empty()) doc["study"]["kind"] = study_kind;
    if (o.replicates) doc["study"]["replicates"] = *o.replicates;
    if (o.T) doc["study"]["T"] = *o.T;
    if (o.level) doc["study"]["level"] = *o.level;
    return parse_config(doc);
}

StudySpec run_spec(const ExperimentConfig& cfg) { return cfg.study ? *cfg.study : StudySpec{}; }

std::filesystem::path out_dir(const ExperimentConfig& cfg) {
    std::filesystem::path dir(cfg.execution.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

int cmd_validate(const ExperimentConfig& cfg) {
    const Model& m = *cfg.model;
    json levels = json::array();
    for (std::size_t n = 0; n < m.levels(); ++n) {
        const auto& s = m.level(n).stats();
        levels.push_back({{"level", n},
                          {"compartments", m.level(n).size()},
                          {"delta_plus", s.delta_plus},
                          {"ell_minus", s.ell_minus},
                          {"ell_plus", s.ell_plus},
                          {"nu_plus", s.nu_plus},
                          {"balance", s.balance},
                          {"alpha", s.alpha},
                          {"total_channels", s.total_channels},
                          {"rate_ceiling", rate_ceiling(m.kinetics(), m.level(n))},
                          {"initial_residual", m.initial_residual(n)}});
    }
    json out = {{"valid", true},
                {"config_hash", cfg.hash()},
                {"states", m.kinetics().states()},
                {"grid_nodes", m.grid().size()},
                {"q_bar", m.kinetics().q_bar()},
                {"levels", levels}};
    if (cfg.study) out["study"] = {{"kind", cfg.study->kind}, {"replicates", cfg.study->replicates}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_simulate(const ExperimentConfig& cfg) {
    const StudySpec st = run_spec(cfg);
    const std::size_t n = cfg.study_level();
    const ModelView view = cfg.model->view(n);
    CounterRng rng(cfg.execution.seed, replicate_stream(n, 0, salt_simulate));
    SimulationOptions opt;
    opt.T = st.T;
    opt.cadence = st.cadence;
    HybridPath path = simulate(view, cfg.model->initial_hybrid(n), rng, opt);
    auto file = out_dir(cfg) / "path.jsonl";
    write_text_file(file, path_to_jsonl(path, view.partition, cfg.hash()));
    const bool ok = path.stats.max_bound_excess <= view.solver.bound_tolerance;
    json summary = {{"path", file.string()},
                    {"level", n},
                    {"jumps", path.stats.jumps},
                    {"substeps", path.stats.substeps},
                    {"max_total_rate", path.stats.max_total_rate},
                    {"max_bound_excess", path.stats.max_bound_excess},
                    {"verdict", ok ? "pass" : "fail"}};
    std::cout << summary.dump(2) << '\n';
    return ok ? 0 : 2;
}

int cmd_limit(const ExperimentConfig& cfg) {
    const StudySpec st = run_spec(cfg);
    const Model& m = *cfg.model;
    LimitSolver solver(m.grid(), m.diffusion(), m.kinetics(), m.limit_settings());
    auto traj = solve_limit(solver, m.initial_limit(), st.T, st.cadence);
    auto file = out_dir(cfg) / "limit.jsonl";
    std::ostringstream os;
    write_field_trajectory_jsonl(os, "deterministic", traj.frames,
                                 {{"config_hash", cfg.hash()}, {"T", st.T}, {"dt", solver.dt()}});
    write_text_file(file, os.str());
    const bool ok = traj.max_mass_drift <= 1e-8 && traj.max_bound_excess <= m.solver().bound_tolerance;
    json summary = {{"path", file.string()},
                    {"steps", traj.steps},
                    {"max_mass_drift", traj.max_mass_drift},
                    {"max_bound_excess", traj.max_bound_excess},
                    {"verdict", ok ? "pass" : "fail"}};
    std::cout << summary.dump(2) << '\n';
    return ok ? 0 : 2;
}

int cmd_langevin(const ExperimentConfig& cfg) {
    const StudySpec st = run_spec(cfg);
    const Model& m = *cfg.model;
    const std::size_t n = cfg.study_level();
    const double alpha = st.alpha_n ? *st.alpha_n : m.level(n).alpha();
    LimitSettings ls = m.limit_settings();
    ls.enforce_bounds = false;
    LangevinIntegrator integ(m.grid(), m.diffusion(), m.kinetics(), ls, noise_scale_for(alpha));
    CounterRng rng(cfg.execution.seed, replicate_stream(n, 0, salt_langevin));
    auto traj = solve_langevin(integ, m.initial_limit(), st.T, rng, st.cadence);
    auto file = out_dir(cfg) / "langevin.jsonl";
    std::ostringstream os;
    write_field_trajectory_jsonl(os, "langevin", traj.frames,
                                 {{"config_hash", cfg.hash()},
                                  {"seed", cfg.execution.seed},
                                  {"T", st.T},
                                  {"alpha_n", std::isfinite(alpha) ? json(alpha) : json("infinity")},
                                  {"dt", integ.dt()}});
    write_text_file(file, os.str());
    const auto& s = traj.stats;
    json summary = {{"path", file.string()},
                    {"steps", s.steps},
                    {"clamp_activations", s.clamp_activations},
                    {"excursion_steps", s.excursion_steps},
                    {"min_p", s.min_p},
                    {"max_p", s.max_p},
                    {"max_noise_mass", s.max_noise_mass},
                    {"max_mass_drift", s.max_mass_drift},
                    {"max_u_excess", s.max_u_excess}};
    std::cout << summary.dump(2) << '\n';
    if (s.clamp_activations > 0)
        std::cerr << "note: covariance clamp p* = max(P, 0) activated at " << s.clamp_activations << " node-steps\n";
    return 0;
}

int cmd_study(const ExperimentConfig& cfg) {
    StudyReport rep = run_study(cfg);
    auto files = emit_outputs(rep, out_dir(cfg));
    for (const auto& m : rep.metrics)
        if (m.verdict == Verdict::fail)
            std::cerr << "FAIL " << m.study << " level " << m.level << " " << m.metric << " = "
                      << format_number(m.estimate) << '\n';
    for (const auto& note : rep.notes) std::cerr << "note: " << note << '\n';
    std::cout << rep.study << ": " << (rep.pass() ? "pass" : "fail") << " (" << rep.metrics.size() << " metrics, "
              << rep.failures() << " failing, " << format_number(rep.wall_seconds) << " s)\n";
    for (const auto& f : files) std::cout << "  wrote " << f.string() << '\n';
    return rep.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pdmpsim: compartmental PDMP membrane simulator and ladder studies"};
    app.require_subcommand(1);
    Overrides o;
    std::string config_path, study_kind;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", o.seed, "override execution.seed");
        sub->add_option("--workers", o.workers, "override execution.workers");
        sub->add_option("--out", o.out, "override execution.out");
        sub->add_option("--replicates", o.replicates, "override study.replicates");
        sub->add_option("--T", o.T, "override study.T");
        sub->add_option("--level", o.level, "override study.level");
        sub->add_option("--set", o.sets, "override any key: dotted.path=json")->take_all();
    };
    auto* simulate_cmd = app.add_subcommand("simulate", "simulate one PDMP path and export it as JSON lines");
    auto* limit_cmd = app.add_subcommand("limit", "solve the deterministic limit system");
    auto* langevin_cmd = app.add_subcommand("langevin", "integrate one Langevin trajectory");
    auto* study_cmd = app.add_subcommand("study", "run a ladder study and write CSV/JSON/SVG reports");
    auto* validate_cmd = app.add_subcommand("validate-config", "parse and check a config");
    for (auto* s : {simulate_cmd, limit_cmd, langevin_cmd, validate_cmd}) add_common(s);
    study_cmd->add_option("kind", study_kind, "lln | clt | ito | diagnostics | langevin-compare")
        ->required()
        ->check(CLI::IsMember({"lln", "clt", "ito", "diagnostics", "langevin-compare"}));
    add_common(study_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (study_cmd->parsed()) return cmd_study(load(config_path, o, study_kind));
        ExperimentConfig cfg = load(config_path, o);
        if (validate_cmd->parsed()) return cmd_validate(cfg);
        if (simulate_cmd->parsed()) return cmd_simulate(cfg);
        if (limit_cmd->parsed()) return cmd_limit(cfg);
        if (langevin_cmd->parsed()) return cmd_langevin(cfg);
    } catch (const pdmpsim::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
