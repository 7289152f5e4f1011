#include "pdmpsim/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

using nlohmann::json;

namespace {

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

const json& need(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
    return *it;
}

double number(const json& v, const std::string& what) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    }
    throw ConfigError(what + " must be a number");
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, where + "." + key);
}

double positive(double v, const std::string& what) {
    if (!(v > 0.0) || std::isnan(v)) throw ConfigError(what + " must be > 0");
    return v;
}

std::size_t index(const json& v, const std::string& what) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(what + " must be a non-negative integer");
    return v.get<std::size_t>();
}

// A number (constant field) or an array of N values.
GridFunction grid_field(const json& v, const SpatialGrid& grid, const std::string& what) {
    if (v.is_number()) return GridFunction(grid.size(), v.get<double>());
    if (v.is_array()) {
        if (v.size() != grid.size())
            throw ConfigError(what + " has " + std::to_string(v.size()) + " values, grid has " +
                              std::to_string(grid.size()));
        GridFunction f;
        for (const auto& x : v) f.push_back(number(x, what));
        return f;
    }
    throw ConfigError(what + " must be a number or an array");
}

RateFunction parse_rate(const json& r, const std::string& where) {
    const std::string fam = need(r, "family", where).get<std::string>();
    std::optional<double> bound;
    if (r.contains("bound")) bound = number(r["bound"], where + ".bound");
    RateFunction f = RateFunction::constant(0.0);
    if (fam == "constant") {
        allow_keys(r, where, {"from", "to", "family", "value", "bound"});
        f = RateFunction::constant(number(need(r, "value", where), where + ".value"));
    } else if (fam == "tanh_affine") {
        allow_keys(r, where, {"from", "to", "family", "base", "amplitude", "slope", "shift", "bound"});
        f = RateFunction::tanh_affine(number(need(r, "base", where), where), number(need(r, "amplitude", where), where),
                                      number_or(r, "slope", 1.0, where), number_or(r, "shift", 0.0, where));
    } else if (fam == "exponential" || fam == "sigmoid" || fam == "linoid") {
        allow_keys(r, where, {"from", "to", "family", "scale", "v_half", "width", "bound"});
        double s = number(need(r, "scale", where), where), vh = number_or(r, "v_half", 0.0, where),
               w = number(need(r, "width", where), where);
        f = fam == "exponential" ? RateFunction::exponential(s, vh, w)
            : fam == "sigmoid"   ? RateFunction::sigmoid(s, vh, w)
                                 : RateFunction::linoid(s, vh, w);
    } else {
        throw ConfigError("unknown rate family '" + fam + "' in " + where);
    }
    if (bound) f = f.with_declared_bound(*bound);
    return f;
}

LadderSpec parse_ladder(const json& j) {
    allow_keys(j, "model.ladder", {"levels", "balance_tolerance"});
    LadderSpec spec;
    const auto& levels = need(j, "levels", "model.ladder");
    if (!levels.is_array() || levels.empty()) throw ConfigError("model.ladder.levels must be a non-empty array");
    for (std::size_t n = 0; n < levels.size(); ++n) {
        const auto& l = levels[n];
        const std::string where = "model.ladder.levels[" + std::to_string(n) + "]";
        LadderLevel lev;
        if (l.contains("lengths")) {
            allow_keys(l, where, {"lengths", "channels"});
            for (const auto& x : l["lengths"]) lev.lengths.push_back(number(x, where + ".lengths"));
            const auto& ch = need(l, "channels", where);
            if (ch.is_array())
                for (const auto& c : ch) lev.channel_counts.push_back(c.get<int>());
            else
                lev.channel_counts.assign(lev.lengths.size(), ch.get<int>());
        } else {
            allow_keys(l, where, {"compartments", "channels"});
            lev.compartments = index(need(l, "compartments", where), where + ".compartments");
            lev.channels = need(l, "channels", where).get<int>();
        }
        spec.levels.push_back(std::move(lev));
    }
    if (j.contains("balance_tolerance"))
        spec.balance_tolerance = positive(number(j["balance_tolerance"], "balance_tolerance"), "balance_tolerance");
    return spec;
}

SolverSettings parse_solver(const json& j) {
    SolverSettings s;
    if (j.is_null()) return s;
    allow_keys(j, "solver", {"dt_max", "theta", "samples_per_gap", "safety", "bound_tolerance", "jump_time_method"});
    s.dt_max = positive(number_or(j, "dt_max", s.dt_max, "solver"), "solver.dt_max");
    s.theta = number_or(j, "theta", s.theta, "solver");
    if (j.contains("samples_per_gap")) s.samples_per_gap = index(j["samples_per_gap"], "solver.samples_per_gap");
    if (s.samples_per_gap == 0) throw ConfigError("solver.samples_per_gap must be >= 1");
    s.safety = positive(number_or(j, "safety", s.safety, "solver"), "solver.safety");
    s.bound_tolerance = positive(number_or(j, "bound_tolerance", s.bound_tolerance, "solver"), "solver.bound_tolerance");
    if (j.contains("jump_time_method")) {
        auto m = j["jump_time_method"].get<std::string>();
        if (m == "integrated-hazard") s.method = JumpTimeMethod::integrated_hazard;
        else if (m == "thinning") s.method = JumpTimeMethod::thinning;
        else throw ConfigError("solver.jump_time_method must be integrated-hazard or thinning");
    }
    return s;
}

std::unique_ptr<Model> parse_model(const json& j, const SolverSettings& solver) {
    allow_keys(j, "model", {"grid", "diffusion", "kinetics", "ladder", "initial"});
    const auto& g = need(j, "grid", "model");
    allow_keys(g, "model.grid", {"L", "N"});
    SpatialGrid grid(number(need(g, "L", "model.grid"), "model.grid.L"), index(need(g, "N", "model.grid"), "model.grid.N"));
    GridFunction a = grid_field(need(j, "diffusion", "model"), grid, "model.diffusion");

    const auto& k = need(j, "kinetics", "model");
    allow_keys(k, "model.kinetics", {"states", "rates", "conductance", "reversal"});
    const std::size_t m = index(need(k, "states", "model.kinetics"), "model.kinetics.states");
    if (m < 2) throw ConfigError("model.kinetics.states must be >= 2");
    std::vector<std::vector<std::optional<RateFunction>>> rates(m, std::vector<std::optional<RateFunction>>(m));
    const auto& rl = need(k, "rates", "model.kinetics");
    if (!rl.is_array()) throw ConfigError("model.kinetics.rates must be an array");
    for (std::size_t r = 0; r < rl.size(); ++r) {
        const std::string where = "model.kinetics.rates[" + std::to_string(r) + "]";
        std::size_t from = index(need(rl[r], "from", where), where + ".from");
        std::size_t to = index(need(rl[r], "to", where), where + ".to");
        if (from >= m || to >= m || from == to) throw ConfigError(where + " has invalid from/to");
        if (rates[from][to]) throw ConfigError(where + " duplicates " + rate_label(from, to));
        rates[from][to] = parse_rate(rl[r], where);
    }
    const auto& gc = need(k, "conductance", "model.kinetics");
    const auto& ev = need(k, "reversal", "model.kinetics");
    if (!gc.is_array() || gc.size() != m) throw ConfigError("model.kinetics.conductance needs one entry per state");
    if (!ev.is_array() || ev.size() != m) throw ConfigError("model.kinetics.reversal needs one entry per state");
    StateFields cond;
    std::vector<double> rev;
    for (std::size_t i = 0; i < m; ++i) {
        cond.push_back(grid_field(gc[i], grid, "model.kinetics.conductance[" + std::to_string(i) + "]"));
        rev.push_back(number(ev[i], "model.kinetics.reversal"));
    }
    ChannelKinetics kin(m, std::move(rates), std::move(cond), std::move(rev));
    kin.validate();

    LadderSpec ladder = parse_ladder(need(j, "ladder", "model"));

    const auto& init = need(j, "initial", "model");
    allow_keys(init, "model.initial", {"u", "p"});
    InitialData data;
    const auto& uj = need(init, "u", "model.initial");
    if (uj.is_object()) {
        const std::string kind = need(uj, "kind", "model.initial.u").get<std::string>();
        if (kind == "constant") {
            allow_keys(uj, "model.initial.u", {"kind", "value"});
            data.u0.assign(grid.size(), number(need(uj, "value", "model.initial.u"), "model.initial.u.value"));
        } else if (kind == "sine") {
            allow_keys(uj, "model.initial.u", {"kind", "amplitude", "mode"});
            double amp = number(need(uj, "amplitude", "model.initial.u"), "model.initial.u.amplitude");
            double mode = number_or(uj, "mode", 1.0, "model.initial.u");
            data.u0 = grid.tabulate([&](double x) { return amp * std::sin(mode * std::numbers::pi * x / grid.length()); });
        } else {
            throw ConfigError("model.initial.u.kind must be constant or sine");
        }
    } else {
        data.u0 = grid_field(uj, grid, "model.initial.u");
    }
    const auto& pj = need(init, "p", "model.initial");
    if (!pj.is_array() || pj.size() != m) throw ConfigError("model.initial.p needs one entry per state");
    for (std::size_t i = 0; i < m; ++i) data.p0.push_back(grid_field(pj[i], grid, "model.initial.p"));
    if (mass_defect(data.p0) > 1e-12) throw ConfigError("model.initial.p must sum to 1 at every node");
    for (const auto& pi : data.p0)
        for (double v : pi)
            if (v < 0.0 || v > 1.0) throw ConfigError("model.initial.p must lie in [0, 1]");
    for (double v : data.u0)
        if (v < kin.u_lower() || v > kin.u_upper())
            throw ConfigError("model.initial.u must lie within the reversal-potential bounds");

    if (solver.dt_max * kin.max_conductance() > 1.0)
        throw ConfigError("solver.dt_max * max conductance exceeds 1; the explicit reaction step would lose the "
                          "maximum principle");
    return std::make_unique<Model>(std::move(grid), std::move(a), std::move(kin), std::move(ladder), std::move(data),
                                   solver);
}

StudySpec parse_study(const json& j) {
    allow_keys(j, "study", {"kind", "T", "replicates", "cadence", "level", "test_functions", "tolerances", "alpha_n",
                            "ensemble"});
    StudySpec s;
    s.kind = need(j, "kind", "study").get<std::string>();
    static const std::set<std::string> kinds = {"lln", "clt", "ito", "diagnostics", "langevin-compare"};
    if (!kinds.count(s.kind)) throw ConfigError("study.kind '" + s.kind + "' is not supported");
    s.T = positive(number_or(j, "T", s.T, "study"), "study.T");
    if (j.contains("replicates")) s.replicates = index(j["replicates"], "study.replicates");
    s.cadence = positive(number_or(j, "cadence", s.cadence, "study"), "study.cadence");
    if (j.contains("level")) s.level = j["level"].get<int>();
    if (j.contains("test_functions")) {
        const auto& t = j["test_functions"];
        allow_keys(t, "study.test_functions", {"sine_modes", "states", "constant", "indicator_states"});
        if (t.contains("sine_modes")) s.test_functions.sine_modes = t["sine_modes"].get<int>();
        if (t.contains("states"))
            for (const auto& v : t["states"]) s.test_functions.states.push_back(index(v, "study.test_functions.states"));
        if (t.contains("constant")) s.test_functions.include_constant = t["constant"].get<bool>();
        if (t.contains("indicator_states"))
            for (const auto& v : t["indicator_states"])
                s.test_functions.indicator_states.push_back(index(v, "study.test_functions.indicator_states"));
    }
    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        allow_keys(t, "study.tolerances", {"lln_l2", "z_score", "h1_ceiling", "beta", "quadrature"});
        auto& tol = s.tolerances;
        tol.lln_l2 = positive(number_or(t, "lln_l2", tol.lln_l2, "study.tolerances"), "study.tolerances.lln_l2");
        tol.z_score = positive(number_or(t, "z_score", tol.z_score, "study.tolerances"), "study.tolerances.z_score");
        tol.h1_ceiling =
            positive(number_or(t, "h1_ceiling", tol.h1_ceiling, "study.tolerances"), "study.tolerances.h1_ceiling");
        tol.beta = positive(number_or(t, "beta", tol.beta, "study.tolerances"), "study.tolerances.beta");
        tol.quadrature =
            positive(number_or(t, "quadrature", tol.quadrature, "study.tolerances"), "study.tolerances.quadrature");
    }
    if (j.contains("alpha_n")) {
        const auto& a = j["alpha_n"];
        if (!(a.is_string() && a.get<std::string>() == "level"))
            s.alpha_n = positive(number(a, "study.alpha_n"), "study.alpha_n");
    }
    if (j.contains("ensemble")) s.ensemble = index(j["ensemble"], "study.ensemble");
    if (s.replicates < minimum_replicates(s.kind))
        throw ConfigError("study.replicates = " + std::to_string(s.replicates) + " is below the minimum of " +
                          std::to_string(minimum_replicates(s.kind)) + " for " + s.kind);
    return s;
}

}  // namespace

std::size_t minimum_replicates(const std::string& kind) {
    if (kind == "ito") return 1000;
    if (kind == "clt") return 100;
    return 10;
}

Model::Model(SpatialGrid grid, GridFunction diffusion, ChannelKinetics kinetics, LadderSpec ladder,
             InitialData initial, SolverSettings solver)
    : grid_(std::move(grid)),
      diffusion_(grid_, std::move(diffusion)),
      kinetics_(std::move(kinetics)),
      ladder_(build_partition_ladder(grid_, ladder)),
      initial_(std::move(initial)),
      solver_(solver) {}

ModelView Model::view(std::size_t level) const { return {grid_, diffusion_, kinetics_, ladder_.at(level), solver_}; }

HybridState Model::initial_hybrid(std::size_t level) const {
    const auto& part = ladder_.at(level);
    return HybridState::make(initial_.u0, ChannelConfiguration::from_fractions(part, initial_.p0), part);
}

LimitState Model::initial_limit() const { return {initial_.u0, initial_.p0, 0.0}; }

LimitSettings Model::limit_settings() const {
    LimitSettings s;
    s.dt_max = solver_.dt_max;
    s.theta = solver_.theta;
    s.bound_tolerance = solver_.bound_tolerance;
    return s;
}

double Model::initial_residual(std::size_t level) const {
    const auto& part = ladder_.at(level);
    auto config = ChannelConfiguration::from_fractions(part, initial_.p0);
    CoordinateField z(config, part);
    double s = 0.0;
    for (std::size_t k = 0; k < part.size(); ++k) {
        if (part[k].empty()) continue;
        for (std::size_t x = part[k].first_cell; x < part[k].end_cell; ++x)
            for (std::size_t i = 0; i < z.states(); ++i) {
                double d = z.field(i)[x] - initial_.p0[i][x];
                s += d * d;
            }
    }
    return std::sqrt(s * grid_.h());
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string ExperimentConfig::hash() const {
    json canon = source;
    canon["seed"] = execution.seed;
    return fnv1a_hex(canon.dump());
}

json ExperimentConfig::provenance() const {
    return {{"config_hash", hash()},
            {"seed", execution.seed},
            {"code_version", kCodeVersion},
            {"schema_version", schema_version},
            {"config", source}};
}

std::size_t ExperimentConfig::study_level() const {
    const int n = study ? study->level : -1;
    const int L = static_cast<int>(model->levels());
    if (n < 0) return static_cast<std::size_t>(L - 1);
    if (n >= L) throw ConfigError("study.level " + std::to_string(n) + " exceeds the ladder");
    return static_cast<std::size_t>(n);
}

std::vector<TestFunction> ExperimentConfig::test_functions() const {
    TestFunctionSpec spec = study ? study->test_functions : TestFunctionSpec{};
    const auto& grid = model->grid();
    const std::size_t m = model->kinetics().states();
    std::vector<std::size_t> states = spec.states;
    if (states.empty())
        for (std::size_t i = 0; i < m; ++i) states.push_back(i);
    std::vector<TestFunction> out;
    for (std::size_t s : states) {
        if (s >= m) throw ConfigError("test function state out of range");
        for (int k = 1; k <= spec.sine_modes; ++k) out.push_back(TestFunction::sine_mode(grid, m, s, k));
    }
    for (std::size_t s : spec.indicator_states) {
        if (s >= m) throw ConfigError("indicator state out of range");
        out.push_back(TestFunction::state_constant(grid, m, s, 1.0));
    }
    if (spec.include_constant) out.push_back(TestFunction::constant_across_states(grid, m, 1.0));
    return out;
}

ExperimentConfig parse_config(const json& doc) {
    allow_keys(doc, "config", {"schema_version", "model", "solver", "study", "execution", "description"});
    if (!doc.contains("schema_version")) throw ConfigError("schema_version is mandatory");
    ExperimentConfig cfg;
    cfg.schema_version = doc["schema_version"].get<int>();
    if (cfg.schema_version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
    const json solver_j = doc.contains("solver") ? doc["solver"] : json();
    SolverSettings solver = parse_solver(solver_j);
    cfg.model = parse_model(need(doc, "model", "config"), solver);
    if (doc.contains("study")) cfg.study = parse_study(doc["study"]);
    if (doc.contains("execution")) {
        const auto& e = doc["execution"];
        allow_keys(e, "execution", {"seed", "workers", "out"});
        if (e.contains("seed")) cfg.execution.seed = e["seed"].get<std::uint64_t>();
        if (e.contains("workers")) cfg.execution.workers = e["workers"].get<unsigned>();
        if (e.contains("out")) cfg.execution.out = e["out"].get<std::string>();
    }
    cfg.source = json::object();
    cfg.source["schema_version"] = cfg.schema_version;
    cfg.source["model"] = doc["model"];
    cfg.source["solver"] = solver_j;
    if (doc.contains("study")) cfg.source["study"] = doc["study"];
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

}  // namespace pdmpsim
