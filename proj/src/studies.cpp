#include "pdmpsim/studies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pdmpsim/engine.hpp"
#include "pdmpsim/errors.hpp"
#include "pdmpsim/langevin.hpp"
#include "pdmpsim/martingale.hpp"
#include "pdmpsim/parallel.hpp"
#include "pdmpsim/stats.hpp"

namespace pdmpsim {

using nlohmann::json;

double pair_fields(const SpatialGrid& grid, const TestFunction& phi, const StateFields& fields) {
    double s = 0.0;
    for (std::size_t i = 0; i < fields.size(); ++i) s += grid.inner(phi.phi[i], fields[i]);
    return s;
}

ReferenceSolution reference_solution(const Model& model, double T, double cadence,
                                     const std::vector<TestFunction>& phis,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    ReferenceSolution ref;
    LimitSolver solver(model.grid(), model.diffusion(), model.kinetics(), model.limit_settings());
    ref.covariance_integrals.assign(pairs.size(), 0.0);
    std::vector<double> last(pairs.size(), 0.0), cur(pairs.size(), 0.0);
    double last_t = 0.0;
    bool have = false;
    auto on_step = [&](const LimitState& s) {
        if (pairs.empty()) return;
        auto G = limit_G(model.grid(), s.u, s.p, model.kinetics());
        for (std::size_t q = 0; q < pairs.size(); ++q) cur[q] = G(phis[pairs[q].first], phis[pairs[q].second]);
        if (have)
            for (std::size_t q = 0; q < pairs.size(); ++q)
                ref.covariance_integrals[q] += 0.5 * (cur[q] + last[q]) * (s.t - last_t);
        last = cur;
        last_t = s.t;
        have = true;
    };
    ref.trajectory = solve_limit(solver, model.initial_limit(), T, cadence, on_step);
    for (const auto& f : ref.trajectory.frames) {
        auto G = limit_G(model.grid(), f.u, f.p, model.kinetics());
        std::vector<double> row;
        for (const auto& phi : phis) row.push_back(G(phi, phi));
        ref.covariance_at_frames.push_back(std::move(row));
    }
    return ref;
}

namespace {

using Clock = std::chrono::steady_clock;

struct LevelRun {
    std::size_t level;
    const ExperimentConfig& cfg;
    std::uint64_t salt;

    ModelView view() const { return cfg.model->view(level); }
    std::uint64_t stream(std::size_t r) const { return replicate_stream(level, r, salt); }
    std::function<std::string(std::size_t)> describe() const {
        const std::uint64_t seed = cfg.execution.seed;
        const std::size_t lv = level;
        const std::uint64_t s = salt;
        return [seed, lv, s](std::size_t r) {
            std::ostringstream os;
            os << "seed " << seed << ", level " << lv << ", stream " << replicate_stream(lv, r, s);
            return os.str();
        };
    }
};

StudyReport new_report(const ExperimentConfig& cfg, const std::string& study, std::uint64_t salt) {
    StudyReport rep;
    rep.study = study;
    rep.provenance = cfg.provenance();
    rep.provenance["stream_rule"] = {{"generator", "philox4x32-10"},
                                     {"key", "splitmix64(seed)"},
                                     {"stream", "replicate_stream(level, replicate, salt)"},
                                     {"salt", salt}};
    return rep;
}

const StudySpec& study_of(const ExperimentConfig& cfg) {
    if (!cfg.study) throw ConfigError("config has no study section");
    return *cfg.study;
}

void add_partition_rows(StudyReport& rep, std::size_t n, const Partition& part) {
    const auto& st = part.stats();
    rep.add(static_cast<int>(n), "compartments", static_cast<double>(part.size()), std::nullopt, 1);
    rep.add(static_cast<int>(n), "alpha", st.alpha, std::nullopt, 1);
    rep.add(static_cast<int>(n), "delta_plus", st.delta_plus, std::nullopt, 1);
}

// Strictly decreasing, or identically zero (degenerate models).
bool strictly_decreasing(const std::vector<double>& v) {
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) return true;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

bool non_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1]) return false;
    return true;
}

Verdict verdict_of(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

std::vector<double> level_axis(std::size_t levels) {
    std::vector<double> x;
    for (std::size_t n = 0; n < levels; ++n) x.push_back(static_cast<double>(n));
    return x;
}

// Accumulates int_0^T ||U||_{H1}^2 dt along the flow.
class EnergyObserver : public PathObserver {
public:
    explicit EnergyObserver(const SpatialGrid& grid) : grid_(grid) {}
    void on_flow(const PathPoint& p, bool) override {
        const double a = l2_norm(grid_, p.u), b = h1_seminorm(grid_, p.u);
        const double v = a * a + b * b;
        if (have_) value += 0.5 * (v + last_) * (p.t - last_t_);
        last_ = v;
        last_t_ = p.t;
        have_ = true;
    }
    double value = 0.0;

private:
    const SpatialGrid& grid_;
    double last_ = 0.0, last_t_ = 0.0;
    bool have_ = false;
};

double squared_distance(const SpatialGrid& grid, const GridFunction& a, const GridFunction& b) {
    double s = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) s += (a[x] - b[x]) * (a[x] - b[x]);
    return s * grid.h();
}

// Trapezoid in time over samples v(t_s).
double time_integral(const std::vector<double>& t, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    return s;
}

// ---------------------------------------------------------------- LLN

struct LlnRep {
    double l2 = 0.0, l2u = 0.0, l2z = 0.0, sup = 0.0, h1 = 0.0, excess = 0.0;
    double jumps = 0.0;
};

}  // namespace

StudyReport run_lln_study(const ExperimentConfig& cfg) {
    const StudySpec& st = study_of(cfg);
    const Model& model = *cfg.model;
    StudyReport rep = new_report(cfg, "lln", salt_lln);
    const auto ref = reference_solution(model, st.T, st.cadence, {});
    const auto& frames = ref.trajectory.frames;
    const std::size_t L = model.levels();
    const auto times = output_times(st.T, st.cadence);

    std::vector<double> l2_means, l2_se, sup_means;
    double h1_max = 0.0, excess_max = 0.0;
    for (std::size_t n = 0; n < L; ++n) {
        LevelRun run{n, cfg, salt_lln};
        const ModelView view = run.view();
        const HybridState init = model.initial_hybrid(n);
        auto reps = run_replicates<LlnRep>(
            st.replicates, cfg.execution.workers,
            [&](std::size_t r) {
                CounterRng rng(cfg.execution.seed, run.stream(r));
                EnergyObserver energy(model.grid());
                SimulationOptions opt;
                opt.T = st.T;
                opt.cadence = st.cadence;
                opt.record_jumps = false;
                opt.observer = &energy;
                HybridPath path = simulate(view, init, rng, opt);
                if (path.snapshots.size() != frames.size())
                    throw InternalError("snapshot grid does not match the deterministic output grid");
                std::vector<double> eu, ez;
                LlnRep out;
                for (std::size_t s = 0; s < frames.size(); ++s) {
                    const auto& snap = path.snapshots[s];
                    double du = squared_distance(model.grid(), snap.u, frames[s].u), dz = 0.0;
                    for (std::size_t i = 0; i < snap.z.size(); ++i)
                        dz += squared_distance(model.grid(), snap.z[i], frames[s].p[i]);
                    eu.push_back(du);
                    ez.push_back(dz);
                    out.sup = std::max(out.sup, std::sqrt(du + dz));
                }
                const double iu = time_integral(times, eu), iz = time_integral(times, ez);
                out.l2 = std::sqrt(iu + iz);
                out.l2u = std::sqrt(iu);
                out.l2z = std::sqrt(iz);
                out.h1 = energy.value;
                out.excess = path.stats.max_bound_excess;
                out.jumps = static_cast<double>(path.stats.jumps);
                return out;
            },
            run.describe());

        auto column = [&](double LlnRep::*f) {
            std::vector<double> v;
            for (const auto& r : reps) v.push_back(r.*f);
            return v;
        };
        const int lv = static_cast<int>(n);
        const std::size_t R = reps.size();
        add_partition_rows(rep, n, model.level(n));
        auto l2 = summarize(column(&LlnRep::l2));
        auto sup = summarize(column(&LlnRep::sup));
        auto l2u = summarize(column(&LlnRep::l2u));
        auto l2z = summarize(column(&LlnRep::l2z));
        rep.add(lv, "l2_error", l2.mean, l2.stderr_mean, R);
        rep.add(lv, "sup_error", sup.mean, sup.stderr_mean, R);
        rep.add(lv, "l2_error_u", l2u.mean, l2u.stderr_mean, R);
        rep.add(lv, "l2_error_z", l2z.mean, l2z.stderr_mean, R);
        auto sum_norms = column(&LlnRep::l2u);
        auto zcol = column(&LlnRep::l2z);
        for (std::size_t r = 0; r < R; ++r) sum_norms[r] += zcol[r];
        auto sn = summarize(sum_norms);
        rep.add(lv, "l2_error_sum_of_norms", sn.mean, sn.stderr_mean, R);
        auto h1 = column(&LlnRep::h1);
        const double h1_level = *std::max_element(h1.begin(), h1.end());
        h1_max = std::max(h1_max, h1_level);
        rep.add(lv, "h1_energy_max", h1_level, std::nullopt, R,
                verdict_of(h1_level <= st.tolerances.h1_ceiling));
        auto ex = column(&LlnRep::excess);
        const double ex_level = *std::max_element(ex.begin(), ex.end());
        excess_max = std::max(excess_max, ex_level);
        rep.add(lv, "membrane_bound_excess_max", ex_level, std::nullopt, R,
                verdict_of(ex_level <= model.solver().bound_tolerance));
        auto jumps = summarize(column(&LlnRep::jumps));
        rep.add(lv, "jumps_mean", jumps.mean, jumps.stderr_mean, R);
        rep.add(lv, "initial_residual", model.initial_residual(n), std::nullopt, 1);
        l2_means.push_back(l2.mean);
        l2_se.push_back(l2.stderr_mean);
        sup_means.push_back(sup.mean);
    }

    const bool ladder_ok = L >= 3;
    if (!ladder_ok) rep.notes.push_back("ladder has fewer than 3 levels; the trend verdict is informational");
    double worst_ratio = 0.0;
    for (std::size_t n = 1; n < L; ++n) worst_ratio = std::max(worst_ratio, l2_means[n] / l2_means[n - 1]);
    rep.add(-1, "l2_error_strictly_decreasing", worst_ratio, std::nullopt, L,
            ladder_ok ? verdict_of(strictly_decreasing(l2_means)) : Verdict::info);
    rep.add(-1, "l2_error_finest_below_tolerance", l2_means.back(), l2_se.back(), st.replicates,
            verdict_of(l2_means.back() < st.tolerances.lln_l2));
    rep.add(-1, "l2_error_tolerance", st.tolerances.lln_l2, std::nullopt, 1);
    rep.add(-1, "limit_mass_drift_max", ref.trajectory.max_mass_drift, std::nullopt, ref.trajectory.steps,
            verdict_of(ref.trajectory.max_mass_drift <= 1e-8));
    rep.add(-1, "limit_bound_excess_max", ref.trajectory.max_bound_excess, std::nullopt, ref.trajectory.steps,
            verdict_of(ref.trajectory.max_bound_excess <= model.solver().bound_tolerance));
    rep.add(-1, "h1_energy_max", h1_max, std::nullopt, L, verdict_of(h1_max <= st.tolerances.h1_ceiling));
    rep.add(-1, "membrane_bound_excess_max", excess_max, std::nullopt, L,
            verdict_of(excess_max <= model.solver().bound_tolerance));

    Figure fig{"error", "LLN error vs level", "level", "mean error", true, {}};
    fig.series.push_back({"L2((0,T),L2)", level_axis(L), l2_means});
    fig.series.push_back({"sup_t", level_axis(L), sup_means});
    rep.figures.push_back(std::move(fig));
    return rep;
}

// ---------------------------------------------------------------- CLT

namespace {

struct MartRep {
    std::vector<double> M;   // per test function
    std::vector<double> QV;  // per test function (when requested)
    double quad_err = 0.0;
    double excess = 0.0;
};

MartRep run_martingale_replicate(const ModelView& view, const HybridState& init, const std::vector<TestFunction>& phis,
                                 double T, CounterRng& rng, bool qv, double quad_tol) {
    MartingaleTracker tracker(phis, view.partition, {qv, false});
    SimulationOptions opt;
    opt.T = T;
    opt.record_jumps = false;
    opt.record_snapshots = false;
    opt.observer = &tracker;
    HybridPath path = simulate(view, init, rng, opt);
    MartRep out;
    for (std::size_t r = 0; r < phis.size(); ++r) {
        out.M.push_back(tracker.value(r));
        if (qv) out.QV.push_back(tracker.quadratic_variation(r));
        out.quad_err = std::max(out.quad_err, tracker.quadrature_error(r));
        if (tracker.quadrature_error(r) > quad_tol) {
            std::ostringstream msg;
            msg << "compensator quadrature error " << tracker.quadrature_error(r) << " for " << phis[r].label
                << " exceeds tolerance " << quad_tol << "; reduce solver.dt_max or raise solver.samples_per_gap";
            throw AnalysisError(msg.str());
        }
    }
    out.excess = path.stats.max_bound_excess;
    return out;
}

bool all_zero(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

StudyReport run_clt_study(const ExperimentConfig& cfg) {
    const StudySpec& st = study_of(cfg);
    const Model& model = *cfg.model;
    StudyReport rep = new_report(cfg, "clt", salt_clt);
    const auto phis = cfg.test_functions();
    const std::size_t F = phis.size();

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r < F; ++r) pairs.emplace_back(r, r);
    std::vector<std::size_t> nonconst;
    for (std::size_t r = 0; r < F; ++r)
        if (phis[r].label != "constant") nonconst.push_back(r);
    const std::size_t cross = std::min<std::size_t>(nonconst.size(), 3);
    for (std::size_t a = 0; a < cross; ++a)
        for (std::size_t b = a + 1; b < cross; ++b) pairs.emplace_back(nonconst[a], nonconst[b]);
    const auto ref = reference_solution(model, st.T, st.cadence, phis, pairs);

    const std::size_t L = model.levels();
    const std::size_t finest = L - 1;
    std::vector<std::vector<double>> ratio(F, std::vector<double>(L, 0.0));
    double excess_max = 0.0, quad_max = 0.0;
    for (std::size_t n = 0; n < L; ++n) {
        LevelRun run{n, cfg, salt_clt};
        const ModelView view = run.view();
        const HybridState init = model.initial_hybrid(n);
        const double sa = std::sqrt(model.level(n).alpha());
        auto reps = run_replicates<MartRep>(
            st.replicates, cfg.execution.workers,
            [&](std::size_t r) {
                CounterRng rng(cfg.execution.seed, run.stream(r));
                return run_martingale_replicate(view, init, phis, st.T, rng, false, st.tolerances.quadrature);
            },
            run.describe());
        const int lv = static_cast<int>(n);
        const std::size_t R = reps.size();
        add_partition_rows(rep, n, model.level(n));
        std::vector<std::vector<double>> scaled(F);
        for (const auto& x : reps) {
            for (std::size_t f = 0; f < F; ++f) scaled[f].push_back(sa * x.M[f]);
            excess_max = std::max(excess_max, x.excess);
            quad_max = std::max(quad_max, x.quad_err);
        }
        for (std::size_t f = 0; f < F; ++f) {
            const std::string& lab = phis[f].label;
            const double target = ref.covariance_integrals[f];
            if (lab == "constant") {
                const bool exact = all_zero(scaled[f]) && target == 0.0;
                rep.add(lv, "var[" + lab + "]", exact ? 0.0 : summarize(scaled[f]).variance, std::nullopt, R,
                        n == finest ? verdict_of(exact) : Verdict::info);
                rep.add(lv, "target[" + lab + "]", target, std::nullopt, 1);
                continue;
            }
            auto s = summarize(scaled[f]);
            const double z = s.stderr_variance > 0.0 ? (s.variance - target) / s.stderr_variance : 0.0;
            const bool ok = std::abs(z) <= st.tolerances.z_score;
            rep.add(lv, "var[" + lab + "]", s.variance, s.stderr_variance, R,
                    n == finest ? verdict_of(ok) : Verdict::info);
            rep.add(lv, "target[" + lab + "]", target, std::nullopt, 1);
            rep.add(lv, "z[" + lab + "]", z, std::nullopt, R);
            ratio[f][n] = target > 0.0 ? s.variance / target : 0.0;
            rep.add(lv, "ratio[" + lab + "]", ratio[f][n], target > 0.0 ? s.stderr_variance / target : 0.0, R);
            rep.add(lv, "mean[" + lab + "]", s.mean, s.stderr_mean, R);
            rep.add(lv, "skew_z[" + lab + "]", s.skew_z, std::nullopt, R);
            rep.add(lv, "kurtosis_z[" + lab + "]", s.kurtosis_z, std::nullopt, R);
        }
        for (std::size_t q = F; q < pairs.size(); ++q) {
            const auto [a, b] = pairs[q];
            const std::string name = "cov[" + phis[a].label + "," + phis[b].label + "]";
            rep.add(lv, name, covariance_of(scaled[a], scaled[b]), covariance_stderr(scaled[a], scaled[b]), R);
            rep.add(lv, "target_" + name, ref.covariance_integrals[q], std::nullopt, 1);
        }
    }
    // Distance of the variance ratio from 1 should shrink along the ladder.
    std::size_t monotone = 0, counted = 0;
    for (std::size_t f : nonconst) {
        std::vector<double> dev;
        for (std::size_t n = 0; n < L; ++n) dev.push_back(std::abs(ratio[f][n] - 1.0));
        ++counted;
        if (non_increasing(dev)) ++monotone;
    }
    rep.add(-1, "ratio_trend_monotone_fraction", counted ? double(monotone) / counted : 0.0, std::nullopt, counted);
    rep.add(-1, "membrane_bound_excess_max", excess_max, std::nullopt, L,
            verdict_of(excess_max <= model.solver().bound_tolerance));
    rep.add(-1, "compensator_quadrature_error_max", quad_max, std::nullopt, L);
    rep.add(-1, "limit_mass_drift_max", ref.trajectory.max_mass_drift, std::nullopt, ref.trajectory.steps,
            verdict_of(ref.trajectory.max_mass_drift <= 1e-8));

    Figure fig{"variance_ratio", "empirical / limit variance", "level", "ratio", false, {}};
    for (std::size_t f : nonconst) fig.series.push_back({phis[f].label, level_axis(L), ratio[f]});
    rep.figures.push_back(std::move(fig));
    return rep;
}

// ---------------------------------------------------------------- Ito

StudyReport run_ito_study(const ExperimentConfig& cfg) {
    const StudySpec& st = study_of(cfg);
    const Model& model = *cfg.model;
    StudyReport rep = new_report(cfg, "ito", salt_ito);
    const auto phis = cfg.test_functions();
    const std::size_t n = cfg.study_level();
    LevelRun run{n, cfg, salt_ito};
    const ModelView view = run.view();
    const HybridState init = model.initial_hybrid(n);
    auto reps = run_replicates<MartRep>(
        st.replicates, cfg.execution.workers,
        [&](std::size_t r) {
            CounterRng rng(cfg.execution.seed, run.stream(r));
            return run_martingale_replicate(view, init, phis, st.T, rng, true, st.tolerances.quadrature);
        },
        run.describe());
    const int lv = static_cast<int>(n);
    const std::size_t R = reps.size();
    add_partition_rows(rep, n, model.level(n));
    LocalRates q0 = local_rates(init.membrane.u, model.kinetics(), model.level(n));
    rep.add(lv, "total_rate_initial", total_rate(q0, init.config), std::nullopt, 1);
    double excess_max = 0.0;
    for (const auto& x : reps) excess_max = std::max(excess_max, x.excess);
    for (std::size_t f = 0; f < phis.size(); ++f) {
        const std::string& lab = phis[f].label;
        ItoSamples s;
        for (const auto& x : reps) {
            s.M.push_back(x.M[f]);
            s.QV.push_back(x.QV[f]);
        }
        if (all_zero(s.M) && all_zero(s.QV)) {
            rep.add(lv, "ito_residual[" + lab + "]", 0.0, std::nullopt, R, Verdict::pass);
            rep.add(lv, "mean_M[" + lab + "]", 0.0, std::nullopt, R, Verdict::pass);
            continue;
        }
        ItoReport ir = summarize_ito(s);
        rep.add(lv, "ito_lhs[" + lab + "]", ir.lhs, ir.lhs_stderr, R);
        rep.add(lv, "ito_rhs[" + lab + "]", ir.rhs, ir.rhs_stderr, R);
        rep.add(lv, "ito_residual[" + lab + "]", ir.residual, ir.combined_stderr, R,
                verdict_of(std::abs(ir.residual) <= st.tolerances.z_score * ir.combined_stderr));
        rep.add(lv, "ito_z[" + lab + "]", ir.z_score, std::nullopt, R);
        rep.add(lv, "ito_paired_stderr[" + lab + "]", ir.paired_stderr, std::nullopt, R);
        rep.add(lv, "mean_M[" + lab + "]", ir.mean_M, ir.mean_M_stderr, R,
                verdict_of(std::abs(ir.mean_M) <= st.tolerances.z_score * ir.mean_M_stderr));
    }
    rep.add(-1, "membrane_bound_excess_max", excess_max, std::nullopt, R,
            verdict_of(excess_max <= model.solver().bound_tolerance));
    return rep;
}

// ---------------------------------------------------------------- diagnostics

namespace {

struct DiagRep {
    ConditionTracker::Result res;
};

}  // namespace

StudyReport run_diagnostics_study(const ExperimentConfig& cfg) {
    const StudySpec& st = study_of(cfg);
    const Model& model = *cfg.model;
    StudyReport rep = new_report(cfg, "diagnostics", salt_diagnostics);
    const auto phis = cfg.test_functions();
    const std::size_t F = phis.size();
    const auto ref = reference_solution(model, st.T, st.cadence, phis);
    const std::size_t L = model.levels();
    const double delta0 = model.level(0).stats().delta_plus;

    std::vector<double> trace, c2, jump_max, d2_total, qv_gap_total;
    json profile = json::array();
    for (std::size_t n = 0; n < L; ++n) {
        LevelRun run{n, cfg, salt_diagnostics};
        const ModelView view = run.view();
        const HybridState init = model.initial_hybrid(n);
        const Partition& part = model.level(n);
        ConditionTracker::Settings set;
        set.alpha = part.alpha();
        set.beta = st.tolerances.beta;
        set.beta_n = st.tolerances.beta * part.stats().delta_plus / delta0;
        set.limit_values = ref.covariance_at_frames;
        auto reps = run_replicates<DiagRep>(
            st.replicates, cfg.execution.workers,
            [&](std::size_t r) {
                CounterRng rng(cfg.execution.seed, run.stream(r));
                ConditionTracker tracker(phis, view, set);
                SimulationOptions opt;
                opt.T = st.T;
                opt.cadence = st.cadence;
                opt.record_jumps = false;
                opt.record_snapshots = false;
                opt.observer = &tracker;
                simulate(view, init, rng, opt);
                return DiagRep{tracker.result()};
            },
            run.describe());
        const int lv = static_cast<int>(n);
        const std::size_t R = reps.size();
        add_partition_rows(rep, n, part);
        auto col = [&](auto get) {
            std::vector<double> v;
            for (const auto& x : reps) v.push_back(get(x.res));
            return v;
        };
        auto tr = summarize(col([](const auto& r) { return r.trace_integral; }));
        rep.add(lv, "trace_integral", tr.mean, tr.stderr_mean, R);
        rep.add(lv, "trace_integral_scaled", tr.mean * part.alpha(), tr.stderr_mean * part.alpha(), R);
        auto c = summarize(col([](const auto& r) { return r.c2_residual; }));
        rep.add(lv, "c2_residual", c.mean, c.stderr_mean, R);
        trace.push_back(tr.mean);
        c2.push_back(c.mean);

        const double sa = std::sqrt(part.alpha());
        double dz_bound = 0.0;
        for (std::size_t k = 0; k < part.size(); ++k)
            if (!part[k].empty()) dz_bound = std::max(dz_bound, std::sqrt(2.0 * part.measure(k)) / part.channels(k));
        auto dzn = col([](const auto& r) { return r.max_dz_norm; });
        const double dz_obs = *std::max_element(dzn.begin(), dzn.end());
        rep.add(lv, "max_dz_norm_bound", sa * dz_bound, std::nullopt, 1);
        rep.add(lv, "max_dz_norm_observed", dz_obs, std::nullopt, R,
                verdict_of(dz_obs <= sa * dz_bound * (1.0 + 1e-12)));

        double level_jump = 0.0, level_d2 = 0.0, level_gap = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
            const std::string& lab = phis[f].label;
            CompartmentPairing pairing(phis[f], part);
            const double bound = sa * pairing.jump_bound();
            auto mj = col([f](const auto& r) { return r.max_jump[f]; });
            const double obs = *std::max_element(mj.begin(), mj.end());
            level_jump = std::max(level_jump, obs);
            rep.add(lv, "max_jump_bound[" + lab + "]", bound, std::nullopt, 1);
            rep.add(lv, "max_jump_observed[" + lab + "]", obs, std::nullopt, R,
                    verdict_of(obs <= bound * (1.0 + 1e-12) + 1e-300));
            auto d2 = summarize(col([f](const auto& r) { return r.d2_rate[f]; }));
            rep.add(lv, "d2_rate[" + lab + "]", d2.mean, d2.stderr_mean, R);
            level_d2 += d2.mean;
            auto bj = summarize(col([f](const auto& r) { return r.big_jumps[f]; }));
            rep.add(lv, "d2_big_jumps[" + lab + "]", bj.mean, bj.stderr_mean, R);
            auto d3 = summarize(col([f](const auto& r) { return r.d3_tail[f]; }));
            rep.add(lv, "d3_tail[" + lab + "]", d3.mean, d3.stderr_mean, R);
            auto gap = summarize(col([f](const auto& r) { return r.qv_gap[f]; }));
            rep.add(lv, "qv_gap[" + lab + "]", gap.mean, gap.stderr_mean, R);
            level_gap += gap.mean;
        }
        jump_max.push_back(level_jump);
        d2_total.push_back(level_d2);
        qv_gap_total.push_back(level_gap);

        // Mean scaled quadratic-variation profile alpha int_0^t G^n over output times.
        json lev = json::array();
        const std::size_t S = reps.front().res.qv_profile.size();
        for (std::size_t s = 0; s < S; ++s) {
            std::vector<double> row(F, 0.0);
            for (const auto& x : reps)
                for (std::size_t f = 0; f < F; ++f) row[f] += x.res.qv_profile[s][f];
            for (double& v : row) v /= static_cast<double>(R);
            lev.push_back(row);
        }
        profile.push_back({{"level", n}, {"values", lev}});
    }
    json labels = json::array();
    for (const auto& f : phis) labels.push_back(f.label);
    rep.extra["qv_profile"] = {{"times", output_times(st.T, st.cadence)}, {"test_functions", labels},
                               {"levels", profile}};

    if (L < 2) {
        rep.notes.push_back("ladder has a single level; trend diagnostics are incomplete");
        rep.add(-1, "trend_incomplete", 1.0, std::nullopt, L);
        return rep;
    }
    rep.add(-1, "trace_integral_decreasing", trace.back(), std::nullopt, L, verdict_of(strictly_decreasing(trace)));
    rep.add(-1, "c2_residual_decreasing", c2.back(), std::nullopt, L, verdict_of(strictly_decreasing(c2)));
    for (std::size_t n = 1; n < L; ++n) {
        const double r = c2[n] > 0.0 ? c2[n - 1] / c2[n] : 0.0;
        const bool doubled = model.level(n).size() == 2 * model.level(n - 1).size();
        const bool degenerate = c2[n] == 0.0 && c2[n - 1] == 0.0;
        rep.add(static_cast<int>(n), "c2_halving_ratio", r, std::nullopt, st.replicates,
                doubled && !degenerate ? verdict_of(r >= 1.6 && r <= 2.6) : Verdict::info);
    }
    rep.add(-1, "max_jump_decreasing", jump_max.back(), std::nullopt, L, verdict_of(strictly_decreasing(jump_max)));
    rep.add(-1, "d2_rate_non_increasing", d2_total.back(), std::nullopt, L, verdict_of(non_increasing(d2_total)));
    rep.add(-1, "qv_gap_total_finest", qv_gap_total.back(), std::nullopt, L);

    Figure fig{"conditions", "condition diagnostics vs level", "level", "value", true, {}};
    fig.series.push_back({"trace integral", level_axis(L), trace});
    fig.series.push_back({"C2 residual", level_axis(L), c2});
    fig.series.push_back({"max rescaled jump", level_axis(L), jump_max});
    rep.figures.push_back(std::move(fig));
    return rep;
}

// ---------------------------------------------------------------- Langevin vs PDMP

namespace {

struct EnsembleRep {
    std::vector<double> pair;  // <Phi_r, z(T)> or <Phi_r, P(T)>
    double u_mode = 0.0;       // <sin(pi x / L), U(T)>
    double excess = 0.0;
    LangevinStats lstats;
};

}  // namespace

StudyReport run_langevin_compare(const ExperimentConfig& cfg) {
    const StudySpec& st = study_of(cfg);
    const Model& model = *cfg.model;
    StudyReport rep = new_report(cfg, "langevin-compare", salt_compare_pdmp);
    const auto phis = cfg.test_functions();
    const std::size_t F = phis.size();
    const std::size_t n = cfg.study_level();
    const Partition& part = model.level(n);
    const double alpha = st.alpha_n ? *st.alpha_n : part.alpha();
    const double scale = noise_scale_for(alpha);
    const auto& grid = model.grid();
    const GridFunction mode1 =
        grid.tabulate([&](double x) { return std::sin(std::numbers::pi * x / grid.length()); });
    const std::size_t E = st.ensemble ? st.ensemble : st.replicates;

    LevelRun prun{n, cfg, salt_compare_pdmp};
    const ModelView view = prun.view();
    const HybridState init = model.initial_hybrid(n);
    auto pdmp = run_replicates<EnsembleRep>(
        st.replicates, cfg.execution.workers,
        [&](std::size_t r) {
            CounterRng rng(cfg.execution.seed, prun.stream(r));
            SimulationOptions opt;
            opt.T = st.T;
            opt.record_jumps = false;
            opt.record_snapshots = false;
            HybridPath path = simulate(view, init, rng, opt);
            EnsembleRep out;
            for (const auto& phi : phis) out.pair.push_back(pair_fields(grid, phi, path.terminal.z.fields()));
            out.u_mode = grid.inner(mode1, path.terminal.membrane.u);
            out.excess = path.stats.max_bound_excess;
            return out;
        },
        prun.describe());

    LevelRun lrun{n, cfg, salt_compare_langevin};
    LimitSettings ls = model.limit_settings();
    ls.enforce_bounds = false;
    auto lang = run_replicates<EnsembleRep>(
        E, cfg.execution.workers,
        [&](std::size_t r) {
            CounterRng rng(cfg.execution.seed, lrun.stream(r));
            LangevinIntegrator integ(grid, model.diffusion(), model.kinetics(), ls, scale);
            auto traj = solve_langevin(integ, model.initial_limit(), st.T, rng, 0.0);
            const auto& fin = traj.frames.back();
            EnsembleRep out;
            for (const auto& phi : phis) out.pair.push_back(pair_fields(grid, phi, fin.p));
            out.u_mode = grid.inner(mode1, fin.u);
            out.lstats = traj.stats;
            return out;
        },
        lrun.describe());

    const auto ref = reference_solution(model, st.T, 0.0, {});
    const auto& det = ref.trajectory.frames.back();
    const int lv = static_cast<int>(n);
    rep.add(lv, "alpha_n", alpha, std::nullopt, 1);
    rep.add(lv, "noise_scale", scale, std::nullopt, 1);
    auto compare = [&](const std::string& lab, std::vector<double> a, std::vector<double> b, double limit_value) {
        auto sa = summarize(a), sb = summarize(b);
        rep.add(lv, "pdmp_mean[" + lab + "]", sa.mean, sa.stderr_mean, sa.n);
        rep.add(lv, "langevin_mean[" + lab + "]", sb.mean, sb.stderr_mean, sb.n);
        rep.add(lv, "limit_value[" + lab + "]", limit_value, std::nullopt, 1);
        const double se = std::hypot(sa.stderr_mean, sb.stderr_mean);
        rep.add(lv, "mean_diff[" + lab + "]", sa.mean - sb.mean, se, sa.n + sb.n);
        rep.add(lv, "mean_diff_z[" + lab + "]", se > 0.0 ? (sa.mean - sb.mean) / se : 0.0, std::nullopt, sa.n + sb.n);
        rep.add(lv, "pdmp_var[" + lab + "]", sa.variance, sa.stderr_variance, sa.n);
        rep.add(lv, "langevin_var[" + lab + "]", sb.variance, sb.stderr_variance, sb.n);
        if (sb.variance > 0.0)
            rep.add(lv, "var_ratio[" + lab + "]", sa.variance / sb.variance, std::nullopt, sa.n + sb.n);
        auto ks = ks_two_sample(std::move(a), std::move(b));
        rep.add(lv, "ks_p_value[" + lab + "]", ks.p_value, std::nullopt, sa.n + sb.n);
    };
    for (std::size_t f = 0; f < F; ++f) {
        std::vector<double> a, b;
        for (const auto& x : pdmp) a.push_back(x.pair[f]);
        for (const auto& x : lang) b.push_back(x.pair[f]);
        compare(phis[f].label, std::move(a), std::move(b), pair_fields(grid, phis[f], det.p));
    }
    {
        std::vector<double> a, b;
        for (const auto& x : pdmp) a.push_back(x.u_mode);
        for (const auto& x : lang) b.push_back(x.u_mode);
        compare("u_sine1", std::move(a), std::move(b), grid.inner(mode1, det.u));
    }
    std::size_t clamps = 0, excursions = 0, steps = 0;
    double min_p = 1.0, max_p = 0.0, noise_mass = 0.0, u_excess = 0.0, pdmp_excess = 0.0;
    for (const auto& x : lang) {
        clamps += x.lstats.clamp_activations;
        excursions += x.lstats.excursion_steps;
        steps += x.lstats.steps;
        min_p = std::min(min_p, x.lstats.min_p);
        max_p = std::max(max_p, x.lstats.max_p);
        noise_mass = std::max(noise_mass, x.lstats.max_noise_mass);
        u_excess = std::max(u_excess, x.lstats.max_u_excess);
    }
    for (const auto& x : pdmp) pdmp_excess = std::max(pdmp_excess, x.excess);
    rep.add(lv, "langevin_clamp_activations", static_cast<double>(clamps), std::nullopt, E);
    rep.add(lv, "langevin_excursion_steps", static_cast<double>(excursions), std::nullopt, steps);
    rep.add(lv, "langevin_min_p", min_p, std::nullopt, E);
    rep.add(lv, "langevin_max_p", max_p, std::nullopt, E);
    rep.add(lv, "langevin_noise_mass_max", noise_mass, std::nullopt, E);
    rep.add(lv, "langevin_u_bound_excess_max", u_excess, std::nullopt, E);
    rep.add(lv, "membrane_bound_excess_max", pdmp_excess, std::nullopt, st.replicates,
            verdict_of(pdmp_excess <= model.solver().bound_tolerance));
    if (clamps > 0)
        rep.notes.push_back("the covariance clamp p* = max(P, 0) activated at " + std::to_string(clamps) +
                            " node-steps");
    return rep;
}

StudyReport run_study(const ExperimentConfig& cfg) {
    const auto start = Clock::now();
    const std::string& kind = study_of(cfg).kind;
    StudyReport rep;
    if (kind == "lln") rep = run_lln_study(cfg);
    else if (kind == "clt") rep = run_clt_study(cfg);
    else if (kind == "ito") rep = run_ito_study(cfg);
    else if (kind == "diagnostics") rep = run_diagnostics_study(cfg);
    else if (kind == "langevin-compare") rep = run_langevin_compare(cfg);
    else throw ConfigError("unknown study kind " + kind);
    rep.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return rep;
}

}  // namespace pdmpsim
