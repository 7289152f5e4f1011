#include "pdmpsim/engine.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ClockMode { hazard, thinning, scripted, none };

struct Clock {
    ClockMode mode = ClockMode::none;
    double e = kInf;       // hazard target
    double H = 0.0;        // accumulated hazard
    double t_prop = kInf;  // thinning proposal time
    double tau = kInf;     // scripted jump time
};

[[noreturn]] void rethrow_annotated(const Error& e, double t) {
    std::ostringstream os;
    os << e.what() << " [simulation time " << t << "]";
    const std::string msg = os.str();
    if (dynamic_cast<const SchemeError*>(&e)) throw SchemeError(msg);
    if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError(msg);
    if (dynamic_cast<const KineticsError*>(&e)) throw KineticsError(msg);
    if (dynamic_cast<const InvariantError*>(&e)) throw InvariantError(msg);
    if (dynamic_cast<const InternalError*>(&e)) throw InternalError(msg);
    throw Error(msg);
}

class Engine {
public:
    Engine(const ModelView& model, const HybridState& initial, PathObserver* observer)
        : M_(model),
          S_(initial),
          stepper_(model.diffusion, model.solver.theta,
                   BoundCheck{true, model.kinetics.u_lower(), model.kinetics.u_upper(),
                              model.solver.bound_tolerance}),
          reaction_(model.kinetics, initial.z.fields()),
          policy_(model.solver.policy()),
          obs_(observer) {
        refresh_rates();
        lambda_bar_ = rate_ceiling(model.kinetics, model.partition);
    }

    void set_stops(std::vector<double> stops) {
        stops_ = std::move(stops);
        stop_idx_ = 0;
        while (stop_idx_ < stops_.size() && stops_[stop_idx_] <= S_.membrane.t) ++stop_idx_;
    }

    HybridState& state() { return S_; }
    const LocalRates& rates() const { return q_; }
    double lambda() const { return lambda_; }
    PathStats& stats() { return stats_; }
    double lambda_bar() const { return lambda_bar_; }
    double max_excess() const { return stepper_.max_excess(); }

    PathPoint point() const { return {S_.membrane.t, S_.membrane.u, S_.config, S_.z, q_, lambda_}; }

    void refresh_rates() {
        local_rates(S_.membrane.u, M_.kinetics, M_.partition, q_);
        lambda_ = total_rate(q_, S_.config);
        stats_.max_total_rate = std::max(stats_.max_total_rate, lambda_);
    }

    void emit_flow(bool segment_start) {
        if (obs_) obs_->on_flow(point(), segment_start);
    }

    // Flows with the configuration frozen until the clock fires (true) or
    // t_end is reached (false). Snapshot hooks fire at every stop passed.
    bool flow(double t_end, Clock& clk, CounterRng* rng, const std::function<void()>& on_stop) {
        double& t = S_.membrane.t;
        while (t < t_end) {
            double stop = t_end;
            if (stop_idx_ < stops_.size()) stop = std::min(stop, stops_[stop_idx_]);
            double dt = policy_.substep(lambda_);
            bool at_stop = false;
            if (t + dt >= stop) {
                dt = stop - t;
                at_stop = true;
            }
            const double t0 = t;
            switch (clk.mode) {
                case ClockMode::scripted:
                    if (clk.tau <= t0 + dt) {
                        step(clk.tau - t0);
                        t = clk.tau;
                        refresh_rates();
                        emit_flow(false);
                        return true;
                    }
                    step(dt);
                    refresh_rates();
                    break;
                case ClockMode::hazard: {
                    const double lam0 = lambda_;
                    u_save_ = S_.membrane.u;
                    step(dt);
                    refresh_rates();
                    const double dH = 0.5 * (lam0 + lambda_) * dt;
                    if (dH > 0.0 && clk.H + dH >= clk.e) {
                        const double s = std::min(dt, dt * (clk.e - clk.H) / dH);
                        const double tau = t0 + s;
                        S_.membrane.u.swap(u_save_);
                        t = t0;
                        step(tau - t0);
                        t = tau;
                        refresh_rates();
                        emit_flow(false);
                        return true;
                    }
                    clk.H += dH;
                    break;
                }
                case ClockMode::thinning: {
                    bool proposal = false;
                    if (clk.t_prop <= t0 + dt) {
                        dt = clk.t_prop - t0;
                        at_stop = clk.t_prop == stop;
                        proposal = true;
                    }
                    step(dt);
                    if (proposal) t = clk.t_prop;
                    refresh_rates();
                    if (proposal) {
                        ++stats_.proposals;
                        if (lambda_ > lambda_bar_ * (1.0 + 1e-12)) {
                            std::ostringstream msg;
                            msg << "thinning bound violated: total rate " << lambda_ << " exceeds bound "
                                << lambda_bar_;
                            throw KineticsError(msg.str());
                        }
                        if (rng->uniform() * lambda_bar_ < lambda_) {
                            emit_flow(false);
                            return true;
                        }
                        ++stats_.rejections;
                        clk.t_prop = t + rng->exponential() / lambda_bar_;
                    }
                    break;
                }
                case ClockMode::none:
                    step(dt);
                    refresh_rates();
                    break;
            }
            if (at_stop) t = stop;
            emit_flow(false);
            if (at_stop && stop_idx_ < stops_.size() && stops_[stop_idx_] == stop) {
                ++stop_idx_;
                if (on_stop) on_stop();
            }
        }
        return false;
    }

    // Fires snapshot hooks for stops that coincide with the current time
    // (a jump landing exactly on an output time).
    void flush_stops(const std::function<void()>& on_stop) {
        while (stop_idx_ < stops_.size() && stops_[stop_idx_] <= S_.membrane.t) {
            ++stop_idx_;
            if (on_stop) on_stop();
        }
    }

    void apply_jump(const JumpEvent& e) {
        S_.config.apply(e);
        S_.z.refresh(e.compartment, S_.config, M_.partition);
        const auto& c = M_.partition[e.compartment];
        reaction_.update(M_.kinetics, S_.z.fields(), c.first_cell, c.end_cell);
        refresh_rates();
        ++stats_.jumps;
    }

private:
    void step(double dt) {
        stepper_.step(S_.membrane, reaction_, dt);
        ++stats_.substeps;
    }

    const ModelView& M_;
    HybridState S_;
    FlowStepper stepper_;
    ReactionTerm reaction_;
    DtPolicy policy_;
    PathObserver* obs_;
    LocalRates q_;
    double lambda_ = 0.0;
    double lambda_bar_ = 0.0;
    GridFunction u_save_;
    std::vector<double> stops_;
    std::size_t stop_idx_ = 0;
    PathStats stats_;
};

Snapshot take_snapshot(const HybridState& s) { return {s.membrane.t, s.membrane.u, s.z.fields()}; }

HybridPath run_path(const ModelView& model, const HybridState& initial, CounterRng* rng,
                    const std::vector<JumpRecord>* script, const SimulationOptions& opt) {
    if (!(opt.T > 0.0)) throw InputError("simulation horizon T must be positive");
    initial.config.check_conservation(model.partition);
    HybridPath path;
    path.initial = initial;
    path.T = opt.T;
    path.method = model.solver.method;
    if (rng) {
        path.seed = rng->seed();
        path.stream = rng->stream();
    }
    const double T = initial.membrane.t + opt.T;
    Engine eng(model, initial, opt.observer);
    std::vector<double> stops;
    for (double s : output_times(opt.T, opt.cadence)) stops.push_back(initial.membrane.t + s);
    stops.back() = T;
    eng.set_stops(stops);

    auto on_stop = [&]() {
        if (opt.observer) opt.observer->on_snapshot(eng.point());
        if (opt.record_snapshots) path.snapshots.push_back(take_snapshot(eng.state()));
    };
    eng.emit_flow(true);
    if (opt.observer) opt.observer->on_snapshot(eng.point());
    if (opt.record_snapshots) path.snapshots.push_back(take_snapshot(eng.state()));

    const bool absorbing = model.kinetics.all_zero();
    std::size_t next_script = 0;
    try {
        while (eng.state().membrane.t < T) {
            Clock clk;
            if (script) {
                clk.mode = ClockMode::scripted;
                clk.tau = next_script < script->size() ? (*script)[next_script].t : kInf;
            } else if (absorbing) {
                clk.mode = ClockMode::none;
            } else if (model.solver.method == JumpTimeMethod::integrated_hazard) {
                clk.mode = ClockMode::hazard;
                clk.e = rng->exponential();
            } else {
                clk.mode = ClockMode::thinning;
                clk.t_prop = eng.lambda_bar() > 0.0 ? eng.state().membrane.t + rng->exponential() / eng.lambda_bar()
                                                    : kInf;
            }
            if (!eng.flow(T, clk, rng, on_stop)) break;
            const double tau = eng.state().membrane.t;
            JumpEvent ev;
            if (script) {
                ev = (*script)[next_script++].event;
                if (eng.state().config.count(ev.compartment, ev.from) <= 0)
                    throw InternalError("replayed event leaves an empty state");
            } else {
                RateTable table = jump_event_rates(eng.rates(), eng.state().config);
                ev = select_event(table, rng->uniform());
            }
            eng.apply_jump(ev);
            if (opt.check_conservation) eng.state().config.check_conservation(model.partition);
            if (opt.record_jumps) path.jumps.push_back({tau, ev});
            if (opt.observer) opt.observer->on_jump(tau, ev, eng.point());
            eng.emit_flow(true);
            eng.flush_stops(on_stop);
        }
    } catch (const Error& e) {
        rethrow_annotated(e, eng.state().membrane.t);
    }
    path.terminal = eng.state();
    path.stats = eng.stats();
    path.stats.max_bound_excess = eng.max_excess();
    path.stats.conservation_checked = opt.check_conservation;
    return path;
}

}  // namespace

const char* method_name(JumpTimeMethod m) {
    return m == JumpTimeMethod::thinning ? "thinning" : "integrated-hazard";
}

std::vector<double> output_times(double T, double cadence) {
    std::vector<double> out{0.0};
    if (cadence > 0.0) {
        for (std::size_t k = 1;; ++k) {
            double t = static_cast<double>(k) * cadence;
            if (t >= T * (1.0 - 1e-12)) break;
            out.push_back(t);
        }
    }
    out.push_back(T);
    return out;
}

HybridState HybridState::make(GridFunction u0, ChannelConfiguration config, const Partition& partition, double t) {
    HybridState s;
    s.membrane = {std::move(u0), t};
    s.z = CoordinateField(config, partition);
    s.config = std::move(config);
    return s;
}

JumpEvent select_event(const RateTable& table, double uniform01) {
    if (!(table.total > 0.0)) throw InternalError("post-jump kernel needs a positive total rate");
    const double target = uniform01 * table.total;
    double acc = 0.0;
    std::size_t last_positive = table.rates.size();
    for (std::size_t r = 0; r < table.rates.size(); ++r) {
        if (table.rates[r] <= 0.0) continue;
        last_positive = r;
        acc += table.rates[r];
        if (target < acc) return table.events[r];
    }
    if (last_positive == table.rates.size()) throw InternalError("event selection ran past a stale rate table");
    return table.events[last_positive];
}

ChannelConfiguration sample_post_jump(const HybridState& state_at_tau, const RateTable& rates, CounterRng& rng,
                                      JumpEvent* chosen) {
    JumpEvent e = select_event(rates, rng.uniform());
    ChannelConfiguration out = state_at_tau.config;
    out.apply(e);
    if (chosen) *chosen = e;
    return out;
}

namespace {
// No occupied state has an exit rate that can ever be nonzero.
bool absorbing(const ModelView& model, const ChannelConfiguration& config) {
    const auto& kin = model.kinetics;
    for (std::size_t k = 0; k < config.compartments(); ++k)
        for (std::size_t i = 0; i < config.states(); ++i) {
            if (config.count(k, i) == 0) continue;
            for (std::size_t j = 0; j < config.states(); ++j)
                if (j != i && kin.has_rate(i, j) && kin.pair_bound(i, j) > 0.0) return false;
        }
    return true;
}

JumpTimeResult jump_time_impl(const ModelView& model, const HybridState& state, Clock clk, CounterRng* rng,
                              double horizon) {
    Engine eng(model, state, nullptr);
    JumpTimeResult out;
    if (model.kinetics.all_zero() || (std::isinf(horizon) && absorbing(model, state.config))) {
        out.state = state.membrane;
        return out;
    }
    if (clk.mode == ClockMode::thinning)
        clk.t_prop = eng.lambda_bar() > 0.0 ? state.membrane.t + rng->exponential() / eng.lambda_bar() : kInf;
    bool jumped = eng.flow(state.membrane.t + horizon, clk, rng, nullptr);
    out.state = eng.state().membrane;
    out.jumped = jumped;
    out.tau = jumped ? out.state.t : kInf;
    return out;
}
}  // namespace

JumpTimeResult invert_hazard(const ModelView& model, const HybridState& state, double e, double horizon) {
    Clock clk;
    clk.mode = ClockMode::hazard;
    clk.e = e;
    return jump_time_impl(model, state, clk, nullptr, horizon);
}

JumpTimeResult sample_jump_time(const ModelView& model, const HybridState& state, CounterRng& rng,
                                JumpTimeMethod method, double horizon) {
    Clock clk;
    if (method == JumpTimeMethod::integrated_hazard) {
        clk.mode = ClockMode::hazard;
        clk.e = rng.exponential();
    } else {
        clk.mode = ClockMode::thinning;
    }
    return jump_time_impl(model, state, clk, &rng, horizon);
}

HybridPath simulate(const ModelView& model, const HybridState& initial, CounterRng& rng,
                    const SimulationOptions& options) {
    return run_path(model, initial, &rng, nullptr, options);
}

HybridPath replay(const ModelView& model, const HybridState& initial, const std::vector<JumpRecord>& jumps,
                  const SimulationOptions& options) {
    for (std::size_t i = 1; i < jumps.size(); ++i)
        if (!(jumps[i].t > jumps[i - 1].t)) throw InputError("jump log times are not strictly increasing");
    return run_path(model, initial, nullptr, &jumps, options);
}

void write_path_jsonl(std::ostream& os, const HybridPath& path, const Partition& partition,
                      const std::string& config_hash) {
    using nlohmann::json;
    json header = {{"type", "header"},
                   {"kind", "pdmp"},
                   {"config_hash", config_hash},
                   {"seed", path.seed},
                   {"stream", path.stream},
                   {"T", path.T},
                   {"method", method_name(path.method)},
                   {"states", path.initial.config.states()},
                   {"jumps", path.jumps.size()}};
    json comps = json::array();
    for (const auto& c : partition.compartments())
        comps.push_back({{"first_cell", c.first_cell}, {"end_cell", c.end_cell}, {"channels", c.channels}});
    header["compartments"] = comps;
    os << header.dump() << '\n';
    std::size_t j = 0, s = 0;
    while (j < path.jumps.size() || s < path.snapshots.size()) {
        bool take_jump = s >= path.snapshots.size() ||
                         (j < path.jumps.size() && path.jumps[j].t <= path.snapshots[s].t);
        if (take_jump) {
            const auto& r = path.jumps[j++];
            json rec = {{"type", "jump"},
                        {"t", r.t},
                        {"k", r.event.compartment},
                        {"i", r.event.from},
                        {"j", r.event.to}};
            os << rec.dump() << '\n';
        } else {
            const auto& snap = path.snapshots[s++];
            json rec = {{"type", "snapshot"}, {"t", snap.t}, {"u", snap.u}, {"z", snap.z}};
            os << rec.dump() << '\n';
        }
    }
}

std::string path_to_jsonl(const HybridPath& path, const Partition& partition, const std::string& config_hash) {
    std::ostringstream os;
    write_path_jsonl(os, path, partition, config_hash);
    return os.str();
}

}  // namespace pdmpsim
