#include "pdmpsim/limit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdmpsim/engine.hpp"
#include "pdmpsim/errors.hpp"

namespace pdmpsim {

void kinetics_field_node(const ChannelKinetics& kinetics, const double* p, double u, double* F, double* q) {
    const std::size_t m = kinetics.states();
    kinetics.evaluate(u, q);
    double rest = 0.0;
    for (std::size_t j = 0; j + 1 < m; ++j) {
        double in = 0.0, out = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == j) continue;
            in += q[i * m + j] * p[i];
            out += q[j * m + i];
        }
        F[j] = in - out * p[j];
        rest += F[j];
    }
    F[m - 1] = -rest;
}

StateFields kinetics_field(const ChannelKinetics& kinetics, const StateFields& p, const GridFunction& u) {
    const std::size_t m = kinetics.states(), N = u.size();
    if (p.size() != m) throw InputError("kinetics_field: wrong number of state fields");
    StateFields F(m, GridFunction(N));
    std::vector<double> q(m * m), pn(m), fn(m);
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t i = 0; i < m; ++i) pn[i] = p[i][x];
        kinetics_field_node(kinetics, pn.data(), u[x], fn.data(), q.data());
        for (std::size_t j = 0; j < m; ++j) F[j][x] = fn[j];
    }
    return F;
}

double mass_defect(const StateFields& p) {
    double worst = 0.0;
    for (std::size_t x = 0; x < p[0].size(); ++x) {
        double s = 0.0;
        for (const auto& pi : p) s += pi[x];
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

LimitSolver::LimitSolver(const SpatialGrid& grid, const EllipticOperator& op, const ChannelKinetics& kinetics,
                         LimitSettings settings)
    : grid_(&grid),
      kin_(&kinetics),
      settings_(settings),
      stepper_(op, settings.theta,
               BoundCheck{settings.enforce_bounds, kinetics.u_lower(), kinetics.u_upper(), settings.bound_tolerance}) {
    dt_ = settings.dt_max;
    if (kinetics.q_bar() > 0.0) dt_ = std::min(dt_, 0.1 / kinetics.q_bar());
    const std::size_t m = kinetics.states(), N = grid.size();
    F0_.assign(m, GridFunction(N));
    F1_ = F0_;
    pstar_ = F0_;
    qbuf_.resize(m * m);
    pn_.resize(m);
    fn_.resize(m);
    reaction_ = ReactionTerm(kinetics, F0_);
}

void LimitSolver::step(LimitState& s, double dt, const FieldIncrement& noise) {
    const std::size_t m = kin_->states(), N = grid_->size();
    if (noise) before_ = s;
    // Kinetics drift at (p^n, u^n) before u moves.
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t i = 0; i < m; ++i) pn_[i] = s.p[i][x];
        kinetics_field_node(*kin_, pn_.data(), s.u[x], fn_.data(), qbuf_.data());
        for (std::size_t j = 0; j < m; ++j) {
            F0_[j][x] = fn_[j];
            pstar_[j][x] = pn_[j] + dt * fn_[j];
        }
    }
    reaction_.update(*kin_, s.p, 0, N);
    MembraneState ms{std::move(s.u), s.t};
    stepper_.step(ms, reaction_, dt);
    s.u = std::move(ms.u);
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t i = 0; i < m; ++i) pn_[i] = pstar_[i][x];
        kinetics_field_node(*kin_, pn_.data(), s.u[x], fn_.data(), qbuf_.data());
        for (std::size_t j = 0; j < m; ++j) s.p[j][x] += 0.5 * dt * (F0_[j][x] + fn_[j]);
    }
    if (noise) noise(before_, s, dt, s.p);
    s.t += dt;

    double drift = mass_defect(s.p);
    max_mass_drift_ = std::max(max_mass_drift_, drift);
    if (drift > settings_.mass_tolerance) {
        std::ostringstream msg;
        msg << "occupancy mass drifted by " << drift << " at t = " << s.t;
        throw SchemeError(msg.str());
    }
    for (const auto& pi : s.p)
        for (double v : pi) max_p_excess_ = std::max(max_p_excess_, std::max(-v, v - 1.0));
}

LimitState step_limit(LimitSolver& solver, const LimitState& state, double dt) {
    LimitState out = state;
    solver.step(out, dt);
    return out;
}

LimitTrajectory solve_limit(LimitSolver& solver, const LimitState& initial, double T, double cadence,
                            const LimitStepCallback& callback, const FieldIncrement& noise) {
    if (T < 0.0) throw InputError("solve_limit: negative horizon");
    LimitTrajectory out;
    LimitState s = initial;
    out.frames.push_back(s);
    if (callback) callback(s);
    if (T == 0.0) return out;
    const double t0 = initial.t;
    const double dt = solver.dt();
    for (double target_rel : output_times(T, cadence)) {
        if (target_rel == 0.0) continue;
        const double target = t0 + target_rel;
        while (s.t < target) {
            double h = dt;
            bool last = s.t + h >= target - 1e-12 * h;
            if (last) h = target - s.t;
            solver.step(s, h, noise);
            if (last) s.t = target;
            ++out.steps;
            if (callback) callback(s);
        }
        out.frames.push_back(s);
    }
    out.max_mass_drift = solver.max_mass_drift();
    out.max_bound_excess = solver.max_bound_excess();
    return out;
}

}  // namespace pdmpsim
