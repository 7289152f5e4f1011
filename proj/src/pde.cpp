#include "pdmpsim/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

EllipticOperator::EllipticOperator(const SpatialGrid& grid, GridFunction a, double a_min) : a_(std::move(a)) {
    const std::size_t N = grid.size();
    if (a_.size() != N) throw ConfigError("diffusion coefficient has wrong length");
    for (std::size_t i = 0; i < N; ++i)
        if (!(a_[i] >= a_min) || !std::isfinite(a_[i]))
            throw ConfigError("diffusion coefficient must be >= " + std::to_string(a_min) + " (node " +
                              std::to_string(i) + ")");
    const double ih2 = 1.0 / (grid.h() * grid.h());
    lower_.assign(N, 0.0);
    diag_.assign(N, 0.0);
    upper_.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        double left = i == 0 ? 2.0 * a_[0] : 0.5 * (a_[i - 1] + a_[i]);
        double right = i + 1 == N ? 2.0 * a_[N - 1] : 0.5 * (a_[i] + a_[i + 1]);
        if (i > 0) lower_[i] = left * ih2;
        if (i + 1 < N) upper_[i] = right * ih2;
        diag_[i] = -(left + right) * ih2;
    }
}

EllipticOperator EllipticOperator::reaction_only(const SpatialGrid& grid) {
    EllipticOperator op;
    op.a_.assign(grid.size(), 0.0);
    op.lower_.assign(grid.size(), 0.0);
    op.diag_.assign(grid.size(), 0.0);
    op.upper_.assign(grid.size(), 0.0);
    return op;
}

void EllipticOperator::apply(const GridFunction& u, GridFunction& out) const {
    const std::size_t N = diag_.size();
    out.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        double v = diag_[i] * u[i];
        if (i > 0) v += lower_[i] * u[i - 1];
        if (i + 1 < N) v += upper_[i] * u[i + 1];
        out[i] = v;
    }
}

ReactionTerm::ReactionTerm(const ChannelKinetics& kinetics, const StateFields& z) {
    const std::size_t N = z.empty() ? 0 : z[0].size();
    c_.assign(N, 0.0);
    s_.assign(N, 0.0);
    update(kinetics, z, 0, N);
}

void ReactionTerm::update(const ChannelKinetics& kinetics, const StateFields& z, std::size_t first,
                          std::size_t end) {
    const auto& g = kinetics.conductance();
    const auto& E = kinetics.reversal();
    const std::size_t m = kinetics.states();
    for (std::size_t x = first; x < end; ++x) {
        double c = 0.0, s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double gz = g[i][x] * z[i][x];
            c += gz;
            s += gz * E[i];
        }
        c_[x] = c;
        s_[x] = s;
    }
}

GridFunction ReactionTerm::evaluate(const GridFunction& u) const {
    GridFunction out(u.size());
    for (std::size_t x = 0; x < u.size(); ++x) out[x] = s_[x] - c_[x] * u[x];
    return out;
}

double ReactionTerm::max_decay() const {
    double m = 0.0;
    for (double c : c_) m = std::max(m, c);
    return m;
}

void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
                       std::vector<double>& d, std::vector<double>& cp) {
    const std::size_t n = b.size();
    cp.resize(n);
    double denom = b[0];
    if (!(std::abs(denom) > 0.0) || !std::isfinite(denom)) throw NumericalError("tridiagonal solve: zero pivot");
    cp[0] = c[0] / denom;
    d[0] = d[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = b[i] - a[i] * cp[i - 1];
        if (!(std::abs(denom) > 0.0) || !std::isfinite(denom))
            throw NumericalError("tridiagonal solve: zero or non-finite pivot at row " + std::to_string(i));
        cp[i] = c[i] / denom;
        d[i] = (d[i] - a[i] * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= cp[i] * d[i + 1];
}

FlowStepper::FlowStepper(const EllipticOperator& op, double theta, BoundCheck bounds)
    : op_(&op), theta_(theta), bounds_(bounds) {
    if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("theta must lie in [0.5, 1]");
}

void FlowStepper::step(MembraneState& state, const ReactionTerm& reaction, double dt) {
    const std::size_t N = op_->size();
    auto& u = state.u;
    const auto& lo = op_->lower();
    const auto& di = op_->diag();
    const auto& up = op_->upper();
    rhs_.resize(N);
    const double ex = (1.0 - theta_) * dt;
    for (std::size_t i = 0; i < N; ++i) {
        double Au = di[i] * u[i];
        if (i > 0) Au += lo[i] * u[i - 1];
        if (i + 1 < N) Au += up[i] * u[i + 1];
        rhs_[i] = u[i] + ex * Au + dt * reaction(i, u[i]);
        if (!std::isfinite(rhs_[i]))
            throw NumericalError("non-finite membrane value at node " + std::to_string(i) + ", t = " +
                                 std::to_string(state.t));
    }
    const double im = theta_ * dt;
    // Thomas sweep on (I - theta dt A) written out to avoid building the matrix.
    cp_.resize(N);
    double denom = 1.0 - im * di[0];
    cp_[0] = -im * up[0] / denom;
    rhs_[0] /= denom;
    for (std::size_t i = 1; i < N; ++i) {
        const double a = -im * lo[i];
        denom = (1.0 - im * di[i]) - a * cp_[i - 1];
        if (!(std::abs(denom) > 0.0) || !std::isfinite(denom))
            throw NumericalError("tridiagonal solve: bad pivot at row " + std::to_string(i));
        cp_[i] = -im * up[i] / denom;
        rhs_[i] = (rhs_[i] - a * rhs_[i - 1]) / denom;
    }
    for (std::size_t i = N - 1; i-- > 0;) rhs_[i] -= cp_[i] * rhs_[i + 1];

    {
        for (std::size_t i = 0; i < N; ++i) {
            double v = rhs_[i];
            double excess = std::max(bounds_.lower - v, v - bounds_.upper);
            if (excess > max_excess_) max_excess_ = excess;
            if (bounds_.enabled && excess > bounds_.tolerance) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "membrane bound violated at node " << i << ", t = " << state.t + dt << ": u = " << v
                    << " outside [" << bounds_.lower << ", " << bounds_.upper << "] by " << excess
                    << " (dt = " << dt << ")";
                throw SchemeError(msg.str());
            }
        }
    }
    u.swap(rhs_);
    state.t += dt;
}

MembraneState step_flow(const MembraneState& state, const ReactionTerm& reaction, const EllipticOperator& op,
                        double dt, double theta, BoundCheck bounds) {
    MembraneState out = state;
    FlowStepper stepper(op, theta, bounds);
    stepper.step(out, reaction, dt);
    return out;
}

double DtPolicy::substep(double rate) const {
    if (!(rate > 0.0)) return dt_max;
    return std::min(dt_max, safety / (rate * static_cast<double>(samples_per_gap)));
}

std::vector<HazardSample> integrate_to(MembraneState& state, FlowStepper& stepper, const ReactionTerm& reaction,
                                       double t_end, const DtPolicy& policy, const HazardFn& hazard) {
    if (t_end < state.t) throw InputError("integrate_to: t_end precedes the current time");
    std::vector<HazardSample> out;
    if (t_end == state.t) return out;
    double rate = hazard ? hazard(state.t, state.u) : 0.0;
    out.push_back({state.t, rate});
    while (state.t < t_end) {
        double dt = policy.substep(rate);
        const bool last = state.t + dt >= t_end - 1e-12 * dt;
        if (last) dt = t_end - state.t;
        stepper.step(state, reaction, dt);
        if (last) state.t = t_end;
        rate = hazard ? hazard(state.t, state.u) : 0.0;
        out.push_back({state.t, rate});
    }
    return out;
}

double cumulative_hazard(const std::vector<HazardSample>& s) {
    double H = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) H += 0.5 * (s[i].rate + s[i - 1].rate) * (s[i].t - s[i - 1].t);
    return H;
}

double l2_norm(const SpatialGrid& grid, const GridFunction& u) {
    double s = 0.0;
    for (double v : u) s += v * v;
    return std::sqrt(s * grid.h());
}

double h1_seminorm(const SpatialGrid& grid, const GridFunction& u) {
    const std::size_t N = u.size();
    const double h = grid.h();
    double s = 2.0 * (u[0] * u[0] + u[N - 1] * u[N - 1]);
    for (std::size_t i = 0; i + 1 < N; ++i) {
        double d = u[i + 1] - u[i];
        s += d * d;
    }
    return std::sqrt(s / h);
}

}  // namespace pdmpsim
