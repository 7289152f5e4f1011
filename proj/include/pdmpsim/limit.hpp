#pragma once

#include <functional>
#include <vector>

#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"
#include "pdmpsim/pde.hpp"

namespace pdmpsim {

struct LimitState {
    GridFunction u;
    StateFields p;  // [state][node]
    double t = 0.0;
};

// F_j = sum_{i != j} q_ij(u) p_i - q_ji(u) p_j at one node. The last
// component closes the balance so that sum_j F_j is zero in floating point.
void kinetics_field_node(const ChannelKinetics& kinetics, const double* p, double u, double* F, double* qbuf);
StateFields kinetics_field(const ChannelKinetics& kinetics, const StateFields& p, const GridFunction& u);

struct LimitSettings {
    double dt_max = 1e-3;
    double theta = 1.0;
    double mass_tolerance = 1e-8;
    double bound_tolerance = 1e-9;
    bool enforce_bounds = true;
};

// Perturbation added to p after the drift update (the Langevin noise).
using FieldIncrement = std::function<void(const LimitState& before, const LimitState& after, double dt, StateFields& p)>;

class LimitSolver {
public:
    LimitSolver(const SpatialGrid& grid, const EllipticOperator& op, const ChannelKinetics& kinetics,
                LimitSettings settings);

    // Step size used by solve(): min(dt_max, 0.1 / q_bar).
    double dt() const { return dt_; }
    void step(LimitState& state, double dt, const FieldIncrement& noise = nullptr);

    double max_mass_drift() const { return max_mass_drift_; }
    double max_bound_excess() const { return stepper_.max_excess(); }
    double max_p_excess() const { return max_p_excess_; }
    const ChannelKinetics& kinetics() const { return *kin_; }
    const SpatialGrid& grid() const { return *grid_; }

private:
    const SpatialGrid* grid_;
    const ChannelKinetics* kin_;
    LimitSettings settings_;
    FlowStepper stepper_;
    double dt_;
    double max_mass_drift_ = 0.0;
    double max_p_excess_ = 0.0;
    StateFields F0_, F1_, pstar_;
    std::vector<double> qbuf_, pn_, fn_;
    ReactionTerm reaction_;
    LimitState before_;
};

LimitState step_limit(LimitSolver& solver, const LimitState& state, double dt);

struct LimitTrajectory {
    std::vector<LimitState> frames;  // at output_times(T, cadence)
    double max_mass_drift = 0.0;
    double max_bound_excess = 0.0;
    std::size_t steps = 0;
};

// Invoked at the initial state and after every step.
using LimitStepCallback = std::function<void(const LimitState&)>;

// Advances with solver.dt(), landing exactly on every output time.
LimitTrajectory solve_limit(LimitSolver& solver, const LimitState& initial, double T, double cadence,
                            const LimitStepCallback& callback = nullptr, const FieldIncrement& noise = nullptr);

double mass_defect(const StateFields& p);

}  // namespace pdmpsim
