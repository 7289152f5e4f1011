#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"

namespace pdmpsim {

// d/dx (a(x) d/dx) with homogeneous Dirichlet data.
class EllipticOperator {
public:
    EllipticOperator(const SpatialGrid& grid, GridFunction a, double a_min = 1e-12);
    EllipticOperator(const SpatialGrid& grid, double a) : EllipticOperator(grid, GridFunction(grid.size(), a)) {}
    // Diffusion switched off; only for exercising the reaction part in isolation.
    static EllipticOperator reaction_only(const SpatialGrid& grid);

    std::size_t size() const { return diag_.size(); }
    const GridFunction& coefficient() const { return a_; }
    // Tridiagonal stencil of the discrete operator.
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& diag() const { return diag_; }
    const std::vector<double>& upper() const { return upper_; }
    void apply(const GridFunction& u, GridFunction& out) const;

private:
    EllipticOperator() = default;
    GridFunction a_;
    std::vector<double> lower_, diag_, upper_;
};

// Nodewise B(z, u) = sum_i g_i z_i (E_i - u) = S - C u.
class ReactionTerm {
public:
    ReactionTerm() = default;
    ReactionTerm(const ChannelKinetics& kinetics, const StateFields& z);

    void update(const ChannelKinetics& kinetics, const StateFields& z, std::size_t first, std::size_t end);
    const GridFunction& decay() const { return c_; }
    const GridFunction& source() const { return s_; }
    double operator()(std::size_t node, double u) const { return s_[node] - c_[node] * u; }
    GridFunction evaluate(const GridFunction& u) const;
    double max_decay() const;

private:
    GridFunction c_, s_;
};

struct MembraneState {
    GridFunction u;
    double t = 0.0;
};

struct BoundCheck {
    bool enabled = false;
    double lower = 0.0;
    double upper = 0.0;
    double tolerance = 1e-9;
};

// theta-scheme for the diffusion, forward Euler for the reaction.
class FlowStepper {
public:
    FlowStepper(const EllipticOperator& op, double theta = 1.0, BoundCheck bounds = {});

    void step(MembraneState& state, const ReactionTerm& reaction, double dt);
    double theta() const { return theta_; }
    // Largest amount by which any accepted step exceeded [lower, upper].
    double max_excess() const { return max_excess_; }
    const BoundCheck& bounds() const { return bounds_; }

private:
    const EllipticOperator* op_;
    double theta_;
    BoundCheck bounds_;
    double max_excess_ = 0.0;
    std::vector<double> rhs_, cp_, dp_;
};

MembraneState step_flow(const MembraneState& state, const ReactionTerm& reaction, const EllipticOperator& op,
                        double dt, double theta = 1.0, BoundCheck bounds = {});

struct DtPolicy {
    double dt_max = 1e-3;
    double safety = 1.0;
    std::size_t samples_per_gap = 20;
    // min(dt_max, safety * (1 / rate) / samples_per_gap).
    double substep(double rate) const;
};

struct HazardSample {
    double t = 0.0;
    double rate = 0.0;
};

using HazardFn = std::function<double(double t, const GridFunction& u)>;

// Steps to t_end, sampling the hazard at the start and after every substep.
std::vector<HazardSample> integrate_to(MembraneState& state, FlowStepper& stepper, const ReactionTerm& reaction,
                                       double t_end, const DtPolicy& policy, const HazardFn& hazard);

double cumulative_hazard(const std::vector<HazardSample>& samples);

double l2_norm(const SpatialGrid& grid, const GridFunction& u);
double h1_seminorm(const SpatialGrid& grid, const GridFunction& u);

void solve_tridiagonal(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
                       std::vector<double>& d, std::vector<double>& scratch);

}  // namespace pdmpsim
