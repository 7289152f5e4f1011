#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"
#include "pdmpsim/limit.hpp"
#include "pdmpsim/pde.hpp"
#include "pdmpsim/rng.hpp"

namespace pdmpsim {

// Symmetric PSD square root of a row-major m x m matrix. Eigenvalues below
// -1e-12 (relative to the largest magnitude, floor 1e-12) raise PsdError;
// the rest are floored at zero.
std::vector<double> psd_sqrt(const std::vector<double>& D, std::size_t m, std::size_t node = 0);

// Per-node covariance D(p*, u) with p* = max(P, 0) and its square root.
class NoiseKernel {
public:
    NoiseKernel(const ChannelKinetics& kinetics, std::size_t nodes);

    // Rebuilds D and sqrt(D) at every node; returns the number of nodes where
    // the clamp p* = max(P, 0) changed an argument.
    std::size_t assemble(const StateFields& P, const GridFunction& u);
    const double* D(std::size_t node) const { return D_.data() + node * m_ * m_; }
    const double* root(std::size_t node) const { return S_.data() + node * m_ * m_; }
    std::size_t states() const { return m_; }

private:
    const ChannelKinetics* kin_;
    std::size_t m_, N_;
    std::vector<double> D_, S_, q_, p_;
};

using LangevinState = LimitState;

struct LangevinStats {
    std::size_t steps = 0;
    std::size_t clamp_activations = 0;  // node-steps where P < 0 was clamped inside D
    double min_p = 1.0;
    double max_p = 0.0;
    std::size_t excursion_steps = 0;  // steps with some P outside [0, 1]
    double max_noise_mass = 0.0;      // |sum_i noise_i| over all nodes and steps
    double max_mass_drift = 0.0;
    double max_u_excess = 0.0;
};

// Euler-Maruyama on the P field over the deterministic-limit drift:
// P += drift dt + noise_scale sqrt(D(x)) xi sqrt(dt / h).
class LangevinIntegrator {
public:
    LangevinIntegrator(const SpatialGrid& grid, const EllipticOperator& op, const ChannelKinetics& kinetics,
                       LimitSettings settings, double noise_scale);

    void step(LangevinState& state, double dt, CounterRng& rng);
    double dt() const { return solver_.dt(); }
    double noise_scale() const { return scale_; }
    const LangevinStats& stats() const { return stats_; }
    LimitSolver& solver() { return solver_; }

private:
    void add_noise(const LimitState& before, double dt, StateFields& p, CounterRng& rng);

    const SpatialGrid* grid_;
    LimitSolver solver_;
    NoiseKernel kernel_;
    double scale_;
    LangevinStats stats_;
    std::vector<double> xi_, eta_;
};

// Noise scale 1 / sqrt(alpha); alpha = +inf gives 0.
double noise_scale_for(double alpha);

LangevinState step_langevin(LangevinIntegrator& integrator, const LangevinState& state, double dt, CounterRng& rng);

struct LangevinTrajectory {
    std::vector<LangevinState> frames;  // at output_times(T, cadence)
    LangevinStats stats;
};

LangevinTrajectory solve_langevin(LangevinIntegrator& integrator, const LangevinState& initial, double T,
                                  CounterRng& rng, double cadence,
                                  const std::function<void(const LangevinState&)>& callback = nullptr);

}  // namespace pdmpsim
