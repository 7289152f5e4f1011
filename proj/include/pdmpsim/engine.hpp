#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "pdmpsim/channels.hpp"
#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"
#include "pdmpsim/partition.hpp"
#include "pdmpsim/pde.hpp"
#include "pdmpsim/rng.hpp"

namespace pdmpsim {

enum class JumpTimeMethod { integrated_hazard, thinning };

struct SolverSettings {
    double dt_max = 1e-3;
    double theta = 1.0;
    std::size_t samples_per_gap = 20;
    double safety = 1.0;
    double bound_tolerance = 1e-9;
    JumpTimeMethod method = JumpTimeMethod::integrated_hazard;

    DtPolicy policy() const { return {dt_max, safety, samples_per_gap}; }
};

// Non-owning bundle of everything a single ladder level needs.
struct ModelView {
    const SpatialGrid& grid;
    const EllipticOperator& diffusion;
    const ChannelKinetics& kinetics;
    const Partition& partition;
    SolverSettings solver;
};

struct HybridState {
    MembraneState membrane;
    ChannelConfiguration config;
    CoordinateField z;

    static HybridState make(GridFunction u0, ChannelConfiguration config, const Partition& partition,
                            double t = 0.0);
};

// View of the process at one flow substep. References are valid only for
// the duration of the observer callback.
struct PathPoint {
    double t;
    const GridFunction& u;
    const ChannelConfiguration& config;
    const CoordinateField& z;
    const LocalRates& rates;
    double total_rate;
};

class PathObserver {
public:
    virtual ~PathObserver() = default;
    // Every substep end point; segment_start marks the first point after a
    // jump (and the initial point), so quadratures never straddle a jump.
    virtual void on_flow(const PathPoint& p, bool segment_start) { (void)p, (void)segment_start; }
    virtual void on_jump(double t, const JumpEvent& e, const PathPoint& after) { (void)t, (void)e, (void)after; }
    virtual void on_snapshot(const PathPoint& p) { (void)p; }
};

struct JumpRecord {
    double t = 0.0;
    JumpEvent event;
};

struct Snapshot {
    double t = 0.0;
    GridFunction u;
    StateFields z;
};

struct PathStats {
    std::size_t substeps = 0;
    std::size_t jumps = 0;
    std::size_t proposals = 0;
    std::size_t rejections = 0;
    double max_bound_excess = 0.0;
    double max_total_rate = 0.0;
    bool conservation_checked = false;
};

struct HybridPath {
    std::vector<JumpRecord> jumps;
    std::vector<Snapshot> snapshots;
    HybridState initial;
    HybridState terminal;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double T = 0.0;
    JumpTimeMethod method = JumpTimeMethod::integrated_hazard;
    PathStats stats;
};

struct SimulationOptions {
    double T = 1.0;
    double cadence = 0.0;  // 0: snapshots at 0 and T only
    bool record_jumps = true;
    bool record_snapshots = true;
    // Re-verify channel conservation after every jump.
    bool check_conservation = true;
    PathObserver* observer = nullptr;
};

// Snapshot grid 0, c, 2c, ..., T shared by every simulator.
std::vector<double> output_times(double T, double cadence);

struct JumpTimeResult {
    double tau = std::numeric_limits<double>::infinity();
    MembraneState state;  // flowed membrane at tau (or at the horizon)
    bool jumped = false;
};

// Flows the membrane with the configuration frozen until a jump time.
JumpTimeResult sample_jump_time(const ModelView& model, const HybridState& state, CounterRng& rng,
                                JumpTimeMethod method,
                                double horizon = std::numeric_limits<double>::infinity());
// Integrated-hazard inversion for a given exponential draw e.
JumpTimeResult invert_hazard(const ModelView& model, const HybridState& state, double e,
                             double horizon = std::numeric_limits<double>::infinity());

JumpEvent select_event(const RateTable& table, double uniform01);
ChannelConfiguration sample_post_jump(const HybridState& state_at_tau, const RateTable& rates, CounterRng& rng,
                                      JumpEvent* chosen = nullptr);

HybridPath simulate(const ModelView& model, const HybridState& initial, CounterRng& rng,
                    const SimulationOptions& options);
// Re-runs the flow with jump times and events taken from a log.
HybridPath replay(const ModelView& model, const HybridState& initial, const std::vector<JumpRecord>& jumps,
                  const SimulationOptions& options);

void write_path_jsonl(std::ostream& os, const HybridPath& path, const Partition& partition,
                      const std::string& config_hash);
std::string path_to_jsonl(const HybridPath& path, const Partition& partition, const std::string& config_hash);

const char* method_name(JumpTimeMethod m);

}  // namespace pdmpsim
