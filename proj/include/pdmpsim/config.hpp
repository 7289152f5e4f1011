#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmpsim/engine.hpp"
#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"
#include "pdmpsim/limit.hpp"
#include "pdmpsim/martingale.hpp"
#include "pdmpsim/partition.hpp"
#include "pdmpsim/pde.hpp"

namespace pdmpsim {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "pdmpsim 1.0.0";

struct InitialData {
    GridFunction u0;
    StateFields p0;
};

// Owns every immutable piece of a model; hand out ModelView per level.
class Model {
public:
    Model(SpatialGrid grid, GridFunction diffusion, ChannelKinetics kinetics, LadderSpec ladder, InitialData initial,
          SolverSettings solver);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const SpatialGrid& grid() const { return grid_; }
    const EllipticOperator& diffusion() const { return diffusion_; }
    const ChannelKinetics& kinetics() const { return kinetics_; }
    const std::vector<Partition>& ladder() const { return ladder_; }
    const Partition& level(std::size_t n) const { return ladder_.at(n); }
    std::size_t levels() const { return ladder_.size(); }
    const InitialData& initial() const { return initial_; }
    const SolverSettings& solver() const { return solver_; }

    ModelView view(std::size_t level) const;
    HybridState initial_hybrid(std::size_t level) const;
    LimitState initial_limit() const;
    LimitSettings limit_settings() const;
    // ||z(Theta_0) - p0||_{L2} over non-empty compartments.
    double initial_residual(std::size_t level) const;

private:
    SpatialGrid grid_;
    EllipticOperator diffusion_;
    ChannelKinetics kinetics_;
    std::vector<Partition> ladder_;
    InitialData initial_;
    SolverSettings solver_;
};

struct TestFunctionSpec {
    int sine_modes = 8;
    std::vector<std::size_t> states;  // empty: every state
    bool include_constant = true;
    std::vector<std::size_t> indicator_states;
};

struct Tolerances {
    double lln_l2 = 0.05;
    double z_score = 3.0;
    double h1_ceiling = 100.0;
    double beta = 0.5;
    double quadrature = 1e-4;
};

struct StudySpec {
    std::string kind = "lln";
    double T = 1.0;
    std::size_t replicates = 200;
    double cadence = 0.01;
    int level = -1;  // -1: finest
    TestFunctionSpec test_functions;
    Tolerances tolerances;
    std::optional<double> alpha_n;  // unset: from the partition level; inf allowed
    std::size_t ensemble = 0;        // Langevin ensemble size; 0: same as replicates
};

struct ExecutionSpec {
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out = "out";
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    nlohmann::json source;  // model + solver + study sections as parsed
    std::unique_ptr<Model> model;
    std::optional<StudySpec> study;
    ExecutionSpec execution;

    // FNV-1a of the canonical dump of model, solver, study and seed.
    std::string hash() const;
    nlohmann::json provenance() const;
    std::size_t study_level() const;
    std::vector<TestFunction> test_functions() const;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string fnv1a_hex(const std::string& data);

std::size_t minimum_replicates(const std::string& kind);

}  // namespace pdmpsim
