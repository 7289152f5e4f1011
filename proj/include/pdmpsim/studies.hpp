#pragma once

#include <string>
#include <vector>

#include "pdmpsim/config.hpp"
#include "pdmpsim/limit.hpp"
#include "pdmpsim/report.hpp"

namespace pdmpsim {

// Deterministic solution on the model grid, sampled at output_times(T, cadence),
// together with time integrals of the limit covariance for chosen pairs.
struct ReferenceSolution {
    LimitTrajectory trajectory;
    // int_0^T limit_G(u, p)(Phi_a, Phi_b) dt for each requested pair.
    std::vector<double> covariance_integrals;
    // limit_G(Phi_r, Phi_r) at each output time, [frame][r].
    std::vector<std::vector<double>> covariance_at_frames;
};

ReferenceSolution reference_solution(const Model& model, double T, double cadence,
                                     const std::vector<TestFunction>& phis,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs = {});

// <Phi, fields> = sum_i int phi_i f_i dx.
double pair_fields(const SpatialGrid& grid, const TestFunction& phi, const StateFields& fields);

// Stream salts keep the studies' random streams disjoint.
enum StudySalt : std::uint64_t {
    salt_simulate = 0,
    salt_lln = 1,
    salt_clt = 2,
    salt_ito = 3,
    salt_diagnostics = 4,
    salt_compare_pdmp = 5,
    salt_compare_langevin = 6,
    salt_langevin = 7,
};

StudyReport run_lln_study(const ExperimentConfig& cfg);
StudyReport run_clt_study(const ExperimentConfig& cfg);
StudyReport run_ito_study(const ExperimentConfig& cfg);
StudyReport run_diagnostics_study(const ExperimentConfig& cfg);
StudyReport run_langevin_compare(const ExperimentConfig& cfg);

// Dispatch on cfg.study->kind.
StudyReport run_study(const ExperimentConfig& cfg);

}  // namespace pdmpsim
