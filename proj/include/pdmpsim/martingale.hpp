#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdmpsim/channels.hpp"
#include "pdmpsim/engine.hpp"
#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"
#include "pdmpsim/limit.hpp"
#include "pdmpsim/partition.hpp"

namespace pdmpsim {

// Phi = (phi_0, ..., phi_{m-1}), one grid function per channel state.
struct TestFunction {
    std::string label;
    int basis_index = -1;
    StateFields phi;

    static TestFunction zero(const SpatialGrid& grid, std::size_t states);
    // sin(k pi x / L) in one state slot, zero elsewhere.
    static TestFunction sine_mode(const SpatialGrid& grid, std::size_t states, std::size_t state, int k,
                                  double amplitude = 1.0);
    // The same constant in every state slot (kernel of every covariance).
    static TestFunction constant_across_states(const SpatialGrid& grid, std::size_t states, double c = 1.0);
    static TestFunction state_constant(const SpatialGrid& grid, std::size_t states, std::size_t state, double c);
    static TestFunction polynomial(const SpatialGrid& grid, std::size_t states, std::size_t state,
                                   const std::vector<double>& coeffs);
    static TestFunction bump(const SpatialGrid& grid, std::size_t states, std::size_t state, double centre,
                             double radius);

    TestFunction scaled(double c) const;
    std::size_t states() const { return phi.size(); }
};

// Discrete orthonormal basis of (grid L2)^m: sqrt(2/L) sin(k pi x/L), k = 1..N
// in each state slot (the k = N vector normalised separately).
std::vector<TestFunction> orthonormal_basis(const SpatialGrid& grid, std::size_t states);

// Integrals of phi_j over each compartment; everything the jump process
// needs to know about Phi.
class CompartmentPairing {
public:
    CompartmentPairing(const TestFunction& phi, const Partition& partition);

    std::size_t compartments() const { return K_; }
    std::size_t states() const { return m_; }
    double integral(std::size_t k, std::size_t j) const { return I_[k * m_ + j]; }
    // <Phi, z(theta)>.
    double pair(const CoordinateField& z) const;
    // <Phi, Delta z> for the event (k, i -> j).
    double jump(const JumpEvent& e) const { return jump(e.compartment, e.from, e.to); }
    double jump(std::size_t k, std::size_t i, std::size_t j) const {
        return (I_[k * m_ + j] - I_[k * m_ + i]) * inv_l_[k];
    }
    // <Phi, compensator drift> from local rates.
    double drift(const CoordinateField& z, const LocalRates& q) const;
    // <Phi, G^n Phi> at (u, theta), or <Phi, G^n Psi> with another pairing.
    double quadratic(const ChannelConfiguration& config, const LocalRates& q) const;
    double bilinear(const CompartmentPairing& other, const ChannelConfiguration& config, const LocalRates& q) const;
    // max over non-empty k and i != j of |<Phi, Delta z>|.
    double max_jump() const;
    // (1 / l_k) |D_k| sup_{D_k} |phi_j - phi_i|, maximised over k, i, j.
    double jump_bound() const;

private:
    std::size_t K_, m_;
    std::vector<double> I_;
    std::vector<double> inv_l_;
    std::vector<double> osc_bound_;  // per compartment
};

// Closed-form compensator drift sum_{j != i} (z_j q_ji - z_i q_ij) per state, on the grid.
StateFields compensator_drift(const HybridState& state, const ChannelKinetics& kinetics, const Partition& partition);
// The same quantity by enumerating every event's rate times Delta z.
StateFields compensator_drift_enumerated(const HybridState& state, const ChannelKinetics& kinetics,
                                         const Partition& partition);

enum class FormProvenance { empirical_Gn, limit_G };

class QuadraticForm {
public:
    using Fn = std::function<double(const TestFunction&, const TestFunction&)>;
    QuadraticForm(FormProvenance provenance, std::string description, Fn fn)
        : provenance_(provenance), description_(std::move(description)), fn_(std::move(fn)) {}
    double operator()(const TestFunction& a, const TestFunction& b) const { return fn_(a, b); }
    FormProvenance provenance() const { return provenance_; }
    const std::string& description() const { return description_; }

private:
    FormProvenance provenance_;
    std::string description_;
    Fn fn_;
};

QuadraticForm empirical_Gn(const HybridState& state, const ChannelKinetics& kinetics, const Partition& partition);
// Lambda * E_mu ||Delta z||^2 by direct enumeration.
double jump_second_moment(const ChannelConfiguration& config, const LocalRates& q, const Partition& partition);

// Limit covariance: integral of sum_{i != j} p_i q_ij(u) (phi_j - phi_i)(psi_j - psi_i).
QuadraticForm limit_G(const SpatialGrid& grid, const GridFunction& u, const StateFields& p,
                      const ChannelKinetics& kinetics, double mass_tolerance = 1e-8);
// Alternative evaluation routes, kept for cross-checking.
double limit_G_four_term(const SpatialGrid& grid, const GridFunction& u, const StateFields& p,
                         const ChannelKinetics& kinetics, const TestFunction& phi, const TestFunction& psi);
double limit_G_matrix(const SpatialGrid& grid, const GridFunction& u, const StateFields& p,
                      const ChannelKinetics& kinetics, const TestFunction& phi, const TestFunction& psi);
// Nodewise covariance matrix D(x), row-major m x m.
void covariance_matrix(const ChannelKinetics& kinetics, const double* p, double u, double* D, double* qbuf);

// Tracks <Phi_r, M(t)> for several test functions along a path.
class MartingaleTracker : public PathObserver {
public:
    struct Options {
        bool quadratic_variation = false;  // also integrate <Phi, G^n Phi>
        bool record = false;               // keep samples at snapshots and jumps
    };

    MartingaleTracker(const std::vector<TestFunction>& phis, const Partition& partition, Options options);
    MartingaleTracker(const std::vector<TestFunction>& phis, const Partition& partition)
        : MartingaleTracker(phis, partition, Options{}) {}

    void on_flow(const PathPoint& p, bool segment_start) override;
    void on_jump(double t, const JumpEvent& e, const PathPoint& after) override;
    void on_snapshot(const PathPoint& p) override;

    std::size_t size() const { return pairings_.size(); }
    double value(std::size_t r) const { return pair_[r] - pair0_[r] - comp_[r]; }
    double pairing(std::size_t r) const { return pair_[r]; }
    double initial_pairing(std::size_t r) const { return pair0_[r]; }
    double compensator(std::size_t r) const { return comp_[r]; }
    double quadratic_variation(std::size_t r) const { return qv_[r]; }
    // Crude trapezoid error bound: sum of |second differences| dt / 12.
    double quadrature_error(std::size_t r) const { return qerr_[r]; }
    const CompartmentPairing& pairing_of(std::size_t r) const { return pairings_[r]; }

    struct Sample {
        double t;
        int kind;  // 0 snapshot, 1 pre-jump, 2 post-jump
        std::vector<double> values;
        std::vector<double> compensator;
        std::vector<double> pairings;
    };
    const std::vector<Sample>& samples() const { return samples_; }

private:
    void record(double t, int kind);

    std::vector<CompartmentPairing> pairings_;
    Options opt_;
    bool started_ = false;
    std::vector<double> pair0_, pair_, comp_, qv_, qerr_;
    std::vector<double> last_drift_, prev_drift_, last_qv_;
    double last_t_ = 0.0, prev_dt_ = 0.0;
    bool have_prev_ = false;
    std::vector<Sample> samples_;
};

struct MartingalePath {
    std::vector<double> times;
    std::vector<int> kinds;
    std::vector<std::vector<double>> values;        // [sample][test function]
    std::vector<std::vector<double>> compensator;   // [sample][test function]
    std::vector<std::vector<double>> pairings;      // [sample][test function]
    std::vector<double> initial_pairings;
    std::vector<double> quadrature_error;
    double reassembly_residual = 0.0;
};

// Re-runs the recorded path through the flow and extracts M. Throws
// AnalysisError when the compensator quadrature error exceeds tolerance.
MartingalePath martingale_path(const ModelView& model, const HybridPath& path, const std::vector<TestFunction>& phis,
                               double quadrature_tolerance = 1e-4);

}  // namespace pdmpsim

namespace pdmpsim {

struct ItoReport {
    std::size_t replicates = 0;
    double lhs = 0.0;  // E <Phi, M(T)>^2
    double lhs_stderr = 0.0;
    double rhs = 0.0;  // E int_0^T <Phi, G^n Phi> ds
    double rhs_stderr = 0.0;
    double residual = 0.0;
    double combined_stderr = 0.0;  // sqrt(se_lhs^2 + se_rhs^2)
    double paired_stderr = 0.0;    // stderr of M^2 - QV over replicates
    double z_score = 0.0;
    double mean_M = 0.0;
    double mean_M_stderr = 0.0;
    bool pass = false;
};

struct ItoSamples {
    std::vector<double> M;   // <Phi, M(T)> per replicate
    std::vector<double> QV;  // int_0^T <Phi, G^n Phi> ds per replicate
};

ItoReport summarize_ito(const ItoSamples& s);

ItoReport ito_isometry_residual(const ModelView& model, const HybridState& initial, const TestFunction& phi, double T,
                                std::size_t replicates, std::uint64_t seed, unsigned workers = 1,
                                std::uint64_t stream_salt = 0);

// Per-path quantities behind the tightness and CLT conditions.
class ConditionTracker : public PathObserver {
public:
    struct Settings {
        double alpha = 1.0;
        double beta = 0.5;    // D2 threshold on sqrt(alpha) |<Phi, Delta z>|
        double beta_n = 0.5;  // shrinking threshold for the D3' tail moment
        // limit_G(Phi_r, Phi_r) on the deterministic solution at each output
        // time, [snapshot][r]; empty disables the QV-gap integral.
        std::vector<std::vector<double>> limit_values;
    };

    ConditionTracker(const std::vector<TestFunction>& phis, const ModelView& model, Settings settings);

    void on_flow(const PathPoint& p, bool segment_start) override;
    void on_jump(double t, const JumpEvent& e, const PathPoint& after) override;
    void on_snapshot(const PathPoint& p) override;

    struct Result {
        double trace_integral = 0.0;    // int Lambda E||Delta z||^2 dt
        double c2_residual = 0.0;       // int ||drift - F(z, U)||_{L2} dt
        std::vector<double> qv;         // int <Phi_r, G^n Phi_r> dt
        std::vector<double> d2_rate;    // int rate of events with sqrt(alpha)|dPhi| > beta
        std::vector<double> d3_tail;    // alpha int sum_{big events} rate dPhi^2 (beta_n)
        std::vector<double> qv_gap;     // int |G(Phi,Phi) - alpha G^n(Phi,Phi)| dt
        std::vector<double> max_jump;   // sqrt(alpha) max |<Phi_r, Delta z>| over realised jumps
        std::vector<double> big_jumps;  // realised jumps above beta
        double max_dz_norm = 0.0;       // sqrt(alpha) max ||Delta z|| over realised jumps
        std::vector<std::vector<double>> qv_profile;  // alpha int_0^t G^n at output times [snapshot][r]
    };
    const Result& result() const { return res_; }

private:
    std::vector<CompartmentPairing> pairings_;
    const ModelView& model_;
    Settings set_;
    std::vector<double> dz_norm_;  // per compartment ||Delta z||
    std::vector<std::vector<char>> mask_d2_, mask_d3_;  // [r][(k*m+i)*m+j]
    Result res_;
    std::vector<double> last_, cur_;
    double last_t_ = 0.0;
    bool have_last_ = false;
    std::size_t snap_ = 0;
    double last_gap_t_ = 0.0;
    std::vector<double> last_gap_;
    std::vector<double> qbuf_, fbuf_, pbuf_;
};

}  // namespace pdmpsim
