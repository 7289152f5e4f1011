#include "pdmpsim/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pdmpsim/engine.hpp"
#include "pdmpsim/errors.hpp"
#include "pdmpsim/martingale.hpp"

namespace pdmpsim {

std::vector<double> psd_sqrt(const std::vector<double>& D, std::size_t m, std::size_t node) {
    Eigen::MatrixXd A(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double v = D[i * m + j];
            if (!std::isfinite(v))
                throw NumericalError("non-finite covariance entry at node " + std::to_string(node));
            A(i, j) = v;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigendecomposition failed at node " + std::to_string(node));
    Eigen::VectorXd lam = es.eigenvalues();
    double top = 0.0;
    for (Eigen::Index k = 0; k < lam.size(); ++k) top = std::max(top, std::abs(lam(k)));
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * top;
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
        if (lam(k) < -1e-12) {
            std::ostringstream msg;
            msg << "covariance matrix not PSD at node " << node << ": eigenvalue " << lam(k);
            throw PsdError(msg.str());
        }
        lam(k) = lam(k) <= floor ? 0.0 : std::sqrt(lam(k));
    }
    Eigen::MatrixXd S = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    std::vector<double> out(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = 0.5 * (S(i, j) + S(j, i));
    return out;
}

NoiseKernel::NoiseKernel(const ChannelKinetics& kinetics, std::size_t nodes)
    : kin_(&kinetics), m_(kinetics.states()), N_(nodes) {
    D_.assign(N_ * m_ * m_, 0.0);
    S_.assign(N_ * m_ * m_, 0.0);
    q_.resize(m_ * m_);
    p_.resize(m_);
}

std::size_t NoiseKernel::assemble(const StateFields& P, const GridFunction& u) {
    std::size_t clamped = 0;
    std::vector<double> d(m_ * m_);
    for (std::size_t x = 0; x < N_; ++x) {
        bool c = false;
        for (std::size_t i = 0; i < m_; ++i) {
            p_[i] = std::max(P[i][x], 0.0);
            c = c || P[i][x] < 0.0;
        }
        clamped += c;
        covariance_matrix(*kin_, p_.data(), u[x], d.data(), q_.data());
        std::copy(d.begin(), d.end(), D_.begin() + x * m_ * m_);
        auto s = psd_sqrt(d, m_, x);
        std::copy(s.begin(), s.end(), S_.begin() + x * m_ * m_);
    }
    return clamped;
}

double noise_scale_for(double alpha) {
    if (std::isinf(alpha)) return 0.0;
    if (!(alpha > 0.0)) throw ConfigError("alpha_n must be positive");
    return 1.0 / std::sqrt(alpha);
}

LangevinIntegrator::LangevinIntegrator(const SpatialGrid& grid, const EllipticOperator& op,
                                       const ChannelKinetics& kinetics, LimitSettings settings, double noise_scale)
    : grid_(&grid), solver_(grid, op, kinetics, settings), kernel_(kinetics, grid.size()), scale_(noise_scale) {
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw ConfigError("noise scale must be >= 0");
    xi_.resize(kinetics.states());
    eta_.resize(kinetics.states());
}

void LangevinIntegrator::add_noise(const LimitState& before, double dt, StateFields& p, CounterRng& rng) {
    const std::size_t m = kernel_.states(), N = grid_->size();
    stats_.clamp_activations += kernel_.assemble(before.p, before.u);
    const double amp = scale_ * std::sqrt(dt / grid_->h());
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t j = 0; j < m; ++j) xi_[j] = rng.normal();
        const double* S = kernel_.root(x);
        double rest = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < m; ++j) v += S[i * m + j] * xi_[j];
            eta_[i] = amp * v;
            rest += eta_[i];
        }
        // The last row of sqrt(D) is minus the sum of the others up to
        // roundoff; closing the balance keeps the noise mass-free exactly.
        eta_[m - 1] = -rest;
        double mass = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            p[i][x] += eta_[i];
            mass += eta_[i];
        }
        stats_.max_noise_mass = std::max(stats_.max_noise_mass, std::abs(mass));
    }
}

void LangevinIntegrator::step(LangevinState& state, double dt, CounterRng& rng) {
    solver_.step(state, dt, [&](const LimitState& before, const LimitState&, double h, StateFields& p) {
        add_noise(before, h, p, rng);
    });
    ++stats_.steps;
    bool excursion = false;
    for (const auto& pi : state.p)
        for (double v : pi) {
            stats_.min_p = std::min(stats_.min_p, v);
            stats_.max_p = std::max(stats_.max_p, v);
            excursion = excursion || v < 0.0 || v > 1.0;
        }
    stats_.excursion_steps += excursion;
    stats_.max_mass_drift = solver_.max_mass_drift();
    stats_.max_u_excess = solver_.max_bound_excess();
}

LangevinState step_langevin(LangevinIntegrator& integrator, const LangevinState& state, double dt, CounterRng& rng) {
    LangevinState out = state;
    integrator.step(out, dt, rng);
    return out;
}

LangevinTrajectory solve_langevin(LangevinIntegrator& integrator, const LangevinState& initial, double T,
                                  CounterRng& rng, double cadence,
                                  const std::function<void(const LangevinState&)>& callback) {
    if (T < 0.0) throw InputError("solve_langevin: negative horizon");
    LangevinTrajectory out;
    LangevinState s = initial;
    out.frames.push_back(s);
    if (callback) callback(s);
    if (T > 0.0) {
        const double dt = integrator.dt();
        for (double rel : output_times(T, cadence)) {
            if (rel == 0.0) continue;
            const double target = initial.t + rel;
            while (s.t < target) {
                double h = dt;
                bool last = s.t + h >= target - 1e-12 * h;
                if (last) h = target - s.t;
                integrator.step(s, h, rng);
                if (last) s.t = target;
                if (callback) callback(s);
            }
            out.frames.push_back(s);
        }
    }
    out.stats = integrator.stats();
    return out;
}

}  // namespace pdmpsim
