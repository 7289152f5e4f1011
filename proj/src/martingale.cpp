#include "pdmpsim/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "pdmpsim/errors.hpp"
#include "pdmpsim/parallel.hpp"
#include "pdmpsim/stats.hpp"

namespace pdmpsim {

TestFunction TestFunction::zero(const SpatialGrid& grid, std::size_t states) {
    return {"zero", -1, StateFields(states, GridFunction(grid.size(), 0.0))};
}

TestFunction TestFunction::sine_mode(const SpatialGrid& grid, std::size_t states, std::size_t state, int k,
                                     double amplitude) {
    TestFunction f = zero(grid, states);
    const double L = grid.length();
    f.phi[state] = grid.tabulate([&](double x) { return amplitude * std::sin(k * std::numbers::pi * x / L); });
    f.label = "sine" + std::to_string(k) + "_s" + std::to_string(state);
    f.basis_index = k;
    return f;
}

TestFunction TestFunction::constant_across_states(const SpatialGrid& grid, std::size_t states, double c) {
    TestFunction f{"constant", 0, StateFields(states, GridFunction(grid.size(), c))};
    return f;
}

TestFunction TestFunction::state_constant(const SpatialGrid& grid, std::size_t states, std::size_t state, double c) {
    TestFunction f = zero(grid, states);
    f.phi[state].assign(grid.size(), c);
    f.label = "indicator_s" + std::to_string(state);
    f.basis_index = 0;
    return f;
}

TestFunction TestFunction::polynomial(const SpatialGrid& grid, std::size_t states, std::size_t state,
                                      const std::vector<double>& coeffs) {
    TestFunction f = zero(grid, states);
    f.phi[state] = grid.tabulate([&](double x) {
        double v = 0.0;
        for (std::size_t c = coeffs.size(); c-- > 0;) v = v * x + coeffs[c];
        return v;
    });
    f.label = "poly" + std::to_string(coeffs.size() ? coeffs.size() - 1 : 0) + "_s" + std::to_string(state);
    f.basis_index = static_cast<int>(coeffs.size());
    return f;
}

TestFunction TestFunction::bump(const SpatialGrid& grid, std::size_t states, std::size_t state, double centre,
                                double radius) {
    TestFunction f = zero(grid, states);
    f.phi[state] = grid.tabulate([&](double x) {
        double r = (x - centre) / radius;
        return std::abs(r) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0;
    });
    f.label = "bump_s" + std::to_string(state);
    return f;
}

TestFunction TestFunction::scaled(double c) const {
    TestFunction f = *this;
    for (auto& p : f.phi)
        for (double& v : p) v *= c;
    return f;
}

std::vector<TestFunction> orthonormal_basis(const SpatialGrid& grid, std::size_t states) {
    std::vector<TestFunction> out;
    const std::size_t N = grid.size();
    const double L = grid.length();
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t k = 1; k <= N; ++k) {
            double a = k == N ? std::sqrt(1.0 / L) : std::sqrt(2.0 / L);
            out.push_back(TestFunction::sine_mode(grid, states, s, static_cast<int>(k), a));
        }
    return out;
}

CompartmentPairing::CompartmentPairing(const TestFunction& phi, const Partition& partition)
    : K_(partition.size()), m_(phi.states()) {
    I_.assign(K_ * m_, 0.0);
    inv_l_.assign(K_, 0.0);
    osc_bound_.assign(K_, 0.0);
    const double h = partition.measure(0) / static_cast<double>(partition[0].cells());
    for (std::size_t k = 0; k < K_; ++k) {
        const auto& c = partition[k];
        for (std::size_t j = 0; j < m_; ++j) {
            double s = 0.0;
            for (std::size_t x = c.first_cell; x < c.end_cell; ++x) s += phi.phi[j][x];
            I_[k * m_ + j] = s * h;
        }
        if (c.empty()) continue;
        inv_l_[k] = 1.0 / c.channels;
        double osc = 0.0;
        for (std::size_t x = c.first_cell; x < c.end_cell; ++x)
            for (std::size_t i = 0; i < m_; ++i)
                for (std::size_t j = 0; j < m_; ++j) osc = std::max(osc, std::abs(phi.phi[j][x] - phi.phi[i][x]));
        osc_bound_[k] = osc * partition.measure(k) * inv_l_[k];
    }
}

double CompartmentPairing::pair(const CoordinateField& z) const {
    double s = 0.0;
    for (std::size_t k = 0; k < K_; ++k)
        for (std::size_t j = 0; j < m_; ++j) s += z.value(k, j) * I_[k * m_ + j];
    return s;
}

double CompartmentPairing::drift(const CoordinateField& z, const LocalRates& q) const {
    double s = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
        const double* Ik = I_.data() + k * m_;
        const double* qk = q.q.data() + k * m_ * m_;
        for (std::size_t i = 0; i < m_; ++i) {
            const double zi = z.value(k, i);
            if (zi == 0.0) continue;
            double f = 0.0;
            for (std::size_t j = 0; j < m_; ++j) f += qk[i * m_ + j] * (Ik[j] - Ik[i]);
            s += zi * f;
        }
    }
    return s;
}

double CompartmentPairing::quadratic(const ChannelConfiguration& config, const LocalRates& q) const {
    return bilinear(*this, config, q);
}

double CompartmentPairing::bilinear(const CompartmentPairing& o, const ChannelConfiguration& config,
                                    const LocalRates& q) const {
    double s = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
        const int* n = config.row(k);
        const double* qk = q.q.data() + k * m_ * m_;
        for (std::size_t i = 0; i < m_; ++i) {
            if (n[i] == 0) continue;
            double f = 0.0;
            for (std::size_t j = 0; j < m_; ++j) {
                if (j == i) continue;
                f += qk[i * m_ + j] * jump(k, i, j) * o.jump(k, i, j);
            }
            s += n[i] * f;
        }
    }
    return s;
}

double CompartmentPairing::max_jump() const {
    double best = 0.0;
    for (std::size_t k = 0; k < K_; ++k) {
        if (inv_l_[k] == 0.0) continue;
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < m_; ++j)
                if (i != j) best = std::max(best, std::abs(jump(k, i, j)));
    }
    return best;
}

double CompartmentPairing::jump_bound() const { return *std::max_element(osc_bound_.begin(), osc_bound_.end()); }

StateFields compensator_drift(const HybridState& state, const ChannelKinetics& kinetics, const Partition& partition) {
    const std::size_t m = kinetics.states(), N = partition.grid_size();
    LocalRates q = local_rates(state.membrane.u, kinetics, partition);
    StateFields d(m, GridFunction(N, 0.0));
    std::vector<double> dk(m);
    for (std::size_t k = 0; k < partition.size(); ++k) {
        if (partition[k].empty()) continue;
        for (std::size_t i = 0; i < m; ++i) {
            double in = 0.0, out = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                in += state.z.value(k, j) * q.at(k, j, i);
                out += q.at(k, i, j);
            }
            dk[i] = in - state.z.value(k, i) * out;
        }
        for (std::size_t x = partition[k].first_cell; x < partition[k].end_cell; ++x)
            for (std::size_t i = 0; i < m; ++i) d[i][x] = dk[i];
    }
    return d;
}

StateFields compensator_drift_enumerated(const HybridState& state, const ChannelKinetics& kinetics,
                                         const Partition& partition) {
    const std::size_t m = kinetics.states(), N = partition.grid_size();
    RateTable table = jump_event_rates(state.membrane.u, state.config, kinetics, partition);
    StateFields d(m, GridFunction(N, 0.0));
    for (std::size_t r = 0; r < table.events.size(); ++r) {
        const auto& e = table.events[r];
        if (table.rates[r] == 0.0) continue;
        // Post-jump coordinate field minus the current one, nodewise.
        ChannelConfiguration after = state.config;
        after.apply(e);
        CoordinateField z_after(after, partition);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t x = 0; x < N; ++x) d[i][x] += table.rates[r] * (z_after.field(i)[x] - state.z.field(i)[x]);
    }
    return d;
}

QuadraticForm empirical_Gn(const HybridState& state, const ChannelKinetics& kinetics, const Partition& partition) {
    auto q = std::make_shared<LocalRates>(local_rates(state.membrane.u, kinetics, partition));
    auto config = std::make_shared<ChannelConfiguration>(state.config);
    const Partition* part = &partition;
    return QuadraticForm(FormProvenance::empirical_Gn, "empirical G^n at t = " + std::to_string(state.membrane.t),
                         [q, config, part](const TestFunction& a, const TestFunction& b) {
                             CompartmentPairing pa(a, *part), pb(b, *part);
                             return pa.bilinear(pb, *config, *q);
                         });
}

double jump_second_moment(const ChannelConfiguration& config, const LocalRates& q, const Partition& partition) {
    const std::size_t m = q.m;
    double s = 0.0;
    for (std::size_t k = 0; k < q.K; ++k) {
        if (partition[k].empty()) continue;
        const double l = partition.channels(k);
        const double dz2 = 2.0 * partition.measure(k) / (l * l);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) s += config.count(k, i) * q.at(k, i, j) * dz2;
    }
    return s;
}

void covariance_matrix(const ChannelKinetics& kinetics, const double* p, double u, double* D, double* q) {
    const std::size_t m = kinetics.states();
    kinetics.evaluate(u, q);
    for (std::size_t j = 0; j < m; ++j) {
        double off = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == j) continue;
            double r = p[i] * q[i * m + j] + p[j] * q[j * m + i];
            D[i * m + j] = -r;
            off += r;
        }
        D[j * m + j] = off;
    }
}

namespace {
void check_mass(const StateFields& p, double tol) {
    double d = mass_defect(p);
    if (d > tol) {
        std::ostringstream msg;
        msg << "occupancy fields violate sum_i p_i = 1 by " << d;
        throw InputError(msg.str());
    }
}
}  // namespace

QuadraticForm limit_G(const SpatialGrid& grid, const GridFunction& u, const StateFields& p,
                      const ChannelKinetics& kinetics, double mass_tolerance) {
    check_mass(p, mass_tolerance);
    const std::size_t m = kinetics.states(), N = grid.size();
    // flux[x][(i*m + j)] = p_i q_ij(u(x))
    auto flux = std::make_shared<std::vector<double>>(N * m * m, 0.0);
    std::vector<double> q(m * m);
    for (std::size_t x = 0; x < N; ++x) {
        kinetics.evaluate(u[x], q.data());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) (*flux)[(x * m + i) * m + j] = i == j ? 0.0 : p[i][x] * q[i * m + j];
    }
    const double h = grid.h();
    return QuadraticForm(FormProvenance::limit_G, "limit G", [flux, m, N, h](const TestFunction& a, const TestFunction& b) {
        double s = 0.0;
        for (std::size_t x = 0; x < N; ++x) {
            const double* f = flux->data() + x * m * m;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    if (i == j) continue;
                    s += f[i * m + j] * (a.phi[j][x] - a.phi[i][x]) * (b.phi[j][x] - b.phi[i][x]);
                }
        }
        return s * h;
    });
}

double limit_G_four_term(const SpatialGrid& grid, const GridFunction& u, const StateFields& p,
                         const ChannelKinetics& kinetics, const TestFunction& a, const TestFunction& b) {
    check_mass(p, 1e-8);
    const std::size_t m = kinetics.states(), N = grid.size();
    std::vector<double> q(m * m);
    double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0;
    for (std::size_t x = 0; x < N; ++x) {
        kinetics.evaluate(u[x], q.data());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                const double f = p[i][x] * q[i * m + j];
                t1 += f * a.phi[i][x] * b.phi[i][x];
                t2 += f * a.phi[j][x] * b.phi[j][x];
                t3 += f * a.phi[i][x] * b.phi[j][x];
                t4 += f * a.phi[j][x] * b.phi[i][x];
            }
    }
    const double h = grid.h();
    return h * t1 + h * t2 - h * t3 - h * t4;
}

double limit_G_matrix(const SpatialGrid& grid, const GridFunction& u, const StateFields& p,
                      const ChannelKinetics& kinetics, const TestFunction& a, const TestFunction& b) {
    check_mass(p, 1e-8);
    const std::size_t m = kinetics.states(), N = grid.size();
    std::vector<double> q(m * m), D(m * m), pn(m);
    double s = 0.0;
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t i = 0; i < m; ++i) pn[i] = p[i][x];
        covariance_matrix(kinetics, pn.data(), u[x], D.data(), q.data());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) s += a.phi[i][x] * D[i * m + j] * b.phi[j][x];
    }
    return s * grid.h();
}

MartingaleTracker::MartingaleTracker(const std::vector<TestFunction>& phis, const Partition& partition,
                                     Options options)
    : opt_(options) {
    for (const auto& f : phis) pairings_.emplace_back(f, partition);
    const std::size_t R = pairings_.size();
    pair0_.assign(R, 0.0);
    pair_.assign(R, 0.0);
    comp_.assign(R, 0.0);
    qv_.assign(R, 0.0);
    qerr_.assign(R, 0.0);
    last_drift_.assign(R, 0.0);
    prev_drift_.assign(R, 0.0);
    last_qv_.assign(R, 0.0);
}

void MartingaleTracker::on_flow(const PathPoint& p, bool segment_start) {
    const std::size_t R = pairings_.size();
    if (!started_) {
        for (std::size_t r = 0; r < R; ++r) pair0_[r] = pair_[r] = pairings_[r].pair(p.z);
        started_ = true;
    }
    const double dt = p.t - last_t_;
    for (std::size_t r = 0; r < R; ++r) {
        const double f = pairings_[r].drift(p.z, p.rates);
        const double g = opt_.quadratic_variation ? pairings_[r].quadratic(p.config, p.rates) : 0.0;
        if (!segment_start) {
            comp_[r] += 0.5 * (f + last_drift_[r]) * dt;
            if (opt_.quadratic_variation) qv_[r] += 0.5 * (g + last_qv_[r]) * dt;
            if (have_prev_) qerr_[r] += std::abs(f - 2.0 * last_drift_[r] + prev_drift_[r]) * dt / 12.0;
            prev_drift_[r] = last_drift_[r];
        }
        last_drift_[r] = f;
        last_qv_[r] = g;
    }
    have_prev_ = !segment_start;
    prev_dt_ = dt;
    last_t_ = p.t;
}

void MartingaleTracker::on_jump(double t, const JumpEvent& e, const PathPoint& after) {
    (void)after;
    if (opt_.record) record(t, 1);
    for (std::size_t r = 0; r < pairings_.size(); ++r) pair_[r] += pairings_[r].jump(e);
    if (opt_.record) record(t, 2);
}

void MartingaleTracker::on_snapshot(const PathPoint& p) {
    if (!started_) on_flow(p, true);
    if (opt_.record) record(p.t, 0);
}

void MartingaleTracker::record(double t, int kind) {
    Sample s{t, kind, {}, comp_, pair_};
    for (std::size_t r = 0; r < pairings_.size(); ++r) s.values.push_back(value(r));
    samples_.push_back(std::move(s));
}

MartingalePath martingale_path(const ModelView& model, const HybridPath& path, const std::vector<TestFunction>& phis,
                               double quadrature_tolerance) {
    MartingaleTracker tracker(phis, model.partition, {false, true});
    SimulationOptions opt;
    opt.T = path.T;
    opt.cadence = path.snapshots.size() > 2 ? path.snapshots[1].t - path.snapshots[0].t : 0.0;
    opt.record_snapshots = false;
    opt.record_jumps = false;
    opt.observer = &tracker;
    replay(model, path.initial, path.jumps, opt);

    MartingalePath out;
    for (const auto& s : tracker.samples()) {
        out.times.push_back(s.t);
        out.kinds.push_back(s.kind);
        out.values.push_back(s.values);
        out.compensator.push_back(s.compensator);
        out.pairings.push_back(s.pairings);
    }
    for (std::size_t r = 0; r < tracker.size(); ++r) {
        out.initial_pairings.push_back(tracker.initial_pairing(r));
        out.quadrature_error.push_back(tracker.quadrature_error(r));
        // Reassembly check against a fresh pairing with the terminal field.
        CompartmentPairing fresh(phis[r], model.partition);
        double direct = fresh.pair(CoordinateField(path.terminal.config, model.partition)) -
                        tracker.initial_pairing(r) - tracker.compensator(r);
        out.reassembly_residual = std::max(out.reassembly_residual, std::abs(direct - tracker.value(r)));
        if (tracker.quadrature_error(r) > quadrature_tolerance) {
            std::ostringstream msg;
            msg << "compensator quadrature error " << tracker.quadrature_error(r) << " for " << phis[r].label
                << " exceeds tolerance " << quadrature_tolerance
                << "; reduce solver.dt_max or raise solver.samples_per_gap";
            throw AnalysisError(msg.str());
        }
    }
    return out;
}

ItoReport summarize_ito(const ItoSamples& s) {
    ItoReport rep;
    const std::size_t n = s.M.size();
    rep.replicates = n;
    std::vector<double> M2(n), diff(n);
    for (std::size_t r = 0; r < n; ++r) {
        M2[r] = s.M[r] * s.M[r];
        diff[r] = M2[r] - s.QV[r];
    }
    auto a = summarize(M2), b = summarize(s.QV), d = summarize(diff), mm = summarize(s.M);
    rep.lhs = a.mean;
    rep.lhs_stderr = a.stderr_mean;
    rep.rhs = b.mean;
    rep.rhs_stderr = b.stderr_mean;
    rep.residual = rep.lhs - rep.rhs;
    rep.combined_stderr = std::sqrt(a.stderr_mean * a.stderr_mean + b.stderr_mean * b.stderr_mean);
    rep.paired_stderr = d.stderr_mean;
    rep.z_score = rep.combined_stderr > 0.0 ? rep.residual / rep.combined_stderr : 0.0;
    rep.mean_M = mm.mean;
    rep.mean_M_stderr = mm.stderr_mean;
    rep.pass = std::abs(rep.residual) <= 3.0 * rep.combined_stderr;
    return rep;
}

ItoReport ito_isometry_residual(const ModelView& model, const HybridState& initial, const TestFunction& phi, double T,
                                std::size_t replicates, std::uint64_t seed, unsigned workers,
                                std::uint64_t stream_salt) {
    struct Rep {
        double M = 0.0, QV = 0.0;
    };
    auto reps = run_replicates<Rep>(replicates, workers, [&](std::size_t r) {
        CounterRng rng(seed, replicate_stream(0, r, stream_salt));
        MartingaleTracker tracker({phi}, model.partition, {true, false});
        SimulationOptions opt;
        opt.T = T;
        opt.record_jumps = false;
        opt.record_snapshots = false;
        opt.observer = &tracker;
        simulate(model, initial, rng, opt);
        return Rep{tracker.value(0), tracker.quadratic_variation(0)};
    });
    ItoSamples s;
    for (const auto& r : reps) {
        s.M.push_back(r.M);
        s.QV.push_back(r.QV);
    }
    return summarize_ito(s);
}

ConditionTracker::ConditionTracker(const std::vector<TestFunction>& phis, const ModelView& model, Settings settings)
    : model_(model), set_(std::move(settings)) {
    const auto& part = model.partition;
    const std::size_t m = model.kinetics.states(), K = part.size();
    for (const auto& f : phis) pairings_.emplace_back(f, part);
    const std::size_t R = pairings_.size();
    dz_norm_.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        if (!part[k].empty()) dz_norm_[k] = std::sqrt(2.0 * part.measure(k)) / part.channels(k);
    const double sa = std::sqrt(set_.alpha);
    mask_d2_.assign(R, std::vector<char>(K * m * m, 0));
    mask_d3_ = mask_d2_;
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
            if (part[k].empty()) continue;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    if (i == j) continue;
                    double a = sa * std::abs(pairings_[r].jump(k, i, j));
                    mask_d2_[r][(k * m + i) * m + j] = a > set_.beta;
                    mask_d3_[r][(k * m + i) * m + j] = a > set_.beta_n;
                }
        }
    res_.qv.assign(R, 0.0);
    res_.d2_rate.assign(R, 0.0);
    res_.d3_tail.assign(R, 0.0);
    res_.qv_gap.assign(R, 0.0);
    res_.max_jump.assign(R, 0.0);
    res_.big_jumps.assign(R, 0.0);
    last_.assign(2 + 3 * R, 0.0);
    cur_ = last_;
    last_gap_.assign(R, 0.0);
    qbuf_.resize(m * m);
    fbuf_.resize(m);
    pbuf_.resize(m);
}

void ConditionTracker::on_flow(const PathPoint& p, bool segment_start) {
    const auto& part = model_.partition;
    const std::size_t m = model_.kinetics.states(), K = part.size(), R = pairings_.size();
    // Integrands: trace, c2, then per r: qv, d2, d3.
    cur_[0] = jump_second_moment(p.config, p.rates, part);
    {
        const double h = model_.grid.h();
        double s = 0.0;
        std::vector<double> d(m);
        for (std::size_t k = 0; k < K; ++k) {
            if (part[k].empty()) continue;
            for (std::size_t i = 0; i < m; ++i) {
                double in = 0.0, out = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) continue;
                    in += p.z.value(k, j) * p.rates.at(k, j, i);
                    out += p.rates.at(k, i, j);
                }
                d[i] = in - p.z.value(k, i) * out;
                pbuf_[i] = p.z.value(k, i);
            }
            for (std::size_t x = part[k].first_cell; x < part[k].end_cell; ++x) {
                kinetics_field_node(model_.kinetics, pbuf_.data(), p.u[x], fbuf_.data(), qbuf_.data());
                for (std::size_t i = 0; i < m; ++i) s += (d[i] - fbuf_[i]) * (d[i] - fbuf_[i]);
            }
        }
        cur_[1] = std::sqrt(s * h);
    }
    for (std::size_t r = 0; r < R; ++r) {
        double qv = 0.0, d2 = 0.0, d3 = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const int* n = p.config.row(k);
            for (std::size_t i = 0; i < m; ++i) {
                if (n[i] == 0) continue;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j == i) continue;
                    const std::size_t idx = (k * m + i) * m + j;
                    const double rate = n[i] * p.rates.q[idx];
                    const double dphi = pairings_[r].jump(k, i, j);
                    qv += rate * dphi * dphi;
                    if (mask_d2_[r][idx]) d2 += rate;
                    if (mask_d3_[r][idx]) d3 += rate * dphi * dphi;
                }
            }
        }
        cur_[2 + 3 * r] = qv;
        cur_[3 + 3 * r] = d2;
        cur_[4 + 3 * r] = set_.alpha * d3;
    }
    if (have_last_ && !segment_start) {
        const double dt = p.t - last_t_;
        res_.trace_integral += 0.5 * (cur_[0] + last_[0]) * dt;
        res_.c2_residual += 0.5 * (cur_[1] + last_[1]) * dt;
        for (std::size_t r = 0; r < R; ++r) {
            res_.qv[r] += 0.5 * (cur_[2 + 3 * r] + last_[2 + 3 * r]) * dt;
            res_.d2_rate[r] += 0.5 * (cur_[3 + 3 * r] + last_[3 + 3 * r]) * dt;
            res_.d3_tail[r] += 0.5 * (cur_[4 + 3 * r] + last_[4 + 3 * r]) * dt;
        }
    }
    last_.swap(cur_);
    last_t_ = p.t;
    have_last_ = true;
}

void ConditionTracker::on_jump(double t, const JumpEvent& e, const PathPoint& after) {
    (void)t;
    (void)after;
    const double sa = std::sqrt(set_.alpha);
    res_.max_dz_norm = std::max(res_.max_dz_norm, sa * dz_norm_[e.compartment]);
    for (std::size_t r = 0; r < pairings_.size(); ++r) {
        double a = sa * std::abs(pairings_[r].jump(e));
        res_.max_jump[r] = std::max(res_.max_jump[r], a);
        if (a > set_.beta) res_.big_jumps[r] += 1.0;
    }
}

void ConditionTracker::on_snapshot(const PathPoint& p) {
    if (!have_last_) on_flow(p, true);
    const std::size_t R = pairings_.size();
    std::vector<double> prof(R);
    for (std::size_t r = 0; r < R; ++r) prof[r] = set_.alpha * res_.qv[r];
    res_.qv_profile.push_back(std::move(prof));
    if (!set_.limit_values.empty() && snap_ < set_.limit_values.size()) {
        std::vector<double> gap(R);
        for (std::size_t r = 0; r < R; ++r)
            gap[r] = std::abs(set_.limit_values[snap_][r] - set_.alpha * pairings_[r].quadratic(p.config, p.rates));
        if (snap_ > 0)
            for (std::size_t r = 0; r < R; ++r) res_.qv_gap[r] += 0.5 * (gap[r] + last_gap_[r]) * (p.t - last_gap_t_);
        last_gap_ = gap;
        last_gap_t_ = p.t;
    }
    ++snap_;
}

}  // namespace pdmpsim
