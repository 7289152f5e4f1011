#include "pdmpsim/channels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

ChannelConfiguration::ChannelConfiguration(const Partition& partition, std::size_t states,
                                           std::vector<std::vector<int>> counts)
    : K_(partition.size()), m_(states) {
    if (counts.size() != K_) throw InvariantError("configuration has wrong number of compartments");
    counts_.resize(K_ * m_);
    for (std::size_t k = 0; k < K_; ++k) {
        if (counts[k].size() != m_) throw InvariantError("configuration row has wrong number of states");
        for (std::size_t i = 0; i < m_; ++i) {
            if (counts[k][i] < 0)
                throw InvariantError("negative count in compartment " + std::to_string(k));
            if (counts[k][i] > partition.channels(k))
                throw InvariantError("count " + std::to_string(counts[k][i]) + " in compartment " +
                                     std::to_string(k) + " exceeds l = " + std::to_string(partition.channels(k)));
            counts_[k * m_ + i] = counts[k][i];
        }
    }
    check_conservation(partition);
}

ChannelConfiguration ChannelConfiguration::from_fractions(const Partition& partition, const StateFields& p) {
    const std::size_t m = p.size();
    std::vector<std::vector<int>> counts(partition.size(), std::vector<int>(m, 0));
    for (std::size_t k = 0; k < partition.size(); ++k) {
        const int l = partition.channels(k);
        if (l == 0) continue;
        std::vector<double> target(m);
        double tsum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            target[i] = std::max(0.0, compartment_average(p[i], k, partition));
            tsum += target[i];
        }
        if (!(tsum > 0.0)) throw ConfigError("initial occupancy vanishes on compartment " + std::to_string(k));
        std::vector<double> rem(m);
        int assigned = 0;
        for (std::size_t i = 0; i < m; ++i) {
            double x = l * target[i] / tsum;
            // Guard against x = 3.9999999999 from roundoff in l * p.
            double fl = std::floor(x + 1e-9);
            counts[k][i] = static_cast<int>(fl);
            rem[i] = x - fl;
            assigned += counts[k][i];
        }
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
        for (std::size_t r = 0; assigned < l; ++r, ++assigned) counts[k][order[r % m]] += 1;
        for (std::size_t r = 0; assigned > l; ++r) {
            std::size_t i = order[m - 1 - (r % m)];
            if (counts[k][i] > 0) {
                counts[k][i] -= 1;
                --assigned;
            }
        }
    }
    return ChannelConfiguration(partition, m, std::move(counts));
}

void ChannelConfiguration::apply(const JumpEvent& e) {
    if (e.compartment >= K_ || e.from >= m_ || e.to >= m_ || e.from == e.to)
        throw InternalError("jump event out of range");
    int& src = counts_[e.compartment * m_ + e.from];
    if (src <= 0)
        throw InternalError("jump out of empty state " + std::to_string(e.from) + " in compartment " +
                            std::to_string(e.compartment));
    --src;
    ++counts_[e.compartment * m_ + e.to];
}

void ChannelConfiguration::check_conservation(const Partition& partition) const {
    for (std::size_t k = 0; k < K_; ++k) {
        int s = 0;
        for (std::size_t i = 0; i < m_; ++i) s += counts_[k * m_ + i];
        if (s != partition.channels(k))
            throw InvariantError("compartment " + std::to_string(k) + " holds " + std::to_string(s) +
                                 " channels, expected " + std::to_string(partition.channels(k)));
    }
}

CoordinateField::CoordinateField(const ChannelConfiguration& config, const Partition& partition)
    : K_(partition.size()), m_(config.states()) {
    values_.assign(K_ * m_, 0.0);
    fields_.assign(m_, GridFunction(partition.grid_size(), 0.0));
    for (std::size_t k = 0; k < K_; ++k) refresh(k, config, partition);
}

void CoordinateField::refresh(std::size_t k, const ChannelConfiguration& config, const Partition& partition) {
    const int l = partition.channels(k);
    const auto& c = partition[k];
    for (std::size_t i = 0; i < m_; ++i) {
        int n = config.count(k, i);
        if (n > l)
            throw InvariantError("count " + std::to_string(n) + " exceeds l = " + std::to_string(l) +
                                 " in compartment " + std::to_string(k));
        double z = l > 0 ? static_cast<double>(n) / static_cast<double>(l) : 0.0;
        values_[k * m_ + i] = z;
        for (std::size_t x = c.first_cell; x < c.end_cell; ++x) fields_[i][x] = z;
    }
}

CoordinateField coordinate_field(const ChannelConfiguration& config, const Partition& partition) {
    return CoordinateField(config, partition);
}

double compartment_average(const GridFunction& u, std::size_t k, const Partition& partition) {
    if (k >= partition.size()) throw InputError("compartment index out of range");
    const auto& c = partition[k];
    if (c.end_cell <= c.first_cell) throw InputError("compartment has an empty cell range");
    double s = 0.0;
    for (std::size_t x = c.first_cell; x < c.end_cell; ++x) s += u[x];
    return s / static_cast<double>(c.cells());
}

void local_rates(const GridFunction& u, const ChannelKinetics& kinetics, const Partition& partition,
                 LocalRates& out) {
    const std::size_t K = partition.size(), m = kinetics.states();
    out.K = K;
    out.m = m;
    out.average.resize(K);
    out.q.resize(K * m * m);
    for (std::size_t k = 0; k < K; ++k) {
        double* q = out.q.data() + k * m * m;
        if (partition[k].empty()) {
            out.average[k] = 0.0;
            std::fill(q, q + m * m, 0.0);
            continue;
        }
        const double v = compartment_average(u, k, partition);
        out.average[k] = v;
        kinetics.evaluate(v, q);
        for (std::size_t ij = 0; ij < m * m; ++ij) {
            if (!(q[ij] >= 0.0) || !std::isfinite(q[ij])) {
                std::ostringstream msg;
                msg << rate_label(ij / m, ij % m) << "(" << v << ") = " << q[ij]
                    << " is negative or non-finite (compartment " << k << ")";
                throw KineticsError(msg.str());
            }
        }
    }
}

LocalRates local_rates(const GridFunction& u, const ChannelKinetics& kinetics, const Partition& partition) {
    LocalRates out;
    local_rates(u, kinetics, partition, out);
    return out;
}

double total_rate(const LocalRates& q, const ChannelConfiguration& config) {
    const std::size_t m = q.m;
    double total = 0.0;
    for (std::size_t k = 0; k < q.K; ++k) {
        const int* n = config.row(k);
        const double* qk = q.q.data() + k * m * m;
        for (std::size_t i = 0; i < m; ++i) {
            if (n[i] == 0) continue;
            double out = 0.0;
            for (std::size_t j = 0; j < m; ++j) out += qk[i * m + j];
            total += n[i] * out;
        }
    }
    return total;
}

RateTable jump_event_rates(const LocalRates& q, const ChannelConfiguration& config) {
    RateTable t;
    const std::size_t m = q.m;
    for (std::size_t k = 0; k < q.K; ++k)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                double r = config.count(k, i) * q.at(k, i, j);
                t.events.push_back({k, i, j});
                t.rates.push_back(r);
                t.total += r;
            }
    return t;
}

RateTable jump_event_rates(const GridFunction& u, const ChannelConfiguration& config,
                           const ChannelKinetics& kinetics, const Partition& partition) {
    return jump_event_rates(local_rates(u, kinetics, partition), config);
}

double rate_ceiling(const ChannelKinetics& kinetics, const Partition& partition) {
    const double m = static_cast<double>(kinetics.states());
    return static_cast<double>(partition.stats().total_channels) * m * (m - 1.0) * kinetics.q_bar();
}

}  // namespace pdmpsim
