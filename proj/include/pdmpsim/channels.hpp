#pragma once

#include <cstddef>
#include <vector>

#include "pdmpsim/grid.hpp"
#include "pdmpsim/kinetics.hpp"
#include "pdmpsim/partition.hpp"

namespace pdmpsim {

struct JumpEvent {
    std::size_t compartment = 0;
    std::size_t from = 0;
    std::size_t to = 0;
    bool operator==(const JumpEvent&) const = default;
};

// Theta[k][i]: channels of compartment k in state i.
class ChannelConfiguration {
public:
    ChannelConfiguration() = default;
    ChannelConfiguration(const Partition& partition, std::size_t states, std::vector<std::vector<int>> counts);

    // Largest-remainder rounding of l(k) * (compartment mean of p_i).
    static ChannelConfiguration from_fractions(const Partition& partition, const StateFields& p);

    std::size_t compartments() const { return K_; }
    std::size_t states() const { return m_; }
    int count(std::size_t k, std::size_t i) const { return counts_[k * m_ + i]; }
    const int* row(std::size_t k) const { return counts_.data() + k * m_; }
    void apply(const JumpEvent& e);
    // Throws InvariantError if any compartment total differs from l(k).
    void check_conservation(const Partition& partition) const;
    bool operator==(const ChannelConfiguration&) const = default;

private:
    std::size_t K_ = 0, m_ = 0;
    std::vector<int> counts_;
};

// Piecewise-constant occupancy fractions z_i = Theta_i / l on each compartment.
class CoordinateField {
public:
    CoordinateField() = default;
    CoordinateField(const ChannelConfiguration& config, const Partition& partition);

    std::size_t states() const { return m_; }
    std::size_t compartments() const { return K_; }
    double value(std::size_t k, std::size_t i) const { return values_[k * m_ + i]; }
    const StateFields& fields() const { return fields_; }
    const GridFunction& field(std::size_t i) const { return fields_[i]; }
    // Recomputes compartment k after a jump there.
    void refresh(std::size_t k, const ChannelConfiguration& config, const Partition& partition);

private:
    std::size_t K_ = 0, m_ = 0;
    std::vector<double> values_;
    StateFields fields_;
};

CoordinateField coordinate_field(const ChannelConfiguration& config, const Partition& partition);

double compartment_average(const GridFunction& u, std::size_t k, const Partition& partition);

// q_ij evaluated at the compartment average of u, for every compartment.
struct LocalRates {
    std::size_t K = 0, m = 0;
    std::vector<double> average;  // [k]
    std::vector<double> q;        // [(k*m + i)*m + j]
    double at(std::size_t k, std::size_t i, std::size_t j) const { return q[(k * m + i) * m + j]; }
};

void local_rates(const GridFunction& u, const ChannelKinetics& kinetics, const Partition& partition,
                 LocalRates& out);
LocalRates local_rates(const GridFunction& u, const ChannelKinetics& kinetics, const Partition& partition);

struct RateTable {
    std::vector<JumpEvent> events;
    std::vector<double> rates;
    double total = 0.0;
};

// Lambda from precomputed local rates; the allocation-free hot path.
double total_rate(const LocalRates& q, const ChannelConfiguration& config);

RateTable jump_event_rates(const GridFunction& u, const ChannelConfiguration& config,
                           const ChannelKinetics& kinetics, const Partition& partition);
RateTable jump_event_rates(const LocalRates& q, const ChannelConfiguration& config);

// Sum_k l(k) m(m-1) q_bar.
double rate_ceiling(const ChannelKinetics& kinetics, const Partition& partition);

}  // namespace pdmpsim
