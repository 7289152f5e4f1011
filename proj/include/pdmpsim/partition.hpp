#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "pdmpsim/grid.hpp"

namespace pdmpsim {

struct Compartment {
    std::size_t first_cell = 0;  // inclusive
    std::size_t end_cell = 0;    // exclusive
    int channels = 0;            // l(k, n); 0 marks an empty compartment

    std::size_t cells() const { return end_cell - first_cell; }
    bool empty() const { return channels == 0; }
};

struct PartitionStats {
    double delta_plus = 0.0;  // max diameter over non-empty compartments
    double nu_plus = 0.0;     // max measure
    double nu_minus = 0.0;    // min measure
    int ell_plus = 0;         // max channel count
    int ell_minus = 0;        // min channel count
    double balance = 0.0;     // ell_minus nu_minus / (ell_plus nu_plus)
    double alpha = 0.0;       // ell_minus / nu_plus
    std::size_t total_channels = 0;
};

class Partition {
public:
    Partition(const SpatialGrid& grid, std::vector<Compartment> compartments);

    std::size_t size() const { return comps_.size(); }
    const Compartment& operator[](std::size_t k) const { return comps_[k]; }
    const std::vector<Compartment>& compartments() const { return comps_; }
    double measure(std::size_t k) const { return measure_[k]; }
    int channels(std::size_t k) const { return comps_[k].channels; }
    std::size_t compartment_of(std::size_t cell) const { return owner_[cell]; }
    const PartitionStats& stats() const { return stats_; }
    double alpha() const { return stats_.alpha; }
    std::size_t grid_size() const { return owner_.size(); }

private:
    std::vector<Compartment> comps_;
    std::vector<double> measure_;
    std::vector<std::size_t> owner_;
    PartitionStats stats_;
};

struct LadderLevel {
    // Either a uniform level (compartments > 0, uniform channel count) or an
    // explicit list of lengths with per-compartment channel counts.
    std::size_t compartments = 0;
    int channels = 0;
    std::vector<double> lengths;
    std::vector<int> channel_counts;
};

struct LadderSpec {
    std::vector<LadderLevel> levels;
    std::optional<double> balance_tolerance;
};

Partition build_level(const SpatialGrid& grid, const LadderLevel& level);
std::vector<Partition> build_partition_ladder(const SpatialGrid& grid, const LadderSpec& spec);

}  // namespace pdmpsim
