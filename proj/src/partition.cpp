#include "pdmpsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

Partition::Partition(const SpatialGrid& grid, std::vector<Compartment> compartments)
    : comps_(std::move(compartments)) {
    if (comps_.empty()) throw ValidationError("partition has no compartments");
    owner_.assign(grid.size(), std::numeric_limits<std::size_t>::max());
    std::size_t expect = 0;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const auto& c = comps_[k];
        if (c.first_cell != expect || c.end_cell <= c.first_cell || c.end_cell > grid.size())
            throw ValidationError("compartment " + std::to_string(k) +
                                  " is not a contiguous cell range following its predecessor");
        if (c.channels < 0)
            throw ValidationError("compartment " + std::to_string(k) + " has negative channel count");
        for (std::size_t i = c.first_cell; i < c.end_cell; ++i) owner_[i] = k;
        measure_.push_back(static_cast<double>(c.cells()) * grid.h());
        expect = c.end_cell;
    }
    if (expect != grid.size()) throw ValidationError("compartments do not cover the grid");

    bool any = false;
    stats_.nu_minus = std::numeric_limits<double>::infinity();
    stats_.ell_minus = std::numeric_limits<int>::max();
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        if (comps_[k].empty()) continue;
        any = true;
        stats_.delta_plus = std::max(stats_.delta_plus, measure_[k]);
        stats_.nu_plus = std::max(stats_.nu_plus, measure_[k]);
        stats_.nu_minus = std::min(stats_.nu_minus, measure_[k]);
        stats_.ell_plus = std::max(stats_.ell_plus, comps_[k].channels);
        stats_.ell_minus = std::min(stats_.ell_minus, comps_[k].channels);
        stats_.total_channels += static_cast<std::size_t>(comps_[k].channels);
    }
    if (!any) throw ValidationError("partition has no non-empty compartment");
    stats_.balance = (stats_.ell_minus * stats_.nu_minus) / (stats_.ell_plus * stats_.nu_plus);
    stats_.alpha = stats_.ell_minus / stats_.nu_plus;
}

Partition build_level(const SpatialGrid& grid, const LadderLevel& level) {
    std::vector<Compartment> comps;
    const std::size_t N = grid.size();
    if (level.lengths.empty()) {
        const std::size_t K = level.compartments;
        if (K == 0) throw ConfigError("ladder level needs compartments or lengths");
        if (N % K != 0)
            throw ResolutionError("grid of " + std::to_string(N) + " cells cannot be split into " +
                                  std::to_string(K) + " equal compartments");
        const std::size_t w = N / K;
        if (w < 2)
            throw ResolutionError("compartments of " + std::to_string(w) +
                                  " cell(s) are below the 2-cell resolution floor");
        if (level.channels < 1) throw ConfigError("uniform ladder level needs channels >= 1");
        for (std::size_t k = 0; k < K; ++k) comps.push_back({k * w, (k + 1) * w, level.channels});
    } else {
        if (level.lengths.size() != level.channel_counts.size())
            throw ConfigError("ladder level lengths and channel counts differ in size");
        double total = 0.0;
        for (double len : level.lengths) {
            if (!(len > 0.0)) throw ConfigError("compartment lengths must be positive");
            total += len;
        }
        if (std::abs(total - grid.length()) > 1e-9 * grid.length())
            throw ConfigError("compartment lengths do not sum to the domain length");
        double edge = 0.0;
        std::size_t first = 0;
        for (std::size_t k = 0; k < level.lengths.size(); ++k) {
            edge += level.lengths[k];
            std::size_t end = (k + 1 == level.lengths.size())
                                  ? N
                                  : static_cast<std::size_t>(std::llround(edge / grid.h()));
            double snapped = static_cast<double>(end) * grid.h();
            if (std::abs(snapped - edge) > 1e-9 * grid.length())
                throw ResolutionError("compartment boundary " + std::to_string(edge) +
                                      " does not fall on a cell boundary");
            if (end < first + 2)
                throw ResolutionError("compartment " + std::to_string(k) +
                                      " spans fewer than 2 grid cells");
            comps.push_back({first, end, level.channel_counts[k]});
            first = end;
        }
    }
    return Partition(grid, std::move(comps));
}

std::vector<Partition> build_partition_ladder(const SpatialGrid& grid, const LadderSpec& spec) {
    if (spec.levels.empty()) throw ConfigError("ladder has no levels");
    std::vector<Partition> out;
    for (std::size_t n = 0; n < spec.levels.size(); ++n) {
        out.push_back(build_level(grid, spec.levels[n]));
        if (n == 0) continue;
        const auto& a = out[n - 1];
        const auto& b = out[n];
        const auto& la = spec.levels[n - 1];
        const auto& lb = spec.levels[n];
        std::size_t ka = la.lengths.empty() ? la.compartments : la.lengths.size();
        std::size_t kb = lb.lengths.empty() ? lb.compartments : lb.lengths.size();
        if (kb < ka)
            throw ValidationError("ladder level " + std::to_string(n) + " has fewer compartments than level " +
                                  std::to_string(n - 1));
        if (b.stats().ell_minus < a.stats().ell_minus || b.stats().ell_plus < a.stats().ell_plus)
            throw ValidationError("ladder level " + std::to_string(n) + " decreases the channel count");
        if (!(b.stats().delta_plus < a.stats().delta_plus))
            throw ValidationError("ladder level " + std::to_string(n) + ": delta_plus " +
                                  std::to_string(b.stats().delta_plus) + " does not decrease from " +
                                  std::to_string(a.stats().delta_plus));
        if (!(b.stats().ell_minus > a.stats().ell_minus))
            throw ValidationError("ladder level " + std::to_string(n) + ": ell_minus does not increase");
    }
    if (spec.balance_tolerance) {
        for (std::size_t n = 0; n < out.size(); ++n)
            if (std::abs(out[n].stats().balance - 1.0) > *spec.balance_tolerance)
                throw ValidationError("ladder level " + std::to_string(n) + " balance ratio " +
                                      std::to_string(out[n].stats().balance) + " outside tolerance");
    }
    return out;
}

}  // namespace pdmpsim
