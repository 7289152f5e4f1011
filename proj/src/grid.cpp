#include "pdmpsim/grid.hpp"

#include <cmath>
#include <string>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

SpatialGrid::SpatialGrid(double length, std::size_t nodes)
    : length_(length), nodes_(nodes), h_(0.0) {
    if (!(length > 0.0) || !std::isfinite(length))
        throw ConfigError("grid length must be positive and finite");
    if (nodes < 4)
        throw ConfigError("grid needs at least 4 nodes, got " + std::to_string(nodes));
    h_ = length / static_cast<double>(nodes);
    x_.resize(nodes);
    w_.assign(nodes, h_);
    for (std::size_t i = 0; i < nodes; ++i) x_[i] = x(i);
}

double SpatialGrid::integrate(const GridFunction& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_; ++i) s += f[i];
    return s * h_;
}

double SpatialGrid::inner(const GridFunction& f, const GridFunction& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes_; ++i) s += f[i] * g[i];
    return s * h_;
}

GridFunction SpatialGrid::sample(double (*fn)(double)) const {
    return tabulate(fn);
}

}  // namespace pdmpsim
