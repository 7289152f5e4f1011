#pragma once

#include <cstddef>
#include <vector>

namespace pdmpsim {

using GridFunction = std::vector<double>;
using StateFields = std::vector<GridFunction>;  // [state][node]

// Cell-centred grid on (0, L). Node i sits at (i + 1/2) h and carries the
// midpoint weight h. Dirichlet data enter through mirrored ghost values.
class SpatialGrid {
public:
    SpatialGrid(double length, std::size_t nodes);

    double length() const { return length_; }
    std::size_t size() const { return nodes_; }
    double h() const { return h_; }
    double x(std::size_t i) const { return (static_cast<double>(i) + 0.5) * h_; }
    const std::vector<double>& positions() const { return x_; }
    const std::vector<double>& weights() const { return w_; }

    double integrate(const GridFunction& f) const;
    double inner(const GridFunction& f, const GridFunction& g) const;
    GridFunction sample(double (*fn)(double)) const;
    template <class Fn>
    GridFunction tabulate(Fn&& fn) const {
        GridFunction out(nodes_);
        for (std::size_t i = 0; i < nodes_; ++i) out[i] = fn(x(i));
        return out;
    }

private:
    double length_;
    std::size_t nodes_;
    double h_;
    std::vector<double> x_;
    std::vector<double> w_;
};

}  // namespace pdmpsim
