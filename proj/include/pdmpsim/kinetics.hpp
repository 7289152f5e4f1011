#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pdmpsim/grid.hpp"

namespace pdmpsim {

enum class RateFamily { constant, tanh_affine, exponential, sigmoid, linoid };

const char* family_name(RateFamily f);

// Closed-form voltage dependence of a single transition rate.
//   constant     c
//   tanh_affine  base + amplitude * tanh(slope (v - shift))
//   exponential  scale * exp((v - v_half) / width)
//   sigmoid      scale / (1 + exp(-(v - v_half) / width))
//   linoid       scale * x / (1 - exp(-x)),  x = (v - v_half) / width
class RateFunction {
public:
    static RateFunction constant(double c);
    static RateFunction tanh_affine(double base, double amplitude, double slope, double shift);
    static RateFunction exponential(double scale, double v_half, double width);
    static RateFunction sigmoid(double scale, double v_half, double width);
    static RateFunction linoid(double scale, double v_half, double width);

    double operator()(double v) const;
    RateFamily family() const { return family_; }
    const std::vector<double>& params() const { return p_; }

    // Analytic sup of the rate and Lipschitz constant over [lo, hi].
    double bound(double lo, double hi) const;
    double lipschitz(double lo, double hi) const;

    // Overrides the analytic bound (test harness and config "bound" key).
    RateFunction with_declared_bound(double b) const;
    std::optional<double> declared_bound() const { return declared_; }

private:
    RateFunction(RateFamily f, std::vector<double> p) : family_(f), p_(std::move(p)) {}
    double derivative_abs(double v) const;

    RateFamily family_;
    std::vector<double> p_;
    std::optional<double> declared_;
};

class ChannelKinetics {
public:
    // rates[i][j] for i != j; absent entries are identically zero.
    ChannelKinetics(std::size_t states, std::vector<std::vector<std::optional<RateFunction>>> rates,
                    StateFields conductance, std::vector<double> reversal);

    std::size_t states() const { return m_; }
    bool has_rate(std::size_t i, std::size_t j) const { return rates_[i][j].has_value(); }
    double rate(std::size_t i, std::size_t j, double v) const {
        return rates_[i][j] ? (*rates_[i][j])(v) : 0.0;
    }
    const std::optional<RateFunction>& rate_function(std::size_t i, std::size_t j) const { return rates_[i][j]; }
    // Fills out[i*m + j] with q_ij(v); diagonal set to 0.
    void evaluate(double v, double* out) const;

    const StateFields& conductance() const { return g_; }
    const std::vector<double>& reversal() const { return E_; }
    double u_lower() const { return u_lo_; }
    double u_upper() const { return u_hi_; }
    // Largest declared bound over all pairs, and per pair.
    double q_bar() const { return q_bar_; }
    double pair_bound(std::size_t i, std::size_t j) const { return bounds_[i * m_ + j]; }
    double lipschitz() const { return lip_; }
    bool all_zero() const { return all_zero_; }
    // Largest total conductance sum_i g_i(x) over nodes.
    double max_conductance() const { return g_max_; }

    // Spot-checks 0 <= q_ij(v) <= bound on a dense sample of [u_lo, u_hi].
    void validate(std::size_t samples = 2001) const;

private:
    std::size_t m_;
    std::vector<std::vector<std::optional<RateFunction>>> rates_;
    StateFields g_;
    std::vector<double> E_;
    double u_lo_ = 0.0, u_hi_ = 0.0;
    std::vector<double> bounds_;
    double q_bar_ = 0.0;
    double lip_ = 0.0;
    double g_max_ = 0.0;
    bool all_zero_ = true;
};

std::string rate_label(std::size_t i, std::size_t j);

}  // namespace pdmpsim
