#include "pdmpsim/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

namespace {

double linoid_shape(double x) {
    if (std::abs(x) < 1e-8) return 1.0 + 0.5 * x;
    return x / -std::expm1(-x);
}

double linoid_slope(double x) {
    if (std::abs(x) < 1e-4) return 0.5 + x / 6.0;
    double em = -std::expm1(-x);  // 1 - e^{-x}
    return (em - x * std::exp(-x)) / (em * em);
}

void require_width(double w, const char* fam) {
    if (!(w != 0.0) || !std::isfinite(w))
        throw ConfigError(std::string(fam) + " rate needs a finite nonzero width");
}

}  // namespace

const char* family_name(RateFamily f) {
    switch (f) {
        case RateFamily::constant: return "constant";
        case RateFamily::tanh_affine: return "tanh_affine";
        case RateFamily::exponential: return "exponential";
        case RateFamily::sigmoid: return "sigmoid";
        case RateFamily::linoid: return "linoid";
    }
    return "?";
}

std::string rate_label(std::size_t i, std::size_t j) {
    return "q[" + std::to_string(i) + "->" + std::to_string(j) + "]";
}

RateFunction RateFunction::constant(double c) { return RateFunction(RateFamily::constant, {c}); }
RateFunction RateFunction::tanh_affine(double base, double amplitude, double slope, double shift) {
    return RateFunction(RateFamily::tanh_affine, {base, amplitude, slope, shift});
}
RateFunction RateFunction::exponential(double scale, double v_half, double width) {
    require_width(width, "exponential");
    return RateFunction(RateFamily::exponential, {scale, v_half, width});
}
RateFunction RateFunction::sigmoid(double scale, double v_half, double width) {
    require_width(width, "sigmoid");
    return RateFunction(RateFamily::sigmoid, {scale, v_half, width});
}
RateFunction RateFunction::linoid(double scale, double v_half, double width) {
    require_width(width, "linoid");
    return RateFunction(RateFamily::linoid, {scale, v_half, width});
}

double RateFunction::operator()(double v) const {
    switch (family_) {
        case RateFamily::constant: return p_[0];
        case RateFamily::tanh_affine: return p_[0] + p_[1] * std::tanh(p_[2] * (v - p_[3]));
        case RateFamily::exponential: return p_[0] * std::exp((v - p_[1]) / p_[2]);
        case RateFamily::sigmoid: return p_[0] / (1.0 + std::exp(-(v - p_[1]) / p_[2]));
        case RateFamily::linoid: return p_[0] * linoid_shape((v - p_[1]) / p_[2]);
    }
    return 0.0;
}

double RateFunction::derivative_abs(double v) const {
    switch (family_) {
        case RateFamily::constant: return 0.0;
        case RateFamily::tanh_affine: {
            double t = std::tanh(p_[2] * (v - p_[3]));
            return std::abs(p_[1] * p_[2]) * (1.0 - t * t);
        }
        case RateFamily::exponential: return std::abs((*this)(v) / p_[2]);
        case RateFamily::sigmoid: {
            double s = 1.0 / (1.0 + std::exp(-(v - p_[1]) / p_[2]));
            return std::abs(p_[0] / p_[2]) * s * (1.0 - s);
        }
        case RateFamily::linoid: return std::abs(p_[0] / p_[2]) * linoid_slope((v - p_[1]) / p_[2]);
    }
    return 0.0;
}

// Every family is monotone in v, so the sup over an interval sits at an end.
double RateFunction::bound(double lo, double hi) const {
    if (declared_) return *declared_;
    return std::max((*this)(lo), (*this)(hi));
}

double RateFunction::lipschitz(double lo, double hi) const {
    switch (family_) {
        case RateFamily::constant: return 0.0;
        case RateFamily::tanh_affine: {
            double s = p_[3];
            if (s >= lo && s <= hi) return std::abs(p_[1] * p_[2]);
            return std::max(derivative_abs(lo), derivative_abs(hi));
        }
        case RateFamily::sigmoid: {
            if (p_[1] >= lo && p_[1] <= hi) return std::abs(p_[0] / p_[2]) * 0.25;
            return std::max(derivative_abs(lo), derivative_abs(hi));
        }
        case RateFamily::exponential:
        case RateFamily::linoid: return std::max(derivative_abs(lo), derivative_abs(hi));
    }
    return 0.0;
}

RateFunction RateFunction::with_declared_bound(double b) const {
    RateFunction out = *this;
    out.declared_ = b;
    return out;
}

ChannelKinetics::ChannelKinetics(std::size_t states,
                                 std::vector<std::vector<std::optional<RateFunction>>> rates,
                                 StateFields conductance, std::vector<double> reversal)
    : m_(states), rates_(std::move(rates)), g_(std::move(conductance)), E_(std::move(reversal)) {
    if (m_ < 2) throw ConfigError("kinetics need at least 2 states");
    if (rates_.size() != m_) throw ConfigError("rate table has wrong number of rows");
    for (std::size_t i = 0; i < m_; ++i) {
        if (rates_[i].size() != m_) throw ConfigError("rate table has wrong number of columns");
        if (rates_[i][i]) throw ConfigError("diagonal rate " + rate_label(i, i) + " is not allowed");
    }
    if (g_.size() != m_) throw ConfigError("need one conductance field per state");
    if (E_.size() != m_) throw ConfigError("need one reversal potential per state");
    for (double e : E_)
        if (!std::isfinite(e)) throw ConfigError("reversal potentials must be finite");
    u_lo_ = std::min(0.0, *std::min_element(E_.begin(), E_.end()));
    u_hi_ = std::max(0.0, *std::max_element(E_.begin(), E_.end()));

    const std::size_t N = g_[0].size();
    std::vector<double> gsum(N, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        if (g_[i].size() != N) throw ConfigError("conductance fields differ in length");
        for (std::size_t x = 0; x < N; ++x) {
            if (!(g_[i][x] >= 0.0) || !std::isfinite(g_[i][x]))
                throw ConfigError("conductance of state " + std::to_string(i) + " is negative or non-finite at node " +
                                  std::to_string(x));
            gsum[x] += g_[i][x];
        }
    }
    for (double s : gsum) g_max_ = std::max(g_max_, s);

    bounds_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < m_; ++j) {
            if (!rates_[i][j]) continue;
            double b = rates_[i][j]->bound(u_lo_, u_hi_);
            if (!(b >= 0.0) || !std::isfinite(b))
                throw KineticsError(rate_label(i, j) + " has invalid bound " + std::to_string(b));
            bounds_[i * m_ + j] = b;
            q_bar_ = std::max(q_bar_, b);
            lip_ = std::max(lip_, rates_[i][j]->lipschitz(u_lo_, u_hi_));
            if (b > 0.0) all_zero_ = false;
        }
}

void ChannelKinetics::evaluate(double v, double* out) const {
    for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < m_; ++j) out[i * m_ + j] = rates_[i][j] ? (*rates_[i][j])(v) : 0.0;
}

void ChannelKinetics::validate(std::size_t samples) const {
    if (samples < 2) samples = 2;
    for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < m_; ++j) {
            if (!rates_[i][j]) continue;
            const double b = bounds_[i * m_ + j];
            for (std::size_t s = 0; s < samples; ++s) {
                double v = u_lo_ + (u_hi_ - u_lo_) * static_cast<double>(s) / static_cast<double>(samples - 1);
                double q = (*rates_[i][j])(v);
                if (!std::isfinite(q) || q < 0.0 || q > b * (1.0 + 1e-12) + 1e-300) {
                    std::ostringstream msg;
                    msg << rate_label(i, j) << "(" << v << ") = " << q << " violates 0 <= q <= " << b;
                    throw KineticsError(msg.str());
                }
            }
        }
}

}  // namespace pdmpsim
