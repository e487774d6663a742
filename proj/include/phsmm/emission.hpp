#ifndef PHSMM_EMISSION_HPP
#define PHSMM_EMISSION_HPP

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace phsmm {

namespace detail {

// Modified Bessel I0 by power series; the terms (x/2)^{2k}/(k!)^2 stay within
// double range for the concentrations used here (kappa <= a few hundred).
inline double bessel_i0(double x) {
    const double h = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 1000; ++k) {
        term *= h / (static_cast<double>(k) * static_cast<double>(k));
        sum += term;
        if (term < sum * 1e-16) break;
    }
    return sum;
}

inline double log_bessel_i0(double x) {
    if (x < 500.0) return std::log(bessel_i0(x));
    // asymptotic expansion for large argument
    const double ix = 1.0 / x;
    double corr = 1.0 + ix * (0.125 + ix * (0.0703125 + ix * 0.0732421875));
    return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(corr);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

// Two-part model for step lengths: P(Y=0) = zero_mass, and gamma density
// weighted by 1 - zero_mass on y > 0. Gamma is parameterized by (mean, sd).
struct ZeroInflatedGamma {
    double zero_mass;
    double mean;
    double sd;
    double shape() const { return mean * mean / (sd * sd); }
    double rate() const { return mean / (sd * sd); }
};

struct VonMises {
    double location;       // in (-pi, pi]
    double concentration;  // >= 0
};

struct Normal {
    double mean;
    double sd;
};

struct Poisson {
    double rate;
};

using EmissionParams = std::variant<ZeroInflatedGamma, VonMises, Normal, Poisson>;

inline void validate(const EmissionParams& p) {
    std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroInflatedGamma>) {
                if (!(v.zero_mass >= 0.0 && v.zero_mass < 1.0) || !(v.mean > 0.0) || !(v.sd > 0.0))
                    throw std::invalid_argument("ZeroInflatedGamma: invalid parameters");
            } else if constexpr (std::is_same_v<T, VonMises>) {
                if (!(v.location > -std::numbers::pi - 1e-12 && v.location <= std::numbers::pi + 1e-12) ||
                    !(v.concentration >= 0.0))
                    throw std::invalid_argument("VonMises: invalid parameters");
            } else if constexpr (std::is_same_v<T, Normal>) {
                if (!std::isfinite(v.mean) || !(v.sd > 0.0))
                    throw std::invalid_argument("Normal: invalid parameters");
            } else {
                if (!(v.rate > 0.0)) throw std::invalid_argument("Poisson: invalid rate");
            }
        },
        p);
}

// Density of the continuous part, point mass at y = 0 for the zero-inflated
// gamma, or PMF for Poisson.
inline double emission_density(const EmissionParams& p, double y) {
    return std::visit(
        [y](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroInflatedGamma>) {
                if (y == 0.0) return v.zero_mass;
                if (y < 0.0) return 0.0;
                const double a = v.shape(), b = v.rate();
                const double logd = a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(y) - b * y;
                return (1.0 - v.zero_mass) * std::exp(logd);
            } else if constexpr (std::is_same_v<T, VonMises>) {
                const double k = v.concentration;
                return std::exp(k * std::cos(y - v.location) - detail::log_bessel_i0(k)) /
                       (2.0 * std::numbers::pi);
            } else if constexpr (std::is_same_v<T, Normal>) {
                const double z = (y - v.mean) / v.sd;
                return std::exp(-0.5 * z * z) / (v.sd * std::sqrt(2.0 * std::numbers::pi));
            } else {
                const double k = std::round(y);
                if (k < 0.0) return 0.0;
                return std::exp(k * std::log(v.rate) - v.rate - std::lgamma(k + 1.0));
            }
        },
        p);
}

// One time point, possibly with missing channels (empty optionals).
using ObservationRecord = std::vector<std::optional<double>>;

// Product over the observed channels; missing channels contribute factor 1.
inline double joint_density(const std::vector<EmissionParams>& state_params,
                            const ObservationRecord& obs) {
    if (state_params.size() != obs.size())
        throw std::invalid_argument("joint_density: channel count mismatch");
    double prod = 1.0;
    for (std::size_t c = 0; c < obs.size(); ++c)
        if (obs[c]) prod *= emission_density(state_params[c], *obs[c]);
    return prod;
}

// CDF; the von Mises family has no standard CDF convention on the circle and
// is rejected (residuals are not computed for the angle channel).
inline double emission_cdf(const EmissionParams& p, double y) {
    return std::visit(
        [y](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroInflatedGamma>) {
                if (y < 0.0) return 0.0;
                const double g = boost::math::gamma_p(v.shape(), v.rate() * y);
                return v.zero_mass + (1.0 - v.zero_mass) * g;
            } else if constexpr (std::is_same_v<T, VonMises>) {
                throw std::invalid_argument("emission_cdf: not defined for the von Mises family");
            } else if constexpr (std::is_same_v<T, Normal>) {
                return detail::normal_cdf((y - v.mean) / v.sd);
            } else {
                if (y < 0.0) return 0.0;
                const double k = std::floor(y);
                return boost::math::gamma_q(k + 1.0, v.rate);
            }
        },
        p);
}

// CDF of the strictly-smaller event, P(Y < y); differs from emission_cdf only
// where the distribution has atoms (zero-inflated gamma at 0, Poisson).
inline double emission_cdf_left(const EmissionParams& p, double y) {
    if (const auto* z = std::get_if<ZeroInflatedGamma>(&p)) {
        if (y <= 0.0) return 0.0;
        return z->zero_mass + (1.0 - z->zero_mass) * boost::math::gamma_p(z->shape(), z->rate() * y);
    }
    if (const auto* po = std::get_if<Poisson>(&p)) {
        const double k = std::ceil(y) - 1.0;  // largest integer < y
        if (k < 0.0) return 0.0;
        return boost::math::gamma_q(k + 1.0, po->rate);
    }
    return emission_cdf(p, y);
}

inline bool has_cdf(const EmissionParams& p) { return !std::holds_alternative<VonMises>(p); }

namespace detail {
inline double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    a -= std::numbers::pi;
    if (a <= -std::numbers::pi) a = std::numbers::pi;
    return a == -0.0 ? 0.0 : a;
}
inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace detail

// Unconstrained working scale: log for positive parameters, logit for the
// zero mass, free angle for the von Mises location (wrapped on read-back).
inline std::vector<double> emission_to_working(const EmissionParams& p) {
    return std::visit(
        [](const auto& v) -> std::vector<double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroInflatedGamma>)
                return {detail::logit(std::max(v.zero_mass, 1e-12)), std::log(v.mean), std::log(v.sd)};
            else if constexpr (std::is_same_v<T, VonMises>)
                return {v.location, std::log(std::max(v.concentration, 1e-12))};
            else if constexpr (std::is_same_v<T, Normal>)
                return {v.mean, std::log(v.sd)};
            else
                return {std::log(v.rate)};
        },
        p);
}

inline std::size_t emission_working_size(const EmissionParams& p) {
    return emission_to_working(p).size();
}

// Inverse of emission_to_working; `like` selects the family.
inline EmissionParams emission_from_working(const EmissionParams& like,
                                            const std::vector<double>& w) {
    if (w.size() != emission_working_size(like))
        throw std::invalid_argument("emission_from_working: size mismatch");
    if (std::holds_alternative<ZeroInflatedGamma>(like))
        return ZeroInflatedGamma{detail::inv_logit(w[0]), std::exp(w[1]), std::exp(w[2])};
    if (std::holds_alternative<VonMises>(like))
        return VonMises{detail::wrap_angle(w[0]), std::exp(w[1])};
    if (std::holds_alternative<Normal>(like)) return Normal{w[0], std::exp(w[1])};
    return Poisson{std::exp(w[0])};
}

// A location used for ordering states canonically (ascending by channel 0).
inline double emission_location(const EmissionParams& p) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroInflatedGamma>) return (1.0 - v.zero_mass) * v.mean;
            else if constexpr (std::is_same_v<T, VonMises>) return v.location;
            else if constexpr (std::is_same_v<T, Normal>) return v.mean;
            else return v.rate;
        },
        p);
}

}  // namespace phsmm

#endif
