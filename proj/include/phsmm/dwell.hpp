#ifndef PHSMM_DWELL_HPP
#define PHSMM_DWELL_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace phsmm {

// Dwell-time distribution with an unstructured start of length R >= 2 and a
// geometric tail beyond it. The start probabilities pi_1..pi_R are free
// parameters with 0 < pi_r < 1 and sum(pi) < 1; the leftover mass is spread
// over r > R geometrically with ratio
//   q = (1 - sum_{r<=R} pi_r) / (1 - sum_{r<=R-1} pi_r).
class DwellTimeSpec {
public:
    explicit DwellTimeSpec(std::vector<double> unstructured)
        : pi_(std::move(unstructured)) {
        if (pi_.size() < 2)
            throw std::invalid_argument("DwellTimeSpec: start length must be >= 2");
        double sum = 0.0;
        for (double p : pi_) {
            if (!(p > 0.0 && p < 1.0))
                throw std::invalid_argument("DwellTimeSpec: probabilities must lie in (0,1)");
            sum += p;
        }
        if (!(sum < 1.0))
            throw std::invalid_argument("DwellTimeSpec: start probabilities must sum to < 1");
        head_sum_ = sum - pi_.back();
        total_sum_ = sum;
        tail_ratio_ = (1.0 - total_sum_) / (1.0 - head_sum_);
    }

    std::size_t start_length() const { return pi_.size(); }
    const std::vector<double>& unstructured() const { return pi_; }

    // geometric continuation ratio q of the tail
    double tail_ratio() const { return tail_ratio_; }

    // mass of the unstructured start, sum_{r<=R} pi_r
    double start_mass() const { return total_sum_; }

private:
    std::vector<double> pi_;
    double head_sum_;   // sum of pi_1..pi_{R-1}
    double total_sum_;  // sum of pi_1..pi_R
    double tail_ratio_;
};

// Unconstrained working parameters for a dwell spec (multinomial logit with
// the tail mass as reference category).
struct DwellWorkingParams {
    std::vector<double> eta;
};

// P(dwell = r)
inline double dwell_pmf(const DwellTimeSpec& spec, std::size_t r) {
    if (r < 1) throw std::invalid_argument("dwell_pmf: r must be >= 1");
    const std::size_t R = spec.start_length();
    if (r <= R) return spec.unstructured()[r - 1];
    return spec.unstructured()[R - 1] *
           std::pow(spec.tail_ratio(), static_cast<double>(r - R));
}

// F(r) = P(dwell <= r); the tail part uses the closed-form geometric partial
// sum rather than truncation.
inline double dwell_cdf(const DwellTimeSpec& spec, std::size_t r) {
    const std::size_t R = spec.start_length();
    if (r == 0) return 0.0;
    if (r <= R) {
        double s = 0.0;
        for (std::size_t k = 0; k < r; ++k) s += spec.unstructured()[k];
        return s;
    }
    // mass beyond R: (1 - F(R)) * (1 - q^{r-R})
    const double q = spec.tail_ratio();
    const double tail_mass = 1.0 - spec.start_mass();
    return spec.start_mass() + tail_mass * (1.0 - std::pow(q, static_cast<double>(r - R)));
}

// Hazard c(r) = d(r) / (1 - F(r-1)) for r in 1..R. The constant tail hazard
// is handled inside the state expansion, so r > R is rejected here.
inline double dwell_hazard(const DwellTimeSpec& spec, std::size_t r) {
    if (r < 1 || r > spec.start_length())
        throw std::invalid_argument("dwell_hazard: r must lie in 1..R");
    return dwell_pmf(spec, r) / (1.0 - dwell_cdf(spec, r - 1));
}

namespace detail {
// Values emerging from transforms are kept away from the boundaries so the
// hazard and log never see exact 0 or 1. Returns true if clamping happened.
inline bool clamp_probability(double& p) {
    constexpr double eps = 1e-12;
    if (p < eps) { p = eps; return true; }
    if (p > 1.0 - eps) { p = 1.0 - eps; return true; }
    return false;
}
}  // namespace detail

// Inverse multinomial-logit map; guarded against overflow by max-subtraction.
inline DwellTimeSpec dwell_from_working(const DwellWorkingParams& w) {
    if (w.eta.size() < 2)
        throw std::invalid_argument("dwell_from_working: need at least 2 entries");
    double m = 0.0;  // reference category has logit 0
    for (double e : w.eta) {
        if (!std::isfinite(e))
            throw std::invalid_argument("dwell_from_working: non-finite eta");
        m = std::max(m, e);
    }
    double denom = std::exp(-m);
    for (double e : w.eta) denom += std::exp(e - m);
    std::vector<double> pi(w.eta.size());
    for (std::size_t r = 0; r < pi.size(); ++r) {
        pi[r] = std::exp(w.eta[r] - m) / denom;
        detail::clamp_probability(pi[r]);
    }
    // keep sum strictly below 1
    double s = 0.0;
    for (double p : pi) s += p;
    if (s >= 1.0 - 1e-12) {
        const double scale = (1.0 - 1e-12) / s;
        for (double& p : pi) p *= scale;
    }
    return DwellTimeSpec(std::move(pi));
}

inline DwellWorkingParams dwell_to_working(const DwellTimeSpec& spec) {
    const double tail = 1.0 - spec.start_mass();
    DwellWorkingParams w;
    w.eta.reserve(spec.start_length());
    for (double p : spec.unstructured()) w.eta.push_back(std::log(p / tail));
    return w;
}

// Dwell spec whose start matches a geometric(gamma) distribution; the implied
// tail ratio then equals gamma, so the whole PMF is geometric.
inline DwellTimeSpec geometric_dwell(double gamma, std::size_t R) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("geometric_dwell: gamma must lie in (0,1)");
    if (R < 2) throw std::invalid_argument("geometric_dwell: R must be >= 2");
    std::vector<double> pi(R);
    double g = 1.0;
    for (std::size_t r = 0; r < R; ++r) {
        pi[r] = (1.0 - gamma) * g;
        g *= gamma;
    }
    return DwellTimeSpec(std::move(pi));
}

}  // namespace phsmm

#endif
