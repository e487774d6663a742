#ifndef PHSMM_SIMULATE_HPP
#define PHSMM_SIMULATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "phsmm/dataset.hpp"
#include "phsmm/expand.hpp"
#include "phsmm/inference.hpp"
#include "phsmm/model.hpp"

namespace phsmm {

struct Sojourn {
    std::size_t state;
    std::size_t duration;
};

struct SimOutput {
    std::vector<std::size_t> states;  // length T
    std::vector<Sojourn> sojourns;    // durations sum to T; last one truncated
    Dataset observations;
    std::uint64_t seed = 0;
};

namespace detail {

// Inverse-CDF dwell sampling; beyond R the geometric tail is inverted in
// closed form so arbitrarily long sojourns are possible.
inline std::size_t sample_dwell(const DwellTimeSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    const std::size_t R = spec.start_length();
    double cum = 0.0;
    for (std::size_t r = 1; r <= R; ++r) {
        cum += spec.unstructured()[r - 1];
        if (u <= cum) return r;
    }
    // u falls in the tail: smallest k >= 1 with (1 - F(R)) q^k <= 1 - u
    const double q = spec.tail_ratio();
    const double ratio = (1.0 - u) / (1.0 - spec.start_mass());
    const double k = std::ceil(std::log(ratio) / std::log(q));
    return R + static_cast<std::size_t>(std::max(1.0, k));
}

// Best-Fisher rejection sampler for the von Mises distribution.
inline double sample_von_mises(const VonMises& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double k = p.concentration;
    if (k < 1e-8) return wrap_angle(2.0 * std::numbers::pi * unif(rng) - std::numbers::pi);
    const double a = 1.0 + std::sqrt(1.0 + 4.0 * k * k);
    const double b = (a - std::sqrt(2.0 * a)) / (2.0 * k);
    const double r = (1.0 + b * b) / (2.0 * b);
    while (true) {
        const double z = std::cos(std::numbers::pi * unif(rng));
        const double f = (1.0 + r * z) / (r + z);
        const double c = k * (r - f);
        const double u = unif(rng);
        if (c * (2.0 - c) - u > 0.0 || std::log(c / u) + 1.0 - c >= 0.0) {
            const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
            return wrap_angle(p.location + sign * std::acos(f));
        }
    }
}

inline double sample_emission(const EmissionParams& p, std::mt19937_64& rng) {
    if (const auto* z = std::get_if<ZeroInflatedGamma>(&p)) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (unif(rng) < z->zero_mass) return 0.0;
        std::gamma_distribution<double> g(z->shape(), 1.0 / z->rate());
        return g(rng);
    }
    if (const auto* v = std::get_if<VonMises>(&p)) return sample_von_mises(*v, rng);
    if (const auto* n = std::get_if<Normal>(&p)) {
        std::normal_distribution<double> d(n->mean, n->sd);
        return d(rng);
    }
    std::poisson_distribution<long> d(std::get<Poisson>(p).rate);
    return static_cast<double>(d(rng));
}

inline std::size_t sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * probs.sum();
    double cum = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        cum += probs(i);
        if (u <= cum) return static_cast<std::size_t>(i);
    }
    return static_cast<std::size_t>(probs.size() - 1);
}

}  // namespace detail

// Semi-Markov simulation: alternate fresh dwell draws and Omega-driven
// switches, truncating the final sojourn at T. The initial state follows the
// model's init policy projected onto HSMM states.
inline SimOutput simulate(const HsmmModel& model, std::size_t T, std::uint64_t seed,
                          std::vector<std::string> channel_names = {}) {
    model.validate();
    if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
    std::mt19937_64 rng(seed);

    const ExpandedHmm hmm = expand(model);
    const Eigen::VectorXd entry = aggregate_marginals(hmm);

    SimOutput out;
    out.seed = seed;
    out.states.reserve(T);

    std::size_t state = detail::sample_index(entry, rng);
    while (out.states.size() < T) {
        std::size_t dur = detail::sample_dwell(model.dwell[state], rng);
        const std::size_t room = T - out.states.size();
        const std::size_t used = std::min(dur, room);
        out.states.insert(out.states.end(), used, state);
        out.sojourns.push_back({state, used});
        if (out.states.size() >= T) break;
        state = detail::sample_index(
            model.omega.row(static_cast<Eigen::Index>(state)).transpose(), rng);
    }

    const std::size_t C = model.n_channels();
    if (channel_names.empty())
        for (std::size_t c = 0; c < C; ++c) channel_names.push_back("ch" + std::to_string(c));
    out.observations.channel_names = std::move(channel_names);
    out.observations.records.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        out.observations.records[t].resize(C);
        for (std::size_t c = 0; c < C; ++c)
            out.observations.records[t][c] =
                detail::sample_emission(model.emissions[out.states[t]][c], rng);
    }
    return out;
}

// Path-enumeration likelihood over all expanded state sequences, in extended
// precision. Testing oracle; exponential in T.
inline double brute_force_loglik_expanded(
    const ExpandedHmm& hmm, const std::vector<std::vector<EmissionParams>>& emissions,
    const Dataset& data, LikelihoodConvention conv = LikelihoodConvention::GammaFirst) {
    data.validate();
    const std::size_t T = data.length();
    const std::size_t Nt = hmm.n_expanded();
    if (std::pow(static_cast<double>(Nt), static_cast<double>(T)) > 1e7)
        throw std::invalid_argument("brute_force_loglik_expanded: state space too large");

    std::vector<Eigen::VectorXd> dens(T);
    for (std::size_t t = 0; t < T; ++t)
        dens[t] = detail::density_vector(hmm, emissions, data.records[t]);

    long double total = 0.0L;
    // recursion over the path; `t` indexes the next observation to emit
    auto rec = [&](auto&& self, std::size_t t, std::size_t state, long double w) -> void {
        if (t == T) {
            total += w;
            return;
        }
        for (std::size_t k = 0; k < Nt; ++k) {
            const long double step =
                w * static_cast<long double>(hmm.tpm(static_cast<Eigen::Index>(state),
                                                     static_cast<Eigen::Index>(k))) *
                static_cast<long double>(dens[t](static_cast<Eigen::Index>(k)));
            if (step > 0.0L) self(self, t + 1, k, step);
        }
    };
    for (std::size_t k = 0; k < Nt; ++k) {
        const long double d0 = static_cast<long double>(hmm.delta(static_cast<Eigen::Index>(k)));
        if (d0 <= 0.0L) continue;
        if (conv == LikelihoodConvention::GammaFirst) {
            rec(rec, 0, k, d0);
        } else {
            const long double w = d0 * static_cast<long double>(dens[0](static_cast<Eigen::Index>(k)));
            if (w > 0.0L) rec(rec, 1, k, w);
        }
    }
    return static_cast<double>(std::log(total));
}

// Segmentation-enumeration likelihood at the semi-Markov level, independent
// of the state expansion. The final sojourn is right-censored via the
// survival Pr(dwell >= r) = 1 - F(r-1); entry follows fresh-entry
// probabilities over HSMM states.
inline double brute_force_loglik_semimarkov(const HsmmModel& model, const Dataset& data,
                                            const Eigen::VectorXd& entry_probs) {
    data.validate();
    model.validate();
    const std::size_t T = data.length();
    const std::size_t N = model.n_states();
    if (T > 12 || N > 3)
        throw std::invalid_argument("brute_force_loglik_semimarkov: instance too large");

    // emission product of state i over records [t, t+len)
    auto emit = [&](std::size_t i, std::size_t t, std::size_t len) {
        long double p = 1.0L;
        for (std::size_t s = t; s < t + len; ++s)
            p *= static_cast<long double>(joint_density(model.emissions[i], data.records[s]));
        return p;
    };

    long double total = 0.0L;
    auto rec = [&](auto&& self, std::size_t t, std::size_t state, long double w) -> void {
        for (std::size_t len = 1; len + t <= T; ++len) {
            const long double e = emit(state, t, len);
            if (e <= 0.0L) continue;
            if (t + len == T) {
                const long double surv =
                    1.0L - static_cast<long double>(dwell_cdf(model.dwell[state], len - 1));
                total += w * surv * e;
            } else {
                const long double d = static_cast<long double>(dwell_pmf(model.dwell[state], len));
                for (std::size_t j = 0; j < N; ++j) {
                    if (j == state) continue;
                    const long double om = static_cast<long double>(
                        model.omega(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(j)));
                    if (om > 0.0L) self(self, t + len, j, w * d * om * e);
                }
            }
        }
    };
    for (std::size_t i = 0; i < N; ++i) {
        const long double p0 = static_cast<long double>(entry_probs(static_cast<Eigen::Index>(i)));
        if (p0 > 0.0L) rec(rec, 0, i, p0);
    }
    return static_cast<double>(std::log(total));
}

}  // namespace phsmm

#endif
