#ifndef PHSMM_INFERENCE_HPP
#define PHSMM_INFERENCE_HPP

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "phsmm/dataset.hpp"
#include "phsmm/expand.hpp"
#include "phsmm/model.hpp"
#include "phsmm/penalty.hpp"

namespace phsmm {

// Placement of the first transition matrix in the likelihood product.
// GammaFirst follows delta Gamma P(y1) Gamma P(y2) ...; DeltaFirst starts
// with delta P(y1) and applies Gamma between observations only.
enum class LikelihoodConvention { GammaFirst, DeltaFirst };

struct LogLik {
    double value = 0.0;                  // natural log; -inf marks zero likelihood
    std::vector<double> log_scale;       // per-time log normalizing constants

    bool defined() const { return std::isfinite(value); }
};

namespace detail {

// State-dependent density per expanded sub-state; computed once per HSMM state.
inline Eigen::VectorXd density_vector(const ExpandedHmm& hmm,
                                      const std::vector<std::vector<EmissionParams>>& emissions,
                                      const ObservationRecord& obs) {
    Eigen::VectorXd per_state(static_cast<Eigen::Index>(hmm.n_states));
    for (std::size_t i = 0; i < hmm.n_states; ++i)
        per_state(static_cast<Eigen::Index>(i)) = joint_density(emissions[i], obs);
    Eigen::VectorXd p(static_cast<Eigen::Index>(hmm.n_expanded()));
    for (std::size_t k = 0; k < hmm.n_expanded(); ++k)
        p(static_cast<Eigen::Index>(k)) = per_state(static_cast<Eigen::Index>(hmm.aggregate_of[k]));
    return p;
}

}  // namespace detail

// Scaled forward recursion; the forward vector is normalized each step and
// the log constants accumulated.
inline LogLik forward_loglik(const ExpandedHmm& hmm,
                             const std::vector<std::vector<EmissionParams>>& emissions,
                             const Dataset& data,
                             LikelihoodConvention conv = LikelihoodConvention::GammaFirst) {
    data.validate();
    const auto T = data.length();
    LogLik out;
    out.log_scale.reserve(T);
    Eigen::RowVectorXd phi = hmm.delta.transpose();
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0 || conv == LikelihoodConvention::GammaFirst) phi = phi * hmm.tpm;
        phi = phi.cwiseProduct(detail::density_vector(hmm, emissions, data.records[t]).transpose());
        const double c = phi.sum();
        if (!(c > 0.0) || !std::isfinite(c)) {
            out.value = -std::numeric_limits<double>::infinity();
            return out;
        }
        phi /= c;
        out.log_scale.push_back(std::log(c));
        out.value += std::log(c);
    }
    return out;
}

inline double penalised_loglik(const HsmmModel& model, const PenaltyConfig& cfg,
                               const Dataset& data,
                               LikelihoodConvention conv = LikelihoodConvention::GammaFirst) {
    const LogLik ll = forward_loglik(expand(model), model.emissions, data, conv);
    if (!ll.defined()) return ll.value;
    return ll.value - penalty_value(model.dwell, cfg);
}

// Most probable expanded path in log space, mapped to HSMM state labels.
// Ties break toward the lower sub-state index.
inline std::vector<std::size_t> viterbi(const ExpandedHmm& hmm,
                                        const std::vector<std::vector<EmissionParams>>& emissions,
                                        const Dataset& data,
                                        LikelihoodConvention conv = LikelihoodConvention::GammaFirst) {
    data.validate();
    const auto T = data.length();
    const auto Nt = static_cast<Eigen::Index>(hmm.n_expanded());
    const double neg_inf = -std::numeric_limits<double>::infinity();

    // marginal distribution of the first state under the chosen convention
    Eigen::VectorXd start = hmm.delta;
    if (conv == LikelihoodConvention::GammaFirst)
        start = (hmm.delta.transpose() * hmm.tpm).transpose();

    Eigen::MatrixXd logGamma = hmm.tpm.array().max(0.0).log().matrix();
    std::vector<Eigen::VectorXd> score(T);
    std::vector<std::vector<Eigen::Index>> back(T, std::vector<Eigen::Index>(Nt, 0));

    auto log_density = [&](std::size_t t) -> Eigen::VectorXd {
        return detail::density_vector(hmm, emissions, data.records[t]).array().max(0.0).log();
    };

    score[0] = start.array().max(0.0).log().matrix() + log_density(0);
    for (std::size_t t = 1; t < T; ++t) {
        score[t].resize(Nt);
        const Eigen::VectorXd ld = log_density(t);
        for (Eigen::Index k = 0; k < Nt; ++k) {
            double best = neg_inf;
            Eigen::Index arg = 0;
            for (Eigen::Index j = 0; j < Nt; ++j) {
                const double v = score[t - 1](j) + logGamma(j, k);
                if (v > best) { best = v; arg = j; }
            }
            score[t](k) = best + ld(k);
            back[t][static_cast<std::size_t>(k)] = arg;
        }
    }

    std::vector<std::size_t> path(T);
    Eigen::Index cur = 0;
    score[T - 1].maxCoeff(&cur);
    for (std::size_t t = T; t-- > 0;) {
        path[t] = hmm.aggregate_of[static_cast<std::size_t>(cur)];
        if (t > 0) cur = back[t][static_cast<std::size_t>(cur)];
    }
    return path;
}

// Smoothed HSMM-state probabilities via scaled forward-backward; rows sum to 1.
inline Eigen::MatrixXd state_probs(const ExpandedHmm& hmm,
                                   const std::vector<std::vector<EmissionParams>>& emissions,
                                   const Dataset& data,
                                   LikelihoodConvention conv = LikelihoodConvention::GammaFirst) {
    data.validate();
    const auto T = data.length();
    const auto Nt = static_cast<Eigen::Index>(hmm.n_expanded());

    Eigen::VectorXd start = hmm.delta;
    if (conv == LikelihoodConvention::GammaFirst)
        start = (hmm.delta.transpose() * hmm.tpm).transpose();

    std::vector<Eigen::RowVectorXd> alpha(T);
    std::vector<Eigen::VectorXd> dens(T);
    Eigen::RowVectorXd phi = start.transpose();
    for (std::size_t t = 0; t < T; ++t) {
        dens[t] = detail::density_vector(hmm, emissions, data.records[t]);
        if (t > 0) phi = phi * hmm.tpm;
        phi = phi.cwiseProduct(dens[t].transpose());
        const double c = phi.sum();
        if (!(c > 0.0)) throw std::runtime_error("state_probs: zero likelihood");
        phi /= c;
        alpha[t] = phi;
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Ones(Nt);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(hmm.n_states));
    for (std::size_t t = T; t-- > 0;) {
        Eigen::VectorXd smooth = alpha[t].transpose().cwiseProduct(beta);
        smooth /= smooth.sum();
        out.row(static_cast<Eigen::Index>(t)).setZero();
        for (Eigen::Index k = 0; k < Nt; ++k)
            out(static_cast<Eigen::Index>(t),
                static_cast<Eigen::Index>(hmm.aggregate_of[static_cast<std::size_t>(k)])) += smooth(k);
        if (t > 0) {
            beta = hmm.tpm * dens[t].cwiseProduct(beta);
            beta /= beta.sum();  // rescale only; ratios are what matters
        }
    }
    return out;
}

// Ordinary pseudo-residuals for one channel: the one-step-ahead probability
// integral transform mapped through the standard-normal quantile. The atom at
// zero of the zero-inflated gamma uses a seeded randomized PIT.
inline std::vector<std::optional<double>> pseudo_residuals(
    const ExpandedHmm& hmm, const std::vector<std::vector<EmissionParams>>& emissions,
    const Dataset& data, std::size_t channel, std::uint64_t seed,
    LikelihoodConvention conv = LikelihoodConvention::GammaFirst) {
    data.validate();
    if (channel >= data.n_channels())
        throw std::invalid_argument("pseudo_residuals: channel out of range");
    for (std::size_t i = 0; i < hmm.n_states; ++i)
        if (!has_cdf(emissions[i][channel]))
            throw std::invalid_argument("pseudo_residuals: channel family has no usable CDF");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const boost::math::normal_distribution<double> std_normal;
    const auto T = data.length();

    Eigen::RowVectorXd w = hmm.delta.transpose();
    if (conv == LikelihoodConvention::GammaFirst) w = w * hmm.tpm;

    std::vector<std::optional<double>> out(T);
    Eigen::RowVectorXd phi = w;  // filtered vector, maintained alongside
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) w = phi * hmm.tpm;
        const auto& y = data.records[t][channel];
        if (y) {
            double lo = 0.0, hi = 0.0;
            for (Eigen::Index k = 0; k < w.size(); ++k) {
                const auto& par = emissions[hmm.aggregate_of[static_cast<std::size_t>(k)]][channel];
                lo += w(k) * emission_cdf_left(par, *y);
                hi += w(k) * emission_cdf(par, *y);
            }
            double u = (hi > lo) ? lo + unif(rng) * (hi - lo) : hi;
            u = std::min(1.0 - 1e-12, std::max(1e-12, u));
            out[t] = boost::math::quantile(std_normal, u);
        }
        // filter update with the full record
        Eigen::RowVectorXd upd =
            w.cwiseProduct(detail::density_vector(hmm, emissions, data.records[t]).transpose());
        const double c = upd.sum();
        if (!(c > 0.0)) throw std::runtime_error("pseudo_residuals: zero likelihood");
        phi = upd / c;
    }
    return out;
}

}  // namespace phsmm

#endif
