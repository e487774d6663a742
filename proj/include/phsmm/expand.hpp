#ifndef PHSMM_EXPAND_HPP
#define PHSMM_EXPAND_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "phsmm/model.hpp"

namespace phsmm {

// Exact HMM representation of the HSMM. Each HSMM state i becomes a state
// aggregate of R_i sub-states; the block-structured transition matrix encodes
// the dwell hazards c_i(r) so that the dwell-time distribution is reproduced
// exactly, with the last sub-state's self-loop carrying the geometric tail.
struct ExpandedHmm {
    Eigen::MatrixXd tpm;                 // Ntilde x Ntilde, row-stochastic
    std::vector<std::size_t> aggregate_of;  // sub-state -> HSMM state
    std::vector<std::size_t> position_of;   // sub-state -> dwell position r (1-based)
    std::vector<std::size_t> first_substate;  // HSMM state -> index of its first sub-state
    Eigen::VectorXd delta;
    std::size_t n_states = 0;  // HSMM state count

    std::size_t n_expanded() const { return aggregate_of.size(); }
};

// Stationary distribution of a row-stochastic matrix via the linear system
// x (I - G + U) = 1 with U the all-ones matrix.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& tpm) {
    const Eigen::Index n = tpm.rows();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - tpm;
    A.array() += 1.0;
    Eigen::VectorXd x = A.transpose().colPivHouseholderQr().solve(Eigen::VectorXd::Ones(n));
    const double resid = ((x.transpose() * tpm).transpose() - x).lpNorm<Eigen::Infinity>();
    if (!x.allFinite() || x.minCoeff() < -1e-10 || resid > 1e-8) {
        std::cerr << "phsmm: stationary distribution ill-defined, falling back to uniform\n";
        return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    }
    x = x.cwiseMax(0.0);
    x /= x.sum();
    return x;
}

inline Eigen::VectorXd stationary_distribution(const ExpandedHmm& hmm) {
    return stationary_distribution(hmm.tpm);
}

// Initial distribution placing all mass on dwell position r = 1 of each
// aggregate, weighted by `state_probs` over HSMM states.
inline Eigen::VectorXd fresh_entry_delta(const HsmmModel& model,
                                         const Eigen::VectorXd& state_probs) {
    if (state_probs.size() != static_cast<Eigen::Index>(model.n_states()))
        throw std::invalid_argument("fresh_entry_delta: dimension mismatch");
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_expanded()));
    Eigen::Index pos = 0;
    for (std::size_t i = 0; i < model.n_states(); ++i) {
        delta(pos) = state_probs(static_cast<Eigen::Index>(i));
        pos += static_cast<Eigen::Index>(model.dwell[i].start_length());
    }
    return delta;
}

inline ExpandedHmm expand(const HsmmModel& model) {
    model.validate();
    const std::size_t N = model.n_states();
    const std::size_t Nt = model.n_expanded();

    ExpandedHmm hmm;
    hmm.n_states = N;
    hmm.tpm = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(Nt), static_cast<Eigen::Index>(Nt));
    hmm.aggregate_of.resize(Nt);
    hmm.position_of.resize(Nt);
    hmm.first_substate.resize(N);

    std::vector<std::size_t> offset(N);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < N; ++i) {
        offset[i] = pos;
        hmm.first_substate[i] = pos;
        for (std::size_t r = 1; r <= model.dwell[i].start_length(); ++r, ++pos) {
            hmm.aggregate_of[pos] = i;
            hmm.position_of[pos] = r;
        }
    }

    for (std::size_t i = 0; i < N; ++i) {
        const auto& d = model.dwell[i];
        const std::size_t Ri = d.start_length();
        const auto oi = static_cast<Eigen::Index>(offset[i]);
        // diagonal block: superdiagonal survival, tail self-loop bottom right
        for (std::size_t r = 1; r < Ri; ++r)
            hmm.tpm(oi + static_cast<Eigen::Index>(r - 1), oi + static_cast<Eigen::Index>(r)) =
                1.0 - dwell_hazard(d, r);
        hmm.tpm(oi + static_cast<Eigen::Index>(Ri - 1), oi + static_cast<Eigen::Index>(Ri - 1)) =
            1.0 - dwell_hazard(d, Ri);
        // off-diagonal blocks: switches land on the first sub-state of j
        for (std::size_t j = 0; j < N; ++j) {
            if (j == i) continue;
            const auto oj = static_cast<Eigen::Index>(offset[j]);
            const double w = model.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            for (std::size_t r = 1; r <= Ri; ++r)
                hmm.tpm(oi + static_cast<Eigen::Index>(r - 1), oj) = w * dwell_hazard(d, r);
        }
    }

    switch (model.init_policy) {
        case InitPolicy::Stationary:
            hmm.delta = stationary_distribution(hmm.tpm);
            break;
        case InitPolicy::Uniform:
            hmm.delta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(Nt),
                                                  1.0 / static_cast<double>(Nt));
            break;
        case InitPolicy::UserSupplied:
            hmm.delta = model.user_delta;
            break;
    }
    return hmm;
}

// Stationary probability of each HSMM state: delta summed over aggregates.
inline Eigen::VectorXd aggregate_marginals(const ExpandedHmm& hmm) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hmm.n_states));
    for (std::size_t k = 0; k < hmm.n_expanded(); ++k)
        out(static_cast<Eigen::Index>(hmm.aggregate_of[k])) += hmm.delta(static_cast<Eigen::Index>(k));
    return out;
}

}  // namespace phsmm

#endif
