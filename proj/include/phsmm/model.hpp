#ifndef PHSMM_MODEL_HPP
#define PHSMM_MODEL_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "phsmm/dwell.hpp"
#include "phsmm/emission.hpp"
#include "phsmm/penalty.hpp"

namespace phsmm {

enum class InitPolicy { Stationary, Uniform, UserSupplied };

// N-state hidden semi-Markov model: per-state dwell-time specs, conditional
// transition matrix Omega (zero diagonal, rows sum to 1), per-state emission
// parameters for each observation channel, and the initial-distribution policy.
struct HsmmModel {
    std::vector<DwellTimeSpec> dwell;
    Eigen::MatrixXd omega;
    std::vector<std::vector<EmissionParams>> emissions;  // [state][channel]
    InitPolicy init_policy = InitPolicy::Stationary;
    Eigen::VectorXd user_delta;  // over expanded sub-states, only for UserSupplied

    std::size_t n_states() const { return dwell.size(); }
    std::size_t n_channels() const { return emissions.empty() ? 0 : emissions.front().size(); }
    std::size_t n_expanded() const {
        std::size_t n = 0;
        for (const auto& d : dwell) n += d.start_length();
        return n;
    }

    void validate() const {
        const auto N = dwell.size();
        if (N < 2) throw std::invalid_argument("HsmmModel: need at least 2 states");
        if (omega.rows() != static_cast<Eigen::Index>(N) ||
            omega.cols() != static_cast<Eigen::Index>(N))
            throw std::invalid_argument("HsmmModel: omega must be N x N");
        for (Eigen::Index i = 0; i < omega.rows(); ++i) {
            if (omega(i, i) != 0.0)
                throw std::invalid_argument("HsmmModel: omega diagonal must be zero");
            double s = 0.0;
            for (Eigen::Index j = 0; j < omega.cols(); ++j) {
                if (omega(i, j) < 0.0 || omega(i, j) > 1.0)
                    throw std::invalid_argument("HsmmModel: omega entries must lie in [0,1]");
                s += omega(i, j);
            }
            if (std::abs(s - 1.0) > 1e-10)
                throw std::invalid_argument("HsmmModel: omega rows must sum to 1");
        }
        if (N == 2 && (omega(0, 1) != 1.0 || omega(1, 0) != 1.0))
            throw std::invalid_argument("HsmmModel: for N=2 omega is the 0/1 matrix");
        if (emissions.size() != N)
            throw std::invalid_argument("HsmmModel: emissions must have one entry per state");
        const std::size_t C = emissions.front().size();
        for (const auto& st : emissions) {
            if (st.size() != C)
                throw std::invalid_argument("HsmmModel: inconsistent channel counts");
            for (const auto& p : st) phsmm::validate(p);
        }
        if (init_policy == InitPolicy::UserSupplied) {
            if (user_delta.size() != static_cast<Eigen::Index>(n_expanded()))
                throw std::invalid_argument("HsmmModel: user delta has wrong dimension");
            if (std::abs(user_delta.sum() - 1.0) > 1e-10 || user_delta.minCoeff() < 0.0)
                throw std::invalid_argument("HsmmModel: user delta is not a distribution");
        }
    }
};

inline double penalty_value(const HsmmModel& model, const PenaltyConfig& cfg) {
    return penalty_value(model.dwell, cfg);
}

}  // namespace phsmm

#endif
