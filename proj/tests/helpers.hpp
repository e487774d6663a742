#ifndef PHSMM_TEST_HELPERS_HPP
#define PHSMM_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "phsmm/model.hpp"
#include "phsmm/dwell.hpp"

namespace phsmm::testing {

// random valid dwell spec with start length R
inline DwellTimeSpec random_dwell(std::mt19937_64& rng, std::size_t R) {
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    std::vector<double> w(R + 1);
    double s = 0.0;
    for (auto& v : w) { v = unif(rng); s += v; }
    std::vector<double> pi(R);
    for (std::size_t r = 0; r < R; ++r) pi[r] = w[r] / s;  // leftover w[R]/s is tail mass
    return DwellTimeSpec(pi);
}

inline Eigen::MatrixXd random_omega(std::mt19937_64& rng, std::size_t N) {
    Eigen::MatrixXd om = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                               static_cast<Eigen::Index>(N));
    if (N == 2) {
        om(0, 1) = om(1, 0) = 1.0;
        return om;
    }
    std::uniform_real_distribution<double> unif(0.2, 1.0);
    for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j)
            if (j != i) {
                om(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = unif(rng);
                s += om(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        for (std::size_t j = 0; j < N; ++j)
            om(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) /= s;
        om(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
    }
    return om;
}

// random model with 1-channel normal emissions, well separated by state index
inline HsmmModel random_model(std::mt19937_64& rng, std::size_t N,
                              const std::vector<std::size_t>& R) {
    HsmmModel m;
    for (std::size_t i = 0; i < N; ++i) m.dwell.push_back(random_dwell(rng, R[i]));
    m.omega = random_omega(rng, N);
    std::uniform_real_distribution<double> sd(0.5, 1.5);
    for (std::size_t i = 0; i < N; ++i)
        m.emissions.push_back({Normal{3.0 * static_cast<double>(i), sd(rng)}});
    return m;
}

}  // namespace phsmm::testing

#endif
