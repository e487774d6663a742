#ifndef PHSMM_PENALTY_HPP
#define PHSMM_PENALTY_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "phsmm/dwell.hpp"

namespace phsmm {

// m-th order difference penalty on the unstructured dwell probabilities,
// lambda_i * sum_{r=m+1}^{R_i} (Delta^m pi_{i,r})^2 summed over states.
struct PenaltyConfig {
    std::vector<double> lambda;  // one per state, >= 0
    std::size_t order = 1;       // m >= 1

    PenaltyConfig() = default;
    PenaltyConfig(std::vector<double> lam, std::size_t m) : lambda(std::move(lam)), order(m) {
        if (m < 1) throw std::invalid_argument("PenaltyConfig: order must be >= 1");
        for (double l : lambda)
            if (!(l >= 0.0)) throw std::invalid_argument("PenaltyConfig: lambda must be >= 0");
    }
};

// Difference matrix D_m of dimension (n-m) x n; rows hold the alternating
// binomial stencil of Delta^m.
inline Eigen::MatrixXd difference_matrix(std::size_t n, std::size_t m) {
    if (m >= n) throw std::invalid_argument("difference_matrix: order must be < length");
    // binomial coefficients C(m, k)
    std::vector<double> binom(m + 1, 1.0);
    for (std::size_t k = 1; k <= m; ++k)
        binom[k] = binom[k - 1] * static_cast<double>(m - k + 1) / static_cast<double>(k);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n - m),
                                              static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < D.rows(); ++j)
        for (std::size_t l = 0; l <= m; ++l)
            D(j, j + static_cast<Eigen::Index>(l)) =
                ((m - l) % 2 == 0 ? 1.0 : -1.0) * binom[l];
    return D;
}

// Delta^m applied recursively; equals D_m * pis.
inline std::vector<double> difference(const std::vector<double>& pis, std::size_t m) {
    if (m >= pis.size()) throw std::invalid_argument("difference: order must be < length");
    std::vector<double> cur = pis;
    for (std::size_t pass = 0; pass < m; ++pass) {
        std::vector<double> next(cur.size() - 1);
        for (std::size_t j = 0; j < next.size(); ++j) next[j] = cur[j + 1] - cur[j];
        cur = std::move(next);
    }
    return cur;
}

// States where m >= R_i contribute 0 (there is nothing to difference); the
// callback, when given, is invoked once per such state so sweeps over m can
// surface the condition without aborting.
template <typename WarnFn>
inline double penalty_value(const std::vector<DwellTimeSpec>& dwell, const PenaltyConfig& cfg,
                            WarnFn&& warn) {
    if (cfg.lambda.size() != dwell.size())
        throw std::invalid_argument("penalty_value: lambda size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < dwell.size(); ++i) {
        if (cfg.order >= dwell[i].start_length()) {
            warn(i);
            continue;
        }
        if (cfg.lambda[i] == 0.0) continue;
        std::vector<double> d = difference(dwell[i].unstructured(), cfg.order);
        double s = 0.0;
        for (double v : d) s += v * v;
        total += cfg.lambda[i] * s;
    }
    return total;
}

inline double penalty_value(const std::vector<DwellTimeSpec>& dwell, const PenaltyConfig& cfg) {
    return penalty_value(dwell, cfg, [](std::size_t) {});
}

// Gradient 2*lambda_i*D'D*pi_i and constant Hessian 2*lambda_i*D'D, per state,
// both with respect to the natural-scale probabilities.
struct PenaltyDerivatives {
    std::vector<Eigen::VectorXd> gradient;
    std::vector<Eigen::MatrixXd> hessian;
};

inline PenaltyDerivatives penalty_gradient_hessian(const std::vector<DwellTimeSpec>& dwell,
                                                   const PenaltyConfig& cfg) {
    if (cfg.lambda.size() != dwell.size())
        throw std::invalid_argument("penalty_gradient_hessian: lambda size mismatch");
    PenaltyDerivatives out;
    for (std::size_t i = 0; i < dwell.size(); ++i) {
        const auto R = static_cast<Eigen::Index>(dwell[i].start_length());
        if (cfg.order >= dwell[i].start_length() || cfg.lambda[i] == 0.0) {
            out.gradient.emplace_back(Eigen::VectorXd::Zero(R));
            out.hessian.emplace_back(Eigen::MatrixXd::Zero(R, R));
            continue;
        }
        const Eigen::MatrixXd D = difference_matrix(dwell[i].start_length(), cfg.order);
        Eigen::MatrixXd H = 2.0 * cfg.lambda[i] * D.transpose() * D;
        Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(dwell[i].unstructured().data(), R);
        out.gradient.emplace_back(H * pi);
        out.hessian.emplace_back(std::move(H));
    }
    return out;
}

}  // namespace phsmm

#endif
