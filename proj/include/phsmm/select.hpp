#ifndef PHSMM_SELECT_HPP
#define PHSMM_SELECT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "phsmm/fit.hpp"
#include "phsmm/inference.hpp"

namespace phsmm {

struct EffectiveDf {
    double df = 0.0;
    double condition = 1.0;  // estimate for the penalised information matrix
    bool used_pseudo_inverse = false;
};

// Effective degrees of freedom trace(H_P^{-1} H) with H the empirical Fisher
// of the unpenalised model (finite-difference Hessian of -loglik at the
// penalised estimate) and H_P = H + analytic penalty Hessian on the working
// scale. Satisfies df = p at lambda = 0 and df <= p for positive-definite H.
inline EffectiveDf effective_df(const PackedObjective& obj, const Eigen::VectorXd& theta_hat) {
    EffectiveDf out;
    const auto p = theta_hat.size();
    bool all_zero = true;
    for (double l : obj.penalty_config().lambda)
        if (l != 0.0) all_zero = false;
    if (all_zero) {
        out.df = static_cast<double>(p);
        return out;
    }
    const Eigen::MatrixXd H = obj.loglik_neg_hessian(theta_hat);
    const Eigen::MatrixXd HP = H + obj.penalty_hessian_working(theta_hat);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(HP, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    out.condition = sv(0) / std::max(sv(sv.size() - 1), std::numeric_limits<double>::min());
    const double tol = sv(0) * 1e-12 * static_cast<double>(p);
    if (sv(sv.size() - 1) < tol) {
        out.used_pseudo_inverse = true;
        std::cerr << "phsmm: penalised information matrix numerically singular, "
                     "using pseudo-inverse for effective df\n";
        Eigen::VectorXd inv_sv = sv;
        for (Eigen::Index k = 0; k < sv.size(); ++k)
            inv_sv(k) = sv(k) > tol ? 1.0 / sv(k) : 0.0;
        const Eigen::MatrixXd pinv =
            svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
        out.df = (pinv * H).trace();
    } else {
        out.df = HP.ldlt().solve(H).trace();
    }
    return out;
}

inline double aic(double loglik, double df) { return -2.0 * loglik + 2.0 * df; }

struct AicRow {
    std::string name;
    double loglik = 0.0;
    double df = 0.0;
    double aic_value = 0.0;
    double delta_aic = 0.0;
};

// Rows sorted by AIC ascending (ties broken by name); delta relative to the
// minimum.
inline std::vector<AicRow> candidate_table(std::vector<AicRow> rows) {
    for (auto& r : rows) r.aic_value = aic(r.loglik, r.df);
    std::sort(rows.begin(), rows.end(), [](const AicRow& a, const AicRow& b) {
        if (a.aic_value != b.aic_value) return a.aic_value < b.aic_value;
        return a.name < b.name;
    });
    if (!rows.empty()) {
        const double best = rows.front().aic_value;
        for (auto& r : rows) r.delta_aic = r.aic_value - best;
    }
    return rows;
}

// 10-fold blockwise cross-validation with a neighbourhood search over a
// per-state grid of smoothing parameters.
struct CvPlan {
    std::size_t n_folds = 10;
    std::vector<std::vector<double>> grid;  // per-state candidate lambdas, ascending
    std::vector<std::size_t> start_index;   // walk start, index into each state's grid
    std::size_t max_moves = 20;
    FitOptions fold_options;  // options for the per-fold fits
};

struct CvCandidate {
    std::vector<double> lambda;
    double score = -std::numeric_limits<double>::infinity();  // mean validation loglik
    bool valid = false;
};

struct SelectionReport {
    std::vector<CvCandidate> evaluated;
    std::vector<std::vector<double>> trajectory;  // lambda vector after each move
    std::vector<double> chosen_lambda;
    double chosen_score = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline Dataset mask_range(const Dataset& data, std::size_t lo, std::size_t hi, bool keep_inside) {
    Dataset out = data;
    for (std::size_t t = 0; t < out.records.size(); ++t) {
        const bool inside = t >= lo && t < hi;
        if (inside != keep_inside)
            for (auto& v : out.records[t]) v.reset();
    }
    return out;
}

}  // namespace detail

// Training masks the held-out block (time axis preserved); scoring evaluates
// the fitted model with only the held-out block observed. The walk evaluates
// the current grid point and all one-coordinate x10 / /10 neighbours, moves
// to the best, and stops at a local maximum or after max_moves.
inline SelectionReport cross_validate(const Dataset& data, const HsmmModel& skeleton,
                                      std::size_t penalty_order, const CvPlan& plan) {
    data.validate();
    const std::size_t N = skeleton.n_states();
    if (plan.grid.size() != N)
        throw std::invalid_argument("cross_validate: grid needs one candidate set per state");
    if (plan.n_folds < 2 || plan.n_folds > data.length())
        throw std::invalid_argument("cross_validate: invalid fold count");

    const std::size_t T = data.length();
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    for (std::size_t f = 0; f < plan.n_folds; ++f)
        blocks.emplace_back(f * T / plan.n_folds, (f + 1) * T / plan.n_folds);

    std::map<std::vector<std::size_t>, CvCandidate> cache;
    SelectionReport report;

    auto evaluate = [&](const std::vector<std::size_t>& idx) -> const CvCandidate& {
        auto it = cache.find(idx);
        if (it != cache.end()) return it->second;
        CvCandidate cand;
        for (std::size_t i = 0; i < N; ++i) cand.lambda.push_back(plan.grid[i][idx[i]]);
        const PenaltyConfig cfg(cand.lambda, penalty_order);
        double sum = 0.0;
        bool ok = true;
        for (const auto& [lo, hi] : blocks) {
            try {
                const Dataset train = detail::mask_range(data, lo, hi, false);
                const FitResult fr = fit(train, skeleton, cfg, plan.fold_options);
                const Dataset valid = detail::mask_range(data, lo, hi, true);
                const LogLik ll = forward_loglik(expand(fr.model_hat), fr.model_hat.emissions,
                                                 valid, plan.fold_options.convention);
                if (!ll.defined()) { ok = false; break; }
                sum += ll.value;
            } catch (const std::exception& e) {
                std::cerr << "phsmm: fold fit failed (" << e.what() << "), skipping candidate\n";
                ok = false;
                break;
            }
        }
        if (ok) {
            cand.score = sum / static_cast<double>(plan.n_folds);
            cand.valid = true;
        }
        auto [ins, _] = cache.emplace(idx, std::move(cand));
        report.evaluated.push_back(ins->second);
        return ins->second;
    };

    std::vector<std::size_t> cur = plan.start_index;
    if (cur.empty()) cur.assign(N, 0);
    if (cur.size() != N) throw std::invalid_argument("cross_validate: bad start index");
    for (std::size_t i = 0; i < N; ++i)
        if (cur[i] >= plan.grid[i].size())
            throw std::invalid_argument("cross_validate: start index outside grid");

    const CvCandidate* best = &evaluate(cur);
    report.trajectory.push_back(best->lambda);
    for (std::size_t move = 0; move < plan.max_moves; ++move) {
        std::vector<std::size_t> best_idx = cur;
        double best_score = best->valid ? best->score : -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < N; ++i) {
            for (int dir : {-1, +1}) {
                if (dir < 0 && cur[i] == 0) continue;
                if (dir > 0 && cur[i] + 1 >= plan.grid[i].size()) continue;
                std::vector<std::size_t> nb = cur;
                nb[i] = cur[i] + static_cast<std::size_t>(dir > 0 ? 1 : -1) * 1;
                if (dir < 0) nb[i] = cur[i] - 1;
                const CvCandidate& c = evaluate(nb);
                if (c.valid && c.score > best_score) {
                    best_score = c.score;
                    best_idx = nb;
                }
            }
        }
        if (best_idx == cur) break;  // local maximum
        cur = best_idx;
        best = &evaluate(cur);
        report.trajectory.push_back(best->lambda);
    }

    if (!best->valid) throw std::runtime_error("cross_validate: no valid candidate found");
    report.chosen_lambda = best->lambda;
    report.chosen_score = best->score;
    return report;
}

}  // namespace phsmm

#endif
