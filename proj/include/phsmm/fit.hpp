#ifndef PHSMM_FIT_HPP
#define PHSMM_FIT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "phsmm/inference.hpp"
#include "phsmm/model.hpp"
#include "phsmm/penalty.hpp"

namespace phsmm {

// Flat layout of the working-parameter vector: per-state dwell eta blocks,
// then omega row logits (empty for N = 2), then emission blocks, then
// optional entry-state weights.
struct ParameterLayout {
    std::size_t n_states = 0;
    std::vector<std::size_t> dwell_offset, dwell_size;
    std::size_t omega_offset = 0, omega_row_size = 0;  // per-row free logits, N-2
    std::vector<std::vector<std::size_t>> emission_offset;  // [state][channel]
    std::vector<std::vector<std::size_t>> emission_size;
    std::size_t entry_offset = 0, entry_size = 0;  // N-1 softmax weights when estimated
    std::size_t total = 0;
};

inline ParameterLayout make_layout(const HsmmModel& skeleton, bool estimate_entry = false) {
    ParameterLayout lay;
    const std::size_t N = skeleton.n_states();
    lay.n_states = N;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < N; ++i) {
        lay.dwell_offset.push_back(pos);
        lay.dwell_size.push_back(skeleton.dwell[i].start_length());
        pos += skeleton.dwell[i].start_length();
    }
    lay.omega_offset = pos;
    lay.omega_row_size = (N > 2) ? N - 2 : 0;
    pos += N * lay.omega_row_size;
    lay.emission_offset.resize(N);
    lay.emission_size.resize(N);
    for (std::size_t i = 0; i < N; ++i)
        for (const auto& p : skeleton.emissions[i]) {
            lay.emission_offset[i].push_back(pos);
            lay.emission_size[i].push_back(emission_working_size(p));
            pos += emission_working_size(p);
        }
    if (estimate_entry) {
        lay.entry_offset = pos;
        lay.entry_size = N - 1;
        pos += N - 1;
    }
    lay.total = pos;
    return lay;
}

namespace detail {

// softmax over (x_1..x_k, 0); returns k+1 probabilities
inline std::vector<double> softmax_with_ref(const double* x, std::size_t k) {
    double m = 0.0;
    for (std::size_t i = 0; i < k; ++i) m = std::max(m, x[i]);
    std::vector<double> p(k + 1);
    double z = std::exp(-m);
    for (std::size_t i = 0; i < k; ++i) z += std::exp(x[i] - m);
    for (std::size_t i = 0; i < k; ++i) p[i] = std::exp(x[i] - m) / z;
    p[k] = std::exp(-m) / z;
    return p;
}

}  // namespace detail

inline Eigen::VectorXd pack(const HsmmModel& model, const ParameterLayout& lay) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(lay.total));
    const std::size_t N = model.n_states();
    for (std::size_t i = 0; i < N; ++i) {
        const auto eta = dwell_to_working(model.dwell[i]).eta;
        for (std::size_t r = 0; r < eta.size(); ++r)
            theta(static_cast<Eigen::Index>(lay.dwell_offset[i] + r)) = eta[r];
    }
    if (lay.omega_row_size > 0) {
        for (std::size_t i = 0; i < N; ++i) {
            // off-diagonal entries of row i in column order; last is reference
            std::vector<double> w;
            for (std::size_t j = 0; j < N; ++j)
                if (j != i)
                    w.push_back(model.omega(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j)));
            const double ref = std::max(w.back(), 1e-12);
            for (std::size_t k = 0; k < lay.omega_row_size; ++k)
                theta(static_cast<Eigen::Index>(lay.omega_offset + i * lay.omega_row_size + k)) =
                    std::log(std::max(w[k], 1e-12) / ref);
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < model.emissions[i].size(); ++c) {
            const auto w = emission_to_working(model.emissions[i][c]);
            for (std::size_t k = 0; k < w.size(); ++k)
                theta(static_cast<Eigen::Index>(lay.emission_offset[i][c] + k)) = w[k];
        }
    if (lay.entry_size > 0) {
        // derive weights from the user delta's aggregate masses if available
        std::vector<double> mass(N, 1.0 / static_cast<double>(N));
        if (model.init_policy == InitPolicy::UserSupplied) {
            Eigen::Index pos = 0;
            for (std::size_t i = 0; i < N; ++i) {
                mass[i] = std::max(model.user_delta(pos), 1e-12);
                pos += static_cast<Eigen::Index>(model.dwell[i].start_length());
            }
        }
        for (std::size_t k = 0; k < lay.entry_size; ++k)
            theta(static_cast<Eigen::Index>(lay.entry_offset + k)) =
                std::log(mass[k] / mass[N - 1]);
    }
    return theta;
}

inline HsmmModel unpack(const Eigen::VectorXd& theta, const HsmmModel& skeleton,
                        const ParameterLayout& lay) {
    HsmmModel model = skeleton;
    const std::size_t N = lay.n_states;
    model.dwell.clear();
    for (std::size_t i = 0; i < N; ++i) {
        DwellWorkingParams w;
        for (std::size_t r = 0; r < lay.dwell_size[i]; ++r)
            w.eta.push_back(theta(static_cast<Eigen::Index>(lay.dwell_offset[i] + r)));
        model.dwell.push_back(dwell_from_working(w));
    }
    if (N == 2) {
        model.omega = Eigen::MatrixXd::Zero(2, 2);
        model.omega(0, 1) = model.omega(1, 0) = 1.0;
    } else {
        model.omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                            static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < N; ++i) {
            const auto p = detail::softmax_with_ref(
                theta.data() + lay.omega_offset + i * lay.omega_row_size, lay.omega_row_size);
            std::size_t k = 0;
            for (std::size_t j = 0; j < N; ++j)
                if (j != i)
                    model.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[k++];
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < model.emissions[i].size(); ++c) {
            std::vector<double> w(lay.emission_size[i][c]);
            for (std::size_t k = 0; k < w.size(); ++k)
                w[k] = theta(static_cast<Eigen::Index>(lay.emission_offset[i][c] + k));
            model.emissions[i][c] = emission_from_working(skeleton.emissions[i][c], w);
        }
    if (lay.entry_size > 0) {
        const auto p = detail::softmax_with_ref(theta.data() + lay.entry_offset, lay.entry_size);
        Eigen::VectorXd sp(static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < N; ++i) sp(static_cast<Eigen::Index>(i)) = p[i];
        model.init_policy = InitPolicy::UserSupplied;
        model.user_delta = fresh_entry_delta(model, sp);
    }
    return model;
}

// Penalised negative log-likelihood as a function of the packed working
// parameters; the seam used by the optimizer, effective-df computation and
// cross-validation.
class PackedObjective {
public:
    PackedObjective(HsmmModel skeleton, PenaltyConfig penalty, const Dataset& data,
                    LikelihoodConvention conv = LikelihoodConvention::GammaFirst,
                    bool estimate_entry = false)
        : skeleton_(std::move(skeleton)),
          penalty_(std::move(penalty)),
          data_(&data),
          conv_(conv),
          layout_(make_layout(skeleton_, estimate_entry)) {}

    const ParameterLayout& layout() const { return layout_; }
    const HsmmModel& skeleton() const { return skeleton_; }
    const PenaltyConfig& penalty_config() const { return penalty_; }
    LikelihoodConvention convention() const { return conv_; }
    std::size_t n_evals() const { return n_evals_; }

    HsmmModel model_at(const Eigen::VectorXd& theta) const {
        return unpack(theta, skeleton_, layout_);
    }

    // unpenalised log-likelihood
    double loglik(const Eigen::VectorXd& theta) const {
        ++n_evals_;
        try {
            const HsmmModel m = model_at(theta);
            return forward_loglik(expand(m), m.emissions, *data_, conv_).value;
        } catch (const std::exception&) {
            return -std::numeric_limits<double>::infinity();
        }
    }

    // negative penalised log-likelihood (minimized)
    double operator()(const Eigen::VectorXd& theta) const {
        ++n_evals_;
        try {
            const HsmmModel m = model_at(theta);
            const LogLik ll = forward_loglik(expand(m), m.emissions, *data_, conv_);
            if (!ll.defined()) return std::numeric_limits<double>::infinity();
            return -(ll.value - penalty_value(m.dwell, penalty_));
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    // central finite differences, step h = cbrt(eps) * max(1, |theta_k|)
    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
        const double base = std::cbrt(std::numeric_limits<double>::epsilon());
        Eigen::VectorXd g(theta.size());
        Eigen::VectorXd x = theta;
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            const double h = base * std::max(1.0, std::abs(theta(k)));
            x(k) = theta(k) + h;
            const double fp = (*this)(x);
            x(k) = theta(k) - h;
            const double fm = (*this)(x);
            x(k) = theta(k);
            g(k) = (fp - fm) / (2.0 * h);
        }
        return g;
    }

    // Analytic Hessian of the penalty term with respect to the working
    // parameters (chain rule through the multinomial-logit map).
    Eigen::MatrixXd penalty_hessian_working(const Eigen::VectorXd& theta) const {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(theta.size(), theta.size());
        const HsmmModel m = model_at(theta);
        for (std::size_t i = 0; i < layout_.n_states; ++i) {
            const std::size_t R = layout_.dwell_size[i];
            if (penalty_.lambda[i] == 0.0 || penalty_.order >= R) continue;
            const Eigen::MatrixXd D = difference_matrix(R, penalty_.order);
            const Eigen::MatrixXd Hpi = 2.0 * penalty_.lambda[i] * D.transpose() * D;
            const auto RI = static_cast<Eigen::Index>(R);
            Eigen::VectorXd pi(RI);
            for (Eigen::Index r = 0; r < RI; ++r) pi(r) = m.dwell[i].unstructured()[r];
            const Eigen::VectorXd gpi = Hpi * pi;
            // Jacobian of pi w.r.t. eta
            Eigen::MatrixXd J(RI, RI);
            for (Eigen::Index k = 0; k < RI; ++k)
                for (Eigen::Index a = 0; a < RI; ++a)
                    J(k, a) = pi(k) * ((k == a ? 1.0 : 0.0) - pi(a));
            Eigen::MatrixXd Heta = J.transpose() * Hpi * J;
            // curvature term: sum_k gpi_k * d2 pi_k / d eta d eta
            for (Eigen::Index a = 0; a < RI; ++a)
                for (Eigen::Index b = 0; b < RI; ++b) {
                    double s = 0.0;
                    for (Eigen::Index k = 0; k < RI; ++k) {
                        const double dka = (k == a ? 1.0 : 0.0) - pi(a);
                        const double dkb = (k == b ? 1.0 : 0.0) - pi(b);
                        const double dab = (a == b ? 1.0 : 0.0) - pi(b);
                        s += gpi(k) * (pi(k) * dkb * dka - pi(k) * pi(a) * dab);
                    }
                    Heta(a, b) += s;
                }
            const auto off = static_cast<Eigen::Index>(layout_.dwell_offset[i]);
            H.block(off, off, RI, RI) = Heta;
        }
        return H;
    }

    // Finite-difference Hessian of the unpenalised negative log-likelihood.
    Eigen::MatrixXd loglik_neg_hessian(const Eigen::VectorXd& theta) const {
        auto f = [this](const Eigen::VectorXd& x) { return -loglik(x); };
        const Eigen::Index p = theta.size();
        const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
        Eigen::VectorXd h(p);
        for (Eigen::Index k = 0; k < p; ++k) h(k) = base * std::max(1.0, std::abs(theta(k)));
        const double f0 = f(theta);
        Eigen::MatrixXd H(p, p);
        Eigen::VectorXd x = theta;
        std::vector<double> fp(p), fm(p);
        for (Eigen::Index k = 0; k < p; ++k) {
            x(k) = theta(k) + h(k); fp[k] = f(x);
            x(k) = theta(k) - h(k); fm[k] = f(x);
            x(k) = theta(k);
            H(k, k) = (fp[k] - 2.0 * f0 + fm[k]) / (h(k) * h(k));
        }
        for (Eigen::Index k = 0; k < p; ++k)
            for (Eigen::Index l = k + 1; l < p; ++l) {
                x(k) = theta(k) + h(k); x(l) = theta(l) + h(l); const double fpp = f(x);
                x(l) = theta(l) - h(l); const double fpm = f(x);
                x(k) = theta(k) - h(k); const double fmm = f(x);
                x(l) = theta(l) + h(l); const double fmp = f(x);
                x(k) = theta(k); x(l) = theta(l);
                H(k, l) = H(l, k) = (fpp - fpm - fmp + fmm) / (4.0 * h(k) * h(l));
            }
        return H;
    }

private:
    HsmmModel skeleton_;
    PenaltyConfig penalty_;
    const Dataset* data_;
    LikelihoodConvention conv_;
    ParameterLayout layout_;
    mutable std::size_t n_evals_ = 0;
};

struct FitOptions {
    std::size_t n_starts = 10;
    std::size_t max_iter = 300;
    double rel_tol = 1e-8;
    double grad_tol = 1e-4;
    double jitter = 0.2;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool estimate_entry = false;
    bool canonical_order = true;
    LikelihoodConvention convention = LikelihoodConvention::GammaFirst;
    // optional warm start; when set, replaces the derived initial point for start 0
    std::vector<double> warm_start;
};

struct StartSummary {
    double objective = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t iterations = 0;
};

struct FitResult {
    Eigen::VectorXd theta_hat;
    ParameterLayout layout;
    HsmmModel model_hat;
    double loglik = 0.0;
    double penalised_loglik = 0.0;
    std::size_t n_params = 0;
    bool converged = false;
    std::size_t n_evals = 0;
    std::vector<StartSummary> starts;
};

namespace detail {

struct BfgsOutcome {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t iterations = 0;
};

template <typename F, typename G>
inline BfgsOutcome bfgs_minimize(F&& f, G&& grad, Eigen::VectorXd x, std::size_t max_iter,
                                 double rel_tol, double grad_tol) {
    const Eigen::Index p = x.size();
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(p, p);
    BfgsOutcome out;
    double fx = f(x);
    if (!std::isfinite(fx)) { out.x = x; out.f = fx; return out; }
    Eigen::VectorXd g = grad(x);

    for (std::size_t it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        Eigen::VectorXd d = -(Hinv * g);
        double slope = g.dot(d);
        if (!(slope < 0.0)) {  // reset on loss of descent
            Hinv.setIdentity();
            d = -g;
            slope = g.dot(d);
            if (!(slope < 0.0)) break;
        }
        // backtracking Armijo line search
        double step = 1.0;
        double fnew = std::numeric_limits<double>::infinity();
        Eigen::VectorXd xnew;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            xnew = x + step * d;
            fnew = f(xnew);
            if (std::isfinite(fnew) && fnew <= fx + 1e-4 * step * slope) { ok = true; break; }
            step *= 0.5;
        }
        if (!ok) break;

        Eigen::VectorXd gnew = grad(xnew);
        const Eigen::VectorXd s = xnew - x;
        const Eigen::VectorXd y = gnew - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
            Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }
        const double rel_change = std::abs(fx - fnew) / (std::abs(fx) + 1.0);
        x = xnew;
        fx = fnew;
        g = gnew;
        if (rel_change < rel_tol && g.lpNorm<Eigen::Infinity>() < grad_tol) {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    out.f = fx;
    return out;
}

}  // namespace detail

// Data-driven starting point: per-state quantile splits for the emission
// parameters, geometric dwell with mean sojourn T/(10N), uniform omega.
inline Eigen::VectorXd initialize(const Dataset& data, const HsmmModel& skeleton,
                                  const ParameterLayout& lay, std::uint64_t seed,
                                  double jitter = 0.0) {
    const std::size_t N = skeleton.n_states();
    HsmmModel init = skeleton;

    const double mean_dwell =
        std::max(2.0, static_cast<double>(data.length()) / (10.0 * static_cast<double>(N)));
    const double gamma = std::clamp(1.0 - 1.0 / mean_dwell, 0.05, 0.95);
    init.dwell.clear();
    for (std::size_t i = 0; i < N; ++i)
        init.dwell.push_back(geometric_dwell(gamma, skeleton.dwell[i].start_length()));

    init.omega = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (i != j)
                init.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    1.0 / static_cast<double>(N - 1);

    for (std::size_t c = 0; c < skeleton.n_channels(); ++c) {
        std::vector<double> vals;
        for (const auto& rec : data.records)
            if (rec[c]) vals.push_back(*rec[c]);
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t lo = vals.size() * i / N;
            const std::size_t hi = std::max(lo + 1, vals.size() * (i + 1) / N);
            double sum = 0.0, sq = 0.0, zeros = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                sum += vals[k];
                sq += vals[k] * vals[k];
                if (vals[k] == 0.0) zeros += 1.0;
            }
            const double n = static_cast<double>(hi - lo);
            const double mean = sum / n;
            const double var = std::max(1e-6, sq / n - mean * mean);
            auto& par = init.emissions[i][c];
            if (std::holds_alternative<ZeroInflatedGamma>(par)) {
                double pm = std::clamp(zeros / n, 1e-3, 0.5);
                double pos_sum = 0.0, pos_sq = 0.0, pos_n = 0.0;
                for (std::size_t k = lo; k < hi; ++k)
                    if (vals[k] > 0.0) { pos_sum += vals[k]; pos_sq += vals[k] * vals[k]; pos_n += 1.0; }
                const double pmean = pos_n > 0.0 ? pos_sum / pos_n : std::max(mean, 1e-3);
                const double pvar = pos_n > 1.0 ? std::max(1e-6, pos_sq / pos_n - pmean * pmean)
                                                : pmean * pmean;
                par = ZeroInflatedGamma{pm, std::max(pmean, 1e-6), std::sqrt(pvar)};
            } else if (std::holds_alternative<VonMises>(par)) {
                double cs = 0.0, sn = 0.0;
                for (std::size_t k = lo; k < hi; ++k) { cs += std::cos(vals[k]); sn += std::sin(vals[k]); }
                par = VonMises{std::atan2(sn, cs), 0.5 + static_cast<double>(i)};
            } else if (std::holds_alternative<Normal>(par)) {
                par = Normal{mean, std::sqrt(var)};
            } else {
                par = Poisson{std::max(mean, 1e-3)};
            }
        }
    }

    Eigen::VectorXd theta = pack(init, lay);
    if (jitter > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, jitter);
        for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) += noise(rng);
    }
    return theta;
}

namespace detail {

// Relabel states so emission locations of channel 0 ascend.
inline HsmmModel canonicalize(const HsmmModel& m) {
    const std::size_t N = m.n_states();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return emission_location(m.emissions[a][0]) < emission_location(m.emissions[b][0]);
    });
    HsmmModel out = m;
    for (std::size_t i = 0; i < N; ++i) {
        out.dwell[i] = m.dwell[order[i]];
        out.emissions[i] = m.emissions[order[i]];
        for (std::size_t j = 0; j < N; ++j)
            out.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                m.omega(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(order[j]));
    }
    if (out.init_policy == InitPolicy::UserSupplied) {
        Eigen::VectorXd nd(out.user_delta.size());
        std::vector<std::size_t> off_old(N), off_new(N);
        std::size_t p = 0;
        for (std::size_t i = 0; i < N; ++i) { off_old[i] = p; p += m.dwell[i].start_length(); }
        p = 0;
        for (std::size_t i = 0; i < N; ++i) { off_new[i] = p; p += out.dwell[i].start_length(); }
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t r = 0; r < out.dwell[i].start_length(); ++r)
                nd(static_cast<Eigen::Index>(off_new[i] + r)) =
                    m.user_delta(static_cast<Eigen::Index>(off_old[order[i]] + r));
        out.user_delta = nd;
    }
    return out;
}

}  // namespace detail

// Penalised maximum likelihood: best of n_starts jittered BFGS runs.
inline FitResult fit(const Dataset& data, const HsmmModel& skeleton, const PenaltyConfig& penalty,
                     const FitOptions& options = {}) {
    data.validate();
    skeleton.validate();
    PackedObjective obj(skeleton, penalty, data, options.convention, options.estimate_entry);
    const ParameterLayout& lay = obj.layout();
    if (data.length() <= lay.total)
        std::cerr << "phsmm: fewer observations than parameters; fit may be unstable\n";

    auto run_start = [&](std::size_t s) {
        Eigen::VectorXd x0;
        if (s == 0 && !options.warm_start.empty()) {
            if (options.warm_start.size() != lay.total)
                throw std::invalid_argument("fit: warm start has wrong dimension");
            x0 = Eigen::Map<const Eigen::VectorXd>(options.warm_start.data(),
                                                   static_cast<Eigen::Index>(lay.total));
        } else {
            x0 = initialize(data, skeleton, lay, options.seed + 1000 * s,
                            s == 0 ? 0.0 : options.jitter);
        }
        return detail::bfgs_minimize([&obj](const Eigen::VectorXd& x) { return obj(x); },
                                     [&obj](const Eigen::VectorXd& x) { return obj.gradient(x); },
                                     x0, options.max_iter, options.rel_tol, options.grad_tol);
    };

    std::vector<detail::BfgsOutcome> outcomes(options.n_starts);
    if (options.threads > 1) {
        std::vector<std::future<detail::BfgsOutcome>> futs;
        for (std::size_t s = 0; s < options.n_starts; ++s)
            futs.push_back(std::async(std::launch::async, run_start, s));
        for (std::size_t s = 0; s < options.n_starts; ++s) outcomes[s] = futs[s].get();
    } else {
        for (std::size_t s = 0; s < options.n_starts; ++s) outcomes[s] = run_start(s);
    }

    std::size_t best = options.n_starts;
    for (std::size_t s = 0; s < options.n_starts; ++s)
        if (std::isfinite(outcomes[s].f) &&
            (best == options.n_starts || outcomes[s].f < outcomes[best].f))
            best = s;
    if (best == options.n_starts)
        throw std::runtime_error("fit: all starts produced a degenerate objective");

    FitResult res;
    res.layout = lay;
    res.n_params = lay.total;
    res.n_evals = obj.n_evals();
    for (const auto& o : outcomes)
        res.starts.push_back({o.f, o.converged, o.iterations});
    res.converged = outcomes[best].converged;

    HsmmModel m = obj.model_at(outcomes[best].x);
    // relabeling permutes parameter blocks, so it needs homogeneous states
    bool homogeneous = true;
    for (std::size_t i = 1; i < lay.n_states; ++i)
        if (lay.dwell_size[i] != lay.dwell_size[0] ||
            m.emissions[i][0].index() != m.emissions[0][0].index())
            homogeneous = false;
    if (options.canonical_order && homogeneous) m = detail::canonicalize(m);
    res.model_hat = m;
    res.theta_hat = pack(m, lay);
    const LogLik ll = forward_loglik(expand(m), m.emissions, data, options.convention);
    res.loglik = ll.value;
    res.penalised_loglik = ll.value - penalty_value(m.dwell, penalty);
    return res;
}

}  // namespace phsmm

#endif
