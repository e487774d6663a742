#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "phsmm/fit.hpp"
#include "phsmm/simulate.hpp"

using namespace phsmm;

namespace {

// 2-state skeleton with 1 normal channel
HsmmModel skeleton_2s(std::size_t R) {
    HsmmModel m;
    m.dwell = {geometric_dwell(0.5, R), geometric_dwell(0.5, R)};
    m.omega = Eigen::MatrixXd::Zero(2, 2);
    m.omega(0, 1) = m.omega(1, 0) = 1.0;
    m.emissions = {{Normal{0.0, 1.0}}, {Normal{1.0, 1.0}}};
    return m;
}

}  // namespace

TEST_CASE("pack and unpack are exact inverses") {
    std::mt19937_64 rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        const auto m = testing::random_model(rng, 3, {3, 4, 2});
        const auto lay = make_layout(m);
        const Eigen::VectorXd theta = pack(m, lay);
        const auto back = unpack(theta, m, lay);
        const Eigen::VectorXd theta2 = pack(back, lay);
        CHECK_THAT((theta - theta2).lpNorm<Eigen::Infinity>(),
                   Catch::Matchers::WithinAbs(0.0, 1e-9));
        // natural-scale round trip
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t r = 0; r < m.dwell[i].start_length(); ++r)
                CHECK_THAT(back.dwell[i].unstructured()[r],
                           Catch::Matchers::WithinAbs(m.dwell[i].unstructured()[r], 1e-10));
            for (std::size_t j = 0; j < 3; ++j)
                CHECK_THAT(back.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                           Catch::Matchers::WithinAbs(
                               m.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                               1e-10));
        }
    }
}

TEST_CASE("layout covers every block exactly once") {
    std::mt19937_64 rng(72);
    const auto m = testing::random_model(rng, 3, {2, 5, 3});
    const auto lay = make_layout(m, true);
    // dwell 2+5+3, omega 3*(3-2)=3, emissions 3*2 (normal), entry 2
    CHECK(lay.total == 10 + 3 + 6 + 2);
    const auto lay2 = make_layout(m, false);
    CHECK(lay2.total == 19);
}

TEST_CASE("initialization") {
    std::mt19937_64 rng(73);
    const auto m = skeleton_2s(3);
    const auto sim = simulate(m, 400, 7);
    const auto lay = make_layout(m);
    SECTION("deterministic given seed") {
        const auto a = initialize(sim.observations, m, lay, 5, 0.2);
        const auto b = initialize(sim.observations, m, lay, 5, 0.2);
        CHECK((a.array() == b.array()).all());
        const auto c = initialize(sim.observations, m, lay, 6, 0.2);
        CHECK(!(a.array() == c.array()).all());
    }
    SECTION("produces a finite objective") {
        PackedObjective obj(m, PenaltyConfig({0.0, 0.0}, 1), sim.observations);
        const auto theta = initialize(sim.observations, m, lay, 5, 0.0);
        CHECK(std::isfinite(obj(theta)));
    }
    SECTION("quantile splits order the state means") {
        const auto theta = initialize(sim.observations, m, lay, 5, 0.0);
        const auto init = unpack(theta, m, lay);
        CHECK(emission_location(init.emissions[0][0]) < emission_location(init.emissions[1][0]));
    }
}

TEST_CASE("finite-difference gradient is consistent with the objective") {
    std::mt19937_64 rng(74);
    const auto m = skeleton_2s(3);
    const auto sim = simulate(m, 150, 11);
    PackedObjective obj(m, PenaltyConfig({2.0, 2.0}, 1), sim.observations);
    const auto lay = obj.layout();
    const Eigen::VectorXd theta = initialize(sim.observations, m, lay, 1, 0.1);
    const Eigen::VectorXd g = obj.gradient(theta);
    // directional derivative check
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::VectorXd dir(theta.size());
    for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = noise(rng);
    dir /= dir.norm();
    const double h = 1e-5;
    const double fd = (obj(theta + h * dir) - obj(theta - h * dir)) / (2.0 * h);
    CHECK_THAT(g.dot(dir), Catch::Matchers::WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
}

TEST_CASE("penalty hessian on the working scale matches finite differences") {
    std::mt19937_64 rng(75);
    const auto m = skeleton_2s(5);
    const auto sim = simulate(m, 50, 13);
    PackedObjective obj(m, PenaltyConfig({4.0, 9.0}, 2), sim.observations);
    const auto lay = obj.layout();
    const Eigen::VectorXd theta = initialize(sim.observations, m, lay, 2, 0.3);

    auto pen = [&](const Eigen::VectorXd& x) {
        const auto mod = obj.model_at(x);
        return penalty_value(mod.dwell, obj.penalty_config());
    };
    const Eigen::MatrixXd H = obj.penalty_hessian_working(theta);
    const double h = 1e-4;
    Eigen::VectorXd x = theta;
    for (Eigen::Index a = 0; a < 5; ++a)
        for (Eigen::Index b = 0; b < 5; ++b) {
            x = theta;
            x(a) += h; x(b) += h; const double fpp = pen(x);
            x(b) -= 2 * h; const double fpm = pen(x);
            x(a) -= 2 * h; const double fmm = pen(x);
            x(b) += 2 * h; const double fmp = pen(x);
            const double fd = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            CHECK_THAT(H(a, b), Catch::Matchers::WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
        }
}

TEST_CASE("fit recovers a well-separated two-state model") {
    HsmmModel truth;
    truth.dwell = {DwellTimeSpec({0.1, 0.3, 0.3}), DwellTimeSpec({0.5, 0.2, 0.1})};
    truth.omega = Eigen::MatrixXd::Zero(2, 2);
    truth.omega(0, 1) = truth.omega(1, 0) = 1.0;
    truth.emissions = {{Normal{-3.0, 1.0}}, {Normal{3.0, 1.0}}};
    const auto sim = simulate(truth, 5000, 17);

    FitOptions opt;
    opt.n_starts = 2;
    opt.seed = 3;
    const auto res = fit(sim.observations, skeleton_2s(3), PenaltyConfig({0.0, 0.0}, 1), opt);

    CHECK(res.converged);
    CHECK(res.penalised_loglik <= res.loglik + 1e-12);
    for (std::size_t i = 0; i < 2; ++i) {
        double tv = 0.0;
        for (std::size_t r = 1; r <= 60; ++r)
            tv += std::abs(dwell_pmf(res.model_hat.dwell[i], r) - dwell_pmf(truth.dwell[i], r));
        CHECK(tv / 2.0 < 0.05);
    }
    CHECK_THAT(std::get<Normal>(res.model_hat.emissions[0][0]).mean,
               Catch::Matchers::WithinAbs(-3.0, 0.15));
    CHECK_THAT(std::get<Normal>(res.model_hat.emissions[1][0]).mean,
               Catch::Matchers::WithinAbs(3.0, 0.15));

    SECTION("refitting from the optimum is stationary") {
        FitOptions warm = opt;
        warm.n_starts = 1;
        warm.warm_start.assign(res.theta_hat.data(), res.theta_hat.data() + res.theta_hat.size());
        const auto res2 =
            fit(sim.observations, skeleton_2s(3), PenaltyConfig({0.0, 0.0}, 1), warm);
        CHECK_THAT(res2.penalised_loglik,
                   Catch::Matchers::WithinAbs(res.penalised_loglik, 1e-6));
    }
}

TEST_CASE("large lambda with m = 1 flattens the unstructured start") {
    HsmmModel truth;
    truth.dwell = {DwellTimeSpec({0.05, 0.4, 0.3}), DwellTimeSpec({0.4, 0.3, 0.1})};
    truth.omega = Eigen::MatrixXd::Zero(2, 2);
    truth.omega(0, 1) = truth.omega(1, 0) = 1.0;
    truth.emissions = {{Normal{-3.0, 1.0}}, {Normal{3.0, 1.0}}};
    const auto sim = simulate(truth, 2000, 19);

    FitOptions opt;
    opt.n_starts = 1;
    opt.seed = 5;
    const auto res =
        fit(sim.observations, skeleton_2s(3), PenaltyConfig({1e6, 1e6}, 1), opt);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& pi = res.model_hat.dwell[i].unstructured();
        const double mean = (pi[0] + pi[1] + pi[2]) / 3.0;
        for (double p : pi) CHECK_THAT(p, Catch::Matchers::WithinAbs(mean, 1e-2));
    }
}

TEST_CASE("degenerate specs are reported") {
    // a dataset the model assigns zero density: zero steps without point mass
    HsmmModel skel;
    skel.dwell = {geometric_dwell(0.5, 2), geometric_dwell(0.5, 2)};
    skel.omega = Eigen::MatrixXd::Zero(2, 2);
    skel.omega(0, 1) = skel.omega(1, 0) = 1.0;
    skel.emissions = {{Poisson{1.0}}, {Poisson{2.0}}};
    Dataset bad;
    bad.channel_names = {"count"};
    for (int t = 0; t < 30; ++t) bad.records.push_back({-5.0});  // impossible counts
    FitOptions opt;
    opt.n_starts = 2;
    CHECK_THROWS(fit(bad, skel, PenaltyConfig({0.0, 0.0}, 1), opt));
}
