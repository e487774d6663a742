#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "phsmm/inference.hpp"
#include "phsmm/simulate.hpp"

using namespace phsmm;

namespace {

// naive unscaled matrix-product likelihood in extended precision
double naive_loglik(const ExpandedHmm& hmm, const std::vector<std::vector<EmissionParams>>& em,
                    const Dataset& data, LikelihoodConvention conv) {
    const auto Nt = static_cast<Eigen::Index>(hmm.n_expanded());
    Eigen::Matrix<long double, Eigen::Dynamic, 1> phi = hmm.delta.cast<long double>();
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> G = hmm.tpm.cast<long double>();
    for (std::size_t t = 0; t < data.length(); ++t) {
        if (t > 0 || conv == LikelihoodConvention::GammaFirst)
            phi = (phi.transpose() * G).transpose();
        const Eigen::VectorXd d = phsmm::detail::density_vector(hmm, em, data.records[t]);
        for (Eigen::Index k = 0; k < Nt; ++k) phi(k) *= static_cast<long double>(d(k));
    }
    return static_cast<double>(std::log(phi.sum()));
}

Dataset make_random_data(std::mt19937_64& rng, std::size_t T, std::size_t channels = 1) {
    Dataset d;
    std::normal_distribution<double> noise(1.0, 2.0);
    for (std::size_t c = 0; c < channels; ++c) d.channel_names.push_back("ch" + std::to_string(c));
    for (std::size_t t = 0; t < T; ++t) {
        ObservationRecord rec(channels);
        for (auto& v : rec) v = noise(rng);
        d.records.push_back(rec);
    }
    return d;
}

}  // namespace

TEST_CASE("forward recursion equals the unscaled matrix product") {
    std::mt19937_64 rng(51);
    for (int rep = 0; rep < 20; ++rep) {
        const auto m = testing::random_model(rng, 2 + rep % 2, {2, 3, 2});
        const auto hmm = expand(m);
        const auto data = make_random_data(rng, 6);
        for (auto conv : {LikelihoodConvention::GammaFirst, LikelihoodConvention::DeltaFirst}) {
            const double scaled = forward_loglik(hmm, m.emissions, data, conv).value;
            const double naive = naive_loglik(hmm, m.emissions, data, conv);
            CHECK_THAT(scaled, Catch::Matchers::WithinRel(naive, 1e-10));
        }
    }
}

TEST_CASE("single observation closed form") {
    std::mt19937_64 rng(52);
    const auto m = testing::random_model(rng, 2, {2, 2});
    const auto hmm = expand(m);
    Dataset d;
    d.channel_names = {"y"};
    d.records = {{0.4}};
    double expected = 0.0;
    const Eigen::RowVectorXd start = hmm.delta.transpose() * hmm.tpm;
    for (Eigen::Index k = 0; k < start.size(); ++k)
        expected += start(k) *
                    emission_density(m.emissions[hmm.aggregate_of[static_cast<std::size_t>(k)]][0], 0.4);
    CHECK_THAT(forward_loglik(hmm, m.emissions, d).value,
               Catch::Matchers::WithinRel(std::log(expected), 1e-12));
}

TEST_CASE("all-missing data gives log-likelihood zero") {
    std::mt19937_64 rng(53);
    const auto m = testing::random_model(rng, 3, {2, 2, 3});
    const auto hmm = expand(m);
    Dataset d;
    d.channel_names = {"y"};
    for (int t = 0; t < 7; ++t) d.records.push_back({std::nullopt});
    for (auto conv : {LikelihoodConvention::GammaFirst, LikelihoodConvention::DeltaFirst})
        CHECK_THAT(forward_loglik(hmm, m.emissions, d, conv).value,
                   Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("impossible observation yields the minus-infinity marker") {
    HsmmModel m;
    m.dwell = {DwellTimeSpec({0.3, 0.3}), DwellTimeSpec({0.3, 0.3})};
    m.omega = Eigen::MatrixXd::Zero(2, 2);
    m.omega(0, 1) = m.omega(1, 0) = 1.0;
    m.emissions = {{ZeroInflatedGamma{0.0, 1.0, 1.0}}, {ZeroInflatedGamma{0.0, 2.0, 1.0}}};
    Dataset d;
    d.channel_names = {"step"};
    d.records = {{0.0}};  // zero step has density zero without a point mass
    const auto ll = forward_loglik(expand(m), m.emissions, d);
    CHECK_FALSE(ll.defined());
    CHECK(ll.value == -std::numeric_limits<double>::infinity());
}

TEST_CASE("permutation invariance of the likelihood") {
    std::mt19937_64 rng(54);
    const auto m = testing::random_model(rng, 3, {2, 3, 4});
    const auto data = make_random_data(rng, 40);
    // permute states (1 2 0)
    const std::vector<std::size_t> perm{1, 2, 0};
    HsmmModel mp;
    mp.omega = Eigen::MatrixXd::Zero(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        mp.dwell.push_back(m.dwell[perm[i]]);
        mp.emissions.push_back(m.emissions[perm[i]]);
        for (std::size_t j = 0; j < 3; ++j)
            mp.omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                m.omega(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
    }
    const double a = forward_loglik(expand(m), m.emissions, data).value;
    const double b = forward_loglik(expand(mp), mp.emissions, data).value;
    CHECK_THAT(a, Catch::Matchers::WithinAbs(b, 1e-12 * std::abs(a)));
}

TEST_CASE("penalised log-likelihood decomposition") {
    std::mt19937_64 rng(55);
    const auto m = testing::random_model(rng, 2, {3, 4});
    const auto data = make_random_data(rng, 30);
    SECTION("zero lambda equals the raw log-likelihood") {
        CHECK(penalised_loglik(m, PenaltyConfig({0.0, 0.0}, 1), data) ==
              forward_loglik(expand(m), m.emissions, data).value);
    }
    SECTION("components recomputed independently") {
        const PenaltyConfig cfg({3.0, 8.0}, 2);
        const double raw = forward_loglik(expand(m), m.emissions, data).value;
        const double pen = penalty_value(m.dwell, cfg);
        CHECK_THAT(penalised_loglik(m, cfg, data), Catch::Matchers::WithinAbs(raw - pen, 1e-10));
        CHECK(pen > 0.0);
    }
    SECTION("constant start with m = 1 leaves the likelihood untouched") {
        HsmmModel mc = m;
        mc.dwell = {DwellTimeSpec({0.2, 0.2, 0.2}), DwellTimeSpec({0.1, 0.1, 0.1, 0.1})};
        CHECK_THAT(penalised_loglik(mc, PenaltyConfig({100.0, 100.0}, 1), data),
                   Catch::Matchers::WithinAbs(
                       forward_loglik(expand(mc), mc.emissions, data).value, 1e-12));
    }
}

TEST_CASE("viterbi") {
    SECTION("matches exhaustive argmax on small instances") {
        std::mt19937_64 rng(56);
        for (int rep = 0; rep < 10; ++rep) {
            const auto m = testing::random_model(rng, 2, {2, 2});
            m.validate();
            const auto hmm = expand(m);
            const auto data = make_random_data(rng, 5);
            const auto path = viterbi(hmm, m.emissions, data);

            // brute force over expanded paths, start mass delta * Gamma
            const Eigen::RowVectorXd start = hmm.delta.transpose() * hmm.tpm;
            const std::size_t Nt = hmm.n_expanded();
            double best = -1.0;
            std::vector<std::size_t> best_path;
            std::vector<std::size_t> cur(data.length());
            auto rec = [&](auto&& self, std::size_t t, double w) -> void {
                if (t == data.length()) {
                    if (w > best) { best = w; best_path = cur; }
                    return;
                }
                for (std::size_t k = 0; k < Nt; ++k) {
                    const double trans =
                        t == 0 ? start(static_cast<Eigen::Index>(k))
                               : hmm.tpm(static_cast<Eigen::Index>(cur[t - 1]),
                                         static_cast<Eigen::Index>(k));
                    cur[t] = k;
                    const double d = joint_density(m.emissions[hmm.aggregate_of[k]], data.records[t]);
                    if (trans * d > 0.0) self(self, t + 1, w * trans * d);
                }
            };
            rec(rec, 0, 1.0);
            REQUIRE(best > 0.0);
            for (std::size_t t = 0; t < data.length(); ++t)
                CHECK(path[t] == hmm.aggregate_of[best_path[t]]);
        }
    }
    SECTION("well-separated emissions recover the simulated states") {
        HsmmModel m;
        m.dwell = {DwellTimeSpec({0.2, 0.3, 0.2}), DwellTimeSpec({0.4, 0.3})};
        m.omega = Eigen::MatrixXd::Zero(2, 2);
        m.omega(0, 1) = m.omega(1, 0) = 1.0;
        m.emissions = {{Normal{-100.0, 1.0}}, {Normal{100.0, 1.0}}};
        const auto sim = simulate(m, 2000, 99);
        const auto path = viterbi(expand(m), m.emissions, sim.observations);
        std::size_t agree = 0;
        for (std::size_t t = 0; t < sim.states.size(); ++t)
            if (path[t] == sim.states[t]) ++agree;
        CHECK(static_cast<double>(agree) / static_cast<double>(sim.states.size()) >= 0.99);
    }
}

TEST_CASE("state probabilities") {
    std::mt19937_64 rng(57);
    const auto m = testing::random_model(rng, 2, {2, 2});
    const auto hmm = expand(m);
    const auto data = make_random_data(rng, 5);
    const auto probs = state_probs(hmm, m.emissions, data);

    SECTION("rows sum to one") {
        for (Eigen::Index t = 0; t < probs.rows(); ++t)
            CHECK_THAT(probs.row(t).sum(), Catch::Matchers::WithinAbs(1.0, 1e-10));
    }
    SECTION("matches the enumeration posterior") {
        const Eigen::RowVectorXd start = hmm.delta.transpose() * hmm.tpm;
        const std::size_t Nt = hmm.n_expanded();
        Eigen::MatrixXd post = Eigen::MatrixXd::Zero(probs.rows(), 2);
        double total = 0.0;
        std::vector<std::size_t> cur(data.length());
        auto rec = [&](auto&& self, std::size_t t, double w) -> void {
            if (t == data.length()) {
                total += w;
                for (std::size_t s = 0; s < data.length(); ++s)
                    post(static_cast<Eigen::Index>(s),
                         static_cast<Eigen::Index>(hmm.aggregate_of[cur[s]])) += w;
                return;
            }
            for (std::size_t k = 0; k < Nt; ++k) {
                const double trans = t == 0 ? start(static_cast<Eigen::Index>(k))
                                            : hmm.tpm(static_cast<Eigen::Index>(cur[t - 1]),
                                                      static_cast<Eigen::Index>(k));
                cur[t] = k;
                const double d = joint_density(m.emissions[hmm.aggregate_of[k]], data.records[t]);
                if (trans * d > 0.0) self(self, t + 1, w * trans * d);
            }
        };
        rec(rec, 0, 1.0);
        post /= total;
        for (Eigen::Index t = 0; t < probs.rows(); ++t)
            for (Eigen::Index i = 0; i < 2; ++i)
                CHECK_THAT(probs(t, i), Catch::Matchers::WithinAbs(post(t, i), 1e-9));
    }
    SECTION("single observation closed form") {
        Dataset d1;
        d1.channel_names = data.channel_names;
        d1.records.assign(1, data.records[0]);
        const auto p1 = state_probs(hmm, m.emissions, d1);
        const Eigen::RowVectorXd start = hmm.delta.transpose() * hmm.tpm;
        Eigen::Vector2d expect = Eigen::Vector2d::Zero();
        for (std::size_t k = 0; k < hmm.n_expanded(); ++k)
            expect(static_cast<Eigen::Index>(hmm.aggregate_of[k])) +=
                start(static_cast<Eigen::Index>(k)) *
                joint_density(m.emissions[hmm.aggregate_of[k]], d1.records[0]);
        expect /= expect.sum();
        CHECK_THAT(p1(0, 0), Catch::Matchers::WithinAbs(expect(0), 1e-12));
        CHECK_THAT(p1(0, 1), Catch::Matchers::WithinAbs(expect(1), 1e-12));
    }
}

TEST_CASE("pseudo-residuals") {
    SECTION("single state-ish closed form at t = 1") {
        std::mt19937_64 rng(58);
        auto m = testing::random_model(rng, 2, {2, 2});
        m.init_policy = InitPolicy::UserSupplied;
        m.user_delta = Eigen::VectorXd::Zero(4);
        m.user_delta(0) = 1.0;
        const auto hmm = expand(m);
        Dataset d;
        d.channel_names = {"y"};
        d.records = {{0.7}};
        const auto res =
            pseudo_residuals(hmm, m.emissions, d, 0, 1, LikelihoodConvention::DeltaFirst);
        REQUIRE(res[0].has_value());
        const double u = emission_cdf(m.emissions[0][0], 0.7);
        const double z = *res[0];
        CHECK_THAT(phsmm::detail::normal_cdf(z), Catch::Matchers::WithinAbs(u, 1e-9));
    }
    SECTION("missing observations propagate the marker") {
        std::mt19937_64 rng(59);
        const auto m = testing::random_model(rng, 2, {2, 2});
        Dataset d;
        d.channel_names = {"y"};
        d.records = {{0.5}, {std::nullopt}, {1.5}};
        const auto res = pseudo_residuals(expand(m), m.emissions, d, 0, 1);
        CHECK(res[0].has_value());
        CHECK_FALSE(res[1].has_value());
        CHECK(res[2].has_value());
    }
    SECTION("von Mises channel rejected") {
        HsmmModel m;
        m.dwell = {DwellTimeSpec({0.3, 0.3}), DwellTimeSpec({0.3, 0.3})};
        m.omega = Eigen::MatrixXd::Zero(2, 2);
        m.omega(0, 1) = m.omega(1, 0) = 1.0;
        m.emissions = {{VonMises{0.0, 1.0}}, {VonMises{1.0, 2.0}}};
        Dataset d;
        d.channel_names = {"angle"};
        d.records = {{0.5}};
        CHECK_THROWS(pseudo_residuals(expand(m), m.emissions, d, 0, 1));
    }
}

TEST_CASE("scaling invariance over longer sequences") {
    std::mt19937_64 rng(60);
    const auto m = testing::random_model(rng, 2, {2, 2});
    const auto hmm = expand(m);
    const auto data = make_random_data(rng, 8);
    const double scaled = forward_loglik(hmm, m.emissions, data).value;
    const double naive = naive_loglik(hmm, m.emissions, data, LikelihoodConvention::GammaFirst);
    CHECK_THAT(scaled, Catch::Matchers::WithinRel(naive, 1e-10));
}
