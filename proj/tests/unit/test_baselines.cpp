#include <doctest.h>

#include <cmath>
#include <vector>

#include "mixbps/baselines.hpp"

using namespace mixbps;

TEST_CASE("BMA update is Bayes rule over models") {
    const BMAState prior{{0.5, 0.3, 0.2}};
    const std::vector<double> lik{0.1, 0.4, 0.25};
    const BMAState post = bma_update_density(prior, lik);
    double norm = 0.0;
    for (std::size_t i = 0; i < 3; ++i) norm += prior.weights[i] * lik[i];
    for (std::size_t i = 0; i < 3; ++i) CHECK(post.weights[i] == doctest::Approx(prior.weights[i] * lik[i] / norm).epsilon(1e-14));

    std::vector<double> ll;
    for (double v : lik) ll.push_back(std::log(v));
    const BMAState viaLog = bma_update(prior, ll);
    for (std::size_t i = 0; i < 3; ++i) CHECK(viaLog.weights[i] == doctest::Approx(post.weights[i]).epsilon(1e-14));
}

TEST_CASE("BMA update survives extreme log likelihoods") {
    const BMAState post = bma_update(BMAState::uniform(2), {-1000.0, -1001.0});
    CHECK(post.weights[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
    CHECK_THROWS_AS(bma_update(BMAState::uniform(2), {-INFINITY, -INFINITY}), Error);
    CHECK_THROWS_AS(bma_update_density(BMAState::uniform(2), {0.0, 0.0}), Error);
}

TEST_CASE("sequential BMA updates equal one batch update") {
    Rng rng = make_rng(1);
    std::uniform_real_distribution<double> u(-3.0, 0.0);
    BMAState seq = BMAState::uniform(4);
    std::vector<double> total(4, 0.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> ll(4);
        for (std::size_t i = 0; i < 4; ++i) {
            ll[i] = u(rng);
            total[i] += ll[i];
        }
        seq = bma_update(seq, ll);
    }
    const BMAState batch = bma_update(BMAState::uniform(4), total);
    for (std::size_t i = 0; i < 4; ++i) CHECK(seq.weights[i] == doctest::Approx(batch.weights[i]).epsilon(1e-10));
}

TEST_CASE("mixture moments match numerical integration") {
    const MixtureForecast m{{0.2, 0.5, 0.3},
                            {GaussianDensity(-1.0, 0.5), StudentTDensity(0.5, 0.8, 7.0), GaussianDensity(2.0, 1.5)}};
    const double mass = integrate([&](double y) { return m.pdf(y); }, -60.0, 60.0, 1e-12);
    const double mean = integrate([&](double y) { return y * m.pdf(y); }, -60.0, 60.0, 1e-11);
    const double second = integrate([&](double y) { return y * y * m.pdf(y); }, -200.0, 200.0, 1e-9);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.mean() == doctest::Approx(mean).epsilon(1e-9));
    CHECK(m.variance() == doctest::Approx(second - mean * mean).epsilon(1e-7));
    CHECK(m.log_pdf(0.3) == doctest::Approx(std::log(m.pdf(0.3))).epsilon(1e-14));
}

TEST_CASE("equal pool weights every density alike") {
    const AgentPanel panel{GaussianDensity(0.0, 1.0), {GaussianDensity(1.0, 2.0), GaussianDensity(-1.0, 0.5)}};
    const MixtureForecast p = equal_pool(panel);
    REQUIRE(p.weights.size() == 3);
    for (double w : p.weights) CHECK(w == doctest::Approx(1.0 / 3.0));
    const double y = 0.7;
    CHECK(p.pdf(y) == doctest::Approx((panel.base.pdf(y) + density_eval(panel.agents[0], y) +
                                       density_eval(panel.agents[1], y)) / 3.0));
    CHECK(BMAState::uniform(3).combine({panel.base, panel.agents[0], panel.agents[1]}).pdf(y) == doctest::Approx(p.pdf(y)));
}

TEST_CASE("score table is normalised to the reference") {
    const std::vector<double> y{1.0, 2.0, 3.0};
    const std::vector<MethodTrack> tracks{{"a", {1.0, 2.0, 4.0}, {-1.0, -1.5, -2.0}},
                                          {"b", {0.0, 2.0, 3.0}, {-2.0, -2.0, -2.0}}};
    const auto rows = score_table(tracks, y, 0);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].rmse == doctest::Approx(std::sqrt(1.0 / 3.0)));
    CHECK(rows[0].rmse_ratio == doctest::Approx(1.0));
    CHECK(rows[0].mean_log_score == doctest::Approx(-1.5));
    CHECK(rows[1].rmse_ratio == doctest::Approx(1.0));
    CHECK(rows[1].log_score_ratio == doctest::Approx(2.0 / 1.5));
    CHECK(rows[1].name == "b");
}

TEST_CASE("invalid BMA states are rejected") {
    CHECK_THROWS_AS((BMAState{{0.5, 0.6}}.validate()), Error);
    CHECK_THROWS_AS((BMAState{{-0.1, 1.1}}.validate()), Error);
    CHECK_THROWS_AS(bma_update(BMAState::uniform(2), {0.0}), Error);
}

TEST_CASE("BMA weights stay on the simplex") {
    Rng rng = make_rng(2);
    std::uniform_real_distribution<double> u(-40.0, 5.0);
    BMAState s = BMAState::uniform(5);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> ll(5);
        for (double& v : ll) v = u(rng);
        s = bma_update(s, ll);
        double total = 0.0;
        for (double w : s.weights) {
            CHECK(w >= 0.0);
            total += w;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("equal pool integrates to one") {
    const std::vector<Density> f{GaussianDensity(0.0, 1.0), StudentTDensity(1.0, 0.5, 4.0), GaussianDensity(-3.0, 0.1)};
    const MixtureForecast p = equal_pool(f);
    CHECK(integrate([&](double y) { return p.pdf(y); }, -400.0, 400.0, 1e-9) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mixture evaluation equals a hand-summed average") {
    Rng rng = make_rng(3);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    const std::vector<Density> f{GaussianDensity(0.5, 2.0), StudentTDensity(-1.0, 1.5, 6.0)};
    const MixtureForecast p = equal_pool(f);
    for (int i = 0; i < 100; ++i) {
        const double y = u(rng);
        CHECK(p.pdf(y) == doctest::Approx(0.5 * density_eval(f[0], y) + 0.5 * density_eval(f[1], y)).epsilon(1e-14));
    }
    const MixtureForecast same = equal_pool(std::vector<Density>{f[0], f[0]});
    CHECK(same.pdf(0.3) == doctest::Approx(density_eval(f[0], 0.3)));
    CHECK(same.mean() == doctest::Approx(0.5));
}

TEST_CASE("score ratios do not depend on the units of the series") {
    const std::vector<double> y{1.0, -0.5, 2.0, 0.3};
    const std::vector<MethodTrack> base{{"BPS", {0.8, -0.2, 1.5, 0.1}, {-1.0, -1.2, -0.9, -1.1}},
                                        {"BMA", {1.1, -0.9, 1.7, 0.6}, {-1.3, -1.0, -1.0, -1.4}}};
    std::vector<MethodTrack> scaled = base;
    std::vector<double> ys = y;
    for (double& v : ys) v *= 7.5;
    for (auto& m : scaled)
        for (double& v : m.point) v *= 7.5;
    const auto a = score_table(base, y), b = score_table(scaled, ys);
    CHECK(b[1].rmse == doctest::Approx(7.5 * a[1].rmse).epsilon(1e-12));
    CHECK(std::abs(b[1].rmse_ratio - a[1].rmse_ratio) < 1e-9);
    const auto self = score_table({base[0], base[0]}, y);
    CHECK(self[1].rmse_ratio == 1.0);
    CHECK(self[1].log_score_ratio == 1.0);
}
