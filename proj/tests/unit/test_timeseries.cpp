#include <doctest.h>

#include <cmath>

#include "mixbps/fixtures.hpp"
#include "mixbps/timeseries.hpp"

using namespace mixbps;

namespace {

FilterState simple_state(AgentWeightShape shape = AgentWeightShape::well) {
    BpsTuning tuning = BpsTuning::from_r3(18.0337, 0.180337, 0.5);
    tuning.shape = shape;
    return initial_filter_state(2, 0.5, 15.0, 1.0, 0.5, 1.0, tuning, 0.99, 0.975, 0.99);
}

AgentPanel simple_panel() {
    return AgentPanel{GaussianDensity(0.0, 0.5), {GaussianDensity(0.3, 0.4), GaussianDensity(-0.2, 0.6)}};
}

FilterConfig quick_config() {
    FilterConfig cfg;
    cfg.tuning = BpsTuning::from_r3(18.0337, 0.180337, 0.5);
    cfg.gibbs.n_iter = 150;
    cfg.gibbs.burn_in = 50;
    cfg.gibbs.n_mc_z = 100;
    cfg.synthesis.n_param_draws = 20;
    cfg.synthesis.grid_points = 101;
    return cfg;
}

} // namespace

TEST_CASE("evolution discounts the beliefs") {
    FilterState s = simple_state();
    s.niw.n = 20.0;
    s.niw.c = 0.4;
    s.dir.u << 3.0, 0.005, 2.0;
    const FilterState e = evolve(s);
    CHECK(e.niw.n == doctest::Approx(0.99 * 20.0));
    CHECK(e.niw.c == doctest::Approx(0.4 / 0.975));
    CHECK(e.dir.u[0] == doctest::Approx(0.99 * 3.0));
    CHECK(e.dir.u[1] == 0.01);
    CHECK(e.niw.b == s.niw.b);
    CHECK(e.niw.S == s.niw.S);

    s.niw.n = 4.01;
    CHECK(evolve(s).niw.n == 4.0);
}

TEST_CASE("initial beliefs have the requested structure") {
    const FilterState s = simple_state();
    CHECK(s.niw.b.isZero());
    CHECK(s.niw.S(0, 0) == 0.5);
    CHECK(s.niw.S(0, 1) == doctest::Approx(0.25));
    CHECK(s.dir.u.size() == 3);
    CHECK_THROWS_AS(initial_filter_state(0, 1.0, 15.0, 1.0, 0.5, 1.0, BpsTuning{}, 0.99, 0.975, 0.99), Error);
    CHECK_THROWS_AS(initial_filter_state(2, 1.0, 15.0, 1.0, 0.5, 1.0, BpsTuning{}, 0.5, 0.975, 0.99), Error);
    CHECK_THROWS_AS(initial_filter_state(2, 1.0, 3.0, 1.0, 0.5, 1.0, BpsTuning{}, 0.99, 0.975, 0.99), Error);
}

TEST_CASE("constant weights with settled beliefs give the linear pool") {
    FilterState s = simple_state(AgentWeightShape::constant);
    s.niw.c = 1e-12;
    s.dir.u = Eigen::Vector3d(0.2, 0.5, 0.3) * 1e8;
    const AgentPanel panel = simple_panel();
    SynthesisOptions opts;
    opts.n_param_draws = 50;
    const StepForecast fc = synthesize_step(s, panel, 0.0, opts, 3, 0.1);
    for (std::size_t i = 0; i < fc.density.y.size(); i += 10) {
        const double y = fc.density.y[i];
        const double pool = 0.2 * panel.base.pdf(y) + 0.5 * density_eval(panel.agents[0], y) +
                            0.3 * density_eval(panel.agents[1], y);
        CHECK(fc.density.pdf[i] == doctest::Approx(pool).epsilon(1e-3).scale(1e-6));
    }
    CHECK(fc.mean == doctest::Approx(0.5 * 0.3 + 0.3 * -0.2).epsilon(1e-3));
}

TEST_CASE("synthesized forecast is a proper density with ordered quantiles") {
    const StepForecast fc = synthesize_step(simple_state(), simple_panel(), 0.0, SynthesisOptions{}, 5, 0.2);
    CHECK(fc.density.integral() == doctest::Approx(1.0).epsilon(2e-3));
    for (double p : fc.density.pdf) CHECK(p >= -1e-12);
    REQUIRE(fc.quantiles.size() == forecast_probabilities().size());
    for (std::size_t i = 1; i < fc.quantiles.size(); ++i) CHECK(fc.quantiles[i] > fc.quantiles[i - 1]);
    CHECK(fc.mean_se > 0.0);
    CHECK(fc.pdf_at_outcome.has_value());
}

TEST_CASE("outcome density reuses the grid draws") {
    const FilterState s = simple_state();
    SynthesisOptions opts;
    opts.n_param_draws = 30;
    const StepForecast grid = synthesize_step(s, simple_panel(), 0.0, opts, 8);
    const std::size_t i = grid.density.y.size() / 2 + 7;
    const StepForecast at = synthesize_step(s, simple_panel(), 0.0, opts, 8, grid.density.y[i]);
    CHECK(*at.pdf_at_outcome == doctest::Approx(grid.density.pdf[i]).epsilon(1e-12));
}

TEST_CASE("Monte Carlo and closed-form x integrals agree") {
    const FilterState s = simple_state();
    SynthesisOptions analytic;
    analytic.n_param_draws = 40;
    SynthesisOptions mc = analytic;
    mc.analytic_when_gaussian = false;
    mc.n_x_draws = 20000;
    const StepForecast a = synthesize_step(s, simple_panel(), 0.0, analytic, 9);
    const StepForecast m = synthesize_step(s, simple_panel(), 0.0, mc, 9);
    CHECK(m.mean == doctest::Approx(a.mean).epsilon(0.02).scale(0.05));
    CHECK(m.variance == doctest::Approx(a.variance).epsilon(0.03));
}

TEST_CASE("observation refits the beliefs, and a failed sampler leaves them alone") {
    const FilterState s = simple_state();
    GibbsConfig g;
    g.n_iter = 300;
    g.burn_in = 100;
    g.n_mc_z = 100;
    const ObserveResult ok = observe_step(s, simple_panel(), 0.0, 0.25, g);
    CHECK_FALSE(ok.failed);
    CHECK(ok.state.niw.n > 3.0);
    CHECK(ok.state.dir.mean().sum() == doctest::Approx(1.0));
    CHECK(ok.z_frequencies.sum() == doctest::Approx(1.0));
    CHECK(ok.state.discount_beta == s.discount_beta);

    g.max_proposals = 1;
    const ObserveResult bad = observe_step(s, simple_panel(), 0.0, 0.25, g);
    CHECK(bad.failed);
    CHECK_FALSE(bad.error.empty());
    CHECK(bad.state.niw.n == s.niw.n);
    CHECK(bad.state.dir.u == s.dir.u);
    CHECK_THROWS_AS(observe_step(s, simple_panel(), 0.0, std::nan(""), g), Error);
}

TEST_CASE("filter run records every step and scores against BPS") {
    const Fixture fx = make_fixture(FixtureKind::ar1, 1, 30);
    FilterConfig cfg = quick_config();
    cfg.keep_grids = true;
    const FilterRun run = run_filter(fx.series, fx.specs, cfg);
    REQUIRE(run.records.size() == 30);
    for (std::size_t t = 0; t < 30; ++t) {
        const StepRecord& r = run.records[t];
        CHECK(r.t == t);
        CHECK(r.y == fx.series[t]);
        if (t < cfg.warmup) {
            CHECK(r.status == StepStatus::warmup);
            continue;
        }
        CHECK(r.status == StepStatus::ok);
        CHECK(std::isfinite(r.log_score));
        CHECK(r.density.y.size() == 101);
        CHECK(r.model_mean.size() == 4);
        double w = 0.0;
        for (double v : r.bma_weights) w += v;
        CHECK(w == doctest::Approx(1.0));
        CHECK(r.q_mean.sum() == doctest::Approx(1.0));
        CHECK(r.n >= 5.0);
    }
    REQUIRE(run.scores.size() == 7);
    CHECK(run.scores[0].name == "BPS");
    CHECK(run.scores[0].rmse_ratio == 1.0);
    CHECK(run.scores[1].name == "BMA");
    CHECK(run.scores[2].name == "POOL");
    CHECK(run.scores[6].name == "linear_growth");
}

TEST_CASE("filter runs are reproducible for a fixed seed") {
    const Fixture fx = make_fixture(FixtureKind::biased_agents, 3, 20);
    FilterConfig cfg = quick_config();
    const FilterRun a = run_filter(fx.series, fx.specs, cfg);
    const FilterRun b = run_filter(fx.series, fx.specs, cfg);
    cfg.seed = 2;
    const FilterRun c = run_filter(fx.series, fx.specs, cfg);
    bool differs = false;
    for (std::size_t t = cfg.warmup; t < 20; ++t) {
        CHECK(a.records[t].mean == b.records[t].mean);
        CHECK(a.records[t].b == b.records[t].b);
        differs = differs || a.records[t].mean != c.records[t].mean;
    }
    CHECK(differs);
}

TEST_CASE("filter input checks") {
    FilterConfig cfg = quick_config();
    CHECK_THROWS_AS(run_filter(std::vector<double>(5, 0.0), default_model_specs(), cfg), Error);
    std::vector<double> y(20, 0.1);
    y[7] = std::nan("");
    CHECK_THROWS_AS(run_filter(y, default_model_specs(), cfg), Error);
    cfg.prior_correlation = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = quick_config();
    cfg.u0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(to_string(StepStatus::failed) == "failed");
}
