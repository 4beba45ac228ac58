#include "mixbps/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixbps {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return make_rng(seed, stream)(); }

void check_discount(double d, const char* name) {
    if (!(d > 0.8 && d <= 1.0)) throw Error(std::string("discount ") + name + " must lie in (0.8, 1]");
}

bool all_gaussian(const AgentPanel& panel) {
    return std::all_of(panel.agents.begin(), panel.agents.end(), [](const Density& d) { return is_gaussian(d); });
}

} // namespace

void FilterState::validate() const {
    niw.validate();
    dir.validate();
    tuning.validate();
    check_discount(discount_sigma, "sigma");
    check_discount(discount_beta, "beta");
    check_discount(discount_q, "q");
    if (static_cast<std::size_t>(dir.u.size()) != niw.size() + 1) {
        throw Error("FilterState: Dirichlet needs one more component than the NIW dimension");
    }
}

FilterState evolve(const FilterState& state) {
    state.validate();
    FilterState out = state;
    const double floor_n = static_cast<double>(state.niw.size()) + 2.0;
    out.niw.n = std::max(state.discount_sigma * state.niw.n, floor_n);
    out.niw.c = state.niw.c / state.discount_beta;
    out.dir.u = (state.discount_q * state.dir.u).cwiseMax(0.01);
    return out;
}

FilterState initial_filter_state(std::size_t n_agents, double base_variance, double n0, double c0,
                                 double prior_correlation, double u0, const BpsTuning& tuning,
                                 double discount_sigma, double discount_beta, double discount_q) {
    if (n_agents < 1) throw Error("initial_filter_state: need at least one agent");
    if (!(base_variance > 0.0)) throw Error("initial_filter_state: base variance must be positive");
    const auto j = static_cast<Eigen::Index>(n_agents);
    FilterState s;
    s.niw.b = Eigen::VectorXd::Zero(j);
    s.niw.c = c0;
    s.niw.n = n0;
    s.niw.S = Eigen::MatrixXd::Constant(j, j, prior_correlation * base_variance);
    s.niw.S.diagonal().setConstant(base_variance);
    s.dir.u = Eigen::VectorXd::Constant(j + 1, u0);
    s.tuning = tuning;
    s.discount_sigma = discount_sigma;
    s.discount_beta = discount_beta;
    s.discount_q = discount_q;
    s.validate();
    return s;
}

const std::vector<double>& forecast_probabilities() {
    static const std::vector<double> p{0.05, 0.25, 0.5, 0.75, 0.95};
    return p;
}

StepForecast synthesize_step(const FilterState& state, const AgentPanel& panel, double f0,
                             const SynthesisOptions& opts, std::uint64_t seed, std::optional<double> outcome) {
    state.validate();
    panel.validate();
    const std::size_t n_agents = panel.size();
    if (state.niw.size() != n_agents) throw Error("synthesize_step: belief dimension differs from the panel");
    if (opts.n_param_draws < 1 || opts.grid_points < 3) throw Error("synthesize_step: bad synthesis options");
    const PosteriorMethod method = opts.analytic_when_gaussian && all_gaussian(panel)
                                       ? PosteriorMethod::analytic
                                       : PosteriorMethod::monte_carlo;

    double lo = panel.base.mean() - opts.grid_sd * panel.base.sd();
    double hi = panel.base.mean() + opts.grid_sd * panel.base.sd();
    for (std::size_t j = 0; j < n_agents; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        const double centre = density_location(panel.agents[j]) - state.niw.b[ji];
        const double spread = std::sqrt(std::pow(density_spread(panel.agents[j]), 2) +
                                        state.niw.c * state.niw.S(ji, ji));
        lo = std::min(lo, centre - opts.grid_sd * spread);
        hi = std::max(hi, centre + opts.grid_sd * spread);
    }
    const std::vector<double> grid = linspace(lo, hi, opts.grid_points);

    StepForecast out;
    out.density.y = grid;
    out.density.pdf.assign(grid.size(), 0.0);
    double at_outcome = 0.0;
    std::vector<double> draw_means;
    draw_means.reserve(opts.n_param_draws);

    Rng rng = make_rng(seed);
    const auto jn = static_cast<Eigen::Index>(n_agents);
    for (std::size_t k = 0; k < opts.n_param_draws; ++k) {
        const NIWDraw d = sample_niw(state.niw, rng);
        const Eigen::VectorXd q = sample_dirichlet(state.dir.u, rng);
        const Eigen::VectorXd qa = q.tail(jn);
        const AgentWeights weights(state.tuning, (d.beta.array() + f0).matrix(), d.sigma);

        Rng xr = make_rng(seed, k + 1);
        const SynthesizedDensity sd =
            synthesize_on_grid(weights, qa, d.beta, panel, grid, method, opts.n_x_draws, xr);
        for (std::size_t i = 0; i < grid.size(); ++i) out.density.pdf[i] += sd.density.pdf[i];
        draw_means.push_back(sd.density.mean());
        if (outcome) {
            Rng xr_again = make_rng(seed, k + 1);
            const SynthesizedDensity point =
                synthesize_on_grid(weights, qa, d.beta, panel, {*outcome}, method, opts.n_x_draws, xr_again);
            at_outcome += point.density.pdf[0];
        }
    }
    const double kd = static_cast<double>(opts.n_param_draws);
    for (double& v : out.density.pdf) v /= kd;
    out.mean = out.density.mean();
    out.variance = out.density.variance();
    for (double p : forecast_probabilities()) out.quantiles.push_back(out.density.quantile(p));
    if (opts.n_param_draws > 1) {
        double m = 0.0, s2 = 0.0;
        for (double v : draw_means) m += v;
        m /= kd;
        for (double v : draw_means) s2 += (v - m) * (v - m);
        out.mean_se = std::sqrt(s2 / (kd - 1.0) / kd);
    }
    if (outcome) out.pdf_at_outcome = at_outcome / kd;
    return out;
}

ObserveResult observe_step(const FilterState& state, const AgentPanel& panel, double f0, double y,
                           const GibbsConfig& gibbs) {
    if (!std::isfinite(y)) throw Error("observe_step: non-finite observation");
    ObserveResult out;
    out.state = state;
    out.z_frequencies = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(panel.size() + 1));
    try {
        const StepTarget target{panel, y, f0, state.tuning};
        const GibbsDraws draws = run_gibbs(target, state.niw, state.dir, gibbs);
        out.x_acceptance = draws.x_stats.rate();
        out.beta_sigma_acceptance = draws.beta_sigma_stats.rate();
        out.q_acceptance = draws.q_stats.rate();
        out.z_fallbacks = draws.z_fallbacks;
        out.z_frequencies = draws.z_frequencies(panel.size());
        FilterState next = state;
        next.niw = fit_niw(draws.beta, draws.sigma);
        next.dir = fit_dirichlet(draws.q);
        next.validate();
        out.state = std::move(next);
    } catch (const Error& e) {
        out.state = state;
        out.failed = true;
        out.error = e.what();
    }
    return out;
}

std::string to_string(StepStatus s) {
    switch (s) {
    case StepStatus::warmup:
        return "warmup";
    case StepStatus::ok:
        return "ok";
    case StepStatus::failed:
        return "failed";
    }
    return "unknown";
}

void FilterConfig::validate() const {
    tuning.validate();
    check_discount(discount_sigma, "sigma");
    check_discount(discount_beta, "beta");
    check_discount(discount_q, "q");
    if (!(c0 > 0.0) || !(u0 > 0.0)) throw Error("FilterConfig: c0 and u0 must be positive");
    if (!(prior_correlation > -1.0 && prior_correlation < 1.0)) {
        throw Error("FilterConfig: prior correlation must lie in (-1, 1)");
    }
    gibbs.validate();
}

namespace {

StepRecord warmup_record(std::size_t t, double y, std::size_t n_models, std::size_t n_agents) {
    StepRecord r;
    r.t = t;
    r.status = StepStatus::warmup;
    r.y = y;
    r.mean = r.variance = r.mean_se = r.log_score = kNaN;
    r.quantiles.assign(forecast_probabilities().size(), kNaN);
    r.model_mean.assign(n_models, kNaN);
    r.model_variance.assign(n_models, kNaN);
    r.model_log_score.assign(n_models, kNaN);
    const auto j = static_cast<Eigen::Index>(n_agents);
    r.b = Eigen::VectorXd::Constant(j, kNaN);
    r.c = r.n = kNaN;
    r.S = Eigen::MatrixXd::Constant(j, j, kNaN);
    r.correlations = Eigen::MatrixXd::Constant(j, j, kNaN);
    r.u = Eigen::VectorXd::Constant(j + 1, kNaN);
    r.q_mean = Eigen::VectorXd::Constant(j + 1, kNaN);
    r.bma_weights.assign(n_models, kNaN);
    r.bma_mean = r.bma_log_score = r.pool_mean = r.pool_log_score = kNaN;
    r.x_acceptance = r.beta_sigma_acceptance = r.q_acceptance = kNaN;
    r.z_frequencies = Eigen::VectorXd::Constant(j + 1, kNaN);
    return r;
}

} // namespace

FilterRun run_filter(const std::vector<double>& series, const std::vector<DLMSpec>& specs,
                     const FilterConfig& config) {
    config.validate();
    if (series.size() < 10) throw Error("run_filter: need at least 10 observations");
    for (double v : series) {
        if (!std::isfinite(v)) throw Error("run_filter: series contains non-finite values");
    }
    ModelBank bank(specs);
    const std::size_t n_models = specs.size();
    const std::size_t n_agents = bank.n_agents();

    FilterRun run;
    run.specs = specs;
    std::optional<FilterState> state;
    BMAState bma = BMAState::uniform(n_models);
    std::vector<MethodTrack> tracks(3 + n_models);
    tracks[0].name = "BPS";
    tracks[1].name = "BMA";
    tracks[2].name = "POOL";
    for (std::size_t i = 0; i < n_models; ++i) tracks[3 + i].name = specs[i].label();
    std::vector<double> outcomes;

    for (std::size_t t = 0; t < series.size(); ++t) {
        const double y = series[t];
        if (t < config.warmup || !bank.ready()) {
            run.records.push_back(warmup_record(t, y, n_models, n_agents));
            bank.observe(y);
            continue;
        }
        const PanelForecast pf = bank.panel(config.student_t_agents);
        if (!state) {
            state = initial_filter_state(n_agents, pf.panel.base.variance(), config.n0, config.c0,
                                         config.prior_correlation, config.u0, config.tuning,
                                         config.discount_sigma, config.discount_beta, config.discount_q);
        } else {
            state = evolve(*state);
        }

        StepRecord r;
        r.t = t;
        r.y = y;
        const StepForecast fc =
            synthesize_step(*state, pf.panel, pf.f0, config.synthesis, derive_seed(config.seed, 2 * t), y);
        r.mean = fc.mean;
        r.variance = fc.variance;
        r.mean_se = fc.mean_se;
        r.quantiles = fc.quantiles;
        r.log_score = *fc.pdf_at_outcome > 0.0 ? std::log(*fc.pdf_at_outcome)
                                               : -std::numeric_limits<double>::infinity();
        if (config.keep_grids) r.density = fc.density;

        std::vector<Density> models{pf.panel.base};
        models.insert(models.end(), pf.panel.agents.begin(), pf.panel.agents.end());
        std::vector<double> ll(n_models);
        for (std::size_t i = 0; i < n_models; ++i) {
            r.model_mean.push_back(density_location(models[i]));
            r.model_variance.push_back(density_variance(models[i]));
            ll[i] = log_score(models[i], y);
            r.model_log_score.push_back(ll[i]);
        }
        const MixtureForecast bma_fc = bma.combine(models);
        r.bma_mean = bma_fc.mean();
        r.bma_log_score = bma_fc.log_pdf(y);
        const MixtureForecast pool_fc = equal_pool(models);
        r.pool_mean = pool_fc.mean();
        r.pool_log_score = pool_fc.log_pdf(y);
        bma = bma_update(bma, ll);
        r.bma_weights = bma.weights;

        GibbsConfig gc = config.gibbs;
        gc.seed = derive_seed(config.seed, 2 * t + 1);
        const ObserveResult obs = observe_step(*state, pf.panel, pf.f0, y, gc);
        state = obs.state;
        r.status = obs.failed ? StepStatus::failed : StepStatus::ok;
        r.error = obs.error;
        r.x_acceptance = obs.x_acceptance;
        r.beta_sigma_acceptance = obs.beta_sigma_acceptance;
        r.q_acceptance = obs.q_acceptance;
        r.z_frequencies = obs.z_frequencies;
        r.b = state->niw.b;
        r.c = state->niw.c;
        r.n = state->niw.n;
        r.S = state->niw.S;
        r.correlations = state->niw.correlations();
        r.u = state->dir.u;
        r.q_mean = state->dir.mean();

        outcomes.push_back(y);
        tracks[0].point.push_back(r.mean);
        tracks[0].log_score.push_back(r.log_score);
        tracks[1].point.push_back(r.bma_mean);
        tracks[1].log_score.push_back(r.bma_log_score);
        tracks[2].point.push_back(r.pool_mean);
        tracks[2].log_score.push_back(r.pool_log_score);
        for (std::size_t i = 0; i < n_models; ++i) {
            tracks[3 + i].point.push_back(r.model_mean[i]);
            tracks[3 + i].log_score.push_back(r.model_log_score[i]);
        }
        run.records.push_back(std::move(r));
        bank.observe(y);
    }
    if (!outcomes.empty()) run.scores = score_table(tracks, outcomes, 0);
    return run;
}

} // namespace mixbps
