#pragma once

// Sequential one-step-ahead synthesis: the NIW belief over (beta_t, Sigma_t)
// and the Dirichlet belief over q_t are discounted between steps, used to
// synthesize the forecast, and refitted to Gibbs output once y_t arrives.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixbps/agents.hpp"
#include "mixbps/baselines.hpp"
#include "mixbps/core.hpp"
#include "mixbps/gibbs.hpp"
#include "mixbps/multi_agent.hpp"
#include "mixbps/vb.hpp"

namespace mixbps {

struct FilterState {
    NIWState niw;
    DirichletState dir;
    double discount_sigma = 0.99;
    double discount_beta = 0.975;
    double discount_q = 0.99;
    BpsTuning tuning;

    void validate() const;
};

/// Time t-1 posterior to time t prior: n -> max(d_sigma n, J + 2),
/// c -> c / d_beta, u -> max(d_q u, 0.01) componentwise.
FilterState evolve(const FilterState& state);

/// Prior at the first synthesis step: b = 0, S with diagonal `base_variance`
/// and constant pairwise correlation, u = u0 everywhere.
FilterState initial_filter_state(std::size_t n_agents, double base_variance, double n0, double c0,
                                 double prior_correlation, double u0, const BpsTuning& tuning,
                                 double discount_sigma, double discount_beta, double discount_q);

struct SynthesisOptions {
    std::size_t n_param_draws = 200;
    std::size_t n_x_draws = 500;
    std::size_t grid_points = 201;
    double grid_sd = 8.0;
    /// Closed-form x integral when every agent is Gaussian, Monte Carlo otherwise.
    bool analytic_when_gaussian = true;
};

struct StepForecast {
    GriddedDensity density;
    double mean = 0.0;
    double variance = 0.0;
    double mean_se = 0.0; ///< Monte Carlo error of the mean over parameter draws
    std::vector<double> quantiles; ///< at forecast_probabilities()
    std::optional<double> pdf_at_outcome;
};

const std::vector<double>& forecast_probabilities();

/// Marginalises the conditional synthesis over (beta, Sigma, q) drawn from the
/// current beliefs, with mu = f0 + beta per draw. When `outcome` is set the
/// density there is evaluated with the same draws.
StepForecast synthesize_step(const FilterState& state, const AgentPanel& panel, double f0,
                             const SynthesisOptions& opts, std::uint64_t seed,
                             std::optional<double> outcome = std::nullopt);

struct ObserveResult {
    FilterState state;
    bool failed = false;
    std::string error;
    double x_acceptance = 1.0;
    double beta_sigma_acceptance = 1.0;
    double q_acceptance = 1.0;
    std::size_t z_fallbacks = 0;
    Eigen::VectorXd z_frequencies;
};

/// Gibbs sampling under the current beliefs followed by the NIW and Dirichlet
/// refits. A failure leaves the state unchanged and sets `failed`.
ObserveResult observe_step(const FilterState& state, const AgentPanel& panel, double f0, double y,
                           const GibbsConfig& gibbs);

enum class StepStatus { warmup, ok, failed };
std::string to_string(StepStatus s);

struct StepRecord {
    std::size_t t = 0;
    StepStatus status = StepStatus::warmup;
    double y = 0.0;
    std::string error;

    // Synthesized forecast.
    double mean = 0.0;
    double variance = 0.0;
    double mean_se = 0.0;
    std::vector<double> quantiles;
    double log_score = 0.0;
    GriddedDensity density; ///< kept only when requested

    // Model forecasts, base first: (mean, variance) and log score.
    std::vector<double> model_mean;
    std::vector<double> model_variance;
    std::vector<double> model_log_score;

    // Beliefs after observing y_t.
    Eigen::VectorXd b;
    double c = 0.0;
    double n = 0.0;
    Eigen::MatrixXd S;
    Eigen::MatrixXd correlations;
    Eigen::VectorXd u;
    Eigen::VectorXd q_mean;

    // Baselines.
    std::vector<double> bma_weights; ///< after updating with y_t
    double bma_mean = 0.0;
    double bma_log_score = 0.0;
    double pool_mean = 0.0;
    double pool_log_score = 0.0;

    // Gibbs diagnostics.
    double x_acceptance = 0.0;
    double beta_sigma_acceptance = 0.0;
    double q_acceptance = 0.0;
    Eigen::VectorXd z_frequencies;
};

struct FilterConfig {
    BpsTuning tuning;
    double n0 = 15.0;
    double c0 = 1.0;
    double prior_correlation = 0.5;
    double u0 = 1.0;
    double discount_sigma = 0.99;
    double discount_beta = 0.975;
    double discount_q = 0.99;
    std::size_t warmup = 10;
    bool student_t_agents = false;
    bool keep_grids = false;
    GibbsConfig gibbs;
    SynthesisOptions synthesis;
    std::uint64_t seed = 1;

    void validate() const;
};

struct FilterRun {
    std::vector<DLMSpec> specs;
    std::vector<StepRecord> records;
    std::vector<ScoreRow> scores; ///< BPS, BMA, POOL, then each model, over scored steps
};

/// Agents forecast, beliefs evolve, synthesize, observe, record. The first
/// `warmup` observations (at least until every model can forecast) only train
/// the agents and are recorded with warmup status.
FilterRun run_filter(const std::vector<double>& series, const std::vector<DLMSpec>& specs,
                     const FilterConfig& config);

} // namespace mixbps
