#pragma once

// Comparison combiners (Bayesian model averaging and the equally weighted
// linear pool) and the score table normalised to a reference method.

#include <string>
#include <vector>

#include "mixbps/core.hpp"

namespace mixbps {

/// Finite mixture of forecast densities with non-negative weights.
struct MixtureForecast {
    std::vector<double> weights;
    std::vector<Density> components;

    double pdf(double y) const;
    double log_pdf(double y) const;
    double mean() const;
    double variance() const;
};

struct BMAState {
    std::vector<double> weights; ///< base model first

    static BMAState uniform(std::size_t n_models);
    void validate() const;
    MixtureForecast combine(const std::vector<Density>& forecasts) const;
};

/// w_j' proportional to w_j p_j(y), computed in log space. Throws if every
/// model assigns zero density to the outcome.
BMAState bma_update(const BMAState& state, const std::vector<double>& log_likelihoods);

/// The same update from density values rather than log densities.
BMAState bma_update_density(const BMAState& state, const std::vector<double>& densities_at_y);

/// Uniform mixture of the base and agent densities.
MixtureForecast equal_pool(const AgentPanel& panel);
MixtureForecast equal_pool(const std::vector<Density>& forecasts);

/// Point forecasts and log scores of one method over the scoring horizon.
struct MethodTrack {
    std::string name;
    std::vector<double> point;
    std::vector<double> log_score;
};

struct ScoreRow {
    std::string name;
    double rmse;
    double mean_log_score;
    double rmse_ratio;      ///< rmse / reference rmse
    double log_score_ratio; ///< mean log score / reference mean log score
};

/// Rows in input order, normalised to methods[reference].
std::vector<ScoreRow> score_table(const std::vector<MethodTrack>& methods, const std::vector<double>& outcomes,
                                  std::size_t reference = 0);

} // namespace mixbps
