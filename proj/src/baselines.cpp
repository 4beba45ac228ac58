#include "mixbps/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mixbps {

double MixtureForecast::pdf(double y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) s += weights[i] * density_eval(components[i], y);
    return s;
}

double MixtureForecast::log_pdf(double y) const {
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        terms[i] = weights[i] > 0.0 ? std::log(weights[i]) + log_density(components[i], y)
                                    : -std::numeric_limits<double>::infinity();
        top = std::max(top, terms[i]);
    }
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - top);
    return top + std::log(s);
}

double MixtureForecast::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) s += weights[i] * density_location(components[i]);
    return s;
}

double MixtureForecast::variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        const double d = density_location(components[i]) - m;
        s += weights[i] * (density_variance(components[i]) + d * d);
    }
    return s;
}

BMAState BMAState::uniform(std::size_t n_models) {
    if (n_models == 0) throw Error("BMAState: need at least one model");
    return {std::vector<double>(n_models, 1.0 / static_cast<double>(n_models))};
}

void BMAState::validate() const {
    if (weights.empty()) throw Error("BMAState: empty");
    double s = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error("BMAState: negative weight");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error("BMAState: weights do not sum to one");
}

MixtureForecast BMAState::combine(const std::vector<Density>& forecasts) const {
    if (forecasts.size() != weights.size()) throw Error("BMAState: forecast count differs from weight count");
    return {weights, forecasts};
}

BMAState bma_update(const BMAState& state, const std::vector<double>& log_likelihoods) {
    state.validate();
    if (log_likelihoods.size() != state.weights.size()) throw Error("bma_update: size mismatch");
    std::vector<double> lw(state.weights.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lw.size(); ++i) {
        if (std::isnan(log_likelihoods[i])) throw Error("bma_update: NaN log likelihood");
        lw[i] = state.weights[i] > 0.0 ? std::log(state.weights[i]) + log_likelihoods[i]
                                       : -std::numeric_limits<double>::infinity();
        top = std::max(top, lw[i]);
    }
    if (!std::isfinite(top)) throw Error("bma_update: every model gives the outcome zero likelihood");
    BMAState out{std::vector<double>(lw.size())};
    double s = 0.0;
    for (std::size_t i = 0; i < lw.size(); ++i) {
        out.weights[i] = std::exp(lw[i] - top);
        s += out.weights[i];
    }
    for (double& w : out.weights) w /= s;
    return out;
}

BMAState bma_update_density(const BMAState& state, const std::vector<double>& densities_at_y) {
    std::vector<double> ll(densities_at_y.size());
    for (std::size_t i = 0; i < ll.size(); ++i) {
        if (!(densities_at_y[i] >= 0.0)) throw Error("bma_update: negative density value");
        ll[i] = densities_at_y[i] > 0.0 ? std::log(densities_at_y[i]) : -std::numeric_limits<double>::infinity();
    }
    return bma_update(state, ll);
}

MixtureForecast equal_pool(const std::vector<Density>& forecasts) {
    if (forecasts.empty()) throw Error("equal_pool: no densities");
    const double w = 1.0 / static_cast<double>(forecasts.size());
    return {std::vector<double>(forecasts.size(), w), forecasts};
}

MixtureForecast equal_pool(const AgentPanel& panel) {
    std::vector<Density> all{panel.base};
    all.insert(all.end(), panel.agents.begin(), panel.agents.end());
    return equal_pool(all);
}

std::vector<ScoreRow> score_table(const std::vector<MethodTrack>& methods, const std::vector<double>& outcomes,
                                  std::size_t reference) {
    if (methods.empty() || reference >= methods.size()) throw Error("score_table: bad reference method");
    std::vector<ScoreRow> rows;
    for (const auto& m : methods) {
        if (m.point.size() != outcomes.size() || m.log_score.size() != outcomes.size()) {
            throw Error("score_table: method " + m.name + " is not aligned with the outcomes");
        }
        const double mean_ls =
            outcomes.empty() ? 0.0
                             : std::accumulate(m.log_score.begin(), m.log_score.end(), 0.0) /
                                   static_cast<double>(outcomes.size());
        rows.push_back({m.name, rmse(m.point, outcomes), mean_ls, 0.0, 0.0});
    }
    const ScoreRow ref = rows[reference];
    for (auto& r : rows) {
        r.rmse_ratio = r.rmse / ref.rmse;
        r.log_score_ratio = r.mean_log_score / ref.mean_log_score;
    }
    return rows;
}

} // namespace mixbps
