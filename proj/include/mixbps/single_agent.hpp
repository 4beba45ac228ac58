#pragma once

// One-agent mixture synthesis:
//   alpha(y|x) = (1 - q a(x)) pi_0(y) + q a(x) delta_{x - beta}(y)
// with m(x) = N(mu, sigma2) the decision maker's expectation of the agent's
// latent state and a(x) one of the weight shapes below.

#include <vector>

#include "mixbps/core.hpp"

namespace mixbps {

enum class WeightShape {
    consensus, ///< exp{-(x-mu)^2 / (2 r sigma2)}
    well,      ///< 1 - d exp{-(x-mu)^2 / (2 r sigma2)}
    constant,  ///< a(x) = 1, the r -> infinity limit of `consensus`
};

struct SingleAgentConfig {
    double q = 0.5;
    GaussianDensity base{0.0, 1.0};
    double mu = 0.0;
    double sigma2 = 1.0;
    double r = 1.0;
    double d = 0.0;
    double beta = 0.0;
    WeightShape shape = WeightShape::consensus;

    /// Throws Error unless 0 < q < 1, sigma2 > 0, r > 0 and 0 <= d <= 1.
    void validate() const;
    GaussianDensity expectation() const { return {mu, sigma2}; }
};

double alpha_x(const SingleAgentConfig& cfg, double x);

/// pi(y) = base_weight * pi_0(y) + agent_weight * p(y), with p(y) = a(y+beta) m(y+beta) / c.
struct SingleAgentPrior {
    double c;
    double agent_weight;
    double base_weight;
    GaussianDensity base;
    GaussianMixture p;

    double pdf(double y) const;
};

SingleAgentPrior prior_density(const SingleAgentConfig& cfg);

/// Closed-form update for a Gaussian agent density under the consensus or
/// constant weight shapes.
struct SingleAgentPosterior {
    double c_h;
    double agent_weight; ///< q c^H
    double base_weight;  ///< 1 - q c^H
    GaussianDensity base;
    GaussianDensity reweighted; ///< p(y|H), already shifted by -beta

    double pdf(double y) const;
};

SingleAgentPosterior posterior_update(const SingleAgentConfig& cfg, const Density& h);

/// Posterior tabulated on a grid, with c^H from adaptive quadrature. Handles
/// every weight shape and Student-t agents.
struct QuadraturePosterior {
    double c_h;
    double agent_weight;
    double base_weight;
    GriddedDensity density;
    std::vector<double> agent_part; ///< q a(y+beta) h(y+beta) on the grid
};

/// Grid covering mean +- half_width_sd * sd of the base and of the shifted agent density.
std::vector<double> single_agent_grid(const SingleAgentConfig& cfg, const Density& h,
                                      std::size_t points = 2001, double half_width_sd = 12.0);

QuadraturePosterior posterior_quadrature(const SingleAgentConfig& cfg, const Density& h,
                                         const std::vector<double>& grid,
                                         double abs_tol = 1e-10);

} // namespace mixbps
