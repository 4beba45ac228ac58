#pragma once

// Multi-agent mixture synthesis. Agent j's weight depends on its residual
// from the conditional expectation under m(x) = N(mu, Sigma),
//   e_j = x_j - mu_j - gamma_j'(x_{-j} - mu_{-j}),
//   alpha_j(x) = exp{-e_j^2/(2 r1 delta_j)} - d exp{-e_j^2/(2 r2 delta_j)},
// combining a consensus term (r1) with a herding well (r2, d).

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mixbps/core.hpp"

namespace mixbps {

enum class AgentWeightShape {
    well,     ///< consensus term minus herding well; d = 0 gives pure consensus
    constant, ///< alpha_j(x) = 1, the linear-pool reduction
};

struct BpsTuning {
    double r1 = 18.0337;
    double r2 = 0.178551;
    double d = 0.5;
    AgentWeightShape shape = AgentWeightShape::well;

    /// r1 > r2 > 0 and 0 <= d <= 1 (ignored for the constant shape).
    void validate() const;
    /// Tuning from the product-form parameter r3 = r1 r2 / (r1 - r2).
    static BpsTuning from_r3(double r1, double r3, double d);
};

double r2_from_r3(double r1, double r3);
double r3_from_r2(double r1, double r2);

struct SynthesisConfig {
    Eigen::VectorXd q;     ///< agent weights q_1..q_J
    Eigen::VectorXd mu;    ///< expected latent agent states
    Eigen::MatrixXd sigma; ///< expected dependence among latent states
    Eigen::VectorXd beta;  ///< agent biases; the point mass sits at x_j - beta_j
    BpsTuning tuning;

    std::size_t size() const { return static_cast<std::size_t>(q.size()); }
    /// Checks dimensions, Sigma SPD, tuning, q >= 0 and the conservative
    /// simplex bound sum_j q_j * max alpha <= 1.
    void validate() const;
};

struct ConditionalMoments {
    std::size_t j;
    Eigen::VectorXd gamma; ///< regression of x_j on x_{-j}
    double delta;          ///< conditional variance of x_j given x_{-j}
    double mu_j;
    Eigen::VectorXd mu_rest;

    double cond_mean(const Eigen::VectorXd& x_rest) const;
};

/// Conditioning by the Schur complement of Sigma_{-j,-j}. Throws for non-SPD Sigma.
ConditionalMoments conditional_moments(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu,
                                       std::size_t j);

Eigen::VectorXd drop_index(const Eigen::VectorXd& v, std::size_t j);

/// All J weight functions for one (mu, Sigma), evaluated through the
/// precision matrix: e_j = [P (x - mu)]_j / P_jj and delta_j = 1 / P_jj.
class AgentWeights {
public:
    AgentWeights(const BpsTuning& tuning, Eigen::VectorXd mu, const Eigen::MatrixXd& sigma);

    std::size_t size() const { return static_cast<std::size_t>(mu_.size()); }
    double delta(std::size_t j) const { return delta_[j]; }
    const Eigen::VectorXd& mu() const { return mu_; }
    const Eigen::MatrixXd& precision() const { return precision_; }
    const BpsTuning& tuning() const { return tuning_; }

    /// Weight as a function of agent j's conditional residual.
    double kernel(std::size_t j, double e) const {
        if (tuning_.shape == AgentWeightShape::constant) return 1.0;
        const double e2 = e * e;
        return std::exp(-e2 * inv_2r1d_[j]) - tuning_.d * std::exp(-e2 * inv_2r2d_[j]);
    }
    double residual(std::size_t j, const Eigen::VectorXd& x) const;
    /// Residual parts: e_j for every j, plus g_j = x_j - mu_j - e_j, the
    /// regression term that does not involve x_j itself.
    void residuals(const Eigen::VectorXd& x, Eigen::VectorXd& e, Eigen::VectorXd& g) const;

    double alpha(std::size_t j, const Eigen::VectorXd& x) const { return kernel(j, residual(j, x)); }
    void alphas(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
    /// 1 - sum_j q_j alpha_j(x).
    double alpha0(const Eigen::VectorXd& q, const Eigen::VectorXd& x) const;

private:
    BpsTuning tuning_;
    Eigen::VectorXd mu_;
    Eigen::MatrixXd precision_;
    std::vector<double> delta_;
    std::vector<double> inv_2r1d_;
    std::vector<double> inv_2r2d_;
};

double alpha_j(const SynthesisConfig& cfg, const Eigen::VectorXd& x, std::size_t j);
double alpha_0(const SynthesisConfig& cfg, const Eigen::VectorXd& x);

struct WellGeometry {
    bool bimodal;
    double offset;    ///< argmax at e = +-offset (0 when unimodal)
    double max_value; ///< maximum of alpha_j over e
};

/// Critical points of the weight as a function of e for conditional variance delta.
WellGeometry well_geometry(double r1, double r2, double d, double delta);

/// sup_x alpha_j(x); the same for every agent since it does not depend on delta.
double max_agent_weight(const BpsTuning& tuning);

enum class PosteriorMethod {
    monte_carlo, ///< average over draws x_{-j} ~ prod_{i != j} h_i
    analytic,    ///< Gaussian convolution; requires Gaussian agents
};

struct PosteriorOptions {
    std::size_t n_draws = 10000;
    std::uint64_t seed = 1;
    std::size_t grid_points = 2001;
    double grid_sd = 8.0;
    std::vector<double> grid; ///< overrides grid_points/grid_sd when non-empty
    PosteriorMethod method = PosteriorMethod::monte_carlo;
};

/// pi(y|H) = a_0 pi_0(y) + sum_j a_j(y) h_j(y + beta_j) on a grid.
///
/// a_j(y) = q_j E[alpha_j(y + beta_j, x_{-j})] over the other agents' densities,
/// and the base weight is the constant a_0 = 1 - sum_j q_j E_h[alpha_j(x)], so
/// the synthesized density carries unit mass. Standard errors are those of
/// the Monte Carlo averages (zero on the analytic path).
struct SynthesizedDensity {
    GriddedDensity density;
    std::vector<double> density_se;
    std::vector<std::vector<double>> a;
    std::vector<std::vector<double>> a_se;
    std::vector<std::vector<double>> agent_pdf; ///< h_j(y + beta_j)
    double a0 = 1.0;
    double a0_se = 0.0;

    /// Integral of a_j(y) h_j(y + beta_j) over the grid.
    double agent_mass(std::size_t j) const;
};

/// Union of mean +- grid_sd * sd over the base and the shifted agent densities.
std::vector<double> synthesis_grid(const AgentPanel& panel, const Eigen::VectorXd& beta,
                                   std::size_t points, double grid_sd);

SynthesizedDensity mc_posterior(const SynthesisConfig& cfg, const AgentPanel& panel,
                                const PosteriorOptions& opts);

/// Core of mc_posterior for an already-built weight kernel. `rng` is used
/// only on the Monte Carlo path.
SynthesizedDensity synthesize_on_grid(const AgentWeights& weights, const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& beta, const AgentPanel& panel,
                                      const std::vector<double>& grid, PosteriorMethod method,
                                      std::size_t n_draws, Rng& rng);

/// E_h[alpha_j(x)] in closed form for Gaussian agents.
double expected_alpha_gaussian(const AgentWeights& weights, std::size_t j,
                               const std::vector<GaussianDensity>& agents);

} // namespace mixbps
