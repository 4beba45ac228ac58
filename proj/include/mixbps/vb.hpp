#pragma once

// Conjugate belief states over (beta, Sigma) and q, and their refits to
// posterior draws by Kullback-Leibler projection.
//
// Inverse Wishart convention: Sigma ~ IW(n, S) means Sigma^{-1} is Wishart
// with n + J - 1 degrees of freedom and scale matrix (n S)^{-1}, so that
// E[Sigma^{-1}] = S^{-1} (n + J - 1) / n and S is a point estimate of Sigma.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mixbps/core.hpp"

namespace mixbps {

double digamma(double x);
double trigamma(double x);

/// (beta | Sigma) ~ N(b, c Sigma), Sigma ~ IW(n, S).
struct NIWState {
    Eigen::VectorXd b;
    double c = 1.0;
    double n = 15.0;
    Eigen::MatrixXd S;

    std::size_t size() const { return static_cast<std::size_t>(b.size()); }
    /// c > 0, n > J + 1, S symmetric positive definite.
    void validate() const;
    /// Correlation matrix implied by S.
    Eigen::MatrixXd correlations() const;
};

struct DirichletState {
    Eigen::VectorXd u; ///< component 0 is the base weight q_0

    void validate() const;
    Eigen::VectorXd mean() const { return u / u.sum(); }
};

struct NIWDraw {
    Eigen::VectorXd beta;
    Eigen::MatrixXd sigma;
};

/// One draw by the Bartlett decomposition.
NIWDraw sample_niw(const NIWState& state, Rng& rng);
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& u, Rng& rng);

double niw_log_density(const NIWState& state, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma);
double dirichlet_log_density(const DirichletState& state, const Eigen::VectorXd& q);

/// Residual of the degrees-of-freedom equation at n for the sufficient
/// statistic k = E[log|Sigma|] + log|E[Sigma^{-1}]|.
double niw_dof_residual(double n, std::size_t dim, double k);

struct NIWFitReport {
    NIWState state;
    double dof_residual;
    int iterations;
};

/// Maximises the average NIW log density of paired draws. Needs >= 100
/// draws with SPD Sigma; throws on degenerate input or Newton failure.
NIWFitReport fit_niw_report(const std::vector<Eigen::VectorXd>& beta_draws,
                            const std::vector<Eigen::MatrixXd>& sigma_draws);
NIWState fit_niw(const std::vector<Eigen::VectorXd>& beta_draws,
                 const std::vector<Eigen::MatrixXd>& sigma_draws);

/// Solves psi(u_i) - psi(sum u) = mean log q_i by Newton's method.
DirichletState fit_dirichlet(const std::vector<Eigen::VectorXd>& q_draws);
/// max_i |psi(u_i) - psi(sum u) - mean log q_i|.
double dirichlet_moment_residual(const DirichletState& state, const std::vector<Eigen::VectorXd>& q_draws);

struct KLCheck {
    double objective;                ///< mean fitted log density of the draws
    std::vector<double> perturbed;   ///< the same average under perturbed parameters
    bool fitted_is_best;             ///< objective >= every perturbed value
};

/// Compares the fitted parameters with `n_perturb` random relative
/// perturbations of size up to `scale`.
KLCheck kl_objective_check(const NIWState& fit, const std::vector<Eigen::VectorXd>& beta_draws,
                           const std::vector<Eigen::MatrixXd>& sigma_draws, std::uint64_t seed,
                           std::size_t n_perturb = 20, double scale = 0.05);
KLCheck kl_objective_check(const DirichletState& fit, const std::vector<Eigen::VectorXd>& q_draws,
                           std::uint64_t seed, std::size_t n_perturb = 20, double scale = 0.05);

} // namespace mixbps
