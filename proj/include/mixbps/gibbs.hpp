#pragma once

// Latent-variable Gibbs sampler for (q, x, beta, Sigma, z | y) at a single
// time step. Each sweep refreshes z (x integrated out), then x, then
// (beta, Sigma), then q. The last three blocks use rejection sampling from
// the prior with the synthesis weights as acceptance probabilities.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixbps/core.hpp"
#include "mixbps/multi_agent.hpp"
#include "mixbps/vb.hpp"

namespace mixbps {

/// A rejection block gave up. Carries the running acceptance estimate.
class StallError : public Error {
public:
    StallError(const std::string& block, std::size_t proposals, double mean_acceptance);
    double mean_acceptance() const noexcept { return mean_acceptance_; }

private:
    double mean_acceptance_;
};

/// How P(z = j | q, y, beta, Sigma) integrates over x.
enum class ZMarginal {
    /// q_j h_j(y + beta_j) E[alpha_j(y + beta_j, x_{-j})]: the exact marginal
    /// of the joint density, with x_j pinned by the point mass.
    conditional,
    /// q_j E_h[alpha_j(x)] h_j(y + beta_j): the two factors averaged separately.
    factorized,
};

/// How the (beta, Sigma) block treats the point mass x_j - beta_j = y when z = j > 0.
enum class BetaSigmaUpdate {
    /// (beta, Sigma, x_j) move together with x_j = y + beta_j; acceptance
    /// alpha_j * h_j(y + beta_j) / max h_j.
    blocked,
    /// x held fixed; acceptance alpha_j alone.
    prior_rejection,
};

struct GibbsConfig {
    std::size_t n_iter = 2000;
    std::size_t burn_in = 500;
    std::size_t thin = 1;
    std::size_t n_mc_z = 1000;
    std::uint64_t seed = 1;
    std::size_t max_proposals = 1000000;
    ZMarginal z_marginal = ZMarginal::conditional;
    BetaSigmaUpdate beta_sigma_update = BetaSigmaUpdate::blocked;

    void validate() const;
};

/// Everything fixed within one time step.
struct StepTarget {
    AgentPanel panel;
    double y = 0.0;
    double f0 = 0.0; ///< base point forecast; mu = f0 + beta
    BpsTuning tuning;

    Eigen::VectorXd mu(const Eigen::VectorXd& beta) const;
};

struct LatentAssignment {
    std::size_t z = 0;             ///< 0 is the base component
    Eigen::VectorXd probabilities; ///< the (J+1) normalised probabilities it was drawn from
    bool fallback = false;         ///< every component had zero probability
};

struct RejectionStats {
    std::size_t proposals = 0;
    std::size_t accepted = 0;
    double acceptance_sum = 0.0; ///< sum of acceptance probabilities over proposals

    double rate() const { return proposals == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(proposals); }
    void merge(const RejectionStats& other);
};

/// q is the (J+1)-vector (q_0, q_1, ..., q_J) on the simplex.
LatentAssignment sample_z(const StepTarget& target, const Eigen::VectorXd& q, const Eigen::VectorXd& beta,
                          const Eigen::MatrixXd& sigma, std::size_t n_mc_z, ZMarginal mode, Rng& rng);

Eigen::VectorXd sample_x(const StepTarget& target, std::size_t z, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma, Rng& rng,
                         std::size_t max_proposals = 1000000, RejectionStats* stats = nullptr);

/// Under the blocked update the caller resets x_j = y + beta_j for z = j > 0.
NIWDraw sample_beta_sigma(const StepTarget& target, std::size_t z, const Eigen::VectorXd& q,
                          const Eigen::VectorXd& x, const NIWState& prior, Rng& rng,
                          std::size_t max_proposals = 1000000, RejectionStats* stats = nullptr,
                          BetaSigmaUpdate mode = BetaSigmaUpdate::blocked);

Eigen::VectorXd sample_q(const StepTarget& target, std::size_t z, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma, const DirichletState& prior,
                         Rng& rng, std::size_t max_proposals = 1000000, RejectionStats* stats = nullptr);

struct GibbsDraws {
    std::vector<std::size_t> z;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> beta;
    std::vector<Eigen::MatrixXd> sigma;
    std::vector<Eigen::VectorXd> q;

    RejectionStats x_stats;
    RejectionStats beta_sigma_stats;
    RejectionStats q_stats;
    std::size_t z_fallbacks = 0;
    /// One letter per block in execution order: z, x, b (beta/Sigma), q.
    std::string sweep_trace;

    std::size_t size() const { return z.size(); }
    /// Share of retained draws with z == j, for j = 0..J.
    Eigen::VectorXd z_frequencies(std::size_t n_agents) const;
};

GibbsDraws run_gibbs(const StepTarget& target, const NIWState& niw_prior, const DirichletState& q_prior,
                     const GibbsConfig& cfg);

/// Independent chains seeded from cfg.seed, run concurrently and pooled in chain order.
GibbsDraws run_gibbs_chains(const StepTarget& target, const NIWState& niw_prior, const DirichletState& q_prior,
                            const GibbsConfig& cfg, std::size_t n_chains);

} // namespace mixbps
