#include "mixbps/gibbs.hpp"

#include <cmath>
#include <sstream>
#include <variant>

#include "mixbps/parallel.hpp"

namespace mixbps {

namespace {

std::string stall_message(const std::string& block, std::size_t proposals, double mean_acceptance) {
    std::ostringstream msg;
    msg << "rejection sampler for " << block << " stalled after " << proposals
        << " proposals (mean acceptance probability " << mean_acceptance << ")";
    return msg.str();
}

void check_probability(double p, const char* block) {
    if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << block << ": acceptance probability " << p << " outside [0,1]";
        throw Error(msg.str());
    }
}

Eigen::VectorXd agent_part(const Eigen::VectorXd& q) { return q.tail(q.size() - 1); }

// Draws proposals until `accept_prob` of one passes a uniform test.
template <class Propose, class Accept>
auto rejection_loop(const char* block, std::size_t max_proposals, Rng& rng, RejectionStats* stats,
                    Propose&& propose, Accept&& accept_prob) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    RejectionStats local;
    for (;;) {
        auto candidate = propose();
        const double p = accept_prob(candidate);
        check_probability(p, block);
        ++local.proposals;
        local.acceptance_sum += p;
        if (unif(rng) < p) {
            ++local.accepted;
            if (stats) stats->merge(local);
            return candidate;
        }
        if (local.proposals >= max_proposals) {
            if (stats) stats->merge(local);
            throw StallError(block, local.proposals, local.acceptance_sum / static_cast<double>(local.proposals));
        }
    }
}

} // namespace

StallError::StallError(const std::string& block, std::size_t proposals, double mean_acceptance)
    : Error(stall_message(block, proposals, mean_acceptance)), mean_acceptance_(mean_acceptance) {}

void RejectionStats::merge(const RejectionStats& other) {
    proposals += other.proposals;
    accepted += other.accepted;
    acceptance_sum += other.acceptance_sum;
}

void GibbsConfig::validate() const {
    if (!(n_iter > burn_in)) throw Error("GibbsConfig: need n_iter > burn_in");
    if (thin < 1) throw Error("GibbsConfig: thin must be at least 1");
    if (n_mc_z < 100) throw Error("GibbsConfig: n_mc_z must be at least 100");
    if (max_proposals < 1) throw Error("GibbsConfig: max_proposals must be positive");
}

Eigen::VectorXd StepTarget::mu(const Eigen::VectorXd& beta) const {
    return (beta.array() + f0).matrix();
}

Eigen::VectorXd GibbsDraws::z_frequencies(std::size_t n_agents) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_agents + 1));
    for (std::size_t v : z) f[static_cast<Eigen::Index>(v)] += 1.0;
    if (!z.empty()) f /= static_cast<double>(z.size());
    return f;
}

// ---------------------------------------------------------------------------
// Blocks

LatentAssignment sample_z(const StepTarget& target, const Eigen::VectorXd& q, const Eigen::VectorXd& beta,
                          const Eigen::MatrixXd& sigma, std::size_t n_mc_z, ZMarginal mode, Rng& rng) {
    const std::size_t n_agents = target.panel.size();
    const auto jn = static_cast<Eigen::Index>(n_agents);
    if (q.size() != jn + 1 || beta.size() != jn) throw Error("sample_z: dimension mismatch");
    const Eigen::VectorXd qa = agent_part(q);

    // Averages of alpha_j with x_j free (marginal) and with x_j = y + beta_j (pinned).
    Eigen::VectorXd marginal = Eigen::VectorXd::Ones(jn);
    Eigen::VectorXd pinned = Eigen::VectorXd::Ones(jn);
    if (target.tuning.shape != AgentWeightShape::constant) {
        if (n_mc_z < 1) throw Error("sample_z: need Monte Carlo draws");
        const AgentWeights weights(target.tuning, target.mu(beta), sigma);
        marginal.setZero();
        pinned.setZero();
        // Gaussian agents share one standard-normal stream; the rest draw directly.
        std::vector<const GaussianDensity*> gaussian(n_agents, nullptr);
        for (std::size_t j = 0; j < n_agents; ++j) {
            gaussian[j] = std::get_if<GaussianDensity>(&target.panel.agents[j]);
        }
        std::normal_distribution<double> normal;
        Eigen::VectorXd pinned_shift(jn);
        for (Eigen::Index j = 0; j < jn; ++j) pinned_shift[j] = target.y + beta[j] - weights.mu()[j];
        Eigen::VectorXd dev(jn), e(jn);
        for (std::size_t k = 0; k < n_mc_z; ++k) {
            for (Eigen::Index j = 0; j < jn; ++j) {
                const auto js = static_cast<std::size_t>(j);
                const double x = gaussian[js] ? gaussian[js]->mean() + gaussian[js]->sd() * normal(rng)
                                              : density_draw(target.panel.agents[js], rng);
                dev[j] = x - weights.mu()[j];
            }
            e.noalias() = weights.precision() * dev;
            for (Eigen::Index j = 0; j < jn; ++j) {
                const auto js = static_cast<std::size_t>(j);
                const double ej = e[j] * weights.delta(js);
                marginal[j] += weights.kernel(js, ej);
                pinned[j] += weights.kernel(js, pinned_shift[j] - (dev[j] - ej));
            }
        }
        marginal /= static_cast<double>(n_mc_z);
        pinned /= static_cast<double>(n_mc_z);
    }

    LatentAssignment out;
    out.probabilities.resize(jn + 1);
    out.probabilities[0] = std::max(0.0, 1.0 - qa.dot(marginal)) * target.panel.base.pdf(target.y);
    for (Eigen::Index j = 0; j < jn; ++j) {
        const double avg = mode == ZMarginal::conditional ? pinned[j] : marginal[j];
        out.probabilities[j + 1] =
            qa[j] * std::max(0.0, avg) *
            density_eval(target.panel.agents[static_cast<std::size_t>(j)], target.y + beta[j]);
    }
    const double total = out.probabilities.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        out.probabilities.setZero();
        out.probabilities[0] = 1.0;
        out.z = 0;
        out.fallback = true;
        return out;
    }
    out.probabilities /= total;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double cum = 0.0;
    out.z = n_agents;
    for (Eigen::Index j = 0; j <= jn; ++j) {
        cum += out.probabilities[j];
        if (u < cum) {
            out.z = static_cast<std::size_t>(j);
            break;
        }
    }
    return out;
}

Eigen::VectorXd sample_x(const StepTarget& target, std::size_t z, const Eigen::VectorXd& q,
                         const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma, Rng& rng,
                         std::size_t max_proposals, RejectionStats* stats) {
    const std::size_t n_agents = target.panel.size();
    const auto jn = static_cast<Eigen::Index>(n_agents);
    if (z > n_agents || q.size() != jn + 1 || beta.size() != jn) throw Error("sample_x: dimension mismatch");
    const AgentWeights weights(target.tuning, target.mu(beta), sigma);
    const Eigen::VectorXd qa = agent_part(q);

    auto propose = [&] {
        Eigen::VectorXd x(jn);
        for (Eigen::Index i = 0; i < jn; ++i) {
            x[i] = density_draw(target.panel.agents[static_cast<std::size_t>(i)], rng);
        }
        if (z > 0) x[static_cast<Eigen::Index>(z - 1)] = target.y + beta[static_cast<Eigen::Index>(z - 1)];
        return x;
    };
    auto accept = [&](const Eigen::VectorXd& x) {
        if (target.tuning.shape == AgentWeightShape::constant) return 1.0;
        return z > 0 ? weights.alpha(z - 1, x) : weights.alpha0(qa, x);
    };
    return rejection_loop("x", max_proposals, rng, stats, propose, accept);
}

NIWDraw sample_beta_sigma(const StepTarget& target, std::size_t z, const Eigen::VectorXd& q,
                          const Eigen::VectorXd& x, const NIWState& prior, Rng& rng,
                          std::size_t max_proposals, RejectionStats* stats, BetaSigmaUpdate mode) {
    const std::size_t n_agents = target.panel.size();
    if (z > n_agents || prior.size() != n_agents || static_cast<std::size_t>(x.size()) != n_agents) {
        throw Error("sample_beta_sigma: dimension mismatch");
    }
    const Eigen::VectorXd qa = agent_part(q);
    const bool blocked = mode == BetaSigmaUpdate::blocked && z > 0;
    const bool constant = target.tuning.shape == AgentWeightShape::constant;
    double h_max = 1.0;
    if (blocked) {
        const Density& h = target.panel.agents[z - 1];
        h_max = density_eval(h, density_location(h));
    }
    Eigen::VectorXd xs = x;
    auto propose = [&] { return sample_niw(prior, rng); };
    auto accept = [&](const NIWDraw& d) {
        double p = 1.0;
        if (blocked) {
            const auto ji = static_cast<Eigen::Index>(z - 1);
            xs[ji] = target.y + d.beta[ji];
            p = std::min(1.0, density_eval(target.panel.agents[z - 1], xs[ji]) / h_max);
        }
        // Constant weights give a constant factor, which leaves the target unchanged.
        if (constant) return p;
        const AgentWeights weights(target.tuning, target.mu(d.beta), d.sigma);
        return p * (z > 0 ? weights.alpha(z - 1, xs) : weights.alpha0(qa, xs));
    };
    return rejection_loop("(beta, Sigma)", max_proposals, rng, stats, propose, accept);
}

Eigen::VectorXd sample_q(const StepTarget& target, std::size_t z, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma, const DirichletState& prior,
                         Rng& rng, std::size_t max_proposals, RejectionStats* stats) {
    const std::size_t n_agents = target.panel.size();
    if (z > n_agents || static_cast<std::size_t>(prior.u.size()) != n_agents + 1) {
        throw Error("sample_q: dimension mismatch");
    }
    if (z > 0) {
        Eigen::VectorXd u = prior.u;
        u[static_cast<Eigen::Index>(z)] += 1.0;
        if (stats) stats->merge({1, 1, 1.0});
        return sample_dirichlet(u, rng);
    }
    Eigen::VectorXd alphas = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_agents));
    if (target.tuning.shape != AgentWeightShape::constant) {
        const AgentWeights weights(target.tuning, target.mu(beta), sigma);
        weights.alphas(x, alphas);
    }
    auto propose = [&] { return sample_dirichlet(prior.u, rng); };
    auto accept = [&](const Eigen::VectorXd& q) { return 1.0 - agent_part(q).dot(alphas); };
    return rejection_loop("q", max_proposals, rng, stats, propose, accept);
}

// ---------------------------------------------------------------------------
// Driver

namespace {

GibbsDraws run_chain(const StepTarget& target, const NIWState& niw_prior, const DirichletState& q_prior,
                     const GibbsConfig& cfg, Rng rng) {
    GibbsDraws out;
    const std::size_t kept = (cfg.n_iter - cfg.burn_in + cfg.thin - 1) / cfg.thin;
    out.z.reserve(kept);
    out.x.reserve(kept);
    out.beta.reserve(kept);
    out.sigma.reserve(kept);
    out.q.reserve(kept);
    out.sweep_trace.reserve(4 * cfg.n_iter);

    Eigen::VectorXd beta = niw_prior.b;
    Eigen::MatrixXd sigma = niw_prior.S;
    Eigen::VectorXd q = q_prior.mean();
    for (std::size_t s = 0; s < cfg.n_iter; ++s) {
        const LatentAssignment za = sample_z(target, q, beta, sigma, cfg.n_mc_z, cfg.z_marginal, rng);
        out.sweep_trace.push_back('z');
        if (za.fallback) ++out.z_fallbacks;
        const std::size_t z = za.z;

        Eigen::VectorXd x = sample_x(target, z, q, beta, sigma, rng, cfg.max_proposals, &out.x_stats);
        out.sweep_trace.push_back('x');

        NIWDraw bs = sample_beta_sigma(target, z, q, x, niw_prior, rng, cfg.max_proposals, &out.beta_sigma_stats,
                                       cfg.beta_sigma_update);
        if (cfg.beta_sigma_update == BetaSigmaUpdate::blocked && z > 0) {
            x[static_cast<Eigen::Index>(z - 1)] = target.y + bs.beta[static_cast<Eigen::Index>(z - 1)];
        }
        beta = std::move(bs.beta);
        sigma = std::move(bs.sigma);
        out.sweep_trace.push_back('b');

        q = sample_q(target, z, x, beta, sigma, q_prior, rng, cfg.max_proposals, &out.q_stats);
        out.sweep_trace.push_back('q');

        if (s >= cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0) {
            out.z.push_back(z);
            out.x.push_back(x);
            out.beta.push_back(beta);
            out.sigma.push_back(sigma);
            out.q.push_back(q);
        }
    }
    return out;
}

void check_inputs(const StepTarget& target, const NIWState& niw_prior, const DirichletState& q_prior,
                  const GibbsConfig& cfg) {
    cfg.validate();
    target.panel.validate();
    target.tuning.validate();
    niw_prior.validate();
    q_prior.validate();
    const std::size_t n_agents = target.panel.size();
    if (niw_prior.size() != n_agents || static_cast<std::size_t>(q_prior.u.size()) != n_agents + 1) {
        throw Error("run_gibbs: prior dimensions do not match the panel");
    }
    if (!std::isfinite(target.y) || !std::isfinite(target.f0)) throw Error("run_gibbs: non-finite y or f0");
}

} // namespace

GibbsDraws run_gibbs(const StepTarget& target, const NIWState& niw_prior, const DirichletState& q_prior,
                     const GibbsConfig& cfg) {
    check_inputs(target, niw_prior, q_prior, cfg);
    return run_chain(target, niw_prior, q_prior, cfg, make_rng(cfg.seed));
}

GibbsDraws run_gibbs_chains(const StepTarget& target, const NIWState& niw_prior, const DirichletState& q_prior,
                            const GibbsConfig& cfg, std::size_t n_chains) {
    check_inputs(target, niw_prior, q_prior, cfg);
    if (n_chains < 1) throw Error("run_gibbs_chains: need at least one chain");
    std::vector<GibbsDraws> chains(n_chains);
    parallel_for(n_chains, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            chains[c] = run_chain(target, niw_prior, q_prior, cfg, make_rng(cfg.seed, c));
        }
    });
    GibbsDraws out = std::move(chains.front());
    for (std::size_t c = 1; c < n_chains; ++c) {
        auto& ch = chains[c];
        out.z.insert(out.z.end(), ch.z.begin(), ch.z.end());
        out.x.insert(out.x.end(), ch.x.begin(), ch.x.end());
        out.beta.insert(out.beta.end(), ch.beta.begin(), ch.beta.end());
        out.sigma.insert(out.sigma.end(), ch.sigma.begin(), ch.sigma.end());
        out.q.insert(out.q.end(), ch.q.begin(), ch.q.end());
        out.x_stats.merge(ch.x_stats);
        out.beta_sigma_stats.merge(ch.beta_sigma_stats);
        out.q_stats.merge(ch.q_stats);
        out.z_fallbacks += ch.z_fallbacks;
        out.sweep_trace += ch.sweep_trace;
    }
    return out;
}

} // namespace mixbps
