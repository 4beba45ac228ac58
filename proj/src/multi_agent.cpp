#include "mixbps/multi_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixbps/parallel.hpp"

namespace mixbps {

// ---------------------------------------------------------------------------
// Tuning

void BpsTuning::validate() const {
    if (shape == AgentWeightShape::constant) return;
    if (!(r2 > 0.0) || !(r1 > r2) || !std::isfinite(r1)) {
        throw Error("BpsTuning: need r1 > r2 > 0");
    }
    if (!(d >= 0.0 && d <= 1.0)) throw Error("BpsTuning: d must lie in [0,1]");
}

BpsTuning BpsTuning::from_r3(double r1, double r3, double d) {
    BpsTuning t;
    t.r1 = r1;
    t.r2 = r2_from_r3(r1, r3);
    t.d = d;
    t.validate();
    return t;
}

double r2_from_r3(double r1, double r3) {
    if (!(r1 > 0.0) || !(r3 > 0.0)) throw Error("r2_from_r3: r1 and r3 must be positive");
    return r1 * r3 / (r1 + r3);
}

double r3_from_r2(double r1, double r2) {
    if (!(r2 > 0.0) || !(r1 > r2)) throw Error("r3_from_r2: need r1 > r2 > 0");
    return r1 * r2 / (r1 - r2);
}

// ---------------------------------------------------------------------------
// Conditional moments

Eigen::VectorXd drop_index(const Eigen::VectorXd& v, std::size_t j) {
    const auto n = v.size();
    Eigen::VectorXd out(n - 1);
    for (Eigen::Index i = 0, k = 0; i < n; ++i) {
        if (static_cast<std::size_t>(i) != j) out[k++] = v[i];
    }
    return out;
}

double ConditionalMoments::cond_mean(const Eigen::VectorXd& x_rest) const {
    return mu_j + gamma.dot(x_rest - mu_rest);
}

namespace {

void require_spd(const Eigen::MatrixXd& sigma, const char* who) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
        throw Error(std::string(who) + ": Sigma must be square and non-empty");
    }
    if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw Error(std::string(who) + ": Sigma not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw Error(std::string(who) + ": Sigma not positive definite");
}

} // namespace

ConditionalMoments conditional_moments(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu,
                                       std::size_t j) {
    require_spd(sigma, "conditional_moments");
    const auto n = sigma.rows();
    if (mu.size() != n || j >= static_cast<std::size_t>(n)) {
        throw Error("conditional_moments: index or dimension mismatch");
    }
    ConditionalMoments cm;
    cm.j = j;
    cm.mu_j = mu[static_cast<Eigen::Index>(j)];
    cm.mu_rest = drop_index(mu, j);
    if (n == 1) {
        cm.gamma = Eigen::VectorXd(0);
        cm.delta = sigma(0, 0);
        return cm;
    }
    std::vector<Eigen::Index> rest;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(i) != j) rest.push_back(i);
    }
    const auto ji = static_cast<Eigen::Index>(j);
    Eigen::MatrixXd s_rr(n - 1, n - 1);
    Eigen::VectorXd s_rj(n - 1);
    for (Eigen::Index a = 0; a < n - 1; ++a) {
        s_rj[a] = sigma(rest[a], ji);
        for (Eigen::Index b = 0; b < n - 1; ++b) s_rr(a, b) = sigma(rest[a], rest[b]);
    }
    cm.gamma = s_rr.llt().solve(s_rj);
    cm.delta = sigma(ji, ji) - cm.gamma.dot(s_rj);
    if (!(cm.delta > 0.0)) throw Error("conditional_moments: non-positive conditional variance");
    return cm;
}

// ---------------------------------------------------------------------------
// AgentWeights

AgentWeights::AgentWeights(const BpsTuning& tuning, Eigen::VectorXd mu, const Eigen::MatrixXd& sigma)
    : tuning_(tuning), mu_(std::move(mu)) {
    tuning_.validate();
    if (sigma.rows() != mu_.size() || sigma.cols() != mu_.size()) {
        throw Error("AgentWeights: dimension mismatch between mu and Sigma");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw Error("AgentWeights: Sigma not positive definite");
    precision_ = llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
    precision_ = 0.5 * (precision_ + precision_.transpose());
    const auto n = static_cast<std::size_t>(mu_.size());
    delta_.resize(n);
    inv_2r1d_.resize(n);
    inv_2r2d_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        delta_[j] = 1.0 / precision_(ji, ji);
        inv_2r1d_[j] = 1.0 / (2.0 * tuning_.r1 * delta_[j]);
        inv_2r2d_[j] = 1.0 / (2.0 * tuning_.r2 * delta_[j]);
    }
}

double AgentWeights::residual(std::size_t j, const Eigen::VectorXd& x) const {
    const auto ji = static_cast<Eigen::Index>(j);
    return precision_.row(ji).dot(x - mu_) * delta_[j];
}

void AgentWeights::residuals(const Eigen::VectorXd& x, Eigen::VectorXd& e, Eigen::VectorXd& g) const {
    const Eigen::VectorXd dev = x - mu_;
    e.noalias() = precision_ * dev;
    g.resize(dev.size());
    for (Eigen::Index j = 0; j < dev.size(); ++j) {
        e[j] *= delta_[static_cast<std::size_t>(j)];
        g[j] = dev[j] - e[j];
    }
}

void AgentWeights::alphas(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    out.noalias() = precision_ * (x - mu_);
    for (Eigen::Index j = 0; j < out.size(); ++j) {
        const auto js = static_cast<std::size_t>(j);
        out[j] = kernel(js, out[j] * delta_[js]);
    }
}

double AgentWeights::alpha0(const Eigen::VectorXd& q, const Eigen::VectorXd& x) const {
    Eigen::VectorXd a;
    alphas(x, a);
    return 1.0 - q.dot(a);
}

// ---------------------------------------------------------------------------
// Config-level evaluation

void SynthesisConfig::validate() const {
    const auto n = q.size();
    if (n == 0) throw Error("SynthesisConfig: need at least one agent");
    if (mu.size() != n || beta.size() != n || sigma.rows() != n || sigma.cols() != n) {
        throw Error("SynthesisConfig: dimension mismatch");
    }
    require_spd(sigma, "SynthesisConfig");
    tuning.validate();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(q[j] >= 0.0)) throw Error("SynthesisConfig: q must be non-negative");
        if (!std::isfinite(mu[j]) || !std::isfinite(beta[j])) throw Error("SynthesisConfig: non-finite mu/beta");
    }
    if (q.sum() * max_agent_weight(tuning) > 1.0 + 1e-12) {
        throw Error("SynthesisConfig: sum_j q_j max alpha_j exceeds 1");
    }
}

double alpha_j(const SynthesisConfig& cfg, const Eigen::VectorXd& x, std::size_t j) {
    if (cfg.tuning.shape == AgentWeightShape::constant) return 1.0;
    const ConditionalMoments cm = conditional_moments(cfg.sigma, cfg.mu, j);
    const double e = x[static_cast<Eigen::Index>(j)] - cm.cond_mean(drop_index(x, j));
    const double e2 = e * e;
    return std::exp(-e2 / (2.0 * cfg.tuning.r1 * cm.delta)) -
           cfg.tuning.d * std::exp(-e2 / (2.0 * cfg.tuning.r2 * cm.delta));
}

double alpha_0(const SynthesisConfig& cfg, const Eigen::VectorXd& x) {
    double s = 0.0;
    for (std::size_t j = 0; j < cfg.size(); ++j) s += cfg.q[static_cast<Eigen::Index>(j)] * alpha_j(cfg, x, j);
    return 1.0 - s;
}

// ---------------------------------------------------------------------------
// Well geometry

WellGeometry well_geometry(double r1, double r2, double d, double delta) {
    if (!(r2 > 0.0) || !(r1 > r2) || !(d >= 0.0 && d <= 1.0) || !(delta > 0.0)) {
        throw Error("well_geometry: need r1 > r2 > 0, 0 <= d <= 1, delta > 0");
    }
    const double ratio = d * r1 / r2;
    if (!(ratio > 1.0)) return {false, 0.0, 1.0 - d};
    const double offset = std::sqrt(2.0 * r1 * r2 * delta / (r1 - r2) * std::log(ratio));
    const double max_value = std::pow(ratio, -r2 / (r1 - r2)) * (1.0 - r2 / r1);
    return {true, offset, max_value};
}

double max_agent_weight(const BpsTuning& tuning) {
    if (tuning.shape == AgentWeightShape::constant) return 1.0;
    return well_geometry(tuning.r1, tuning.r2, tuning.d, 1.0).max_value;
}

// ---------------------------------------------------------------------------
// Posterior on a grid

double SynthesizedDensity::agent_mass(std::size_t j) const {
    std::vector<double> f(density.y.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = a[j][i] * agent_pdf[j][i];
    return trapezoid(density.y, f);
}

std::vector<double> synthesis_grid(const AgentPanel& panel, const Eigen::VectorXd& beta,
                                   std::size_t points, double grid_sd) {
    double lo = panel.base.mean() - grid_sd * panel.base.sd();
    double hi = panel.base.mean() + grid_sd * panel.base.sd();
    for (std::size_t j = 0; j < panel.size(); ++j) {
        const double loc = density_location(panel.agents[j]) - beta[static_cast<Eigen::Index>(j)];
        const double sd = density_spread(panel.agents[j]);
        lo = std::min(lo, loc - grid_sd * sd);
        hi = std::max(hi, loc + grid_sd * sd);
    }
    return linspace(lo, hi, points);
}

namespace {

// Regression coefficients gamma_j (full length, zero at j) from the precision.
Eigen::VectorXd regression_row(const AgentWeights& w, std::size_t j) {
    const auto ji = static_cast<Eigen::Index>(j);
    Eigen::VectorXd gamma = -w.precision().row(ji).transpose() * w.delta(j);
    gamma[ji] = 0.0;
    return gamma;
}

// E over g ~ N(mg, tau2) of the weight kernel evaluated at a - g.
double smoothed_kernel(const AgentWeights& w, std::size_t j, double a, double mg, double tau2) {
    const BpsTuning& t = w.tuning();
    if (t.shape == AgentWeightShape::constant) return 1.0;
    const double dev = a - mg;
    const double v1 = t.r1 * w.delta(j);
    const double v2 = t.r2 * w.delta(j);
    return std::sqrt(v1 / (v1 + tau2)) * std::exp(-dev * dev / (2.0 * (v1 + tau2))) -
           t.d * std::sqrt(v2 / (v2 + tau2)) * std::exp(-dev * dev / (2.0 * (v2 + tau2)));
}

struct GaussianTerms {
    double mg;   // mean of gamma_j'(x_{-j} - mu_{-j})
    double tau2; // its variance
};

GaussianTerms regression_terms(const AgentWeights& w, std::size_t j,
                               const std::vector<GaussianDensity>& agents) {
    const Eigen::VectorXd gamma = regression_row(w, j);
    GaussianTerms out{0.0, 0.0};
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (i == j) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        out.mg += gamma[ii] * (agents[i].mean() - w.mu()[ii]);
        out.tau2 += gamma[ii] * gamma[ii] * agents[i].variance();
    }
    return out;
}

std::vector<GaussianDensity> gaussian_agents(const AgentPanel& panel) {
    std::vector<GaussianDensity> out;
    out.reserve(panel.size());
    for (const auto& a : panel.agents) {
        if (!is_gaussian(a)) throw Error("analytic synthesis needs Gaussian agent densities");
        out.push_back(std::get<GaussianDensity>(a));
    }
    return out;
}

} // namespace

double expected_alpha_gaussian(const AgentWeights& weights, std::size_t j,
                               const std::vector<GaussianDensity>& agents) {
    const GaussianTerms terms = regression_terms(weights, j, agents);
    const auto ji = static_cast<Eigen::Index>(j);
    const double a = agents[j].mean() - weights.mu()[ji];
    return smoothed_kernel(weights, j, a, terms.mg, terms.tau2 + agents[j].variance());
}

SynthesizedDensity synthesize_on_grid(const AgentWeights& weights, const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& beta, const AgentPanel& panel,
                                      const std::vector<double>& grid, PosteriorMethod method,
                                      std::size_t n_draws, Rng& rng) {
    const std::size_t n_agents = panel.size();
    const std::size_t n_grid = grid.size();
    if (weights.size() != n_agents || static_cast<std::size_t>(q.size()) != n_agents ||
        static_cast<std::size_t>(beta.size()) != n_agents) {
        throw Error("synthesize_on_grid: dimension mismatch");
    }

    SynthesizedDensity out;
    out.density.y = grid;
    out.density.pdf.assign(n_grid, 0.0);
    out.density_se.assign(n_grid, 0.0);
    out.a.assign(n_agents, std::vector<double>(n_grid, 0.0));
    out.a_se.assign(n_agents, std::vector<double>(n_grid, 0.0));
    out.agent_pdf.assign(n_agents, std::vector<double>(n_grid, 0.0));

    std::vector<double> base_pdf(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        base_pdf[i] = panel.base.pdf(grid[i]);
        for (std::size_t j = 0; j < n_agents; ++j) {
            out.agent_pdf[j][i] = density_eval(panel.agents[j], grid[i] + beta[static_cast<Eigen::Index>(j)]);
        }
    }

    const bool constant = weights.tuning().shape == AgentWeightShape::constant;
    if (constant || method == PosteriorMethod::analytic) {
        std::vector<GaussianTerms> terms(n_agents, GaussianTerms{0.0, 0.0});
        double agent_total = 0.0;
        if (!constant) {
            const auto agents = gaussian_agents(panel);
            for (std::size_t j = 0; j < n_agents; ++j) {
                terms[j] = regression_terms(weights, j, agents);
                agent_total += q[static_cast<Eigen::Index>(j)] * expected_alpha_gaussian(weights, j, agents);
            }
        } else {
            agent_total = q.sum();
        }
        out.a0 = 1.0 - agent_total;
        for (std::size_t i = 0; i < n_grid; ++i) {
            double value = out.a0 * base_pdf[i];
            for (std::size_t j = 0; j < n_agents; ++j) {
                const auto ji = static_cast<Eigen::Index>(j);
                const double a = grid[i] + beta[ji] - weights.mu()[ji];
                const double k = constant ? 1.0 : smoothed_kernel(weights, j, a, terms[j].mg, terms[j].tau2);
                out.a[j][i] = q[ji] * k;
                value += out.a[j][i] * out.agent_pdf[j][i];
            }
            out.density.pdf[i] = value;
        }
        return out;
    }

    if (n_draws < 2) throw Error("synthesize_on_grid: need at least two Monte Carlo draws");
    // Common draws x ~ prod_i h_i shared by every grid point.
    std::vector<double> g(n_draws * n_agents);
    std::vector<double> base_weight(n_draws);
    {
        Eigen::VectorXd x(static_cast<Eigen::Index>(n_agents)), e, gk;
        for (std::size_t k = 0; k < n_draws; ++k) {
            for (std::size_t j = 0; j < n_agents; ++j) x[static_cast<Eigen::Index>(j)] = density_draw(panel.agents[j], rng);
            weights.residuals(x, e, gk);
            double s = 0.0;
            for (std::size_t j = 0; j < n_agents; ++j) {
                const auto ji = static_cast<Eigen::Index>(j);
                g[k * n_agents + j] = gk[ji];
                s += q[ji] * weights.kernel(j, e[ji]);
            }
            base_weight[k] = 1.0 - s;
        }
    }
    const double n = static_cast<double>(n_draws);
    // Sums of deviations from the first draw keep the variance accurate when
    // the spread is tiny next to the mean.
    auto standard_error = [n](double shifted_sum, double shifted_sq) {
        const double m = shifted_sum / n;
        return std::sqrt(std::max(shifted_sq / n - m * m, 0.0) / (n - 1.0));
    };
    double bw_sum = 0.0, bw_sq = 0.0;
    for (double b : base_weight) {
        const double dv = b - base_weight[0];
        bw_sum += dv;
        bw_sq += dv * dv;
    }
    out.a0 = base_weight[0] + bw_sum / n;
    out.a0_se = standard_error(bw_sum, bw_sq);

    parallel_for(n_grid, [&](std::size_t begin, std::size_t end) {
        std::vector<double> shift(n_agents), coef(n_agents), ks(n_agents), ks2(n_agents), k0(n_agents);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = 0; j < n_agents; ++j) {
                const auto ji = static_cast<Eigen::Index>(j);
                shift[j] = grid[i] + beta[ji] - weights.mu()[ji];
                coef[j] = q[ji] * out.agent_pdf[j][i];
                ks[j] = 0.0;
                ks2[j] = 0.0;
            }
            double s = 0.0, s2 = 0.0, v0 = 0.0;
            for (std::size_t k = 0; k < n_draws; ++k) {
                double v = base_weight[k] * base_pdf[i];
                for (std::size_t j = 0; j < n_agents; ++j) {
                    const double kv = weights.kernel(j, shift[j] - g[k * n_agents + j]);
                    if (k == 0) k0[j] = kv;
                    const double dk = kv - k0[j];
                    ks[j] += dk;
                    ks2[j] += dk * dk;
                    v += coef[j] * kv;
                }
                if (k == 0) v0 = v;
                const double dv = v - v0;
                s += dv;
                s2 += dv * dv;
            }
            out.density.pdf[i] = v0 + s / n;
            out.density_se[i] = standard_error(s, s2);
            for (std::size_t j = 0; j < n_agents; ++j) {
                const double qj = q[static_cast<Eigen::Index>(j)];
                out.a[j][i] = qj * (k0[j] + ks[j] / n);
                out.a_se[j][i] = qj * standard_error(ks[j], ks2[j]);
            }
        }
    });
    return out;
}

SynthesizedDensity mc_posterior(const SynthesisConfig& cfg, const AgentPanel& panel,
                                const PosteriorOptions& opts) {
    cfg.validate();
    panel.validate();
    if (panel.size() != cfg.size()) throw Error("mc_posterior: panel and config sizes differ");
    const std::vector<double> grid =
        opts.grid.empty() ? synthesis_grid(panel, cfg.beta, opts.grid_points, opts.grid_sd) : opts.grid;
    const AgentWeights weights(cfg.tuning, cfg.mu, cfg.sigma);
    Rng rng = make_rng(opts.seed);
    return synthesize_on_grid(weights, cfg.q, cfg.beta, panel, grid, opts.method, opts.n_draws, rng);
}

} // namespace mixbps
