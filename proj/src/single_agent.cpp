#include "mixbps/single_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixbps {

void SingleAgentConfig::validate() const {
    if (!(q > 0.0 && q < 1.0)) throw Error("SingleAgentConfig: q must lie in (0,1)");
    if (!(sigma2 > 0.0)) throw Error("SingleAgentConfig: sigma2 must be positive");
    if (!(r > 0.0)) throw Error("SingleAgentConfig: r must be positive");
    if (!(d >= 0.0 && d <= 1.0)) throw Error("SingleAgentConfig: d must lie in [0,1]");
    if (!std::isfinite(mu) || !std::isfinite(beta)) throw Error("SingleAgentConfig: non-finite mu/beta");
}

double alpha_x(const SingleAgentConfig& cfg, double x) {
    const double dx = x - cfg.mu;
    const double kernel = std::exp(-dx * dx / (2.0 * cfg.r * cfg.sigma2));
    switch (cfg.shape) {
    case WeightShape::consensus: return kernel;
    case WeightShape::well: return 1.0 - cfg.d * kernel;
    case WeightShape::constant: return 1.0;
    }
    return 1.0;
}

double SingleAgentPrior::pdf(double y) const { return base_weight * base.pdf(y) + agent_weight * p.pdf(y); }

SingleAgentPrior prior_density(const SingleAgentConfig& cfg) {
    cfg.validate();
    // a(x) m(x) for the Gaussian kernel is a scaled Gaussian:
    //   exp{-(x-mu)^2/(2 r s2)} N(x|mu,s2) = sqrt(r/(r+1)) N(x|mu, r s2/(r+1)).
    const double shrink = std::sqrt(cfg.r / (cfg.r + 1.0));
    const GaussianDensity m(cfg.mu - cfg.beta, cfg.sigma2);
    const GaussianDensity bump(cfg.mu - cfg.beta, cfg.r * cfg.sigma2 / (cfg.r + 1.0));

    GaussianMixture p;
    double c = 1.0;
    switch (cfg.shape) {
    case WeightShape::consensus:
        c = shrink;
        p.weights = {1.0};
        p.components = {bump};
        break;
    case WeightShape::well:
        c = 1.0 - cfg.d * shrink;
        p.weights = {1.0 / c, -cfg.d * shrink / c};
        p.components = {m, bump};
        break;
    case WeightShape::constant:
        p.weights = {1.0};
        p.components = {m};
        break;
    }
    return {c, cfg.q * c, 1.0 - cfg.q * c, cfg.base, std::move(p)};
}

double SingleAgentPosterior::pdf(double y) const {
    return base_weight * base.pdf(y) + agent_weight * reweighted.pdf(y);
}

SingleAgentPosterior posterior_update(const SingleAgentConfig& cfg, const Density& h) {
    cfg.validate();
    if (!is_gaussian(h)) throw Error("posterior_update: closed form needs a Gaussian agent density");
    if (cfg.shape == WeightShape::well) {
        throw Error("posterior_update: no closed form for the well shape, use posterior_quadrature");
    }
    const auto& g = std::get<GaussianDensity>(h);
    const double f = g.mean();
    const double s = g.variance();

    if (cfg.shape == WeightShape::constant) {
        return {1.0, cfg.q, 1.0 - cfg.q, cfg.base, g.shifted(-cfg.beta)};
    }

    const double rs2 = cfg.r * cfg.sigma2;
    const double w1 = s / (rs2 + s);
    const double w2 = rs2 / (rs2 + s);
    const double mean = w1 * cfg.mu + w2 * f - cfg.beta;
    const double var = w1 * w2 * (rs2 + s);
    const double dev = f - cfg.mu;
    const double c_h = std::sqrt(rs2 / (rs2 + s)) * std::exp(-dev * dev / (2.0 * (rs2 + s)));
    return {c_h, cfg.q * c_h, 1.0 - cfg.q * c_h, cfg.base, GaussianDensity(mean, var)};
}

std::vector<double> single_agent_grid(const SingleAgentConfig& cfg, const Density& h,
                                      std::size_t points, double half_width_sd) {
    const double hl = density_location(h) - cfg.beta;
    const double hs = density_spread(h);
    const double lo = std::min(cfg.base.mean() - half_width_sd * cfg.base.sd(), hl - half_width_sd * hs);
    const double hi = std::max(cfg.base.mean() + half_width_sd * cfg.base.sd(), hl + half_width_sd * hs);
    return linspace(lo, hi, points);
}

QuadraturePosterior posterior_quadrature(const SingleAgentConfig& cfg, const Density& h,
                                         const std::vector<double>& grid, double abs_tol) {
    cfg.validate();
    // Integrate in standardised units u = (x - loc)/spread so narrow agent
    // densities are resolved; Gaussian tails beyond 12 sd are below 1e-32.
    const double loc = density_location(h);
    const double spread = density_spread(h);
    auto integrand = [&](double u) {
        const double x = loc + spread * u;
        return alpha_x(cfg, x) * density_eval(h, x) * spread;
    };
    const double inf = std::numeric_limits<double>::infinity();
    const double c_h = is_gaussian(h) ? integrate(integrand, -12.0, 12.0, abs_tol)
                                      : integrate(integrand, -inf, inf, abs_tol);

    QuadraturePosterior out;
    out.c_h = c_h;
    out.agent_weight = cfg.q * c_h;
    out.base_weight = 1.0 - cfg.q * c_h;
    out.density.y = grid;
    out.density.pdf.resize(grid.size());
    out.agent_part.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i] + cfg.beta;
        out.agent_part[i] = cfg.q * alpha_x(cfg, x) * density_eval(h, x);
        out.density.pdf[i] = out.base_weight * cfg.base.pdf(grid[i]) + out.agent_part[i];
    }
    return out;
}

} // namespace mixbps
