#include "mixbps/vb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace mixbps {

double digamma(double x) {
    if (!(x > 0.0)) throw Error("digamma: argument must be positive");
    return boost::math::digamma(x);
}

double trigamma(double x) {
    if (!(x > 0.0)) throw Error("trigamma: argument must be positive");
    return boost::math::trigamma(x);
}

// ---------------------------------------------------------------------------
// States

void NIWState::validate() const {
    const auto n_dim = b.size();
    if (n_dim == 0) throw Error("NIWState: empty");
    if (S.rows() != n_dim || S.cols() != n_dim) throw Error("NIWState: S has wrong shape");
    if (!(c > 0.0) || !std::isfinite(c)) throw Error("NIWState: c must be positive");
    if (!(n > static_cast<double>(n_dim) + 1.0) || !std::isfinite(n)) throw Error("NIWState: need n > J + 1");
    if (!S.isApprox(S.transpose(), 1e-10)) throw Error("NIWState: S not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw Error("NIWState: S not positive definite");
}

Eigen::MatrixXd NIWState::correlations() const {
    const Eigen::VectorXd sd = S.diagonal().cwiseSqrt();
    Eigen::MatrixXd r = S.array() / (sd * sd.transpose()).array();
    return r;
}

void DirichletState::validate() const {
    if (u.size() < 2) throw Error("DirichletState: need at least two components");
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0) || !std::isfinite(u[i])) throw Error("DirichletState: parameters must be positive");
    }
}

// ---------------------------------------------------------------------------
// Sampling

NIWDraw sample_niw(const NIWState& state, Rng& rng) {
    const auto dim = state.b.size();
    const double dof = state.n + static_cast<double>(dim) - 1.0;
    std::normal_distribution<double> normal;

    // Sigma^{-1} = L A A' L' with L L' = (n S)^{-1}; writing n S = U U' gives
    // Sigma = (U A^{-T})(U A^{-T})'.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        std::chi_squared_distribution<double> chi(dof - static_cast<double>(i));
        a(i, i) = std::sqrt(chi(rng));
        for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
    }
    const Eigen::MatrixXd u = (state.n * state.S).llt().matrixL();
    const Eigen::MatrixXd a_inv =
        a.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dim, dim));
    const Eigen::MatrixXd factor = u * a_inv.transpose();

    NIWDraw out;
    out.sigma = factor * factor.transpose();
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
    Eigen::VectorXd z(dim);
    for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
    out.beta = state.b + std::sqrt(state.c) * (factor * z);
    return out;
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& u, Rng& rng) {
    // Log-scale gamma draws, G(a) = G(a + 1) U^{1/a}, keep tiny shapes from underflowing.
    Eigen::VectorXd logs(u.size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        std::gamma_distribution<double> g(u[i] + 1.0, 1.0);
        double v = 0.0;
        while (!(v > 0.0)) v = unif(rng);
        logs[i] = std::log(g(rng)) + std::log(v) / u[i];
    }
    const double top = logs.maxCoeff();
    Eigen::VectorXd q = (logs.array() - top).exp();
    q /= q.sum();
    for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = std::max(q[i], 1e-300);
    q /= q.sum();
    return q;
}

// ---------------------------------------------------------------------------
// Log densities

namespace {

double log_mvgamma(double a, Eigen::Index dim) {
    double s = static_cast<double>(dim * (dim - 1)) / 4.0 * std::log(std::numbers::pi);
    for (Eigen::Index j = 1; j <= dim; ++j) s += std::lgamma(a + (1.0 - static_cast<double>(j)) / 2.0);
    return s;
}

double log_det_spd(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace

double niw_log_density(const NIWState& state, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma) {
    const auto dim = state.b.size();
    const double jd = static_cast<double>(dim);
    const double dof = state.n + jd - 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt_sigma(sigma);
    if (llt_sigma.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd psi = state.n * state.S;
    Eigen::LLT<Eigen::MatrixXd> llt_psi(psi);
    const double logdet_sigma = log_det_spd(llt_sigma);
    const double logdet_psi = log_det_spd(llt_psi);
    const Eigen::MatrixXd sigma_inv = llt_sigma.solve(Eigen::MatrixXd::Identity(dim, dim));

    const double log_iw = 0.5 * dof * logdet_psi - 0.5 * dof * jd * std::numbers::ln2 -
                          log_mvgamma(0.5 * dof, dim) - 0.5 * (dof + jd + 1.0) * logdet_sigma -
                          0.5 * (psi * sigma_inv).trace();
    const Eigen::VectorXd dev = beta - state.b;
    const double quad = dev.dot(sigma_inv * dev) / state.c;
    const double log_normal = -0.5 * jd * std::log(2.0 * std::numbers::pi * state.c) - 0.5 * logdet_sigma -
                              0.5 * quad;
    return log_iw + log_normal;
}

double dirichlet_log_density(const DirichletState& state, const Eigen::VectorXd& q) {
    double s = std::lgamma(state.u.sum());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        s += (state.u[i] - 1.0) * std::log(q[i]) - std::lgamma(state.u[i]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// NIW fit

double niw_dof_residual(double n, std::size_t dim, double k) {
    const double jd = static_cast<double>(dim);
    double s = k - jd * std::log((n + jd - 1.0) / 2.0);
    for (std::size_t j = 1; j <= dim; ++j) s += digamma((n + static_cast<double>(j) - 1.0) / 2.0);
    return s;
}

namespace {

double niw_dof_slope(double n, std::size_t dim) {
    const double jd = static_cast<double>(dim);
    double s = -jd / (n + jd - 1.0);
    for (std::size_t j = 1; j <= dim; ++j) s += 0.5 * trigamma((n + static_cast<double>(j) - 1.0) / 2.0);
    return s;
}

} // namespace

NIWFitReport fit_niw_report(const std::vector<Eigen::VectorXd>& beta_draws,
                            const std::vector<Eigen::MatrixXd>& sigma_draws) {
    const std::size_t m = beta_draws.size();
    if (m < 100 || sigma_draws.size() != m) throw Error("fit_niw: need at least 100 paired draws");
    const auto dim = beta_draws.front().size();
    const std::size_t jd = static_cast<std::size_t>(dim);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);

    std::vector<Eigen::MatrixXd> inv(m);
    Eigen::MatrixXd e_inv = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd e_inv_beta = Eigen::VectorXd::Zero(dim);
    double e_logdet = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (beta_draws[k].size() != dim || sigma_draws[k].rows() != dim || sigma_draws[k].cols() != dim) {
            throw Error("fit_niw: inconsistent draw dimensions");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(sigma_draws[k]);
        if (llt.info() != Eigen::Success) throw Error("fit_niw: Sigma draw " + std::to_string(k) + " is not SPD");
        inv[k] = llt.solve(eye);
        e_inv += inv[k];
        e_inv_beta += llt.solve(beta_draws[k]);
        e_logdet += log_det_spd(llt);
    }
    const double md = static_cast<double>(m);
    e_inv /= md;
    e_inv_beta /= md;
    e_logdet /= md;
    e_inv = 0.5 * (e_inv + e_inv.transpose());

    Eigen::LLT<Eigen::MatrixXd> llt_e(e_inv);
    NIWState out;
    out.b = llt_e.solve(e_inv_beta);
    double c = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const Eigen::VectorXd dev = beta_draws[k] - out.b;
        c += dev.dot(inv[k] * dev);
    }
    out.c = c / (md * static_cast<double>(jd));
    if (!(out.c > 1e-20)) throw Error("fit_niw: beta draws have no spread");

    // k = E[log|Sigma|] + log|E[Sigma^{-1}]| >= 0 by Jensen; zero means no spread.
    const double k = e_logdet + log_det_spd(llt_e);
    const double lower = static_cast<double>(jd) + 1.0;
    const double upper = 1e6;
    if (!(k > 0.0)) throw Error("fit_niw: Sigma draws have no spread");
    const double f_low = niw_dof_residual(lower, jd, k);
    const double f_high = niw_dof_residual(upper, jd, k);
    if (f_low >= 0.0 || f_high <= 0.0) {
        std::ostringstream msg;
        msg << "fit_niw: degrees-of-freedom root outside (" << lower << ", " << upper
            << "); residual at bounds " << f_low << ", " << f_high;
        throw Error(msg.str());
    }

    // Newton in t = log(n - (J+1)), safeguarded by bisection on the bracket.
    double t_lo = std::log(1e-12), t_hi = std::log(upper - lower);
    double n0 = std::max(lower + 1.0, static_cast<double>(jd * (jd + 1)) / (2.0 * k));
    double t = std::clamp(std::log(n0 - lower), t_lo, t_hi);
    int it = 0;
    double f = 0.0;
    for (; it < 200; ++it) {
        const double n = lower + std::exp(t);
        f = niw_dof_residual(n, jd, k);
        if (std::abs(f) < 1e-12) break;
        if (f < 0.0) {
            t_lo = t;
        } else {
            t_hi = t;
        }
        const double slope = niw_dof_slope(n, jd) * (n - lower);
        double next = t - f / slope;
        if (!(next > t_lo && next < t_hi) || !std::isfinite(next)) next = 0.5 * (t_lo + t_hi);
        if (std::abs(next - t) < 1e-15 * std::max(1.0, std::abs(t))) {
            t = next;
            break;
        }
        t = next;
    }
    out.n = lower + std::exp(t);
    f = niw_dof_residual(out.n, jd, k);
    if (!(std::abs(f) < 1e-10)) {
        std::ostringstream msg;
        msg << "fit_niw: Newton-Raphson did not converge in 200 iterations; bracket n in ["
            << lower + std::exp(t_lo) << ", " << lower + std::exp(t_hi) << "], residual " << f;
        throw Error(msg.str());
    }
    out.S = llt_e.solve(eye) * (out.n + static_cast<double>(jd) - 1.0) / out.n;
    out.S = 0.5 * (out.S + out.S.transpose());
    out.validate();
    return {out, f, it};
}

NIWState fit_niw(const std::vector<Eigen::VectorXd>& beta_draws, const std::vector<Eigen::MatrixXd>& sigma_draws) {
    return fit_niw_report(beta_draws, sigma_draws).state;
}

// ---------------------------------------------------------------------------
// Dirichlet fit

namespace {

Eigen::VectorXd mean_log(const std::vector<Eigen::VectorXd>& q_draws) {
    const auto dim = q_draws.front().size();
    Eigen::VectorXd l = Eigen::VectorXd::Zero(dim);
    for (const auto& q : q_draws) {
        if (q.size() != dim) throw Error("fit_dirichlet: inconsistent draw dimensions");
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (!(q[i] > 0.0)) {
                throw Error("fit_dirichlet: component " + std::to_string(i) +
                            " has a non-positive draw (mean log is -infinity)");
            }
            l[i] += std::log(q[i]);
        }
    }
    return l / static_cast<double>(q_draws.size());
}

Eigen::VectorXd dirichlet_residual(const Eigen::VectorXd& u, const Eigen::VectorXd& l) {
    const double ps = digamma(u.sum());
    Eigen::VectorXd f(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) f[i] = digamma(u[i]) - ps - l[i];
    return f;
}

} // namespace

double dirichlet_moment_residual(const DirichletState& state, const std::vector<Eigen::VectorXd>& q_draws) {
    return dirichlet_residual(state.u, mean_log(q_draws)).cwiseAbs().maxCoeff();
}

DirichletState fit_dirichlet(const std::vector<Eigen::VectorXd>& q_draws) {
    if (q_draws.size() < 100) throw Error("fit_dirichlet: need at least 100 draws");
    const Eigen::VectorXd l = mean_log(q_draws);
    const auto dim = l.size();
    const double m = static_cast<double>(q_draws.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim), var = Eigen::VectorXd::Zero(dim);
    for (const auto& q : q_draws) mean += q;
    mean /= m;
    for (const auto& q : q_draws) var += (q - mean).cwiseAbs2();
    var /= m;
    if (var.maxCoeff() <= 1e-24) throw Error("fit_dirichlet: draws have no spread");

    // Moment-matching start: var_i = m_i (1 - m_i) / (s + 1).
    double s = (mean.array() * (1.0 - mean.array())).sum() / var.sum() - 1.0;
    if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
    Eigen::VectorXd u = s * mean;

    Eigen::VectorXd f = dirichlet_residual(u, l);
    int it = 0;
    for (; it < 200 && f.cwiseAbs().maxCoeff() > 1e-12; ++it) {
        // Jacobian diag(psi'(u)) - psi'(sum u) 11', inverted by Sherman-Morrison.
        Eigen::VectorXd dinv(dim);
        for (Eigen::Index i = 0; i < dim; ++i) dinv[i] = 1.0 / trigamma(u[i]);
        const double z = trigamma(u.sum());
        const Eigen::VectorXd dinv_f = dinv.cwiseProduct(f);
        const double corr = z * dinv_f.sum() / (1.0 - z * dinv.sum());
        const Eigen::VectorXd step = -(dinv_f + dinv * corr);

        double lambda = 1.0;
        const double f_norm = f.cwiseAbs().maxCoeff();
        Eigen::VectorXd next = u + step;
        Eigen::VectorXd f_next;
        for (int half = 0; half < 60; ++half) {
            next = u + lambda * step;
            if ((next.array() > 0.0).all()) {
                f_next = dirichlet_residual(next, l);
                if (f_next.cwiseAbs().maxCoeff() < f_norm || half == 59) break;
            }
            lambda *= 0.5;
        }
        if (!(next.array() > 0.0).all()) break;
        u = next;
        f = f_next;
    }
    if (!(f.cwiseAbs().maxCoeff() < 1e-10)) {
        throw Error("fit_dirichlet: Newton-Raphson did not converge (residual " +
                    std::to_string(f.cwiseAbs().maxCoeff()) + ")");
    }
    return DirichletState{u};
}

// ---------------------------------------------------------------------------
// KL objective checks

KLCheck kl_objective_check(const NIWState& fit, const std::vector<Eigen::VectorXd>& beta_draws,
                           const std::vector<Eigen::MatrixXd>& sigma_draws, std::uint64_t seed,
                           std::size_t n_perturb, double scale) {
    auto average = [&](const NIWState& s) {
        double acc = 0.0;
        for (std::size_t k = 0; k < beta_draws.size(); ++k) acc += niw_log_density(s, beta_draws[k], sigma_draws[k]);
        return acc / static_cast<double>(beta_draws.size());
    };
    KLCheck out;
    out.objective = average(fit);
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> eps(-scale, scale);
    const double jd = static_cast<double>(fit.size());
    for (std::size_t p = 0; p < n_perturb; ++p) {
        NIWState s = fit;
        for (Eigen::Index i = 0; i < s.b.size(); ++i) s.b[i] += eps(rng) * std::sqrt(fit.c * fit.S(i, i));
        s.c *= 1.0 + eps(rng);
        s.n = std::max(jd + 1.0 + 1e-9, s.n * (1.0 + eps(rng)));
        s.S *= 1.0 + eps(rng);
        out.perturbed.push_back(average(s));
    }
    out.fitted_is_best = std::all_of(out.perturbed.begin(), out.perturbed.end(),
                                     [&](double v) { return out.objective >= v - 1e-12; });
    return out;
}

KLCheck kl_objective_check(const DirichletState& fit, const std::vector<Eigen::VectorXd>& q_draws,
                           std::uint64_t seed, std::size_t n_perturb, double scale) {
    auto average = [&](const DirichletState& s) {
        double acc = 0.0;
        for (const auto& q : q_draws) acc += dirichlet_log_density(s, q);
        return acc / static_cast<double>(q_draws.size());
    };
    KLCheck out;
    out.objective = average(fit);
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> eps(-scale, scale);
    for (std::size_t p = 0; p < n_perturb; ++p) {
        DirichletState s = fit;
        for (Eigen::Index i = 0; i < s.u.size(); ++i) s.u[i] *= 1.0 + eps(rng);
        out.perturbed.push_back(average(s));
    }
    out.fitted_is_best = std::all_of(out.perturbed.begin(), out.perturbed.end(),
                                     [&](double v) { return out.objective >= v - 1e-12; });
    return out;
}

} // namespace mixbps
