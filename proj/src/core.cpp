#include "mixbps/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mixbps {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

} // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6d697862u};
    return Rng(seq);
}

// ---------------------------------------------------------------------------
// GaussianDensity

GaussianDensity::GaussianDensity(double mean, double variance)
    : mean_(mean), variance_(variance), sd_(std::sqrt(variance)) {
    if (!std::isfinite(mean) || !std::isfinite(variance) || !(variance > 0.0)) {
        throw Error("GaussianDensity: need finite mean and variance > 0");
    }
}

double GaussianDensity::pdf(double y) const noexcept { return std::exp(log_pdf(y)); }

double GaussianDensity::log_pdf(double y) const noexcept {
    const double z = (y - mean_) / sd_;
    return -0.5 * z * z - std::log(sd_) - kLogSqrt2Pi;
}

double GaussianDensity::cdf(double y) const noexcept {
    return 0.5 * std::erfc(-(y - mean_) / (sd_ * std::numbers::sqrt2));
}

double GaussianDensity::sample(Rng& rng) const {
    std::normal_distribution<double> n(mean_, sd_);
    return n(rng);
}

// ---------------------------------------------------------------------------
// StudentTDensity

StudentTDensity::StudentTDensity(double location, double scale, double dof)
    : location_(location), scale_(scale), dof_(dof) {
    if (!std::isfinite(location) || !std::isfinite(scale) || !(scale > 0.0) ||
        !std::isfinite(dof) || !(dof > 0.0)) {
        throw Error("StudentTDensity: need finite location, scale > 0 and dof > 0");
    }
    log_norm_ = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                0.5 * std::log(dof * std::numbers::pi) - std::log(scale);
}

double StudentTDensity::variance() const noexcept {
    if (dof_ <= 2.0) return std::numeric_limits<double>::infinity();
    return scale_ * scale_ * dof_ / (dof_ - 2.0);
}

double StudentTDensity::pdf(double y) const noexcept { return std::exp(log_pdf(y)); }

double StudentTDensity::log_pdf(double y) const noexcept {
    const double z = (y - location_) / scale_;
    return log_norm_ - 0.5 * (dof_ + 1.0) * std::log1p(z * z / dof_);
}

double StudentTDensity::cdf(double y) const {
    boost::math::students_t_distribution<double> t(dof_);
    return boost::math::cdf(t, (y - location_) / scale_);
}

double StudentTDensity::sample(Rng& rng) const {
    std::normal_distribution<double> n;
    std::chi_squared_distribution<double> chi(dof_);
    const double z = n(rng);
    return location_ + scale_ * z / std::sqrt(chi(rng) / dof_);
}

// ---------------------------------------------------------------------------
// Density variant helpers

double density_eval(const Density& d, double y) {
    return std::visit([y](const auto& x) { return x.pdf(y); }, d);
}

double log_density(const Density& d, double y) {
    return std::visit([y](const auto& x) { return x.log_pdf(y); }, d);
}

double density_cdf(const Density& d, double y) {
    return std::visit([y](const auto& x) { return x.cdf(y); }, d);
}

double density_location(const Density& d) {
    return std::visit([](const auto& x) { return x.mean(); }, d);
}

double density_variance(const Density& d) {
    return std::visit([](const auto& x) { return x.variance(); }, d);
}

double density_spread(const Density& d) {
    return std::visit(overloaded{[](const GaussianDensity& g) { return g.sd(); },
                                 [](const StudentTDensity& t) {
                                     const double v = t.variance();
                                     return std::isfinite(v) ? std::sqrt(v) : 3.0 * t.scale();
                                 }},
                      d);
}

double density_draw(const Density& d, Rng& rng) {
    return std::visit([&rng](const auto& x) { return x.sample(rng); }, d);
}

Density shifted(const Density& d, double by) {
    return std::visit([by](const auto& x) -> Density { return x.shifted(by); }, d);
}

bool is_gaussian(const Density& d) { return std::holds_alternative<GaussianDensity>(d); }

GaussianDensity moment_matched(const Density& d) {
    return std::visit(overloaded{[](const GaussianDensity& g) { return g; },
                                 [](const StudentTDensity& t) {
                                     const double s2 = t.scale() * t.scale();
                                     const double v = t.dof() > 3.0 ? t.variance() : 3.0 * s2;
                                     return GaussianDensity(t.location(), v);
                                 }},
                      d);
}

std::vector<double> density_sample(const Density& d, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> out(n);
    std::visit(overloaded{[&](const GaussianDensity& g) {
                              std::normal_distribution<double> nd(g.mean(), g.sd());
                              for (auto& v : out) v = nd(rng);
                          },
                          [&](const StudentTDensity& t) {
                              for (auto& v : out) v = t.sample(rng);
                          }},
               d);
    return out;
}

// ---------------------------------------------------------------------------
// Panels and sample sets

void AgentPanel::validate() const {
    if (agents.empty()) throw Error("AgentPanel: need at least one agent density");
}

void WeightedSampleSet::validate() const {
    if (draws.size() != weights.size()) throw Error("WeightedSampleSet: size mismatch");
    if (draws.empty()) throw Error("WeightedSampleSet: empty");
    const std::size_t dim = draws.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        if (draws[i].size() != dim) throw Error("WeightedSampleSet: ragged draws");
        if (!(weights[i] >= 0.0)) throw Error("WeightedSampleSet: negative weight");
        total += weights[i];
    }
    if (!(total > 0.0)) throw Error("WeightedSampleSet: weights sum to zero");
}

double WeightedSampleSet::weighted_mean(std::size_t dim) const {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        num += weights[i] * draws[i].at(dim);
        den += weights[i];
    }
    return num / den;
}

double WeightedSampleSet::effective_sample_size() const {
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    return s * s / s2;
}

// ---------------------------------------------------------------------------
// Scores

double log_score(const Density& d, double y) {
    const double v = log_density(d, y);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

double rmse(std::span<const double> point_forecasts, std::span<const double> outcomes) {
    if (point_forecasts.size() != outcomes.size()) throw Error("rmse: length mismatch");
    if (outcomes.empty()) throw Error("rmse: empty input");
    double ss = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const double e = point_forecasts[i] - outcomes[i];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(outcomes.size()));
}

// ---------------------------------------------------------------------------
// Mixtures and grids

double GaussianMixture::pdf(double y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) s += weights[i] * components[i].pdf(y);
    return s;
}

double GaussianMixture::total_weight() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double GaussianMixture::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) s += weights[i] * components[i].mean();
    return s / total_weight();
}

double GaussianMixture::variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        const double dm = components[i].mean() - m;
        s += weights[i] * (components[i].variance() + dm * dm);
    }
    return s / total_weight();
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2) throw Error("linspace: need at least two points");
    std::vector<double> out(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

double trapezoid(std::span<const double> x, std::span<const double> f) {
    if (x.size() != f.size()) throw Error("trapezoid: length mismatch");
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
    return s;
}

double GriddedDensity::integral() const { return trapezoid(y, pdf); }

double GriddedDensity::mean() const {
    std::vector<double> yf(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yf[i] = y[i] * pdf[i];
    return trapezoid(y, yf) / integral();
}

double GriddedDensity::variance() const {
    const double m = mean();
    std::vector<double> f(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) f[i] = (y[i] - m) * (y[i] - m) * pdf[i];
    return trapezoid(y, f) / integral();
}

double GriddedDensity::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw Error("quantile: p must lie in (0,1)");
    const double total = integral();
    double acc = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) {
        // Clamp negative MC noise so the CDF stays monotone.
        const double fl = std::max(pdf[i - 1], 0.0), fr = std::max(pdf[i], 0.0);
        const double h = y[i] - y[i - 1];
        const double seg = 0.5 * h * (fl + fr) / total;
        if (acc + seg >= p && seg > 0.0) {
            // Invert the piecewise-linear density within the cell.
            const double target = (p - acc) * total;
            const double slope = (fr - fl) / h;
            double t;
            if (std::abs(slope) < 1e-300) {
                t = target / fl;
            } else {
                t = (-fl + std::sqrt(std::max(fl * fl + 2.0 * slope * target, 0.0))) / slope;
            }
            return y[i - 1] + std::clamp(t, 0.0, h);
        }
        acc += seg;
    }
    return y.back();
}

double GriddedDensity::interpolate(double at) const {
    if (y.empty() || at < y.front() || at > y.back()) return 0.0;
    auto it = std::upper_bound(y.begin(), y.end(), at);
    if (it == y.end()) return pdf.back();
    const std::size_t i = static_cast<std::size_t>(it - y.begin());
    const double w = (at - y[i - 1]) / (y[i] - y[i - 1]);
    return (1.0 - w) * pdf[i - 1] + w * pdf[i];
}

double integrate(const std::function<double(double)>& f, double lo, double hi, double abs_tol) {
    double err = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-14, &err);
    if (!std::isfinite(value) || err > abs_tol) {
        throw QuadratureError("integrate: tolerance not reached (achieved " + std::to_string(err) +
                                  ")",
                              err);
    }
    return value;
}

} // namespace mixbps
