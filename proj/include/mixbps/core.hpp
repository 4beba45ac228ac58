#pragma once

// Density primitives, scoring, grids and quadrature shared by every module.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mixbps {

using Rng = std::mt19937_64;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when adaptive quadrature cannot reach the requested tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Generator for stream `stream` of a run seeded with `seed`.
/// Distinct streams are statistically independent; the mapping is fixed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

class GaussianDensity {
public:
    GaussianDensity(double mean, double variance);

    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }
    double sd() const noexcept { return sd_; }

    double pdf(double y) const noexcept;
    double log_pdf(double y) const noexcept;
    double cdf(double y) const noexcept;
    double sample(Rng& rng) const;

    GaussianDensity shifted(double by) const { return {mean_ + by, variance_}; }

private:
    double mean_;
    double variance_;
    double sd_;
};

/// Location-scale Student-t; `scale` is the scale parameter, not its square.
class StudentTDensity {
public:
    StudentTDensity(double location, double scale, double dof);

    double location() const noexcept { return location_; }
    double scale() const noexcept { return scale_; }
    double dof() const noexcept { return dof_; }
    double mean() const noexcept { return location_; }
    /// Infinite for dof <= 2.
    double variance() const noexcept;

    double pdf(double y) const noexcept;
    double log_pdf(double y) const noexcept;
    double cdf(double y) const;
    double sample(Rng& rng) const;

    StudentTDensity shifted(double by) const { return {location_ + by, scale_, dof_}; }

private:
    double location_;
    double scale_;
    double dof_;
    double log_norm_;
};

/// Closed set of forecast densities an agent may report.
using Density = std::variant<GaussianDensity, StudentTDensity>;

double density_eval(const Density& d, double y);
double log_density(const Density& d, double y);
double density_cdf(const Density& d, double y);
double density_location(const Density& d);
/// Spread used for grid construction: sd for Gaussians, sd (or scale when
/// the variance is infinite) for Student-t.
double density_spread(const Density& d);
double density_variance(const Density& d);
double density_draw(const Density& d, Rng& rng);
Density shifted(const Density& d, double by);
bool is_gaussian(const Density& d);
/// Gaussian with the same mean and variance. Student-t with dof <= 3 uses
/// the dof = 3 variance inflation (3 * scale^2) since higher moments are unstable.
GaussianDensity moment_matched(const Density& d);

/// n i.i.d. draws, reproducible for a fixed seed.
std::vector<double> density_sample(const Density& d, std::size_t n, std::uint64_t seed);

/// Base density pi_0 plus the J agent densities h_1..h_J.
struct AgentPanel {
    GaussianDensity base;
    std::vector<Density> agents;

    std::size_t size() const noexcept { return agents.size(); }
    void validate() const;
};

/// Monte Carlo representation of a distribution.
struct WeightedSampleSet {
    std::vector<std::vector<double>> draws;
    std::vector<double> weights;

    void validate() const;
    std::size_t dimension() const { return draws.empty() ? 0 : draws.front().size(); }
    double weighted_mean(std::size_t dim) const;
    double effective_sample_size() const;
};

/// Log predictive density; -infinity when the density vanishes at y.
double log_score(const Density& d, double y);
double rmse(std::span<const double> point_forecasts, std::span<const double> outcomes);

/// Real-valued mixture of Gaussians. Weights may be negative (well-shaped
/// weight functions subtract a Gaussian bump) as long as the sum is a density.
struct GaussianMixture {
    std::vector<double> weights;
    std::vector<GaussianDensity> components;

    double pdf(double y) const;
    double total_weight() const;
    double mean() const;
    double variance() const;
};

std::vector<double> linspace(double lo, double hi, std::size_t n);
double trapezoid(std::span<const double> x, std::span<const double> f);

/// A density tabulated on an increasing grid.
struct GriddedDensity {
    std::vector<double> y;
    std::vector<double> pdf;

    double integral() const;
    /// Moments and quantiles use the grid mass renormalised to one.
    double mean() const;
    double variance() const;
    double quantile(double p) const;
    /// Linear interpolation, zero outside the grid.
    double interpolate(double at) const;
};

/// Adaptive Gauss-Kronrod integral over [lo, hi]. Throws QuadratureError if
/// the error estimate exceeds `abs_tol`.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double abs_tol = 1e-10);

} // namespace mixbps
