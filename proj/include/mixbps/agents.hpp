#pragma once

// Forecasting agents: discount dynamic linear models with unknown observation
// variance. TVAR(p) regresses on the last p observations with random-walk
// coefficients; the linear-growth model tracks a local level and trend.

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixbps/core.hpp"

namespace mixbps {

enum class DlmKind { tvar, linear_growth };

struct DLMSpec {
    DlmKind kind = DlmKind::tvar;
    std::size_t order = 1;               ///< p for TVAR(p); ignored for linear growth
    double state_discount = 0.95;
    double obs_variance_discount = 0.95;
    Eigen::VectorXd m0;                  ///< empty: (1, 0, ..., 0) for TVAR, (first y, 0) for linear growth
    double c0 = 1.0;                     ///< initial state covariance c0 * I
    double n0 = 1.0;                     ///< initial variance degrees of freedom
    double s0 = 1.0;                     ///< initial observation variance estimate
    double forecast_offset = 0.0;        ///< added to every forecast location
    std::string name;

    std::size_t state_dim() const { return kind == DlmKind::tvar ? order : 2; }
    void validate() const;
    /// "tvar1", "tvar5", "linear_growth" or the explicit name.
    std::string label() const;

    static DLMSpec tvar(std::size_t p);
    static DLMSpec linear_growth();
};

struct DlmState {
    Eigen::VectorXd m;
    Eigen::MatrixXd C;
    double n = 1.0;
    double S = 1.0;
    std::deque<double> lags; ///< most recent observation first
    std::size_t observed = 0;
    bool initialised = false;

    /// True once enough history exists to form the regression vector.
    bool ready(const DLMSpec& spec) const;
};

DlmState initial_state(const DLMSpec& spec);

/// One-step-ahead forecast for the next observation. Throws if not ready.
StudentTDensity one_step_forecast(const DLMSpec& spec, const DlmState& state);

struct DlmStep {
    DlmState state;
    std::optional<StudentTDensity> forecast; ///< for the next observation, once ready

    GaussianDensity gaussian() const;
};

/// Forward-filter update with y_t. Observations that only fill the lag
/// window (or set the initial level) leave the parameters untouched.
DlmStep dlm_step(const DLMSpec& spec, const DlmState& state, double y);

/// Base pi_0 (first spec, reported as a moment-matched Gaussian) and agents.
struct PanelForecast {
    AgentPanel panel;
    double f0; ///< base point forecast
};

/// Designates specs[0] as the base model and the rest as agents. Agent
/// densities are moment-matched Gaussians unless `student_t` is set.
PanelForecast make_panel(const std::vector<DLMSpec>& specs, const std::vector<DlmState>& states,
                         bool student_t = false);

/// The specs and their filter states, advanced together.
class ModelBank {
public:
    explicit ModelBank(std::vector<DLMSpec> specs);

    const std::vector<DLMSpec>& specs() const { return specs_; }
    const std::vector<DlmState>& states() const { return states_; }
    std::size_t n_agents() const { return specs_.size() - 1; }
    bool ready() const;
    /// Current one-step forecasts of every model, base first.
    std::vector<StudentTDensity> forecasts() const;
    PanelForecast panel(bool student_t = false) const;
    void observe(double y);

private:
    std::vector<DLMSpec> specs_;
    std::vector<DlmState> states_;
};

/// TVAR(1) base with TVAR(2), TVAR(5) and linear-growth agents.
std::vector<DLMSpec> default_model_specs();

} // namespace mixbps
