#include "mixbps/agents.hpp"

#include <cmath>

namespace mixbps {

void DLMSpec::validate() const {
    if (kind == DlmKind::tvar && order < 1) throw Error("DLMSpec: TVAR order must be at least 1");
    if (!(state_discount > 0.8 && state_discount <= 1.0)) throw Error("DLMSpec: state discount must lie in (0.8, 1]");
    if (!(obs_variance_discount > 0.8 && obs_variance_discount <= 1.0)) {
        throw Error("DLMSpec: observation variance discount must lie in (0.8, 1]");
    }
    if (m0.size() != 0 && static_cast<std::size_t>(m0.size()) != state_dim()) {
        throw Error("DLMSpec: m0 has the wrong length");
    }
    if (!(c0 > 0.0) || !(n0 > 0.0) || !(s0 > 0.0)) throw Error("DLMSpec: c0, n0 and s0 must be positive");
    if (!std::isfinite(forecast_offset)) throw Error("DLMSpec: forecast offset must be finite");
}

std::string DLMSpec::label() const {
    if (!name.empty()) return name;
    return kind == DlmKind::tvar ? "tvar" + std::to_string(order) : "linear_growth";
}

DLMSpec DLMSpec::tvar(std::size_t p) {
    DLMSpec s;
    s.kind = DlmKind::tvar;
    s.order = p;
    return s;
}

DLMSpec DLMSpec::linear_growth() {
    DLMSpec s;
    s.kind = DlmKind::linear_growth;
    s.order = 2;
    return s;
}

std::vector<DLMSpec> default_model_specs() {
    return {DLMSpec::tvar(1), DLMSpec::tvar(2), DLMSpec::tvar(5), DLMSpec::linear_growth()};
}

bool DlmState::ready(const DLMSpec& spec) const {
    if (spec.kind == DlmKind::linear_growth) return initialised;
    return lags.size() >= spec.order;
}

DlmState initial_state(const DLMSpec& spec) {
    spec.validate();
    const auto p = static_cast<Eigen::Index>(spec.state_dim());
    DlmState s;
    if (spec.m0.size() != 0) {
        s.m = spec.m0;
    } else {
        s.m = Eigen::VectorXd::Zero(p);
        if (spec.kind == DlmKind::tvar) s.m[0] = 1.0;
    }
    s.C = spec.c0 * Eigen::MatrixXd::Identity(p, p);
    s.n = spec.n0;
    s.S = spec.s0;
    s.initialised = spec.kind == DlmKind::tvar;
    return s;
}

namespace {

Eigen::VectorXd regression_vector(const DLMSpec& spec, const DlmState& state) {
    if (spec.kind == DlmKind::linear_growth) return Eigen::Vector2d(1.0, 0.0);
    Eigen::VectorXd f(static_cast<Eigen::Index>(spec.order));
    for (std::size_t i = 0; i < spec.order; ++i) f[static_cast<Eigen::Index>(i)] = state.lags[i];
    return f;
}

Eigen::MatrixXd evolution(const DLMSpec& spec) {
    if (spec.kind == DlmKind::linear_growth) {
        Eigen::Matrix2d g;
        g << 1.0, 1.0, 0.0, 1.0;
        return g;
    }
    const auto p = static_cast<Eigen::Index>(spec.order);
    return Eigen::MatrixXd::Identity(p, p);
}

void push_lag(const DLMSpec& spec, DlmState& s, double y) {
    s.lags.push_front(y);
    const std::size_t keep = spec.kind == DlmKind::tvar ? spec.order : 1;
    while (s.lags.size() > keep) s.lags.pop_back();
}

} // namespace

StudentTDensity one_step_forecast(const DLMSpec& spec, const DlmState& state) {
    if (!state.ready(spec)) throw Error("one_step_forecast: model " + spec.label() + " has too little history");
    const Eigen::MatrixXd g = evolution(spec);
    const Eigen::VectorXd a = g * state.m;
    const Eigen::MatrixXd r = g * state.C * g.transpose() / spec.state_discount;
    const Eigen::VectorXd f = regression_vector(spec, state);
    const double mean = f.dot(a) + spec.forecast_offset;
    const double var = f.dot(r * f) + state.S;
    return {mean, std::sqrt(var), state.n};
}

GaussianDensity DlmStep::gaussian() const {
    if (!forecast) throw Error("DlmStep: no forecast available yet");
    return moment_matched(Density{*forecast});
}

DlmStep dlm_step(const DLMSpec& spec, const DlmState& state, double y) {
    if (!std::isfinite(y)) throw Error("dlm_step: non-finite observation");
    DlmStep out{state, std::nullopt};
    DlmState& s = out.state;

    if (spec.kind == DlmKind::linear_growth && !s.initialised) {
        if (spec.m0.size() == 0) s.m = Eigen::Vector2d(y, 0.0);
        s.initialised = true;
    } else if (s.ready(spec)) {
        const Eigen::MatrixXd g = evolution(spec);
        const Eigen::VectorXd a = g * s.m;
        const Eigen::MatrixXd r = g * s.C * g.transpose() / spec.state_discount;
        const Eigen::VectorXd f = regression_vector(spec, s);
        const double q = f.dot(r * f) + s.S;
        const double e = y - f.dot(a);
        const Eigen::VectorXd gain = r * f / q;
        const double n_new = spec.obs_variance_discount * s.n + 1.0;
        const double s_new = s.S * (spec.obs_variance_discount * s.n + e * e / q) / n_new;
        s.m = a + gain * e;
        s.C = (s_new / s.S) * (r - gain * gain.transpose() * q);
        s.C = 0.5 * (s.C + s.C.transpose());
        s.n = n_new;
        s.S = s_new;
    }
    push_lag(spec, s, y);
    ++s.observed;
    if (s.ready(spec)) out.forecast = one_step_forecast(spec, s);
    return out;
}

PanelForecast make_panel(const std::vector<DLMSpec>& specs, const std::vector<DlmState>& states, bool student_t) {
    if (specs.size() < 2) throw Error("make_panel: need a base model and at least one agent");
    if (states.size() != specs.size()) throw Error("make_panel: one state per spec required");
    const StudentTDensity base_t = one_step_forecast(specs[0], states[0]);
    PanelForecast out{AgentPanel{moment_matched(Density{base_t}), {}}, base_t.mean()};
    for (std::size_t i = 1; i < specs.size(); ++i) {
        const StudentTDensity t = one_step_forecast(specs[i], states[i]);
        if (student_t) {
            out.panel.agents.emplace_back(t);
        } else {
            out.panel.agents.emplace_back(moment_matched(Density{t}));
        }
    }
    return out;
}

ModelBank::ModelBank(std::vector<DLMSpec> specs) : specs_(std::move(specs)) {
    if (specs_.size() < 2) throw Error("ModelBank: need a base model and at least one agent");
    for (const auto& s : specs_) states_.push_back(initial_state(s));
}

bool ModelBank::ready() const {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (!states_[i].ready(specs_[i])) return false;
    }
    return true;
}

std::vector<StudentTDensity> ModelBank::forecasts() const {
    std::vector<StudentTDensity> out;
    for (std::size_t i = 0; i < specs_.size(); ++i) out.push_back(one_step_forecast(specs_[i], states_[i]));
    return out;
}

PanelForecast ModelBank::panel(bool student_t) const { return make_panel(specs_, states_, student_t); }

void ModelBank::observe(double y) {
    for (std::size_t i = 0; i < specs_.size(); ++i) states_[i] = dlm_step(specs_[i], states_[i], y).state;
}

} // namespace mixbps
