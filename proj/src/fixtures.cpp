#include "mixbps/fixtures.hpp"

#include <cmath>
#include <sstream>

namespace mixbps {

namespace {

constexpr double kPhi = 0.9;
constexpr double kNoiseSd = 0.25;
constexpr double kBias = 0.5;
constexpr double kShift = 2.0;
constexpr double kPhi1 = 0.2;
constexpr double kPhi2 = 0.7;

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(15);
    s << v;
    return s.str();
}

std::vector<double> ar1_path(std::size_t length, double level_before, double level_after, std::size_t change,
                             Rng& rng) {
    std::normal_distribution<double> noise(0.0, kNoiseSd);
    std::vector<double> y(length);
    double dev = noise(rng) / std::sqrt(1.0 - kPhi * kPhi);
    for (std::size_t t = 0; t < length; ++t) {
        dev = kPhi * dev + noise(rng);
        y[t] = (t < change ? level_before : level_after) + dev;
    }
    return y;
}

std::vector<double> ar2_path(std::size_t length, Rng& rng) {
    std::normal_distribution<double> noise(0.0, kNoiseSd);
    double lag1 = 0.0, lag2 = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double next = kPhi1 * lag1 + kPhi2 * lag2 + noise(rng);
        lag2 = lag1;
        lag1 = next;
    }
    std::vector<double> y(length);
    for (auto& v : y) {
        v = kPhi1 * lag1 + kPhi2 * lag2 + noise(rng);
        lag2 = lag1;
        lag1 = v;
    }
    return y;
}

DLMSpec named(DLMSpec s, std::string name) {
    s.name = std::move(name);
    return s;
}

} // namespace

FixtureKind parse_fixture_kind(const std::string& name) {
    if (name == "ar1") return FixtureKind::ar1;
    if (name == "biased_agents") return FixtureKind::biased_agents;
    if (name == "regime_shift") return FixtureKind::regime_shift;
    if (name == "tvar2") return FixtureKind::tvar2;
    throw Error("unknown fixture kind '" + name + "' (expected ar1, biased_agents, regime_shift or tvar2)");
}

std::string to_string(FixtureKind kind) {
    switch (kind) {
    case FixtureKind::ar1:
        return "ar1";
    case FixtureKind::biased_agents:
        return "biased_agents";
    case FixtureKind::regime_shift:
        return "regime_shift";
    case FixtureKind::tvar2:
        return "tvar2";
    }
    return "unknown";
}

Fixture make_fixture(FixtureKind kind, std::uint64_t seed, std::size_t length) {
    if (length < 10) throw Error("make_fixture: need at least 10 observations");
    Rng rng = make_rng(seed);
    Fixture f;
    f.kind = kind;
    f.truth["kind"] = to_string(kind);
    f.truth["seed"] = std::to_string(seed);
    f.truth["phi"] = fmt(kPhi);
    f.truth["noise_sd"] = fmt(kNoiseSd);

    switch (kind) {
    case FixtureKind::ar1: {
        f.series = ar1_path(length, 0.0, 0.0, length, rng);
        f.specs = default_model_specs();
        f.truth["true_model"] = "tvar1";
        break;
    }
    case FixtureKind::biased_agents: {
        f.series = ar1_path(length, 0.0, 0.0, length, rng);
        DLMSpec biased = DLMSpec::tvar(1);
        biased.forecast_offset = kBias;
        f.specs = {DLMSpec::tvar(1), named(biased, "tvar1_biased"), DLMSpec::tvar(2)};
        f.truth["biased_agent"] = "1";
        f.truth["bias"] = fmt(kBias);
        break;
    }
    case FixtureKind::regime_shift: {
        const std::size_t change = length / 2;
        f.series = ar1_path(length, 0.0, kShift, change, rng);
        f.specs = default_model_specs();
        f.truth["change_point"] = std::to_string(change);
        f.truth["shift"] = fmt(kShift);
        break;
    }
    case FixtureKind::tvar2: {
        f.series = ar2_path(length, rng);
        f.specs = default_model_specs();
        f.truth.erase("phi");
        f.truth["phi1"] = fmt(kPhi1);
        f.truth["phi2"] = fmt(kPhi2);
        f.truth["true_model"] = "tvar2";
        f.truth["true_agent"] = "1";
        break;
    }
    }
    return f;
}

} // namespace mixbps
