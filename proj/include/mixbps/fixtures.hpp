#pragma once

// Reproducible synthetic series with planted structure, plus the model
// specs that go with them.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixbps/agents.hpp"

namespace mixbps {

enum class FixtureKind {
    ar1,           ///< AR(1) data with the default TVAR(1)/TVAR(2)/TVAR(5)/linear-growth models
    biased_agents, ///< AR(1) data; agent 1 is TVAR(1) with forecasts shifted by +0.5
    regime_shift,  ///< AR(1) around a level that jumps at a recorded change point
    tvar2,         ///< AR(2) data with a strong second lag, so the TVAR(2) agent is the true model
};

FixtureKind parse_fixture_kind(const std::string& name);
std::string to_string(FixtureKind kind);

struct Fixture {
    FixtureKind kind;
    std::vector<double> series;
    std::vector<DLMSpec> specs;
    std::map<std::string, std::string> truth; ///< ground-truth metadata as key/value text
};

/// `length` observations; the default leaves 100 synthesis steps after a
/// 10-observation warmup.
Fixture make_fixture(FixtureKind kind, std::uint64_t seed, std::size_t length = 110);

} // namespace mixbps
