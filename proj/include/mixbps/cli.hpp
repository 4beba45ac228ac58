#pragma once

// Run configuration, CSV input/output and the three commands behind the
// mixbps tool. Config files are INI text; every key has a default.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mixbps/agents.hpp"
#include "mixbps/fixtures.hpp"
#include "mixbps/multi_agent.hpp"
#include "mixbps/timeseries.hpp"

namespace mixbps {

struct Series {
    std::vector<std::string> dates;
    std::vector<double> values;
};

/// Reads a headed CSV and picks the date and value columns by name.
Series read_series_csv(const std::filesystem::path& path, const std::string& date_column = "date",
                       const std::string& value_column = "value");

/// %.15g formatting; nan and inf spelled out.
std::string format_number(double v);

struct RunConfig {
    std::filesystem::path data_path;
    std::string date_column = "date";
    std::string value_column = "value";
    bool log_transform = false;
    std::vector<DLMSpec> models = default_model_specs();
    FilterConfig filter;
    std::filesystem::path out_dir = ".";
};

/// Defaults for the sequential filter: r1 = 18.0337, r3 = 0.180337, d = 0.5.
BpsTuning default_filter_tuning();

/// Parses an INI file. Relative data paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = ".");

/// One-shot synthesis problem; one scenario per entry of `correlations`.
struct PanelConfig {
    GaussianDensity base{0.0, 1.0};
    std::vector<GaussianDensity> agents{{2.0, 1.0}, {2.5, 1.0}};
    std::vector<double> q{0.5, 0.5};
    std::vector<double> mu{0.0, 0.0};
    std::vector<double> sd{1.0, 1.0};
    std::vector<double> beta{0.0, 0.0};
    std::vector<double> correlations{0.7, 0.0, -0.7};
    BpsTuning tuning; ///< defaults to r1 = 72.13, r2 = 2.89, d = 1
    PosteriorOptions posterior;
    std::filesystem::path out_dir = ".";

    void validate() const;
    SynthesisConfig scenario(std::size_t i) const;
};

PanelConfig default_panel_config();
PanelConfig load_panel_config(const std::filesystem::path& path);
PanelConfig parse_panel_config(const std::string& text);

/// Names of the files each command writes, relative to the output directory.
std::vector<std::string> fit_output_files(bool with_grids);
std::vector<std::string> synthesize_output_files();

/// Runs the filter and writes step_records.csv, correlations.csv, weights.csv,
/// scores.csv and density_grids.csv. Either every file is written or none.
FilterRun cmd_fit(const RunConfig& config);

/// Writes density_grids.csv (pi(y|H) and a_j(y) per scenario) and summary.csv.
std::vector<SynthesizedDensity> cmd_synthesize(const PanelConfig& config);

/// Writes <kind>.csv and <kind>.cfg (a runnable config with a [truth] section).
Fixture cmd_fixtures(FixtureKind kind, std::uint64_t seed, const std::filesystem::path& out_dir,
                     std::size_t length = 110);

/// Entry point shared by the executable: returns the process exit status.
int run_cli(int argc, char** argv);

} // namespace mixbps
