#include "mixbps/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <CLI11.hpp>

namespace mixbps {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, sep)) out.push_back(trim(cell));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& text, const std::string& what) {
    const std::string s = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw Error(what + ": '" + s + "' is not a number");
    }
    if (used != s.size()) throw Error(what + ": '" + s + "' is not a number");
    return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& cell : split(text, ',')) out.push_back(parse_double(cell, what));
    return out;
}

std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::string csv_text(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

// Typed access to an INI tree that remembers which keys were read, so
// unknown keys can be reported instead of silently ignored.
class Ini {
public:
    Ini(const std::string& text) {
        std::istringstream in(text);
        try {
            boost::property_tree::ini_parser::read_ini(in, tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw Error("config: " + std::string(e.message()) + " at line " + std::to_string(e.line()));
        }
    }

    bool has_section(const std::string& s) const { return tree_.find(s) != tree_.not_found(); }
    bool has(const std::string& section, const std::string& key) const {
        const auto sec = tree_.find(section);
        return sec != tree_.not_found() && sec->second.find(key) != sec->second.not_found();
    }

    std::optional<std::string> raw(const std::string& section, const std::string& key) {
        used_.insert(section + "." + key);
        if (!has(section, key)) return std::nullopt;
        return trim(tree_.get_child(section).get<std::string>(key));
    }

    std::string text(const std::string& section, const std::string& key, const std::string& fallback) {
        const auto r = raw(section, key);
        return r ? unquote(*r) : fallback;
    }
    double number(const std::string& section, const std::string& key, double fallback) {
        const auto r = raw(section, key);
        return r ? parse_double(*r, section + "." + key) : fallback;
    }
    std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) {
        const auto r = raw(section, key);
        if (!r) return fallback;
        const double v = parse_double(*r, section + "." + key);
        if (v < 0.0 || v != std::floor(v)) throw Error(section + "." + key + ": expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    bool flag(const std::string& section, const std::string& key, bool fallback) {
        const auto r = raw(section, key);
        if (!r) return fallback;
        if (*r == "true" || *r == "1" || *r == "yes" || *r == "on") return true;
        if (*r == "false" || *r == "0" || *r == "no" || *r == "off") return false;
        throw Error(section + "." + key + ": expected true or false");
    }
    std::vector<double> list(const std::string& section, const std::string& key, std::vector<double> fallback) {
        const auto r = raw(section, key);
        return r ? parse_list(*r, section + "." + key) : fallback;
    }

    /// Rejects keys that were never read, except in the listed free-form sections.
    void reject_unknown(const std::set<std::string>& free_sections) const {
        for (const auto& [section, body] : tree_) {
            if (free_sections.count(section)) continue;
            if (body.empty() && !body.data().empty())
                throw Error("config: key '" + section + "' outside any section");
            for (const auto& kv : body) {
                if (!used_.count(section + "." + kv.first))
                    throw Error("config: unknown key '" + kv.first + "' in section [" + section + "]");
            }
        }
    }

private:
    ptree tree_;
    std::set<std::string> used_;
};

std::string read_text(const fs::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + what + " '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

BpsTuning read_tuning(Ini& ini, double r1_default, std::optional<double> r2_default,
                      std::optional<double> r3_default, double d_default) {
    const double r1 = ini.number("bps", "r1", r1_default);
    const double d = ini.number("bps", "d", d_default);
    const bool has_r2 = ini.has("bps", "r2");
    const bool has_r3 = ini.has("bps", "r3");
    if (has_r2 && has_r3) throw Error("config: give exactly one of bps.r2 and bps.r3");
    BpsTuning t;
    if (has_r2 || (!has_r3 && r2_default)) {
        t.r1 = r1;
        t.r2 = ini.number("bps", "r2", r2_default.value_or(0.0));
        t.d = d;
        ini.raw("bps", "r3");
    } else {
        ini.raw("bps", "r2");
        t = BpsTuning::from_r3(r1, ini.number("bps", "r3", r3_default.value_or(0.0)), d);
    }
    const std::string shape = ini.text("bps", "shape", "well");
    if (shape == "well") {
        t.shape = AgentWeightShape::well;
    } else if (shape == "constant") {
        t.shape = AgentWeightShape::constant;
    } else {
        throw Error("config: bps.shape must be 'well' or 'constant'");
    }
    t.validate();
    return t;
}

DLMSpec read_model(Ini& ini, const std::string& section) {
    const std::string kind = ini.text(section, "kind", "tvar");
    DLMSpec s;
    if (kind == "tvar") {
        s = DLMSpec::tvar(ini.count(section, "order", 1));
    } else if (kind == "linear_growth") {
        s = DLMSpec::linear_growth();
        ini.raw(section, "order");
    } else {
        throw Error("config: " + section + ".kind must be 'tvar' or 'linear_growth'");
    }
    s.state_discount = ini.number(section, "state_discount", s.state_discount);
    s.obs_variance_discount = ini.number(section, "obs_variance_discount", s.obs_variance_discount);
    s.c0 = ini.number(section, "c0", s.c0);
    s.n0 = ini.number(section, "n0", s.n0);
    s.s0 = ini.number(section, "s0", s.s0);
    s.forecast_offset = ini.number(section, "offset", s.forecast_offset);
    s.name = ini.text(section, "name", "");
    const auto m0 = ini.list(section, "m0", {});
    if (!m0.empty()) s.m0 = Eigen::Map<const Eigen::VectorXd>(m0.data(), static_cast<Eigen::Index>(m0.size()));
    s.validate();
    return s;
}

void check_unique_labels(const std::vector<DLMSpec>& specs) {
    std::set<std::string> seen;
    for (const auto& s : specs) {
        if (!seen.insert(s.label()).second) throw Error("config: duplicate model name '" + s.label() + "'");
    }
}

// Every file is first written next to its target and renamed only once all
// of them are complete.
void commit_files(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<fs::path> temps;
    auto cleanup = [&] {
        for (const auto& p : temps) fs::remove(p, ec);
    };
    for (const auto& [name, content] : files) {
        const fs::path tmp = dir / (name + ".partial");
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) {
            cleanup();
            throw Error("cannot write '" + (dir / name).string() + "'");
        }
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
        fs::rename(temps[i], dir / files[i].first, ec);
        if (ec) {
            for (std::size_t k = 0; k < i; ++k) fs::remove(dir / files[k].first, ec);
            cleanup();
            throw Error("cannot write '" + (dir / files[i].first).string() + "'");
        }
    }
}

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) : width_(header.size()) { row(header); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != width_) throw Error("internal: CSV row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_text(cells[i]);
        }
        out_ << '\n';
    }
    std::string str() const { return out_.str(); }

private:
    std::size_t width_;
    std::ostringstream out_;
};

void append_numbers(std::vector<std::string>& cells, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(format_number(v(i)));
}

void append_numbers(std::vector<std::string>& cells, const std::vector<double>& v) {
    for (double x : v) cells.push_back(format_number(x));
}

std::string probability_tag(double p) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%02d", static_cast<int>(std::lround(p * 100.0)));
    return buf;
}

std::string to_string(ZMarginal m) { return m == ZMarginal::conditional ? "conditional" : "factorized"; }

} // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

Series read_series_csv(const fs::path& path, const std::string& date_column, const std::string& value_column) {
    std::istringstream in(read_text(path, "data file"));
    std::string line;
    if (!std::getline(in, line)) throw Error("data file '" + path.string() + "' is empty");
    const auto header = split(trim(line), ',');
    std::optional<std::size_t> date_idx, value_idx;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = unquote(header[i]);
        if (name == date_column) date_idx = i;
        if (name == value_column) value_idx = i;
    }
    if (!value_idx) throw Error("data file has no column '" + value_column + "'");
    Series s;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != header.size())
            throw Error("data file line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns");
        s.values.push_back(parse_double(cells[*value_idx], "data file line " + std::to_string(line_no)));
        s.dates.push_back(date_idx ? unquote(cells[*date_idx]) : std::to_string(s.values.size() - 1));
    }
    if (s.values.empty()) throw Error("data file '" + path.string() + "' has no observations");
    return s;
}

BpsTuning default_filter_tuning() { return BpsTuning::from_r3(18.0337, 0.180337, 0.5); }

RunConfig load_run_config(const fs::path& path) {
    return parse_run_config(read_text(path, "config file"), path.parent_path());
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
    Ini ini(text);
    RunConfig rc;
    FilterConfig& f = rc.filter;

    const std::string data = ini.text("data", "path", "");
    if (!data.empty()) rc.data_path = fs::path(data).is_absolute() ? fs::path(data) : base_dir / data;
    rc.date_column = ini.text("data", "date_column", rc.date_column);
    rc.value_column = ini.text("data", "value_column", rc.value_column);
    rc.log_transform = ini.flag("data", "log_transform", false);

    if (ini.has_section("model0")) {
        rc.models.clear();
        for (std::size_t k = 0; ini.has_section("model" + std::to_string(k)); ++k)
            rc.models.push_back(read_model(ini, "model" + std::to_string(k)));
        if (rc.models.size() < 2) throw Error("config: need a base model [model0] and at least one agent [model1]");
    }
    check_unique_labels(rc.models);

    const BpsTuning defaults = default_filter_tuning();
    f.tuning = read_tuning(ini, defaults.r1, std::nullopt, 0.180337, defaults.d);

    f.n0 = ini.number("priors", "n0", f.n0);
    f.c0 = ini.number("priors", "c0", f.c0);
    f.prior_correlation = ini.number("priors", "correlation", f.prior_correlation);
    f.u0 = ini.number("priors", "u0", f.u0);

    f.discount_sigma = ini.number("discounts", "sigma", f.discount_sigma);
    f.discount_beta = ini.number("discounts", "beta", f.discount_beta);
    f.discount_q = ini.number("discounts", "q", f.discount_q);

    GibbsConfig& g = f.gibbs;
    g.n_iter = ini.count("gibbs", "n_iter", g.n_iter);
    g.burn_in = ini.count("gibbs", "burn_in", g.burn_in);
    g.thin = ini.count("gibbs", "thin", g.thin);
    g.n_mc_z = ini.count("gibbs", "n_mc_z", g.n_mc_z);
    g.max_proposals = ini.count("gibbs", "max_proposals", g.max_proposals);
    const std::string zm = ini.text("gibbs", "z_marginal", to_string(g.z_marginal));
    if (zm == "conditional") {
        g.z_marginal = ZMarginal::conditional;
    } else if (zm == "factorized") {
        g.z_marginal = ZMarginal::factorized;
    } else {
        throw Error("config: gibbs.z_marginal must be 'conditional' or 'factorized'");
    }
    const std::string bs = ini.text("gibbs", "beta_sigma_update", "blocked");
    if (bs == "blocked") {
        g.beta_sigma_update = BetaSigmaUpdate::blocked;
    } else if (bs == "prior_rejection") {
        g.beta_sigma_update = BetaSigmaUpdate::prior_rejection;
    } else {
        throw Error("config: gibbs.beta_sigma_update must be 'blocked' or 'prior_rejection'");
    }

    SynthesisOptions& s = f.synthesis;
    s.n_param_draws = ini.count("synthesis", "param_draws", s.n_param_draws);
    s.n_x_draws = ini.count("synthesis", "x_draws", s.n_x_draws);
    s.grid_points = ini.count("synthesis", "grid_points", s.grid_points);
    s.grid_sd = ini.number("synthesis", "grid_sd", s.grid_sd);
    s.analytic_when_gaussian = ini.flag("synthesis", "analytic_when_gaussian", s.analytic_when_gaussian);
    f.student_t_agents = ini.flag("synthesis", "student_t_agents", f.student_t_agents);

    f.seed = static_cast<std::uint64_t>(ini.count("run", "seed", f.seed));
    f.warmup = ini.count("run", "warmup", f.warmup);
    f.keep_grids = ini.flag("run", "keep_grids", true);
    const std::string out = ini.text("run", "out_dir", "");
    if (!out.empty()) rc.out_dir = fs::path(out).is_absolute() ? fs::path(out) : base_dir / out;

    ini.reject_unknown({"truth"});
    f.validate();
    return rc;
}

void PanelConfig::validate() const {
    const std::size_t J = agents.size();
    if (J == 0) throw Error("panel: need at least one agent");
    if (q.size() != J || mu.size() != J || sd.size() != J || beta.size() != J)
        throw Error("panel: q, mu, sd and beta must each have one entry per agent");
    for (double v : sd) {
        if (!(v > 0.0)) throw Error("panel: sd entries must be positive");
    }
    if (J > 1 && correlations.empty()) throw Error("panel: need at least one correlation scenario");
    for (std::size_t i = 0; i < (J > 1 ? correlations.size() : 1); ++i) scenario(i).validate();
    if (posterior.grid.empty() && posterior.grid_points < 2) throw Error("panel: grid_points must be at least 2");
}

SynthesisConfig PanelConfig::scenario(std::size_t i) const {
    const auto J = static_cast<Eigen::Index>(agents.size());
    const double rho = J > 1 ? correlations.at(i) : 0.0;
    SynthesisConfig cfg;
    cfg.q = Eigen::Map<const Eigen::VectorXd>(q.data(), J);
    cfg.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), J);
    cfg.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), J);
    cfg.sigma.resize(J, J);
    for (Eigen::Index a = 0; a < J; ++a) {
        for (Eigen::Index b = 0; b < J; ++b) cfg.sigma(a, b) = (a == b ? 1.0 : rho) * sd[a] * sd[b];
    }
    cfg.tuning = tuning;
    return cfg;
}

PanelConfig default_panel_config() {
    PanelConfig p;
    p.tuning.r1 = 72.13;
    p.tuning.r2 = 2.89;
    p.tuning.d = 1.0;
    p.posterior.method = PosteriorMethod::analytic;
    return p;
}

PanelConfig load_panel_config(const fs::path& path) { return parse_panel_config(read_text(path, "config file")); }

PanelConfig parse_panel_config(const std::string& text) {
    Ini ini(text);
    PanelConfig p = default_panel_config();
    p.base = GaussianDensity(ini.number("panel", "base_mean", p.base.mean()),
                             ini.number("panel", "base_variance", p.base.variance()));
    std::vector<double> means, vars;
    for (const auto& a : p.agents) {
        means.push_back(a.mean());
        vars.push_back(a.variance());
    }
    means = ini.list("panel", "agent_means", means);
    vars = ini.list("panel", "agent_variances", vars);
    if (means.size() != vars.size()) throw Error("config: panel.agent_means and panel.agent_variances differ in length");
    p.agents.clear();
    for (std::size_t i = 0; i < means.size(); ++i) p.agents.emplace_back(means[i], vars[i]);
    const std::size_t J = p.agents.size();
    auto sized = [J](std::vector<double> v, double fill) {
        return v.size() == J ? v : std::vector<double>(J, fill);
    };
    p.q = ini.list("panel", "q", sized(p.q, 1.0 / static_cast<double>(J)));
    p.mu = ini.list("panel", "mu", sized(p.mu, 0.0));
    p.sd = ini.list("panel", "sd", sized(p.sd, 1.0));
    p.beta = ini.list("panel", "beta", sized(p.beta, 0.0));
    p.correlations = ini.list("panel", "correlations", p.correlations);

    p.tuning = read_tuning(ini, p.tuning.r1, p.tuning.r2, std::nullopt, p.tuning.d);

    const std::string method = ini.text("posterior", "method", "analytic");
    if (method == "analytic") {
        p.posterior.method = PosteriorMethod::analytic;
    } else if (method == "monte_carlo") {
        p.posterior.method = PosteriorMethod::monte_carlo;
    } else {
        throw Error("config: posterior.method must be 'analytic' or 'monte_carlo'");
    }
    p.posterior.n_draws = ini.count("posterior", "n_draws", p.posterior.n_draws);
    p.posterior.seed = ini.count("posterior", "seed", p.posterior.seed);
    p.posterior.grid_points = ini.count("posterior", "grid_points", p.posterior.grid_points);
    p.posterior.grid_sd = ini.number("posterior", "grid_sd", p.posterior.grid_sd);
    const std::string out = ini.text("run", "out_dir", "");
    if (!out.empty()) p.out_dir = out;

    ini.reject_unknown({});
    p.validate();
    return p;
}

std::vector<std::string> fit_output_files(bool with_grids) {
    std::vector<std::string> f{"step_records.csv", "correlations.csv", "weights.csv", "scores.csv"};
    if (with_grids) f.push_back("density_grids.csv");
    return f;
}

std::vector<std::string> synthesize_output_files() { return {"density_grids.csv", "summary.csv"}; }

FilterRun cmd_fit(const RunConfig& config) {
    if (config.data_path.empty()) throw Error("no data file given (set data.path or pass --data)");
    Series series = read_series_csv(config.data_path, config.date_column, config.value_column);
    if (config.log_transform) {
        for (double& v : series.values) {
            if (!(v > 0.0)) throw Error("log transform needs positive values");
            v = std::log(v);
        }
    }
    check_unique_labels(config.models);
    FilterRun run = run_filter(series.values, config.models, config.filter);

    const std::size_t n_models = config.models.size();
    const std::size_t J = n_models - 1;
    std::vector<std::string> labels;
    for (const auto& s : config.models) labels.push_back(s.label());

    std::vector<std::string> head{"t", "date", "status", "y", "mean", "variance", "mean_se"};
    for (double p : forecast_probabilities()) head.push_back(probability_tag(p));
    head.insert(head.end(), {"log_score", "c", "n"});
    for (std::size_t j = 1; j <= J; ++j) head.push_back("b_" + labels[j]);
    for (const auto& l : labels) head.push_back("mean_" + l);
    for (const auto& l : labels) head.push_back("variance_" + l);
    for (const auto& l : labels) head.push_back("log_score_" + l);
    head.insert(head.end(), {"bma_mean", "bma_log_score", "pool_mean", "pool_log_score", "x_acceptance",
                             "beta_sigma_acceptance", "q_acceptance"});
    for (const auto& l : labels) head.push_back("z_" + l);
    head.push_back("error");
    CsvWriter steps(head);

    std::vector<std::string> chead{"t", "date", "status"};
    for (std::size_t a = 1; a <= J; ++a) {
        for (std::size_t b = a + 1; b <= J; ++b) chead.push_back("corr_" + labels[a] + "_" + labels[b]);
    }
    for (std::size_t j = 1; j <= J; ++j) chead.push_back("sd_" + labels[j]);
    CsvWriter corr(chead);

    std::vector<std::string> whead{"t", "date", "status"};
    for (const auto& l : labels) whead.push_back("q_" + l);
    for (const auto& l : labels) whead.push_back("u_" + l);
    for (const auto& l : labels) whead.push_back("bma_" + l);
    CsvWriter weights(whead);

    CsvWriter grids({"t", "date", "y", "pdf"});

    for (const StepRecord& r : run.records) {
        const std::string date = series.dates[r.t];
        std::vector<std::string> row{std::to_string(r.t), date, to_string(r.status), format_number(r.y),
                                     format_number(r.mean), format_number(r.variance), format_number(r.mean_se)};
        append_numbers(row, r.quantiles);
        row.insert(row.end(), {format_number(r.log_score), format_number(r.c), format_number(r.n)});
        append_numbers(row, r.b);
        append_numbers(row, r.model_mean);
        append_numbers(row, r.model_variance);
        append_numbers(row, r.model_log_score);
        row.insert(row.end(), {format_number(r.bma_mean), format_number(r.bma_log_score),
                               format_number(r.pool_mean), format_number(r.pool_log_score),
                               format_number(r.x_acceptance), format_number(r.beta_sigma_acceptance),
                               format_number(r.q_acceptance)});
        append_numbers(row, r.z_frequencies);
        row.push_back(r.error);
        steps.row(row);

        std::vector<std::string> crow{std::to_string(r.t), date, to_string(r.status)};
        for (std::size_t a = 0; a < J; ++a) {
            for (std::size_t b = a + 1; b < J; ++b)
                crow.push_back(format_number(r.correlations(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))));
        }
        for (std::size_t j = 0; j < J; ++j) {
            const double v = r.S(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
            crow.push_back(format_number(std::isnan(v) ? v : std::sqrt(v)));
        }
        corr.row(crow);

        std::vector<std::string> wrow{std::to_string(r.t), date, to_string(r.status)};
        append_numbers(wrow, r.q_mean);
        append_numbers(wrow, r.u);
        append_numbers(wrow, r.bma_weights);
        weights.row(wrow);

        for (std::size_t i = 0; i < r.density.y.size(); ++i)
            grids.row({std::to_string(r.t), date, format_number(r.density.y[i]), format_number(r.density.pdf[i])});
    }

    CsvWriter scores({"method", "rmse", "mean_log_score", "rmse_ratio", "log_score_ratio"});
    for (const ScoreRow& s : run.scores)
        scores.row({s.name, format_number(s.rmse), format_number(s.mean_log_score), format_number(s.rmse_ratio),
                    format_number(s.log_score_ratio)});

    std::vector<std::pair<std::string, std::string>> files{{"step_records.csv", steps.str()},
                                                           {"correlations.csv", corr.str()},
                                                           {"weights.csv", weights.str()},
                                                           {"scores.csv", scores.str()}};
    if (config.filter.keep_grids) files.emplace_back("density_grids.csv", grids.str());
    commit_files(config.out_dir, files);
    return run;
}

std::vector<SynthesizedDensity> cmd_synthesize(const PanelConfig& config) {
    config.validate();
    const std::size_t J = config.agents.size();
    AgentPanel panel{config.base, {}};
    for (const auto& a : config.agents) panel.agents.emplace_back(a);
    const std::size_t n_scenarios = J > 1 ? config.correlations.size() : 1;

    std::vector<std::string> ghead{"scenario", "correlation", "y", "pdf", "pdf_se", "a0"};
    for (std::size_t j = 1; j <= J; ++j) ghead.push_back("a_" + std::to_string(j));
    for (std::size_t j = 1; j <= J; ++j) ghead.push_back("h_" + std::to_string(j));
    CsvWriter grids(ghead);
    std::vector<std::string> shead{"scenario", "correlation", "a0", "integral", "mean", "variance"};
    for (std::size_t j = 1; j <= J; ++j) shead.push_back("agent_mass_" + std::to_string(j));
    shead.push_back("agent_mass_total");
    CsvWriter summary(shead);

    std::vector<SynthesizedDensity> out;
    for (std::size_t s = 0; s < n_scenarios; ++s) {
        const double rho = J > 1 ? config.correlations[s] : std::numeric_limits<double>::quiet_NaN();
        SynthesizedDensity sd = mc_posterior(config.scenario(s), panel, config.posterior);
        const auto& g = sd.density;
        for (std::size_t i = 0; i < g.y.size(); ++i) {
            std::vector<std::string> row{std::to_string(s), format_number(rho), format_number(g.y[i]),
                                         format_number(g.pdf[i]), format_number(sd.density_se[i]),
                                         format_number(sd.a0)};
            for (std::size_t j = 0; j < J; ++j) row.push_back(format_number(sd.a[j][i]));
            for (std::size_t j = 0; j < J; ++j) row.push_back(format_number(sd.agent_pdf[j][i]));
            grids.row(row);
        }
        std::vector<std::string> row{std::to_string(s), format_number(rho), format_number(sd.a0),
                                     format_number(g.integral()), format_number(g.mean()),
                                     format_number(g.variance())};
        double total = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            row.push_back(format_number(sd.agent_mass(j)));
            total += sd.agent_mass(j);
        }
        row.push_back(format_number(total));
        summary.row(row);
        out.push_back(std::move(sd));
    }
    commit_files(config.out_dir, {{"density_grids.csv", grids.str()}, {"summary.csv", summary.str()}});
    return out;
}

Fixture cmd_fixtures(FixtureKind kind, std::uint64_t seed, const fs::path& out_dir, std::size_t length) {
    Fixture f = make_fixture(kind, seed, length);
    const std::string name = to_string(kind);

    std::ostringstream data;
    data << "date,value\n";
    for (std::size_t t = 0; t < f.series.size(); ++t) data << t << ',' << format_number(f.series[t]) << '\n';

    std::ostringstream cfg;
    cfg << "# synthetic series '" << name << "', seed " << seed << "\n\n";
    cfg << "[data]\npath = " << name << ".csv\n";
    for (std::size_t k = 0; k < f.specs.size(); ++k) {
        const DLMSpec& s = f.specs[k];
        cfg << "\n[model" << k << "]\n";
        cfg << "kind = " << (s.kind == DlmKind::tvar ? "tvar" : "linear_growth") << '\n';
        if (s.kind == DlmKind::tvar) cfg << "order = " << s.order << '\n';
        cfg << "state_discount = " << format_number(s.state_discount) << '\n';
        cfg << "obs_variance_discount = " << format_number(s.obs_variance_discount) << '\n';
        cfg << "c0 = " << format_number(s.c0) << '\n';
        cfg << "n0 = " << format_number(s.n0) << '\n';
        cfg << "s0 = " << format_number(s.s0) << '\n';
        if (s.forecast_offset != 0.0) cfg << "offset = " << format_number(s.forecast_offset) << '\n';
        if (!s.name.empty()) cfg << "name = " << s.name << '\n';
    }
    cfg << "\n[truth]\n";
    for (const auto& [k, v] : f.truth) cfg << k << " = " << v << '\n';

    commit_files(out_dir, {{name + ".csv", data.str()}, {name + ".cfg", cfg.str()}});
    return f;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Mixture-model Bayesian predictive synthesis"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, kind = "ar1";
    std::uint64_t seed = 1;
    std::size_t length = 110;
    bool log_transform = false, alpha_one = false;

    auto* fit = app.add_subcommand("fit", "Run the sequential filter over a CSV series");
    fit->add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
    fit->add_option("--data", data_path, "CSV series; overrides data.path");
    fit->add_option("--seed", seed, "Random seed; overrides run.seed");
    fit->add_option("--out-dir", out_dir, "Output directory; overrides run.out_dir");
    fit->add_flag("--log-transform", log_transform, "Take logs of the series before fitting");

    auto* syn = app.add_subcommand("synthesize", "Synthesize one panel of agent densities");
    syn->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    syn->add_option("--seed", seed, "Monte Carlo seed; overrides posterior.seed");
    syn->add_option("--out-dir", out_dir, "Output directory");
    syn->add_flag("--alpha-one", alpha_one, "Use constant agent weights (linear pool)");

    auto* fix = app.add_subcommand("fixtures", "Write a synthetic series and a matching config");
    fix->add_option("--kind", kind, "ar1, biased_agents, regime_shift or tvar2");
    fix->add_option("--seed", seed, "Generator seed");
    fix->add_option("--out-dir", out_dir, "Output directory");
    fix->add_option("--length", length, "Number of observations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (fit->parsed()) {
            RunConfig rc = load_run_config(config_path);
            if (!data_path.empty()) rc.data_path = data_path;
            if (fit->count("--seed")) rc.filter.seed = seed;
            if (!out_dir.empty()) rc.out_dir = out_dir;
            if (log_transform) rc.log_transform = true;
            const FilterRun run = cmd_fit(rc);
            std::size_t failed = 0;
            for (const auto& r : run.records) failed += r.status == StepStatus::failed;
            std::cout << "wrote " << run.records.size() << " steps to " << rc.out_dir.string() << '\n';
            if (failed) std::cerr << "warning: " << failed << " steps kept their prior after a sampler failure\n";
            for (const auto& s : run.scores)
                std::cout << s.name << " rmse_ratio " << format_number(s.rmse_ratio) << " log_score_ratio "
                          << format_number(s.log_score_ratio) << '\n';
        } else if (syn->parsed()) {
            PanelConfig pc = config_path.empty() ? default_panel_config() : load_panel_config(config_path);
            if (syn->count("--seed")) pc.posterior.seed = seed;
            if (!out_dir.empty()) pc.out_dir = out_dir;
            if (alpha_one) pc.tuning.shape = AgentWeightShape::constant;
            const auto results = cmd_synthesize(pc);
            for (std::size_t s = 0; s < results.size(); ++s) {
                double mass = 0.0;
                for (std::size_t j = 0; j < pc.agents.size(); ++j) mass += results[s].agent_mass(j);
                std::cout << "scenario " << s << " agent mass " << format_number(mass) << '\n';
            }
        } else if (fix->parsed()) {
            cmd_fixtures(parse_fixture_kind(kind), seed, out_dir.empty() ? fs::path(".") : fs::path(out_dir), length);
            std::cout << "wrote " << kind << ".csv and " << kind << ".cfg\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "mixbps: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace mixbps
