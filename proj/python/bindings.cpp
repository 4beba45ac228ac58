#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mixbps/cli.hpp"
#include "mixbps/fixtures.hpp"
#include "mixbps/gibbs.hpp"
#include "mixbps/multi_agent.hpp"
#include "mixbps/single_agent.hpp"
#include "mixbps/timeseries.hpp"
#include "mixbps/vb.hpp"

namespace py = pybind11;
using namespace mixbps;

namespace {

py::dict synthesized_to_dict(const SynthesizedDensity& s) {
    py::dict d;
    d["y"] = s.density.y;
    d["pdf"] = s.density.pdf;
    d["pdf_se"] = s.density_se;
    d["a"] = s.a;
    d["agent_pdf"] = s.agent_pdf;
    d["a0"] = s.a0;
    d["a0_se"] = s.a0_se;
    std::vector<double> mass;
    for (std::size_t j = 0; j < s.a.size(); ++j) mass.push_back(s.agent_mass(j));
    d["agent_mass"] = mass;
    return d;
}

py::dict run_to_dict(const FilterRun& run) {
    std::vector<std::string> status;
    std::vector<double> y, mean, variance, log_score, bma_mean, pool_mean;
    std::vector<std::vector<double>> b, q_mean, bma_weights;
    for (const auto& r : run.records) {
        status.push_back(to_string(r.status));
        y.push_back(r.y);
        const bool scored = r.status != StepStatus::warmup;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        mean.push_back(scored ? r.mean : nan);
        variance.push_back(scored ? r.variance : nan);
        log_score.push_back(scored ? r.log_score : nan);
        bma_mean.push_back(scored ? r.bma_mean : nan);
        pool_mean.push_back(scored ? r.pool_mean : nan);
        b.emplace_back(r.b.data(), r.b.data() + r.b.size());
        q_mean.emplace_back(r.q_mean.data(), r.q_mean.data() + r.q_mean.size());
        bma_weights.push_back(r.bma_weights);
    }
    py::list scores;
    for (const auto& s : run.scores) {
        py::dict row;
        row["name"] = s.name;
        row["rmse"] = s.rmse;
        row["mean_log_score"] = s.mean_log_score;
        row["rmse_ratio"] = s.rmse_ratio;
        row["log_score_ratio"] = s.log_score_ratio;
        scores.append(row);
    }
    std::vector<std::string> labels;
    for (const auto& s : run.specs) labels.push_back(s.label());
    py::dict d;
    d["models"] = labels;
    d["status"] = status;
    d["y"] = y;
    d["mean"] = mean;
    d["variance"] = variance;
    d["log_score"] = log_score;
    d["b"] = b;
    d["q_mean"] = q_mean;
    d["bma_weights"] = bma_weights;
    d["bma_mean"] = bma_mean;
    d["pool_mean"] = pool_mean;
    d["scores"] = scores;
    return d;
}

std::vector<Density> to_densities(const py::sequence& agents) {
    std::vector<Density> out;
    for (const auto& a : agents) {
        if (py::isinstance<GaussianDensity>(a)) {
            out.emplace_back(a.cast<GaussianDensity>());
        } else if (py::isinstance<StudentTDensity>(a)) {
            out.emplace_back(a.cast<StudentTDensity>());
        } else {
            throw py::type_error("agents must be Gaussian or StudentT densities");
        }
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mixture-model Bayesian predictive synthesis";

    static py::exception<Error> error(m, "MixbpsError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), e.what());
        }
    });

    py::class_<GaussianDensity>(m, "Gaussian")
        .def(py::init<double, double>(), py::arg("mean"), py::arg("variance"))
        .def_property_readonly("mean", &GaussianDensity::mean)
        .def_property_readonly("variance", &GaussianDensity::variance)
        .def("pdf", py::vectorize(&GaussianDensity::pdf))
        .def("__repr__", [](const GaussianDensity& g) {
            return "Gaussian(mean=" + format_number(g.mean()) + ", variance=" + format_number(g.variance()) + ")";
        });

    py::class_<StudentTDensity>(m, "StudentT")
        .def(py::init<double, double, double>(), py::arg("location"), py::arg("scale"), py::arg("dof"))
        .def_property_readonly("location", &StudentTDensity::location)
        .def_property_readonly("scale", &StudentTDensity::scale)
        .def_property_readonly("dof", &StudentTDensity::dof)
        .def_property_readonly("variance", &StudentTDensity::variance)
        .def("pdf", py::vectorize(&StudentTDensity::pdf));

    py::enum_<AgentWeightShape>(m, "WeightShape")
        .value("well", AgentWeightShape::well)
        .value("constant", AgentWeightShape::constant);

    py::class_<BpsTuning>(m, "Tuning")
        .def(py::init([](double r1, double r2, double d, AgentWeightShape shape) {
                 BpsTuning t{r1, r2, d, shape};
                 t.validate();
                 return t;
             }),
             py::arg("r1") = 18.0337, py::arg("r2") = 0.178551, py::arg("d") = 0.5,
             py::arg("shape") = AgentWeightShape::well)
        .def_static("from_r3", &BpsTuning::from_r3, py::arg("r1"), py::arg("r3"), py::arg("d"))
        .def_readwrite("r1", &BpsTuning::r1)
        .def_readwrite("r2", &BpsTuning::r2)
        .def_readwrite("d", &BpsTuning::d)
        .def_readwrite("shape", &BpsTuning::shape);

    m.def("r2_from_r3", &r2_from_r3, py::arg("r1"), py::arg("r3"));
    m.def("r3_from_r2", &r3_from_r2, py::arg("r1"), py::arg("r2"));
    m.def(
        "well_geometry",
        [](double r1, double r2, double d, double delta) {
            const WellGeometry g = well_geometry(r1, r2, d, delta);
            return py::make_tuple(g.bimodal, g.offset, g.max_value);
        },
        py::arg("r1"), py::arg("r2"), py::arg("d"), py::arg("delta") = 1.0,
        "(bimodal, argmax offset, maximum weight) of an agent weight in its residual.");

    m.def(
        "single_agent_update",
        [](double q, const GaussianDensity& base, double mu, double sigma2, double r, double beta,
           const GaussianDensity& h, const std::vector<double>& y) {
            SingleAgentConfig c;
            c.q = q;
            c.base = base;
            c.mu = mu;
            c.sigma2 = sigma2;
            c.r = r;
            c.beta = beta;
            c.shape = WeightShape::consensus;
            const SingleAgentPosterior post = posterior_update(c, Density{h});
            std::vector<double> pdf;
            for (double v : y) pdf.push_back(post.pdf(v));
            py::dict d;
            d["c_h"] = post.c_h;
            d["agent_weight"] = post.agent_weight;
            d["base_weight"] = post.base_weight;
            d["pdf"] = pdf;
            return d;
        },
        py::arg("q"), py::arg("base"), py::arg("mu"), py::arg("sigma2"), py::arg("r"), py::arg("beta"), py::arg("h"),
        py::arg("y"), "Closed-form single-agent update under the consensus weight.");

    m.def(
        "synthesize",
        [](const GaussianDensity& base, const py::sequence& agents, const Eigen::VectorXd& q,
           const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, std::optional<Eigen::VectorXd> beta,
           const BpsTuning& tuning, const std::string& method, std::size_t n_draws, std::uint64_t seed,
           std::vector<double> grid, std::size_t grid_points) {
            SynthesisConfig c{q, mu, sigma, beta ? *beta : Eigen::VectorXd::Zero(q.size()), tuning};
            PosteriorOptions o;
            if (method == "analytic") {
                o.method = PosteriorMethod::analytic;
            } else if (method == "monte_carlo") {
                o.method = PosteriorMethod::monte_carlo;
            } else {
                throw Error("method must be 'analytic' or 'monte_carlo'");
            }
            o.n_draws = n_draws;
            o.seed = seed;
            o.grid = std::move(grid);
            o.grid_points = grid_points;
            const AgentPanel panel{base, to_densities(agents)};
            SynthesizedDensity s;
            {
                py::gil_scoped_release release;
                s = mc_posterior(c, panel, o);
            }
            return synthesized_to_dict(s);
        },
        py::arg("base"), py::arg("agents"), py::arg("q"), py::arg("mu"), py::arg("sigma"),
        py::arg("beta") = py::none(), py::arg("tuning") = BpsTuning{}, py::arg("method") = "analytic",
        py::arg("n_draws") = 10000, py::arg("seed") = 1, py::arg("grid") = std::vector<double>{},
        py::arg("grid_points") = 2001, "One-shot synthesis of a panel of agent densities on a grid.");

    m.def(
        "fit_niw",
        [](const std::vector<Eigen::VectorXd>& beta, const std::vector<Eigen::MatrixXd>& sigma) {
            const NIWState s = fit_niw(beta, sigma);
            py::dict d;
            d["b"] = s.b;
            d["c"] = s.c;
            d["n"] = s.n;
            d["S"] = s.S;
            return d;
        },
        py::arg("beta"), py::arg("sigma"));
    m.def(
        "sample_niw",
        [](const Eigen::VectorXd& b, double c, double n, const Eigen::MatrixXd& S, std::size_t count,
           std::uint64_t seed) {
            NIWState s{b, c, n, S};
            s.validate();
            Rng rng = make_rng(seed);
            std::vector<Eigen::VectorXd> betas;
            std::vector<Eigen::MatrixXd> sigmas;
            for (std::size_t k = 0; k < count; ++k) {
                NIWDraw d = sample_niw(s, rng);
                betas.push_back(std::move(d.beta));
                sigmas.push_back(std::move(d.sigma));
            }
            return py::make_tuple(betas, sigmas);
        },
        py::arg("b"), py::arg("c"), py::arg("n"), py::arg("S"), py::arg("count"), py::arg("seed") = 1);
    m.def(
        "fit_dirichlet", [](const std::vector<Eigen::VectorXd>& q) { return fit_dirichlet(q).u; }, py::arg("q"));

    m.def(
        "make_fixture",
        [](const std::string& kind, std::uint64_t seed, std::size_t length) {
            const Fixture f = make_fixture(parse_fixture_kind(kind), seed, length);
            py::dict d;
            d["series"] = f.series;
            d["truth"] = f.truth;
            std::vector<std::string> labels;
            for (const auto& s : f.specs) labels.push_back(s.label());
            d["models"] = labels;
            return d;
        },
        py::arg("kind"), py::arg("seed") = 1, py::arg("length") = 110);

    m.def(
        "fit_fixture",
        [](const std::string& kind, std::uint64_t fixture_seed, std::size_t length, std::uint64_t seed,
           std::size_t n_iter, std::size_t burn_in) {
            const Fixture f = make_fixture(parse_fixture_kind(kind), fixture_seed, length);
            FilterConfig cfg = parse_run_config("").filter;
            cfg.seed = seed;
            cfg.gibbs.n_iter = n_iter;
            cfg.gibbs.burn_in = burn_in;
            FilterRun run;
            {
                py::gil_scoped_release release;
                run = run_filter(f.series, f.specs, cfg);
            }
            return run_to_dict(run);
        },
        py::arg("kind"), py::arg("fixture_seed") = 1, py::arg("length") = 110, py::arg("seed") = 1,
        py::arg("n_iter") = 2000, py::arg("burn_in") = 500,
        "Runs the sequential filter with default settings on a synthetic fixture.");

    m.def(
        "fit_series",
        [](const std::vector<double>& series, const std::string& config_text, std::optional<std::uint64_t> seed) {
            RunConfig rc = parse_run_config(config_text);
            if (seed) rc.filter.seed = *seed;
            FilterRun run;
            {
                py::gil_scoped_release release;
                run = run_filter(series, rc.models, rc.filter);
            }
            return run_to_dict(run);
        },
        py::arg("series"), py::arg("config") = "", py::arg("seed") = py::none(),
        "Runs the sequential filter on a series; `config` is INI text as accepted by the command line.");

    m.def(
        "main",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "mixbps");
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Runs the command line tool in-process and returns its exit status.");
}
