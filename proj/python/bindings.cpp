// Python bindings: configs and results cross the boundary as plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/numpy.h>

#include <string>
#include <vector>

#include "pixtime/config.hpp"
#include "pixtime/data.hpp"
#include "pixtime/errors.hpp"
#include "pixtime/harness.hpp"
#include "pixtime/metrics.hpp"

namespace py = pybind11;
using namespace pixtime;

namespace {

nlohmann::json to_json(const py::handle& obj) {
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(text);
}

template <class J>
py::object to_py(const J& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

ExperimentConfig parse_config(const py::handle& obj) {
    if (py::isinstance<py::str>(obj)) {
        return ExperimentConfig::load(obj.cast<std::string>());
    }
    if (!py::isinstance<py::dict>(obj)) {
        throw ConfigError("config must be a dict or a path");
    }
    return ExperimentConfig::from_json(to_json(obj));
}

py::dict metrics_dict(const ForecastMetrics& m) {
    py::dict d;
    d["mse"] = m.mse;
    d["mae"] = m.mae;
    d["mse_by_step"] = m.mse_by_step;
    d["mae_by_step"] = m.mae_by_step;
    d["rows"] = m.rows;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Federated PiXTime forecasting core";
    m.attr("__version__") = build_id();

    // Leaked on purpose: the types must outlive the module.
    static py::handle base = py::exception<Error>(m, "Error").release();
    static py::handle config_error = py::exception<ConfigError>(m, "ConfigError", base).release();
    static py::handle data_error = py::exception<DataError>(m, "DataError", base).release();
    static py::handle format_error = py::exception<FormatError>(m, "FormatError", base).release();
    static py::handle divergence = py::exception<DivergenceError>(m, "DivergenceError", base).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const DivergenceError& e) {
            py::object inst = divergence(e.what());
            inst.attr("node_id") = e.node_id();
            inst.attr("step") = e.step();
            PyErr_SetObject(divergence.ptr(), inst.ptr());
        } catch (const ConfigError& e) {
            PyErr_SetString(config_error.ptr(), e.what());
        } catch (const DataError& e) {
            PyErr_SetString(data_error.ptr(), e.what());
        } catch (const FormatError& e) {
            PyErr_SetString(format_error.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    m.def(
        "load_config",
        [](const py::handle& cfg) { return to_py(parse_config(cfg).to_json()); },
        py::arg("config"),
        "Validate a config (dict or JSON path) and return it with every default filled in.");

    m.def(
        "run_experiment",
        [](const py::handle& cfg, bool write_files) {
            const ExperimentConfig c = parse_config(cfg);
            ExperimentOutput out;
            {
                py::gil_scoped_release release;
                out = run_experiment(c, write_files);
            }
            py::dict d;
            d["metrics"] = to_py(out.metrics);
            d["rounds_csv"] = out.log.csv();
            return d;
        },
        py::arg("config"), py::arg("write_files") = true,
        "Run the experiment named by config['mode']; returns metrics and the round log.");

    m.def(
        "gradcheck",
        [](const py::handle& cfg, std::uint64_t seed) {
            const ExperimentConfig c = cfg.is_none() ? ExperimentConfig{} : parse_config(cfg);
            std::vector<GradCheckResult> results;
            {
                py::gil_scoped_release release;
                results = run_gradcheck(c.gradcheck, seed);
            }
            py::list out;
            for (const GradCheckResult& r : results) {
                py::dict d;
                d["task"] = task_name(r.task);
                d["max_rel_error"] = r.report.max_rel_error;
                d["worst_param"] = r.report.worst_param;
                d["passed"] = r.report.passed;
                out.append(d);
            }
            return out;
        },
        py::arg("config") = py::none(), py::arg("seed") = 0,
        "Finite-difference check of every workflow on a tiny model.");

    m.def(
        "generate_synthetic",
        [](std::size_t n_vars, std::size_t length, std::uint64_t seed, double noise) {
            SyntheticSpec spec;
            spec.n_vars = n_vars;
            spec.length = length;
            spec.seed = seed;
            spec.noise = noise;
            spec.drivers = std::min<std::size_t>(spec.drivers, n_vars > 1 ? n_vars - 1 : 1);
            const RawDataset d = generate_synthetic(spec);
            py::array_t<double> values({d.values.rows, d.values.cols});
            std::copy(d.values.values.begin(), d.values.values.end(), values.mutable_data());
            return py::make_tuple(d.column_names, values);
        },
        py::arg("n_vars") = 8, py::arg("length") = 4000, py::arg("seed") = 0, py::arg("noise") = 0.1,
        "Synthetic dataset: (column names, rows x columns array); the target is the last column.");

    m.def(
        "load_csv",
        [](const std::string& path) {
            const RawDataset d = load_csv(path);
            py::array_t<double> values({d.values.rows, d.values.cols});
            std::copy(d.values.values.begin(), d.values.values.end(), values.mutable_data());
            return py::make_tuple(d.column_names, values);
        },
        py::arg("path"));

    m.def(
        "compute_metrics",
        [](const std::vector<double>& pred, const std::vector<double>& truth, std::size_t horizon) {
            return metrics_dict(compute_metrics(pred, truth, horizon));
        },
        py::arg("pred"), py::arg("truth"), py::arg("horizon"),
        "MSE and MAE of flat rows x horizon blocks, with per-step breakdowns.");

    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("purpose"), py::arg("index") = 0);
}
