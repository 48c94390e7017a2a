// Python bindings. Grids cross the boundary as numpy arrays indexed [y, x];
// displacement fields carry a trailing axis of length 2 holding (dx, dy).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hyperpredict/encoder.hpp"
#include "hyperpredict/metrics.hpp"
#include "hyperpredict/pipeline.hpp"
#include "hyperpredict/registration.hpp"
#include "hyperpredict/selection.hpp"
#include "hyperpredict/synth.hpp"

namespace py = pybind11;
using namespace hyperpredict;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U32 = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

template <class A>
Shape shape_of(const A& a, int ndim) {
    if (a.ndim() != ndim) throw ConfigError("expected a " + std::to_string(ndim) + "-d array");
    return {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))};
}

ScalarGrid to_scalar(const F64& a) {
    const Shape s = shape_of(a, 2);
    return ScalarGrid(s, std::vector<double>(a.data(), a.data() + s.size()));
}

LabelGrid to_labels(const U32& a) {
    const Shape s = shape_of(a, 2);
    return LabelGrid(s, std::vector<std::uint32_t>(a.data(), a.data() + s.size()));
}

DisplacementField to_field(const F64& a) {
    const Shape s = shape_of(a, 3);
    if (a.shape(2) != 2) throw ConfigError("field arrays must have shape (ny, nx, 2)");
    DisplacementField u(s);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = {a.data()[2 * i], a.data()[2 * i + 1]};
    return u;
}

template <class T>
py::array_t<T> from_grid(const Grid<T>& g) {
    py::array_t<T> out({g.ny(), g.nx()});
    std::copy(g.begin(), g.end(), out.mutable_data());
    return out;
}

py::array_t<double> from_field(const DisplacementField& u) {
    py::array_t<double> out({u.ny(), u.nx(), 2});
    double* d = out.mutable_data();
    for (std::size_t i = 0; i < u.size(); ++i) {
        d[2 * i] = u[i].x;
        d[2 * i + 1] = u[i].y;
    }
    return out;
}

py::dict pair_to_dict(const ImagePair& p) {
    py::dict d;
    d["id"] = p.id;
    d["fixed"] = from_grid(p.fixed);
    d["moving"] = from_grid(p.moving);
    d["fixed_labels"] = from_grid(p.fixed_labels);
    d["moving_labels"] = from_grid(p.moving_labels);
    return d;
}

ImagePair pair_from_dict(const py::dict& d) {
    ImagePair p;
    p.id = d.contains("id") ? d["id"].cast<std::string>() : "pair";
    p.fixed = to_scalar(d["fixed"].cast<F64>());
    p.moving = to_scalar(d["moving"].cast<F64>());
    p.fixed_labels = to_labels(d["fixed_labels"].cast<U32>());
    p.moving_labels = to_labels(d["moving_labels"].cast<U32>());
    return p;
}

HyperparamPoint to_hp(const std::map<std::string, double>& m) {
    HyperparamPoint hp;
    for (const auto& [k, v] : m) hp.set(k, v);
    return hp;
}

PipelineConfig pipeline_config(const std::string& json) {
    PipelineConfig cfg = config_from_json_text(json.empty() ? "{}" : json);
    cfg.apply_seed();
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_hyperpredict, m) {
    m.doc() = "Learned prediction of registration quality across regularization hyperparameters";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<InfeasibleSelection>(m, "InfeasibleSelection", PyExc_RuntimeError);

    m.def(
        "generate_pair",
        [](int index, int nx, int ny, std::uint32_t label_count, double amplitude, std::uint64_t seed) {
            DatasetConfig c;
            c.shape = {nx, ny};
            c.label_count = label_count;
            c.amplitude = amplitude;
            c.seed = seed;
            c.validate();
            return pair_to_dict(generate_pair(c, index));
        },
        py::arg("index") = 0, py::arg("nx") = 64, py::arg("ny") = 64, py::arg("label_count") = 8,
        py::arg("amplitude") = 3.0, py::arg("seed") = 0, "Generate one synthetic image pair as a dict of arrays.");

    m.def("dice", [](const U32& a, const U32& b, std::uint32_t label) { return dice(to_labels(a), to_labels(b), label); },
          py::arg("a"), py::arg("b"), py::arg("label"));
    m.def("dice_all",
          [](const U32& a, const U32& b, std::uint32_t n) { return dice_all(to_labels(a), to_labels(b), n); },
          py::arg("a"), py::arg("b"), py::arg("label_count"));
    m.def("jacobian_determinant", [](const F64& u) { return from_grid(jacobian_determinant(to_field(u))); },
          py::arg("field"));
    m.def("count_folded", [](const F64& jac, double eps) { return count_folded(to_scalar(jac), eps).count; },
          py::arg("jacobian"), py::arg("epsilon") = 0.0);
    m.def("warp", [](const F64& image, const F64& u) { return from_grid(warp(to_scalar(image), to_field(u))); },
          py::arg("image"), py::arg("field"));

    m.def(
        "register_pair",
        [](const py::dict& pair, const std::map<std::string, double>& hp, std::uint32_t label_count) {
            const ImagePair p = pair_from_dict(pair);
            RegistrationConfig cfg;
            const HyperparamPoint point = to_hp(hp);
            if (!point.contains("lambda")) cfg.mode = HyperparamMode::multi;
            RegistrationResult r;
            {
                py::gil_scoped_release release;
                r = register_pair(p, point, cfg);
            }
            const auto t = evaluate_registration(p, r.field, label_count);
            py::dict d;
            d["field"] = from_field(r.field);
            d["dice"] = t.metrics.dice;
            d["nfv_percent"] = t.metrics.nfv_percent;
            d["nfv"] = t.nfv;
            return d;
        },
        py::arg("pair"), py::arg("hyperparams"), py::arg("label_count") = 8,
        "Register a pair with the classical optimizer and score the result.");

    m.def(
        "select_optimal",
        [](const std::vector<std::map<std::string, double>>& hps, const std::vector<std::vector<double>>& dice,
           const std::vector<double>& nfv, double nfv_ceiling, std::optional<std::uint32_t> label) {
            if (hps.size() != dice.size() || hps.size() != nfv.size()) throw ConfigError("sweep columns differ in length");
            SweepTable t;
            for (std::size_t i = 0; i < hps.size(); ++i) t.push_back({to_hp(hps[i]), {dice[i], nfv[i]}});
            SelectionCriterion c;
            if (label) c = SelectionCriterion::single_label_of(*label);
            c.nfv_ceiling = nfv_ceiling;
            c.validate();
            const Selection s = select_optimal(t, c);
            py::dict d;
            d["row"] = s.row;
            d["hyperparams"] = s.hp.values();
            d["objective"] = s.objective;
            d["feasible"] = s.feasible;
            return d;
        },
        py::arg("hyperparams"), py::arg("dice"), py::arg("nfv_percent"), py::arg("nfv_ceiling") = 0.5,
        py::arg("label") = std::nullopt, "Pick the best feasible row of a sweep table.");

    m.def("make_grid", &make_grid, py::arg("lo_exp"), py::arg("hi_exp"), py::arg("n"));

    py::class_<Predictor>(m, "Predictor")
        .def_static("load", py::overload_cast<const std::filesystem::path&>(&Predictor::load), py::arg("path"))
        .def_property_readonly("label_count", &Predictor::label_count)
        .def_property_readonly("hp_names", &Predictor::hp_names)
        .def(
            "encode",
            [](const Predictor& p, const py::dict& pair) { return encode(pair_from_dict(pair), p.encoder()).values; },
            py::arg("pair"))
        .def(
            "sweep",
            [](const Predictor& p, const std::vector<double>& encoding, const std::vector<double>& lambdas) {
                const auto table = sweep_pair(p, Encoding{encoding}, grid_points(p.hp_names().front(), lambdas));
                py::array_t<double> dice({static_cast<py::ssize_t>(table.size()), static_cast<py::ssize_t>(p.label_count())});
                py::array_t<double> nfv(static_cast<py::ssize_t>(table.size()));
                for (std::size_t i = 0; i < table.size(); ++i) {
                    std::copy(table[i].metrics.dice.begin(), table[i].metrics.dice.end(),
                              dice.mutable_data() + i * p.label_count());
                    nfv.mutable_data()[i] = table[i].metrics.nfv_percent;
                }
                return py::make_tuple(dice, nfv);
            },
            py::arg("encoding"), py::arg("values"), "Predicted (dice, %nfv) over values of the first hyperparameter.");

    m.def(
        "run",
        [](const std::string& command, const std::filesystem::path& out_dir, const std::string& config_json) {
            const PipelineConfig cfg = pipeline_config(config_json);
            const Workspace ws{out_dir};
            py::gil_scoped_release release;
            std::map<std::string, double> summary;
            if (command == "gen-data") {
                summary["pairs"] = static_cast<double>(generate_dataset(cfg, ws).size());
            } else if (command == "precompute") {
                summary["rows"] = static_cast<double>(cmd_precompute(cfg, ws).rows);
            } else if (command == "encode") {
                summary["pairs"] = static_cast<double>(cmd_encode(cfg, ws).size());
            } else if (command == "train") {
                summary["epochs"] = static_cast<double>(cmd_train(cfg, ws).log.size());
            } else if (command == "exp1") {
                summary = cmd_experiment1(cfg, ws).summary;
            } else if (command == "exp2") {
                summary = cmd_experiment2(cfg, ws).summary;
            } else if (command == "exp3") {
                summary = cmd_experiment3(cfg, ws).summary;
            } else {
                throw ConfigError("unknown command: " + command);
            }
            return summary;
        },
        py::arg("command"), py::arg("out_dir"), py::arg("config_json") = "",
        "Run one pipeline stage (gen-data, precompute, encode, train, exp1, exp2, exp3) in a workspace.");
}
