#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pime/cli.hpp"
#include "pime/explainer.hpp"
#include "pime/gradcheck.hpp"
#include "pime/io.hpp"

namespace py = pybind11;
using namespace pime;

namespace {

Tensor tensor_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    std::vector<std::size_t> shape(arr.ndim());
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<std::size_t>(arr.shape(i));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> tensor_to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> arr(shape);
    std::copy(t.data(), t.data() + t.size(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_pime, m) {
    m.doc() = "Prototype-based information-bottleneck brain-network classifier with MCTS "
              "explanations";

    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericalError>(m, "NumericalError");

    m.def("pearson_fc",
          [](py::array_t<double> series) { return tensor_to_array(pearson_fc(tensor_from_array(series))); },
          py::arg("series"), "Pearson correlation matrix of a C x T series (zero diagonal)");
    m.def("threshold_topk",
          [](py::array_t<double> fc, double keep_ratio) {
              return tensor_to_array(threshold_topk(tensor_from_array(fc), keep_ratio));
          },
          py::arg("fc"), py::arg("keep_ratio"));
    m.def("kl_diag_gaussian",
          [](py::array_t<double> mu, py::array_t<double> log_var) {
              return kl_diag_gaussian(tensor_from_array(mu), tensor_from_array(log_var));
          },
          py::arg("mu"), py::arg("log_var"));
    m.def("activations_from_distances",
          [](py::array_t<double> d) { return tensor_to_array(activations_from_distances(tensor_from_array(d))); },
          py::arg("distances"));
    m.def("score_from_distance", &score_from_distance, py::arg("d"), py::arg("epsilon") = 1e-6);
    m.def("stability",
          [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
              Stability s = stability(a, b);
              return py::make_tuple(s.jaccard, s.dice);
          },
          py::arg("set_a"), py::arg("set_b"), "Returns (jaccard, dice)");
    m.def("default_target_size", &default_target_size, py::arg("regions"));

    m.def("synth_dataset_to_dir",
          [](const std::string& out_dir, std::size_t n_per_class, std::size_t regions,
             std::size_t timepoints, const std::vector<std::size_t>& planted, double effect_size,
             std::uint64_t seed) {
              SynthSpec spec;
              spec.n_per_class = n_per_class;
              spec.regions = regions;
              spec.timepoints = timepoints;
              spec.planted_regions = planted;
              spec.effect_size = effect_size;
              spec.seed = seed;
              Dataset ds = synth_dataset(spec);
              save_dataset(ds, out_dir, &spec);
              return ds.recordings.size();
          },
          py::arg("out_dir"), py::arg("n_per_class") = 50, py::arg("regions") = 20,
          py::arg("timepoints") = 120,
          py::arg("planted") = std::vector<std::size_t>{2, 5, 11, 17},
          py::arg("effect_size") = 2.0, py::arg("seed") = 0);

    m.def("run_gradcheck",
          [](std::size_t n_graphs, std::uint64_t seed, double tol) {
              GradCheckOptions opt;
              opt.n_graphs = n_graphs;
              opt.seed = seed;
              opt.tol = tol;
              GradCheckReport report = run_gradcheck(opt);
              py::dict out;
              for (const auto& tr : report.terms)
                  out[py::str(tr.term)] = py::make_tuple(tr.max_rel_err, tr.pass);
              out["all_pass"] = report.all_pass;
              return out;
          },
          py::arg("n_graphs") = 5, py::arg("seed") = 7, py::arg("tol") = 1e-4);

    m.def("run_cli", &run_cli, py::arg("args"),
          "Invoke the command-line interface; returns the exit code");
}
