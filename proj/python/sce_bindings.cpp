#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sce/checkpoint.hpp"
#include "sce/cli.hpp"
#include "sce/evaluation.hpp"
#include "sce/training.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> as_span(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

Array to_array(const sce::Vector& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array to_array(const sce::Matrix& m) {
  Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.flat().begin(), m.flat().end(), out.mutable_data());
  return out;
}

sce::ItemInput input_of(const Array& visual, const std::optional<Array>& text) {
  return {as_span(visual), text ? as_span(*text) : std::span<const double>{}};
}

py::dict shape_dict(const sce::ModelShape& s) {
  py::dict d;
  d["feature_dim"] = s.feature_dim;
  d["embed_dim"] = s.embed_dim;
  d["conditions"] = s.conditions;
  d["text_dim"] = s.text_dim;
  d["branch_mode"] = sce::to_string(s.mode);
  d["encoder_hidden"] = s.encoder_hidden;
  d["branch_hidden"] = s.branch_hidden;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sce, m) {
  m.doc() = "Similarity condition embedding networks";

  py::register_exception<sce::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<sce::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<sce::NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<sce::IoError>(m, "IoError", PyExc_OSError);

  py::class_<sce::SceModel>(m, "Model")
      .def_static(
          "create",
          [](std::size_t feature_dim, std::size_t embed_dim, std::size_t conditions, const std::string& branch_mode,
             std::size_t text_dim, std::uint64_t seed) {
            sce::ModelShape s;
            s.feature_dim = feature_dim;
            s.embed_dim = embed_dim;
            s.conditions = conditions;
            s.text_dim = text_dim;
            s.mode = sce::parse_branch_mode(branch_mode);
            s.branch_hidden = sce::ModelShape::default_branch_hidden(conditions);
            return sce::SceModel::create(s, seed);
          },
          py::arg("feature_dim"), py::arg("embed_dim"), py::arg("conditions"), py::arg("branch_mode") = "pair-visual",
          py::arg("text_dim") = 0, py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return sce::load_checkpoint(path); }, py::arg("path"))
      .def("save", [](const sce::SceModel& self, const std::string& path) { sce::save_checkpoint(self, path); },
           py::arg("path"))
      .def_property_readonly("shape", [](const sce::SceModel& self) { return shape_dict(self.shape()); })
      .def_property_readonly("masks", [](const sce::SceModel& self) { return to_array(self.masks()); })
      .def_property_readonly("condition_labels", &sce::SceModel::condition_labels)
      .def("encode", [](const sce::SceModel& self, const Array& x) { return to_array(sce::encode(self, as_span(x))); },
           py::arg("visual"))
      .def(
          "condition_embeddings",
          [](const sce::SceModel& self, const Array& x) { return to_array(sce::condition_embeddings(self, as_span(x))); },
          py::arg("visual"))
      .def(
          "embed_pair",
          [](const sce::SceModel& self, const Array& v1, const Array& v2, std::optional<Array> t1,
             std::optional<Array> t2) {
            const auto e = sce::embed_pair(self, input_of(v1, t1), input_of(v2, t2));
            return py::make_tuple(to_array(e.first), to_array(e.second), to_array(e.weights));
          },
          py::arg("first"), py::arg("second"), py::arg("first_text") = py::none(),
          py::arg("second_text") = py::none(),
          "Final embeddings of both items and the condition weights.");

  m.def(
      "roc_auc",
      [](const Array& pos, const Array& neg) { return sce::roc_auc(as_span(pos), as_span(neg)); },
      py::arg("positive"), py::arg("negative"));

  m.def(
      "check_gradients",
      [](std::uint64_t seed) {
        sce::GradientSuiteSettings settings;
        settings.seed = seed;
        py::list out;
        for (const auto& c : sce::gradient_suite(settings)) {
          py::dict d;
          d["branch_mode"] = sce::to_string(c.mode);
          d["vse_sim"] = c.vse_sim;
          d["max_relative_error"] = c.report.max_relative_error;
          d["passed"] = c.report.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 1, "Finite-difference check of the objective in every branch mode.");

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = sce::cli::main_entry(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation; returns (exit code, stdout, stderr).");
}
