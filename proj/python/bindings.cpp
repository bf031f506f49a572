#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pmflow/diagnostics.hpp"
#include "pmflow/flow.hpp"
#include "pmflow/hele_shaw.hpp"
#include "pmflow/model.hpp"
#include "pmflow/operators.hpp"
#include "pmflow/scenario.hpp"
#include "pmflow/solver.hpp"

namespace py = pybind11;
using namespace pmflow;

namespace {

py::array_t<double> field_to_numpy(const ScalarField& f) {
  const GridSpec& g = f.grid;
  if (g.dim == 1) {
    py::array_t<double> out(g.nx());
    std::copy(f.values.begin(), f.values.end(), out.mutable_data());
    return out;
  }
  py::array_t<double> out({g.ny(), g.nx()});
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

ScalarField numpy_to_field(const GridSpec& g, py::array_t<double, py::array::c_style |
                                                                      py::array::forcecast>
                                                  arr) {
  ScalarField f(g);
  if (static_cast<std::size_t>(arr.size()) != g.cell_count()) {
    throw std::invalid_argument("array size does not match the grid");
  }
  std::copy(arr.data(), arr.data() + arr.size(), f.values.begin());
  return f;
}

}  // namespace

PYBIND11_MODULE(_pmflow, m) {
  m.doc() = "multispecies porous-media / Hele-Shaw simulator with Lagrangian "
            "flow diagnostics";

  py::enum_<BoundaryMode>(m, "BoundaryMode")
      .value("truncated", BoundaryMode::TruncatedBuffer)
      .value("periodic", BoundaryMode::Periodic);

  py::class_<GridSpec>(m, "GridSpec")
      .def_static("make1d", &GridSpec::make1d, py::arg("a"), py::arg("b"), py::arg("n"),
                  py::arg("mode") = BoundaryMode::TruncatedBuffer)
      .def_static("make2d", &GridSpec::make2d, py::arg("ax"), py::arg("bx"),
                  py::arg("nx"), py::arg("ay"), py::arg("by"), py::arg("ny"),
                  py::arg("mode") = BoundaryMode::TruncatedBuffer)
      .def_readonly("dim", &GridSpec::dim)
      .def("spacing", &GridSpec::spacing)
      .def("cell_count", &GridSpec::cell_count)
      .def("center", &GridSpec::center);

  py::class_<ScalarField>(m, "ScalarField")
      .def(py::init([](const GridSpec& g, double fill) { return ScalarField(g, fill); }),
           py::arg("grid"), py::arg("fill") = 0.0)
      .def_static("from_array", &numpy_to_field, py::arg("grid"), py::arg("values"))
      .def_readwrite("time", &ScalarField::time)
      .def_readwrite("name", &ScalarField::name)
      .def_property_readonly("grid", [](const ScalarField& f) { return f.grid; })
      .def("to_array", &field_to_numpy)
      .def("max", &ScalarField::max_value)
      .def("min", &ScalarField::min_value);

  py::class_<VectorField>(m, "VectorField")
      .def("component", [](const VectorField& v, int axis) {
        ScalarField f(v.grid);
        f.values = v.comp[axis];
        return field_to_numpy(f);
      });

  m.def("gradient", &gradient);
  m.def("laplacian", &laplacian);
  m.def(
      "interpolate",
      [](const ScalarField& f, double x, double y) {
        return interpolate(f, {x, y});
      },
      py::arg("field"), py::arg("x"), py::arg("y") = 0.0);
  m.def("integrate", py::overload_cast<const ScalarField&>(&integrate));
  m.def("integrate_weighted",
        py::overload_cast<const ScalarField&, const ScalarField&>(&integrate));
  m.def("maximal_functions", [](const ScalarField& p) {
    MaximalFunctions mf = maximal_functions(p);
    return py::make_tuple(field_to_numpy(mf.f), field_to_numpy(mf.g));
  });
  m.def("distance_l1", &distance_l1);
  m.def("distance_l2", &distance_l2);

  py::class_<PressureLaw>(m, "PressureLaw")
      .def_static("finite", &PressureLaw::finite)
      .def_static("hele_shaw", &PressureLaw::hele_shaw)
      .def_readonly("gamma", &PressureLaw::gamma)
      .def_readonly("infinite", &PressureLaw::infinite);

  m.def("pressure_from_density", &pressure_from_density);

  py::class_<ObstacleConfig>(m, "ObstacleConfig")
      .def(py::init<>())
      .def_readwrite("tol_ob", &ObstacleConfig::tol_ob)
      .def_readwrite("max_sweeps", &ObstacleConfig::max_sweeps)
      .def_readwrite("omega_sor", &ObstacleConfig::omega_sor);

  m.def(
      "solve_complementarity",
      [](const ScalarField& rho, const ScalarField& G, const ObstacleConfig& cfg) {
        ObstacleResult res = solve_complementarity(rho, G, cfg);
        return py::make_tuple(res.p, res.converged, res.residual, res.sweeps);
      },
      py::arg("rho"), py::arg("G"), py::arg("cfg") = ObstacleConfig{});

  py::class_<ScenarioConfig>(m, "ScenarioConfig");
  m.def("scenario_preset", &scenario_preset);
  m.def("scenario_preset_names", &scenario_preset_names);
  m.def("parse_config", &parse_config);
  m.def("render_config", &render_config);
  m.def("config_set_cells", [](ScenarioConfig& cfg, int n) {
    for (auto& c : cfg.grid.cells) c = n;
  });
  m.def("config_set_horizon", [](ScenarioConfig& cfg, double T) {
    cfg.time.horizon = T;
  });
  m.def("config_set_dt", [](ScenarioConfig& cfg, double dt) { cfg.solver.dt = dt; });
  m.def("config_set_output_dir",
        [](ScenarioConfig& cfg, const std::string& dir) { cfg.output.dir = dir; });
  m.def("config_disable_flows", [](ScenarioConfig& cfg) { cfg.flows.enabled = false; });

  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("passed", &CheckResult::pass)
      .def_readonly("hard", &CheckResult::hard)
      .def_readonly("value", &CheckResult::value)
      .def_readonly("threshold", &CheckResult::threshold);

  py::class_<ScenarioRunSummary>(m, "ScenarioRunSummary")
      .def_readonly("scenario_name", &ScenarioRunSummary::scenario_name)
      .def_readonly("config_fingerprint", &ScenarioRunSummary::config_fingerprint)
      .def_readonly("checks", &ScenarioRunSummary::checks)
      .def_readonly("constants", &ScenarioRunSummary::constants)
      .def("all_passed", &ScenarioRunSummary::all_passed);

  m.def("run_scenario", &run_scenario, py::arg("config"), py::arg("outdir"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_gamma_sweep", &run_gamma_sweep, py::arg("config"), py::arg("gammas"),
        py::arg("outdir"), py::call_guard<py::gil_scoped_release>());
  m.def("check_run_dir",
        [](const std::string& dir) { return check_run_dir(dir, nullptr); });
  m.def("emit_report", [](const std::string& dir) { return emit_report(dir); });
}
