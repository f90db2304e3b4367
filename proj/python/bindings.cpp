#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coxmesh/cli.hpp"
#include "coxmesh/config.hpp"
#include "coxmesh/error.hpp"
#include "coxmesh/eval.hpp"
#include "coxmesh/io.hpp"
#include "coxmesh/sim.hpp"
#include "coxmesh/spde.hpp"

namespace py = pybind11;
using namespace coxmesh;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<PlanarPoint> to_points(const Points& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("expected an (n, 2) array of points");
  std::vector<PlanarPoint> out(a.shape(0));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {r(i, 0), r(i, 1)};
  return out;
}

py::array_t<double> from_points(const std::vector<PlanarPoint>& pts) {
  py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(i, 0) = pts[i].x;
    w(i, 1) = pts[i].y;
  }
  return a;
}

Ring to_ring(const Points& a) {
  Ring r = to_points(a);
  if (!r.empty() && !(r.front() == r.back())) r.push_back(r.front());
  return r;
}

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Marked log-Gaussian Cox process models on triangulated domains";

  py::register_exception<Error>(m, "CoxmeshError", PyExc_RuntimeError);

  py::class_<DomainPolygon>(m, "Domain")
      .def(py::init([](const Points& outer, const std::vector<Points>& holes) {
             std::vector<Ring> hs;
             for (const auto& h : holes) hs.push_back(to_ring(h));
             return make_domain(to_ring(outer), std::move(hs));
           }),
           py::arg("outer"), py::arg("holes") = std::vector<Points>{})
      .def_static("rectangle", &make_rectangle)
      .def_static("read", [](const std::string& path) { return read_domain(path).domain; })
      .def_property_readonly("area", [](const DomainPolygon& d) { return area(d); })
      .def_property_readonly("outer", [](const DomainPolygon& d) { return from_points(d.outer); })
      .def("contains", [](const DomainPolygon& d, double x, double y) { return contains(d, PlanarPoint{x, y}); });

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("vertices", [](const Mesh& me) { return from_points(me.vertices); })
      .def_property_readonly("triangles", [](const Mesh& me) {
        py::array_t<int> a({static_cast<py::ssize_t>(me.n_triangles()), py::ssize_t{3}});
        auto w = a.mutable_unchecked<2>();
        for (std::size_t t = 0; t < me.n_triangles(); ++t)
          for (int k = 0; k < 3; ++k) w(t, k) = me.triangles[t][k];
        return a;
      })
      .def_property_readonly("n_vertices", &Mesh::n_vertices)
      .def_property_readonly("n_triangles", &Mesh::n_triangles)
      .def_property_readonly("area", &Mesh::total_area)
      .def_static("read", [](const std::string& path) { return read_mesh(path); })
      .def("write", [](const Mesh& me, const std::string& path) { write_mesh(path, me); })
      .def("min_angle", [](const Mesh& me) { return mesh_quality(me).min_angle_deg; })
      .def("dual_weights", [](const Mesh& me, const DomainPolygon& d) { return dual_weights(me, d).w; });

  m.def(
      "build_mesh",
      [](const DomainPolygon& d, double inner_res, double outer_extension, double outer_res, double min_angle) {
        return build_mesh(d, MeshOptions{.inner_res = inner_res,
                                         .outer_extension = outer_extension,
                                         .outer_res = outer_res,
                                         .min_angle_deg = min_angle});
      },
      py::arg("domain"), py::arg("inner_res"), py::arg("outer_extension") = 0.0, py::arg("outer_res") = 0.0,
      py::arg("min_angle") = 25.0);

  py::class_<SpdeParams>(m, "SpdeParams")
      .def(py::init([](double hx, double hy, double hxy, double sigma) { return SpdeParams{hx, hy, hxy, sigma}; }),
           py::arg("h_x"), py::arg("h_y"), py::arg("h_xy") = 0.0, py::arg("sigma") = 1.0)
      .def_readwrite("h_x", &SpdeParams::h_x)
      .def_readwrite("h_y", &SpdeParams::h_y)
      .def_readwrite("h_xy", &SpdeParams::h_xy)
      .def_readwrite("sigma", &SpdeParams::sigma)
      .def("__repr__", [](const SpdeParams& p) {
        std::ostringstream s;
        s << "SpdeParams(h_x=" << p.h_x << ", h_y=" << p.h_y << ", h_xy=" << p.h_xy << ", sigma=" << p.sigma << ")";
        return s.str();
      });

  m.def(
      "precision",
      [](const Mesh& me, const SpdeParams& p) -> Eigen::SparseMatrix<double> {
        return assemble_precision(me, p).full();
      },
      "SPDE precision matrix (scipy.sparse CSC)", py::arg("mesh"), py::arg("params"));
  m.def(
      "marginal_variance",
      [](const Mesh& me, const SpdeParams& p) { return selected_inverse_diag(factorize(assemble_precision(me, p))); },
      py::arg("mesh"), py::arg("params"));
  m.def("matern_cov", py::overload_cast<double, double, double>(&matern_cov), py::arg("d"), py::arg("h"),
        py::arg("sigma") = 1.0);

  m.def(
      "simulate_field",
      [](const Mesh& me, const SpdeParams& p, std::uint64_t seed) { return simulate_field(me, p, seed); },
      py::arg("mesh"), py::arg("params"), py::arg("seed"));
  m.def(
      "simulate_pattern",
      [](const Mesh& me, const std::vector<double>& log_lambda, const DomainPolygon& d, std::uint64_t seed) {
        if (log_lambda.size() != me.n_vertices()) throw py::value_error("one log-intensity value per mesh vertex");
        return from_points(simulate_pattern(me, log_lambda, d, seed));
      },
      py::arg("mesh"), py::arg("log_lambda"), py::arg("domain"), py::arg("seed"));
  m.def(
      "integrate_intensity",
      [](const Mesh& me, const std::vector<double>& log_lambda, const DomainPolygon& d) {
        return integrate_intensity(me, log_lambda, d);
      },
      py::arg("mesh"), py::arg("log_lambda"), py::arg("domain"));

  m.def(
      "k_inhom",
      [](const Points& pts, const std::vector<double>& lambda, const DomainPolygon& d, const std::vector<double>& radii,
         const std::string& correction) {
        return k_inhom(to_points(pts), lambda, d, radii, parse_edge_correction(correction));
      },
      py::arg("points"), py::arg("lambda_"), py::arg("domain"), py::arg("radii"), py::arg("correction") = "border");
  m.def(
      "normalize_k",
      [](const std::vector<double>& k, const std::vector<double>& r) { return normalize_k(k, r); }, py::arg("khat"),
      py::arg("radii"));

  m.def(
      "pointwise_scores",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& log_density) {
        if (log_density.ndim() != 2) throw py::value_error("expected a (draws, units) array");
        ScoreAccumulator acc(log_density.shape(1));
        for (py::ssize_t s = 0; s < log_density.shape(0); ++s)
          acc.add_draw(std::span<const double>(log_density.data(s, 0), log_density.shape(1)));
        auto r = acc.report();
        py::dict out;
        out["n"] = r.n;
        out["lppd"] = r.lppd;
        out["p_waic"] = r.p_waic;
        out["waic"] = r.waic;
        out["mean_log_score"] = r.mean_log_score;
        out["n_zero_density"] = r.n_zero_density;
        return out;
      },
      "WAIC and mean log score from a (draws, units) matrix of log densities", py::arg("log_density"));

  m.def(
      "fit_config",
      [](const std::string& path) {
        RunConfig c = load_run_config(path);
        check_paths(c, true);
        Inputs in = load_inputs(c, true);
        Model model = build_model(c, in);
        ModelFit fit;
        {
          py::gil_scoped_release release;
          fit = run_fit(c, model);
        }
        return to_py(fit_report(fit, model));
      },
      "Fit the model described by a run configuration; returns the fit report", py::arg("config"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Run a command-line subcommand in process; returns (exit code, stdout, stderr)", py::arg("args"));
}
