// Python bindings. Tensors cross the boundary as Fortran-ordered numpy arrays
// so that the storage order (i fastest) is shared without reshuffling.

#include "mvtc/config.hpp"
#include "mvtc/errors.hpp"
#include "mvtc/experiment.hpp"
#include "mvtc/kernels.hpp"
#include "mvtc/metrics.hpp"
#include "mvtc/multiversion.hpp"
#include "mvtc/online.hpp"
#include "mvtc/solver.hpp"
#include "mvtc/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

namespace py = pybind11;
using namespace mvtc;

namespace {

using FArray = py::array_t<double, py::array::f_style | py::array::forcecast>;
using IArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const Tensor4& t) {
  const Dims4& d = t.dims();
  py::array_t<double, py::array::f_style> out({d.I, d.J, d.K, d.S});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_numpy(const Tensor3& t) {
  py::array_t<double, py::array::f_style> out({t.I(), t.J(), t.S()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor4 tensor4(const FArray& a) {
  if (a.ndim() != 4) throw ArgumentError("expected a 4-way array");
  const Dims4 d{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
  return Tensor4(d, std::vector<double>(a.data(), a.data() + a.size()));
}

Tensor3 tensor3(const FArray& a) {
  if (a.ndim() != 3) throw ArgumentError("expected a 3-way array");
  Tensor3 t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
            static_cast<std::size_t>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.values().begin());
  return t;
}

py::array_t<bool> mask_array(const ObservationMask& m) {
  const Dims4& d = m.dims();
  py::array_t<bool, py::array::f_style> out({d.I, d.J, d.K, d.S});
  bool* p = out.mutable_data();
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k)
      for (std::size_t j = 0; j < d.J; ++j)
        for (std::size_t i = 0; i < d.I; ++i) *p++ = m.contains(i, j, k, s);
  return out;
}

std::vector<UpdateEvent> events_from(const IArray& location, const IArray& feature, const IArray& gd,
                                     const IArray& ld, const DArray& count) {
  const auto n = location.size();
  if (feature.size() != n || gd.size() != n || ld.size() != n || count.size() != n) {
    throw ArgumentError("event columns differ in length");
  }
  std::vector<UpdateEvent> ev(static_cast<std::size_t>(n));
  for (py::ssize_t e = 0; e < n; ++e) {
    if (location.data()[e] < 0 || feature.data()[e] < 0) {
      throw IngestError(static_cast<std::size_t>(e) + 1, "negative location or feature index");
    }
    ev[static_cast<std::size_t>(e)] = {static_cast<std::size_t>(location.data()[e]),
                                       static_cast<std::size_t>(feature.data()[e]), gd.data()[e], ld.data()[e],
                                       count.data()[e]};
  }
  return ev;
}

template <typename T>
py::array_t<T> column(const std::vector<T>& v) {
  return py::array_t<T>({static_cast<py::ssize_t>(v.size())}, {static_cast<py::ssize_t>(sizeof(T))}, v.data());
}

py::dict events_dict(const std::vector<UpdateEvent>& ev) {
  std::vector<std::int64_t> loc, feat, gd, ld;
  std::vector<double> count;
  for (const UpdateEvent& u : ev) {
    loc.push_back(static_cast<std::int64_t>(u.location));
    feat.push_back(static_cast<std::int64_t>(u.feature));
    gd.push_back(u.gd);
    ld.push_back(u.ld);
    count.push_back(u.count);
  }
  py::dict out;
  out["location"] = column(loc);
  out["feature"] = column(feat);
  out["gd"] = column(gd);
  out["ld"] = column(ld);
  out["count"] = column(count);
  return out;
}

py::dict cells_dict(const std::vector<CellValue>& cells) {
  std::vector<std::int64_t> loc, feat, gd;
  std::vector<double> value;
  for (const CellValue& c : cells) {
    loc.push_back(static_cast<std::int64_t>(c.location));
    feat.push_back(static_cast<std::int64_t>(c.feature));
    gd.push_back(c.gd);
    value.push_back(c.value);
  }
  py::dict out;
  out["location"] = column(loc);
  out["feature"] = column(feat);
  out["gd"] = column(gd);
  out["value"] = column(value);
  return out;
}

// Values go through the same text parser as config files, so validation and
// error messages match the CLI.
KeyValues key_values(const py::dict& d) {
  KeyValues kv;
  for (const auto& [key, value] : d) {
    const std::string k = py::str(key);
    if (py::isinstance<py::bool_>(value)) {
      kv[k] = value.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      std::string joined;
      for (const auto& x : value) joined += (joined.empty() ? "" : ",") + std::string(py::str(py::repr(x)));
      kv[k] = joined;
    } else if (py::isinstance<py::float_>(value)) {
      kv[k] = py::str(py::repr(value));
    } else {
      kv[k] = py::str(value);
    }
  }
  return kv;
}

SolverConfig solver_config(const py::dict& d) {
  KeyValues kv = key_values(d);
  SolverConfig cfg;
  apply_solver_keys(cfg, kv);
  reject_unknown_keys(kv);
  return cfg;
}

TrackerConfig tracker_config(const py::dict& d) {
  KeyValues kv = key_values(d);
  TrackerConfig cfg;
  apply_tracker_keys(cfg, kv);
  reject_unknown_keys(kv);
  return cfg;
}

LocationGraph graph_from(const py::object& adjacency, std::size_t I) {
  if (adjacency.is_none()) return LocationGraph(I);
  const Matrix W = adjacency.cast<Matrix>();
  if (static_cast<std::size_t>(W.rows()) != I) throw ArgumentError("adjacency must be I x I");
  std::vector<Edge> edges;
  for (Eigen::Index u = 0; u < W.rows(); ++u)
    for (Eigen::Index v = u + 1; v < W.cols(); ++v)
      if (W(u, v) != 0.0) edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v), W(u, v)});
  // from_edges symmetrizes; check the input was symmetric to begin with.
  laplacian(W);
  return LocationGraph::from_edges(I, edges);
}

py::dict score_dict(const ScoreReport& r) {
  py::dict out;
  out["rmse"] = r.rmse;
  out["mae"] = r.mae;
  out["relative_rmse"] = r.relative_rmse;
  out["r2"] = r.r2 ? py::object(py::float_(*r.r2)) : py::object(py::none());
  out["n"] = r.n;
  return out;
}

py::dict diagnostics_dict(const Diagnostics& d) {
  py::dict out;
  out["objective_trace"] = d.objective_trace;
  out["residual_trace"] = d.residual_trace;
  out["iterations"] = d.iterations;
  out["stop_reason"] = d.stop_reason;
  out["warnings"] = d.warnings;
  out["restarts"] = d.restarts;
  out["final_residual"] = d.final_residual;
  out["scale"] = d.scale;
  out["init_seconds"] = d.init_seconds;
  out["solve_seconds"] = d.solve_seconds;
  return out;
}

// Copies: the default policy would hand numpy a view of a C++ temporary.
py::object own(const Matrix& m) { return py::cast(m, py::return_value_policy::copy); }

py::tuple factor_tuple(const FactorSet& f) { return py::make_tuple(own(f.A), own(f.B), own(f.C), own(f.D)); }

std::vector<Matrix> matrices(const py::sequence& seq) {
  std::vector<Matrix> out;
  for (const auto& m : seq) out.push_back(m.cast<Matrix>());
  return out;
}

}  // namespace

PYBIND11_MODULE(_mvtc, m) {
  m.doc() = "Multi-version tensor completion core";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_ValueError);
  py::register_exception<UnsupportedShapeError>(m, "UnsupportedShapeError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::class_<MultiVersionDataset>(m, "Dataset")
      .def_property_readonly("I", &MultiVersionDataset::I)
      .def_property_readonly("J", &MultiVersionDataset::J)
      .def_property_readonly("K", &MultiVersionDataset::K)
      .def_property_readonly("S", &MultiVersionDataset::S)
      .def_property_readonly("epoch", &MultiVersionDataset::epoch)
      .def_property_readonly("horizon", &MultiVersionDataset::horizon)
      .def_property_readonly("fully_observed_slabs", &MultiVersionDataset::fully_observed_slabs)
      .def_property_readonly("updates", [](const MultiVersionDataset& ds) { return to_numpy(ds.update_tensor()); })
      .def_property_readonly("mask", [](const MultiVersionDataset& ds) { return mask_array(ds.mask()); })
      .def("aggregate", [](const MultiVersionDataset& ds) { return to_numpy(aggregate(ds)); })
      .def("naive", [](const MultiVersionDataset& ds) { return to_numpy(naive_estimate(ds)); })
      .def("advance",
           [](const MultiVersionDataset& ds, const IArray& location, const IArray& feature, const IArray& gd,
              const IArray& ld, const DArray& count, std::int64_t horizon) {
             return ds.advance(events_from(location, feature, gd, ld, count), horizon);
           });

  m.def(
      "_ingest",
      [](const IArray& location, const IArray& feature, const IArray& gd, const IArray& ld, const DArray& count,
         std::size_t I, std::size_t J, std::size_t K, std::int64_t horizon, std::int64_t epoch) {
        IngestOptions o;
        o.I = I;
        o.J = J;
        o.K = K;
        o.horizon = horizon;
        o.epoch = epoch;
        return ingest(events_from(location, feature, gd, ld, count), o);
      },
      py::arg("location"), py::arg("feature"), py::arg("gd"), py::arg("ld"), py::arg("count"), py::arg("I"),
      py::arg("J"), py::arg("K"), py::arg("horizon"), py::arg("epoch") = 0);

  m.def(
      "_synthesize",
      [](const py::dict& config, std::int64_t horizon) {
        KeyValues kv = key_values(config);
        GeneratorConfig g;
        apply_generator_keys(g, kv);
        reject_unknown_keys(kv);
        const GroundTruth gt = gen_ground_truth(g);
        const Tensor4 x = split_updates(gt.totals, g);
        const EmittedData em = emit_events(x, horizon, g.K);
        const FactorSet f = planted_update_factors(gt, g);
        py::dict out;
        out["totals"] = to_numpy(gt.totals);
        out["updates"] = to_numpy(x);
        out["events"] = events_dict(em.events);
        out["withheld"] = cells_dict(em.withheld);
        out["factors"] = factor_tuple(f);
        out["adjacency"] = own(gt.graph.adjacency());
        out["I"] = g.I;
        out["J"] = g.J;
        out["K"] = g.K;
        out["S"] = g.S;
        return out;
      },
      py::arg("config"), py::arg("horizon"));

  m.def(
      "_fit",
      [](const MultiVersionDataset& ds, const py::object& adjacency, const py::dict& config) {
        const LocationGraph g = graph_from(adjacency, ds.I());
        const SolverConfig cfg = solver_config(config);
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(ds, g, cfg);
        }
        py::dict out;
        out["factors"] = factor_tuple(r.theta);
        out["estimate"] = to_numpy(r.estimate);
        out["hybrid"] = to_numpy(r.hybrid);
        out["diagnostics"] = diagnostics_dict(r.diagnostics);
        return out;
      },
      py::arg("dataset"), py::arg("adjacency"), py::arg("config"));

  py::class_<TrackerState>(m, "_Tracker")
      .def_property_readonly("arrivals", [](const TrackerState& t) { return t.arrivals; })
      .def_property_readonly("dataset", [](const TrackerState& t) { return t.ds; })
      .def_property_readonly("factors",
                             [](const TrackerState& t) { return factor_tuple(t.factors()); })
      .def("arrive", [](TrackerState& t, const IArray& location, const IArray& feature, const IArray& gd,
                        const IArray& ld, const DArray& count, std::int64_t horizon) {
        const auto ev = events_from(location, feature, gd, ld, count);
        ArrivalReport r;
        {
          py::gil_scoped_release release;
          r = arrive(t, ev, horizon);
        }
        py::dict out;
        out["ld"] = r.ld;
        out["first_window_gd"] = r.first_window_gd;
        out["window"] = to_numpy(r.window);
        out["seconds"] = r.seconds;
        out["fp_iters"] = r.fp_iters;
        out["zero_slab"] = r.zero_slab;
        out["resynced"] = r.resynced;
        out["residual"] = r.residual;
        return out;
      });

  m.def(
      "_start_tracker",
      [](const MultiVersionDataset& ds, const py::object& adjacency, const py::dict& config) {
        const LocationGraph g = graph_from(adjacency, ds.I());
        const TrackerConfig cfg = tracker_config(config);
        py::gil_scoped_release release;
        return start_tracker(ds, g, cfg);
      },
      py::arg("dataset"), py::arg("adjacency"), py::arg("config"));

  m.def(
      "score",
      [](const DArray& estimate, const DArray& truth) {
        return score_dict(score(std::span<const double>(estimate.data(), static_cast<std::size_t>(estimate.size())),
                                std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size()))));
      },
      py::arg("estimate"), py::arg("truth"), "RMSE, MAE, relative RMSE and R^2 of aligned values.");

  m.def(
      "unfold", [](const FArray& t, int mode) { return unfold(tensor4(t), mode); }, py::arg("tensor"),
      py::arg("mode"), "Mode-n unfolding (modes 1..4); columns in Kronecker order of the remaining modes.");
  m.def(
      "khatri_rao", [](const py::sequence& ms) { return khatri_rao(matrices(ms)); }, py::arg("factors"));
  m.def(
      "mttkrp", [](const FArray& t, const py::sequence& ms, int mode) { return mttkrp(tensor4(t), matrices(ms), mode); },
      py::arg("tensor"), py::arg("factors"), py::arg("mode"));
  m.def(
      "reconstruct",
      [](const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D) {
        return to_numpy(reconstruct(FactorSet{A, B, C, D}));
      },
      py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"));
  m.def(
      "marginalize", [](const FArray& t) { return to_numpy(marginalize(tensor4(t))); }, py::arg("tensor"));
  m.def(
      "hybrid_estimate",
      [](const MultiVersionDataset& ds, const FArray& model) { return to_numpy(hybrid_estimate(ds, tensor3(model))); },
      py::arg("dataset"), py::arg("model"));
}
