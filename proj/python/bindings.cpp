#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "bnbias/config.hpp"
#include "bnbias/dataset.hpp"
#include "bnbias/errors.hpp"
#include "bnbias/harness.hpp"
#include "bnbias/model.hpp"
#include "bnbias/solvers.hpp"
#include "bnbias/svg.hpp"
#include "bnbias/trainer.hpp"
#include "bnbias/verify.hpp"

namespace py = pybind11;
using namespace bnbias;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(std::span<const double> v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::span<const double> as_span(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

Vec as_vec(const Array& a) { return Vec(std::vector<double>(a.data(), a.data() + a.size())); }

// rows: (n*P, d) or (n, P, d)
Dataset make_dataset(const Array& x, const std::vector<int>& labels, std::size_t patches, bool center) {
  if (x.ndim() == 3) {
    patches = static_cast<std::size_t>(x.shape(1));
  } else if (x.ndim() != 2) {
    throw Error(ErrorCode::kDimensionMismatch, "inputs must be 2-d (rows) or 3-d (n, P, d)");
  }
  const auto d = static_cast<std::size_t>(x.shape(x.ndim() - 1));
  return Dataset::from_rows(std::vector<double>(x.data(), x.data() + x.size()), labels, d, patches, center);
}

py::array_t<double> inputs_array(const Dataset& data) {
  py::array_t<double> out({static_cast<py::ssize_t>(data.rows()), static_cast<py::ssize_t>(data.dim())});
  std::copy(data.inputs().begin(), data.inputs().end(), out.mutable_data());
  return out;
}

py::dict solver_dict(const SolverReport& r) {
  py::dict d;
  d["solution"] = to_numpy(r.solution.span());
  d["residual"] = r.residual;
  d["iterations"] = r.iterations;
  d["slacks"] = to_numpy(r.slacks);
  d["duals"] = to_numpy(r.duals);
  d["ridge"] = r.ridge;
  d["regularized"] = r.regularized;
  d["kkt_violation"] = r.kkt_violation;
  return d;
}

py::dict estimate_dict(const ProportionEstimate& p) {
  py::dict d;
  d["errors"] = p.errors;
  d["samples"] = p.samples;
  d["rate"] = p.rate;
  d["wilson_low"] = p.wilson_low;
  d["wilson_high"] = p.wilson_high;
  d["wilson_halfwidth"] = p.wilson_halfwidth;
  return d;
}

py::dict genreport_dict(const GenReport& r) {
  py::dict d;
  d["seed"] = r.seed;
  d["uniform"] = estimate_dict(r.uniform);
  d["max_margin"] = estimate_dict(r.max_margin);
  d["residual_uniform"] = r.residual_uniform;
  d["residual_max"] = r.residual_max;
  d["kkt_violation"] = r.kkt_violation;
  d["regularized"] = r.regularized;
  d["valid"] = r.valid;
  d["warnings"] = r.warnings;
  return d;
}

py::dict fit_dict(const RateFit& f) {
  py::dict d;
  d["slope"] = f.slope;
  d["intercept"] = f.intercept;
  d["r_squared"] = f.r_squared;
  d["t_start"] = f.t_start;
  d["t_end"] = f.t_end;
  d["loss_band_ratio"] = f.loss_band_ratio;
  d["rows_used"] = f.rows_used;
  d["clipped"] = f.clipped;
  return d;
}

const char* status_name(TrainStatus s) {
  switch (s) {
    case TrainStatus::kOk: return "ok";
    case TrainStatus::kDiverged: return "diverged";
    case TrainStatus::kDegenerate: return "degenerate";
  }
  return "?";
}

py::object optional_column(const std::vector<TraceRow>& rows, std::optional<double> TraceRow::*field) {
  if (rows.empty() || !(rows.front().*field)) return py::none();
  std::vector<double> v;
  for (const auto& r : rows) v.push_back((r.*field).value_or(std::numeric_limits<double>::quiet_NaN()));
  return to_numpy(v);
}

py::dict trace_dict(const TrainTrace& tr) {
  std::vector<double> t, loss, disc, gamma, wn, ws, mn, mx;
  for (const auto& r : tr.rows) {
    t.push_back(static_cast<double>(r.t));
    loss.push_back(r.loss);
    disc.push_back(r.discrepancy);
    gamma.push_back(r.gamma);
    wn.push_back(r.w_norm2);
    ws.push_back(r.w_sigma_norm);
    mn.push_back(r.min_margin);
    mx.push_back(r.max_margin);
  }
  py::dict d;
  d["t"] = to_numpy(t);
  d["loss"] = to_numpy(loss);
  d["discrepancy"] = to_numpy(disc);
  d["gamma"] = to_numpy(gamma);
  d["w_norm2"] = to_numpy(wn);
  d["w_sigma_norm"] = to_numpy(ws);
  d["min_margin"] = to_numpy(mn);
  d["max_margin"] = to_numpy(mx);
  d["align_wstar"] = optional_column(tr.rows, &TraceRow::align_wstar);
  d["align_wmax"] = optional_column(tr.rows, &TraceRow::align_wmax);
  d["w"] = to_numpy(tr.final_state.w.span());
  d["gamma_final"] = tr.final_state.gamma;
  d["status"] = status_name(tr.status);
  d["message"] = tr.message;
  d["norm_decrease_steps"] = tr.norm_decrease_steps;
  std::ostringstream csv;
  write_trace_csv(csv, tr);
  d["csv"] = csv.str();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Batch-normalized linear models: training, margin solvers and checks";

  // args = (code, message), code being the error name, e.g. "NotSeparable".
  static PyObject* error_type = PyErr_NewException("bnbias._core.BnbiasError", PyExc_RuntimeError, nullptr);
  m.attr("BnbiasError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error_type, py::make_tuple(std::string(to_string(e.code())), e.what()).ptr());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("inputs"), py::arg("labels"), py::arg("patches") = 1,
           py::arg("center") = false)
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("dim", &Dataset::dim)
      .def_property_readonly("patches", &Dataset::patches)
      .def_property_readonly("centered", &Dataset::centered)
      .def_property_readonly("labels", &Dataset::labels)
      .def_property_readonly("inputs", &inputs_array)
      .def("to_csv", [](const Dataset& d) {
        std::ostringstream o;
        write_dataset_csv(o, d);
        return o.str();
      });

  m.def("load_dataset_csv", &load_dataset_csv, py::arg("path"));
  m.def("gaussian_dataset", [](std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    return gen_gaussian_experiment(rng, n, d);
  }, py::arg("n"), py::arg("d"), py::arg("seed"));
  m.def("example1_dataset", [](std::size_t n, std::uint64_t seed, std::size_t patches) {
    Rng rng(seed);
    return gen_example1(rng, Example1Config::default_scaling(n, patches)).data;
  }, py::arg("n"), py::arg("seed"), py::arg("patches") = 4);
  m.def("example2_dataset", [](std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return gen_example2(rng, Example2Config::default_scaling(n)).data;
  }, py::arg("n"), py::arg("seed"));

  m.def("loss_and_grads", [](const Array& w, double gamma, const Dataset& data) {
    const LossAndGrads g = loss_and_grads(ModelState{as_vec(w), gamma}, data);
    return py::make_tuple(g.loss, to_numpy(g.grad_w.span()), g.grad_gamma);
  }, py::arg("w"), py::arg("gamma"), py::arg("data"));
  m.def("plain_loss_and_grad", [](const Array& w, const Dataset& data) {
    const PlainLossAndGrad g = plain_loss_and_grad(as_span(w), data);
    return py::make_tuple(g.loss, to_numpy(g.grad_w.span()));
  }, py::arg("w"), py::arg("data"));
  m.def("margins", [](const Array& w, const Dataset& data) {
    return to_numpy(margin_profile(as_span(w), data).margins);
  }, py::arg("w"), py::arg("data"));
  m.def("discrepancy", [](const Array& w, const Dataset& data) { return discrepancy(as_span(w), data); },
        py::arg("w"), py::arg("data"));
  m.def("bn_norm", [](const Array& w, const Dataset& data) { return bn_norm(as_span(w), data); },
        py::arg("w"), py::arg("data"));

  m.def("train", [](const Dataset& data, const std::string& model, double eta, std::int64_t steps,
                    double init_scale, double gamma0, std::uint64_t seed, std::int64_t log_every, bool probes) {
    TrainConfig cfg;
    cfg.model_kind = parse_model_kind(model);
    cfg.eta = eta;
    cfg.steps = steps;
    cfg.init_scale = init_scale;
    cfg.gamma0 = gamma0;
    cfg.seed = seed;
    cfg.log_every = log_every;
    Probes pr;
    if (probes) {
      pr.w_star = solve_uniform_margin(data).solution;
      pr.w_max = solve_max_margin(data).solution;
    }
    TrainTrace tr;
    {
      py::gil_scoped_release release;
      tr = train(data, cfg, pr);
    }
    return trace_dict(tr);
  }, py::arg("data"), py::arg("model") = "bn-linear", py::arg("eta") = 0.05, py::arg("steps") = 1000,
     py::arg("init_scale") = 0.01, py::arg("gamma0") = 1.0, py::arg("seed") = 1, py::arg("log_every") = 100,
     py::arg("probes") = false);

  m.def("solve_uniform_margin", [](const Dataset& d) { return solver_dict(solve_uniform_margin(d)); },
        py::arg("data"));
  m.def("solve_max_margin", [](const Dataset& d, double tol, std::int64_t max_sweeps) {
    MaxMarginOptions o;
    o.tolerance = tol;
    o.max_sweeps = max_sweeps;
    return solver_dict(solve_max_margin(d, o));
  }, py::arg("data"), py::arg("tolerance") = MaxMarginOptions{}.tolerance,
     py::arg("max_sweeps") = MaxMarginOptions{}.max_sweeps);
  m.def("span_spectrum", [](const Dataset& d) {
    const SpectrumReport s = span_spectrum(d);
    py::dict out;
    out["lambda_min"] = s.lambda_min;
    out["lambda_max"] = s.lambda_max;
    out["rank"] = s.rank;
    out["eigenvalues"] = to_numpy(s.eigenvalues);
    return out;
  }, py::arg("data"));
  m.def("check_aux_inequality", [](const Array& a, const Array& b) {
    const AuxInequality r = check_aux_inequality(as_span(a), as_span(b));
    return py::make_tuple(r.lhs, r.rhs, r.holds);
  }, py::arg("a"), py::arg("b"));
  m.def("gamma_recurrence_bounds", [](double a0, double c, std::int64_t t) {
    const GammaRecurrence g = gamma_recurrence_bounds(a0, c, t);
    return py::make_tuple(g.lower, g.value, g.upper);
  }, py::arg("a0"), py::arg("c"), py::arg("t"));

  m.def("fit_rate", [](const std::vector<std::int64_t>& t, const Array& d, const Array& loss, double tail) {
    return fit_dict(fit_rate_series(t, as_span(d), as_span(loss), tail));
  }, py::arg("t"), py::arg("discrepancy"), py::arg("loss"), py::arg("tail") = 0.5);
  m.def("wilson", [](std::int64_t k, std::int64_t n) { return estimate_dict(wilson(k, n)); }, py::arg("k"),
        py::arg("n"));
  m.def("run_example", [](int which, std::size_t n, std::int64_t mc, std::uint64_t seed) {
    if (which != 1 && which != 2) throw Error(ErrorCode::kInvalidArgument, "which must be 1 or 2");
    GenReport r;
    {
      py::gil_scoped_release release;
      r = which == 1 ? run_example1(Example1Config::default_scaling(n), mc, seed)
                     : run_example2(Example2Config::default_scaling(n), mc, seed);
    }
    return genreport_dict(r);
  }, py::arg("which"), py::arg("n"), py::arg("mc"), py::arg("seed"));

  m.def("verify", [](const std::string& suite, std::int64_t trials, std::uint64_t seed, bool corrupt) {
    VerifyOptions o;
    o.trials = trials;
    o.seed = seed;
    o.corrupt_gradient = corrupt;
    py::list out;
    for (const auto& r : run_suite(parse_suite(suite), o)) {
      py::dict d;
      d["name"] = r.name;
      d["instances"] = r.instances;
      d["failures"] = r.failures;
      d["worst"] = r.worst;
      d["tolerance"] = r.tolerance;
      d["failing_instance"] = r.failing_instance;
      d["passed"] = r.passed();
      out.append(d);
    }
    return out;
  }, py::arg("suite") = "all", py::arg("trials") = 100, py::arg("seed") = 7, py::arg("corrupt_gradient") = false);

  m.def("line_chart_svg", [](const std::vector<std::tuple<std::string, std::vector<double>, std::vector<double>>>& s,
                             const std::string& title, const std::string& x_label, const std::string& y_label,
                             bool log_x) {
    std::vector<Series> series;
    for (const auto& [label, x, y] : s) series.push_back({label, x, y});
    ChartOptions o;
    o.title = title;
    o.x_label = x_label;
    o.y_label = y_label;
    o.log_x = log_x;
    return line_chart_svg(series, o);
  }, py::arg("series"), py::arg("title") = "", py::arg("x_label") = "", py::arg("y_label") = "",
     py::arg("log_x") = false);
}
