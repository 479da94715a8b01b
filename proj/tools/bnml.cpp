// bnml: training, verification, example and solver runs for batch-normalized
// linear models. Exit codes: 0 ok, 1 property failure, 2 usage, 3 runtime.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bnbias/config.hpp"
#include "bnbias/errors.hpp"
#include "bnbias/harness.hpp"
#include "bnbias/solvers.hpp"
#include "bnbias/svg.hpp"
#include "bnbias/trainer.hpp"
#include "bnbias/verify.hpp"

namespace fs = std::filesystem;
using namespace bnbias;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0, kExitProperty = 1, kExitUsage = 2, kExitRuntime = 3;

/// Flags are parsed into side storage and applied on top of the --config
/// file, so only flags the user actually passed override it.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc,
                   std::function<void(RunConfig&, const T&)> apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    appliers_.push_back([opt, value, apply](RunConfig& cfg) {
      if (opt->count() > 0) apply(cfg, *value);
    });
    return opt;
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& desc,
                    std::function<void(RunConfig&)> apply) {
    CLI::Option* opt = app->add_flag(name, desc);
    appliers_.push_back([opt, apply](RunConfig& cfg) {
      if (opt->count() > 0) apply(cfg);
    });
    return opt;
  }
  void apply(RunConfig& cfg) const {
    for (const auto& f : appliers_) f(cfg);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
  fs::create_directories(dir);
  write_file(dir / "config.json", run_config_json(cfg).dump(2) + "\n");
  return dir;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void add_dataset_flags(CLI::App* app, Overrides& ov) {
  ov.add<std::string>(app, "--data", "gaussian | example1 | example2 | file:<path>",
                      [](RunConfig& c, const std::string& v) { c.data = v; });
  ov.add<std::size_t>(app, "--n", "sample count", [](RunConfig& c, const std::size_t& v) { c.n = v; });
  ov.add<std::size_t>(app, "--d", "dimension", [](RunConfig& c, const std::size_t& v) { c.d = v; });
  ov.add<std::size_t>(app, "--P", "patches (example 1)", [](RunConfig& c, const std::size_t& v) { c.patches = v; });
  ov.add<double>(app, "--sigma", "noise scale override", [](RunConfig& c, const double& v) { c.sigma = v; });
  ov.flag(app, "--center", "center generated example data", [](RunConfig& c) { c.center = true; });
}

void add_train_flags(CLI::App* app, Overrides& ov) {
  ov.add<std::string>(app, "--model", "bn-linear | bn-cnn | plain", [](RunConfig& c, const std::string& v) {
    c.train.model_kind = parse_model_kind(v);
  });
  ov.add<double>(app, "--eta", "learning rate", [](RunConfig& c, const double& v) { c.train.eta = v; });
  ov.add<std::int64_t>(app, "--steps", "GD steps", [](RunConfig& c, const std::int64_t& v) { c.train.steps = v; });
  ov.add<double>(app, "--init-scale", "initial ||w||_2",
                 [](RunConfig& c, const double& v) { c.train.init_scale = v; });
  ov.add<double>(app, "--gamma0", "initial gamma", [](RunConfig& c, const double& v) { c.train.gamma0 = v; });
  ov.add<std::int64_t>(app, "--log-every", "trace row interval",
                       [](RunConfig& c, const std::int64_t& v) { c.train.log_every = v; });
}

void add_common_flags(CLI::App* app, Overrides& ov, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config; flags override it");
  ov.add<std::uint64_t>(app, "--seed", "master seed", [](RunConfig& c, const std::uint64_t& v) { c.seed = v; });
  ov.add<std::string>(app, "--out", "output directory", [](RunConfig& c, const std::string& v) { c.out = v; });
}

Probes make_probes(const Dataset& data) {
  Probes p;
  try {
    p.w_star = solve_uniform_margin(data).solution;
  } catch (const Error& e) {
    std::cerr << "note: no uniform-margin probe (" << e.what() << ")\n";
  }
  try {
    p.w_max = solve_max_margin(data).solution;
  } catch (const Error& e) {
    std::cerr << "note: no max-margin probe (" << e.what() << ")\n";
  }
  return p;
}

std::string final_state_json(const TrainTrace& trace, const std::vector<std::string>& warnings) {
  Json j;
  j["model"] = to_string(trace.model_kind);
  j["status"] = trace.status == TrainStatus::kOk ? "ok" : trace.status == TrainStatus::kDiverged ? "diverged" : "degenerate";
  j["message"] = trace.message;
  j["eta"] = trace.eta;
  j["steps"] = trace.rows.empty() ? 0 : trace.rows.back().t;
  j["gamma"] = trace.final_state.gamma;
  j["final_discrepancy"] = trace.rows.empty() ? 0.0 : trace.rows.back().discrepancy;
  j["norm_decrease_steps"] = trace.norm_decrease_steps;
  j["w"] = trace.final_state.w.values();
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

std::string margins_csv(const TrainTrace& trace) {
  std::ostringstream o;
  o << 't';
  const std::size_t n = trace.sample_margins.empty() ? 0 : trace.sample_margins.front().size();
  for (std::size_t i = 0; i < n; ++i) o << ",m" << i;
  o << '\n';
  for (std::size_t k = 0; k < trace.rows.size() && k < trace.sample_margins.size(); ++k) {
    o << trace.rows[k].t;
    for (double m : trace.sample_margins[k]) o << ',' << fmt17(m);
    o << '\n';
  }
  return o.str();
}

std::string margins_svg(const TrainTrace& trace) {
  std::vector<Series> series;
  const std::size_t n = trace.sample_margins.empty() ? 0 : trace.sample_margins.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    Series s;
    s.label = "sample " + std::to_string(i);
    for (std::size_t k = 0; k < trace.rows.size() && k < trace.sample_margins.size(); ++k) {
      s.x.push_back(static_cast<double>(trace.rows[k].t));
      s.y.push_back(trace.sample_margins[k][i]);
    }
    series.push_back(std::move(s));
  }
  ChartOptions opts;
  opts.title = "per-sample margins, " + to_string(trace.model_kind);
  opts.x_label = "iteration t";
  opts.y_label = "y_i <w, x_i>";
  return line_chart_svg(series, opts);
}

int finish_trace_status(const TrainTrace& trace) {
  if (trace.status == TrainStatus::kOk) return kExitOk;
  std::cerr << "error: training stopped early: " << trace.message << "\n";
  return kExitRuntime;
}

TrainTrace run_training(const RunConfig& cfg, std::vector<std::string>& warnings) {
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.record_sample_margins = cfg.plot;
  BuiltData built = build_dataset(cfg);
  warnings = built.warnings;
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return train(built.data, tc, make_probes(built.data));
}

void print_trace_summary(const TrainTrace& trace) {
  if (trace.rows.empty()) return;
  const TraceRow& first = trace.rows.front();
  const TraceRow& last = trace.rows.back();
  std::printf("model %s: t=%lld loss=%.6g D=%.6g (D0=%.6g) gamma=%.6g margins [%.6g, %.6g]\n",
              to_string(trace.model_kind).c_str(), static_cast<long long>(last.t), last.loss, last.discrepancy,
              first.discrepancy, last.gamma, last.min_margin, last.max_margin);
}

int cmd_train(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  const TrainTrace trace = run_training(cfg, warnings);
  const fs::path dir = prepare_out(cfg);
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_file(dir / "trace.csv", csv.str());
  write_file(dir / "final_state.json", final_state_json(trace, warnings));
  if (cfg.plot) {
    write_file(dir / "margins.csv", margins_csv(trace));
    write_file(dir / "margins.svg", margins_svg(trace));
  }
  print_trace_summary(trace);
  return finish_trace_status(trace);
}

int cmd_verify(const RunConfig& cfg) {
  if (cfg.trials == 0) std::cerr << "warning: --trials 0 draws no random instances; the pass is vacuous\n";
  VerifyOptions opts;
  opts.trials = cfg.trials;
  opts.seed = cfg.seed;
  opts.corrupt_gradient = cfg.corrupt_gradient;
  const auto results = run_suite(parse_suite(cfg.suite), opts);
  bool ok = true;
  Json arr = Json::array();
  std::printf("%-34s %10s %9s %12s %10s  %s\n", "property", "instances", "failures", "worst", "tolerance", "result");
  for (const auto& r : results) {
    std::printf("%-34s %10lld %9lld %12.3e %10.1e  %s\n", r.name.c_str(), static_cast<long long>(r.instances),
                static_cast<long long>(r.failures), r.worst, r.tolerance, r.passed() ? "PASS" : "FAIL");
    if (!r.passed()) {
      ok = false;
      std::cerr << "failing instance: " << r.failing_instance << "\n";
    }
    Json j;
    j["property"] = r.name;
    j["instances"] = r.instances;
    j["failures"] = r.failures;
    j["worst"] = r.worst;
    j["tolerance"] = r.tolerance;
    j["passed"] = r.passed();
    if (!r.failing_instance.empty()) j["failing_instance"] = Json::parse(r.failing_instance);
    arr.push_back(std::move(j));
  }
  if (!cfg.out.empty()) write_file(prepare_out(cfg) / "verify.json", arr.dump(2) + "\n");
  return ok ? kExitOk : kExitProperty;
}

int cmd_example(const RunConfig& cfg) {
  std::vector<GenReport> reports;
  Json failures = Json::array();
  for (std::int64_t k = 0; k < cfg.seeds; ++k) {
    const std::uint64_t seed = Rng::split_seed(cfg.seed, static_cast<std::uint64_t>(k));
    try {
      reports.push_back(cfg.which == 1 ? run_example1(example1_config(cfg), cfg.mc, seed)
                                       : run_example2(example2_config(cfg), cfg.mc, seed));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfigInvalid) throw;
      failures.push_back({{"seed", seed}, {"error", e.what()}});
      std::cerr << "seed " << seed << ": " << e.what() << "\n";
    }
  }
  Json doc = Json::parse(genreport_json(reports));
  doc["which"] = cfg.which;
  doc["failures"] = failures;
  const fs::path dir = prepare_out(cfg);
  write_file(dir / "genreport.json", doc.dump(2) + "\n");

  std::printf("%-22s %22s %22s %10s %6s\n", "seed", "error_uniform", "error_max", "residual", "valid");
  for (const auto& r : reports) {
    std::printf("%-22llu %12.5f +- %.5f %12.5f +- %.5f %10.2e %6s\n", static_cast<unsigned long long>(r.seed),
                r.error_uniform(), r.uniform.wilson_halfwidth, r.error_max(), r.max_margin.wilson_halfwidth,
                r.residual_uniform, r.valid ? "yes" : "no");
    for (const auto& w : r.warnings) std::cerr << "warning (seed " << r.seed << "): " << w << "\n";
  }
  if (!reports.empty())
    std::printf("mean error_uniform %.5f, mean error_max %.5f over %zu seeds\n", doc["mean_error_uniform"].get<double>(),
                doc["mean_error_max"].get<double>(), reports.size());
  if (2 * static_cast<std::int64_t>(failures.size()) > cfg.seeds) {
    std::cerr << "error: solvers failed in a majority of seeds\n";
    return kExitRuntime;
  }
  return kExitOk;
}

std::string ratefit_svg(const TrainTrace& trace, const RateFit& fit) {
  Series data{"log D", {}, {}}, line{"fit", {}, {}};
  for (const auto& row : trace.rows) {
    if (row.t < 1 || !(row.discrepancy > kClipFloor)) continue;
    const double lt = std::log(static_cast<double>(row.t));
    data.x.push_back(lt * lt);
    data.y.push_back(std::log(row.discrepancy));
  }
  for (std::int64_t t : {fit.t_start, fit.t_end}) {
    const double lt = std::log(static_cast<double>(t));
    line.x.push_back(lt * lt);
    line.y.push_back(fit.intercept + fit.slope * lt * lt);
  }
  ChartOptions opts;
  opts.title = "discrepancy decay";
  opts.x_label = "log^2 t";
  opts.y_label = "log D";
  return line_chart_svg({data, line}, opts);
}

int cmd_ratefit(const RunConfig& cfg) {
  TrainTrace trace;
  if (!cfg.trace_path.empty()) {
    std::ifstream in(cfg.trace_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open trace '" + cfg.trace_path + "'");
    trace = read_trace_csv(in);
  } else {
    std::vector<std::string> warnings;
    trace = run_training(cfg, warnings);
    if (trace.status != TrainStatus::kOk) return finish_trace_status(trace);
  }
  const RateFit fit = fit_rate(trace, cfg.tail);
  const fs::path dir = prepare_out(cfg);
  if (cfg.trace_path.empty()) {
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_file(dir / "trace.csv", csv.str());
  }
  write_file(dir / "ratefit.json", ratefit_json(fit) + "\n");
  write_file(dir / "ratefit.svg", ratefit_svg(trace, fit));
  std::printf("slope %.6g intercept %.6g r^2 %.6f window [%lld, %lld] loss band %.4g (%zu rows, %zu clipped)\n",
              fit.slope, fit.intercept, fit.r_squared, static_cast<long long>(fit.t_start),
              static_cast<long long>(fit.t_end), fit.loss_band_ratio, fit.rows_used, fit.clipped);
  return kExitOk;
}

int cmd_solve(const RunConfig& cfg) {
  BuiltData built = build_dataset(cfg);
  Json doc;
  if (cfg.solve == "uniform" || cfg.solve == "all") {
    const SolverReport r = solve_uniform_margin(built.data);
    std::printf("uniform margin: residual %.3e, ridge %.3e\n", r.residual, r.ridge);
    doc["uniform"] = Json::parse(solver_report_json(r));
  }
  if (cfg.solve == "max" || cfg.solve == "all") {
    const SolverReport r = solve_max_margin(built.data);
    std::printf("max margin: kkt violation %.3e, %lld sweeps\n", r.kkt_violation, static_cast<long long>(r.iterations));
    doc["max_margin"] = Json::parse(solver_report_json(r));
  }
  if (cfg.solve == "spectrum" || cfg.solve == "all") {
    const SpectrumReport r = span_spectrum(built.data);
    std::printf("span spectrum: lambda_min %.6g lambda_max %.6g rank %zu\n", r.lambda_min, r.lambda_max, r.rank);
    doc["spectrum"] = Json::parse(spectrum_report_json(r));
  }
  write_file(prepare_out(cfg) / "solve.json", doc.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bnml: implicit-bias experiments for batch-normalized linear models"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  CLI::App* train_cmd = app.add_subcommand("train", "train one model and write its trace");
  add_common_flags(train_cmd, ov, config_path);
  add_dataset_flags(train_cmd, ov);
  add_train_flags(train_cmd, ov);
  ov.flag(train_cmd, "--plot", "write per-sample margins (CSV and SVG)", [](RunConfig& c) { c.plot = true; });

  CLI::App* verify_cmd = app.add_subcommand("verify", "run the randomized property suites");
  add_common_flags(verify_cmd, ov, config_path);
  ov.add<std::string>(verify_cmd, "--suite", "identities | inequalities | gradients | all",
                      [](RunConfig& c, const std::string& v) { c.suite = v; });
  ov.add<std::int64_t>(verify_cmd, "--trials", "random instances per property",
                       [](RunConfig& c, const std::int64_t& v) { c.trials = v; });
  ov.flag(verify_cmd, "--corrupt-gradient", "negative control: perturb the analytic gradient",
          [](RunConfig& c) { c.corrupt_gradient = true; });

  CLI::App* example_cmd = app.add_subcommand("example", "test error of the reference classifiers");
  add_common_flags(example_cmd, ov, config_path);
  add_dataset_flags(example_cmd, ov);
  ov.add<int>(example_cmd, "--which", "1 or 2", [](RunConfig& c, const int& v) { c.which = v; });
  ov.add<std::int64_t>(example_cmd, "--mc", "test draws per seed", [](RunConfig& c, const std::int64_t& v) { c.mc = v; });
  ov.add<std::int64_t>(example_cmd, "--seeds", "repetitions", [](RunConfig& c, const std::int64_t& v) { c.seeds = v; });

  CLI::App* ratefit_cmd = app.add_subcommand("ratefit", "fit log D against log^2 t");
  add_common_flags(ratefit_cmd, ov, config_path);
  add_dataset_flags(ratefit_cmd, ov);
  add_train_flags(ratefit_cmd, ov);
  ov.add<std::string>(ratefit_cmd, "--trace", "existing trace CSV (otherwise train inline)",
                      [](RunConfig& c, const std::string& v) { c.trace_path = v; });
  ov.add<double>(ratefit_cmd, "--tail", "tail fraction of logged rows", [](RunConfig& c, const double& v) { c.tail = v; });

  CLI::App* solve_cmd = app.add_subcommand("solve", "reference solvers on a dataset");
  add_common_flags(solve_cmd, ov, config_path);
  add_dataset_flags(solve_cmd, ov);
  ov.add<std::string>(solve_cmd, "--solver", "uniform | max | spectrum | all",
                      [](RunConfig& c, const std::string& v) { c.solve = v; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_run_config(config_path, cfg);
    cfg.experiment = app.get_subcommands().front()->get_name();
    ov.apply(cfg);
    if (train_cmd->parsed() || ratefit_cmd->parsed()) {
      if (cfg.train.model_kind == ModelKind::kBnLinear && cfg.data.rfind("example", 0) == 0)
        throw Error(ErrorCode::kConfigInvalid, "example data is patched; use --model bn-cnn or plain");
    }
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kIo ? kExitRuntime : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (verify_cmd->parsed()) return cmd_verify(cfg);
    if (example_cmd->parsed()) return cmd_example(cfg);
    if (ratefit_cmd->parsed()) return cmd_ratefit(cfg);
    if (solve_cmd->parsed()) return cmd_solve(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool usage = e.code() == ErrorCode::kConfigInvalid || e.code() == ErrorCode::kInvalidArgument;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
