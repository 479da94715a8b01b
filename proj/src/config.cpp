#include "bnbias/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "bnbias/errors.hpp"

namespace bnbias {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kConfigInvalid, where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw Error(ErrorCode::kConfigInvalid, "unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfigInvalid, std::string("wrong type for '") + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& target, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (it->is_null()) {
    target.reset();
    return;
  }
  T v{};
  read(obj, key, v, where);
  target = v;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (!(data == "gaussian" || data == "example1" || data == "example2" || data.rfind("file:", 0) == 0))
    throw Error(ErrorCode::kConfigInvalid, "data must be gaussian, example1, example2 or file:<path>");
  if (n < 1) throw Error(ErrorCode::kConfigInvalid, "n must be >= 1");
  if (d && *d < 1) throw Error(ErrorCode::kConfigInvalid, "d must be >= 1");
  if (patches < 1) throw Error(ErrorCode::kConfigInvalid, "P must be >= 1");
  if (sigma && !(*sigma >= 0.0)) throw Error(ErrorCode::kConfigInvalid, "sigma must be >= 0");
  if (!(tail > 0.0 && tail <= 1.0)) throw Error(ErrorCode::kConfigInvalid, "tail must lie in (0, 1]");
  if (mc < 1) throw Error(ErrorCode::kConfigInvalid, "mc must be >= 1");
  if (seeds < 1) throw Error(ErrorCode::kConfigInvalid, "seeds must be >= 1");
  if (which != 1 && which != 2) throw Error(ErrorCode::kConfigInvalid, "which must be 1 or 2");
  if (trials < 0) throw Error(ErrorCode::kConfigInvalid, "trials must be >= 0");
  if (!(suite == "identities" || suite == "inequalities" || suite == "gradients" || suite == "all"))
    throw Error(ErrorCode::kConfigInvalid, "suite must be identities, inequalities, gradients or all");
  if (!(solve == "uniform" || solve == "max" || solve == "spectrum" || solve == "all"))
    throw Error(ErrorCode::kConfigInvalid, "solve must be uniform, max, spectrum or all");
}

void apply_config_json(RunConfig& cfg, const json& doc) {
  reject_unknown(doc, {"experiment", "dataset", "train", "harness", "seed"}, "config");
  read(doc, "experiment", cfg.experiment, "config");
  read(doc, "seed", cfg.seed, "config");
  if (auto it = doc.find("dataset"); it != doc.end()) {
    const json& ds = *it;
    reject_unknown(ds, {"kind", "n", "d", "P", "sigma", "center"}, "dataset");
    read(ds, "kind", cfg.data, "dataset");
    read(ds, "n", cfg.n, "dataset");
    read_opt(ds, "d", cfg.d, "dataset");
    read(ds, "P", cfg.patches, "dataset");
    read_opt(ds, "sigma", cfg.sigma, "dataset");
    read(ds, "center", cfg.center, "dataset");
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    const json& tr = *it;
    reject_unknown(tr, {"model", "eta", "steps", "init_scale", "gamma0", "log_every"}, "train");
    std::string model = to_string(cfg.train.model_kind);
    read(tr, "model", model, "train");
    cfg.train.model_kind = parse_model_kind(model);
    read(tr, "eta", cfg.train.eta, "train");
    read(tr, "steps", cfg.train.steps, "train");
    read(tr, "init_scale", cfg.train.init_scale, "train");
    read(tr, "gamma0", cfg.train.gamma0, "train");
    read(tr, "log_every", cfg.train.log_every, "train");
  }
  if (auto it = doc.find("harness"); it != doc.end()) {
    const json& h = *it;
    reject_unknown(h, {"tail", "mc", "seeds", "which", "suite", "trials", "corrupt_gradient", "trace", "solve", "plot"},
                   "harness");
    read(h, "tail", cfg.tail, "harness");
    read(h, "mc", cfg.mc, "harness");
    read(h, "seeds", cfg.seeds, "harness");
    read(h, "which", cfg.which, "harness");
    read(h, "suite", cfg.suite, "harness");
    read(h, "trials", cfg.trials, "harness");
    read(h, "corrupt_gradient", cfg.corrupt_gradient, "harness");
    read(h, "trace", cfg.trace_path, "harness");
    read(h, "solve", cfg.solve, "harness");
    read(h, "plot", cfg.plot, "harness");
  }
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  apply_config_json(base, doc);
  return base;
}

nlohmann::ordered_json run_config_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["experiment"] = cfg.experiment;
  j["dataset"] = {{"kind", cfg.data}, {"n", cfg.n}, {"d", nullptr}, {"P", cfg.patches}, {"sigma", nullptr},
                  {"center", cfg.center}};
  if (cfg.d) j["dataset"]["d"] = *cfg.d;
  if (cfg.sigma) j["dataset"]["sigma"] = *cfg.sigma;
  j["train"] = {{"model", to_string(cfg.train.model_kind)}, {"eta", cfg.train.eta},
                {"steps", cfg.train.steps},                  {"init_scale", cfg.train.init_scale},
                {"gamma0", cfg.train.gamma0},                {"log_every", cfg.train.log_every}};
  j["harness"] = {{"tail", cfg.tail},   {"mc", cfg.mc},         {"seeds", cfg.seeds},
                  {"which", cfg.which}, {"suite", cfg.suite},   {"trials", cfg.trials},
                  {"corrupt_gradient", cfg.corrupt_gradient},   {"trace", cfg.trace_path},
                  {"solve", cfg.solve}, {"plot", cfg.plot}};
  j["seed"] = cfg.seed;
  return j;
}

namespace {

Vec unit(std::size_t dim, std::size_t axis, double scale = 1.0) {
  Vec v(dim);
  v[axis] = scale;
  return v;
}

}  // namespace

Example1Config example1_config(const RunConfig& cfg) {
  Example1Config ex = Example1Config::default_scaling(cfg.n, cfg.patches);
  if (cfg.d) {
    ex.dim = *cfg.d;
    ex.u = unit(ex.dim, 0);
    ex.sigma = 20.0 * std::sqrt(static_cast<double>(ex.patches * ex.dim));
  }
  if (cfg.sigma) ex.sigma = *cfg.sigma;
  return ex;
}

Example2Config example2_config(const RunConfig& cfg) {
  Example2Config ex = Example2Config::default_scaling(cfg.n);
  if (cfg.d) {
    if (*cfg.d < 2) throw Error(ErrorCode::kConfigInvalid, "example 2 needs d >= 2");
    ex.dim = *cfg.d;
    ex.u = unit(ex.dim, 0);
    ex.v = unit(ex.dim, 1, ex.alpha * ex.alpha);
    ex.sigma = 1.0 / std::sqrt(static_cast<double>(ex.dim));
  }
  if (cfg.sigma) ex.sigma = *cfg.sigma;
  return ex;
}

BuiltData build_dataset(const RunConfig& cfg) {
  if (cfg.data.rfind("file:", 0) == 0) return {load_dataset_csv(cfg.data.substr(5)), nullptr, {}};
  Rng rng(Rng::split_seed(cfg.seed, 2));
  if (cfg.data == "gaussian") return {gen_gaussian_experiment(rng, cfg.n, cfg.d.value_or(1000)), nullptr, {}};
  if (cfg.data == "example1") {
    GeneratedData g = gen_example1(rng, example1_config(cfg), cfg.center);
    return {std::move(g.data), std::move(g.test_sampler), std::move(g.warnings)};
  }
  if (cfg.data == "example2") {
    GeneratedData g = gen_example2(rng, example2_config(cfg), cfg.center);
    return {std::move(g.data), std::move(g.test_sampler), std::move(g.warnings)};
  }
  throw Error(ErrorCode::kConfigInvalid, "unknown data kind '" + cfg.data + "'");
}

}  // namespace bnbias
