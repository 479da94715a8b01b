#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "bnbias/dataset.hpp"
#include "bnbias/trainer.hpp"

namespace bnbias {

/// Everything a CLI command needs. Defaults reproduce the n = 50, d = 1000
/// Gaussian margin experiment.
struct RunConfig {
  std::string experiment = "train";

  // dataset
  std::string data = "gaussian";  // gaussian | example1 | example2 | file:<path>
  std::size_t n = 50;
  std::optional<std::size_t> d;   // default: 1000 (gaussian), 2n (example1), ceil(n^2 ln n) (example2)
  std::size_t patches = 4;        // example1 only; example2 always has 2
  std::optional<double> sigma;    // default: the example's own scaling
  bool center = false;            // examples only; gaussian data is always centered

  TrainConfig train;

  // harness
  double tail = 0.5;
  std::int64_t mc = 10000;
  std::int64_t seeds = 5;
  int which = 1;
  std::string suite = "all";
  std::int64_t trials = 100;
  bool corrupt_gradient = false;
  std::string trace_path;
  std::string solve = "all";  // uniform | max | spectrum | all

  std::uint64_t seed = 1;
  std::string out;
  bool plot = false;

  void validate() const;
};

/// Overlays a JSON document with top-level keys {experiment, dataset, train,
/// harness, seed} onto `cfg`. Unknown keys and wrong types throw ConfigInvalid.
void apply_config_json(RunConfig& cfg, const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Effective configuration in the same layout (output paths excluded).
nlohmann::ordered_json run_config_json(const RunConfig& cfg);

struct BuiltData {
  Dataset data;
  /// Set for the two generated examples.
  std::shared_ptr<const PointSampler> test_sampler;
  std::vector<std::string> warnings;
};

Example1Config example1_config(const RunConfig& cfg);
Example2Config example2_config(const RunConfig& cfg);

/// Builds the training set. Generated data draws from Rng(split_seed(seed, 2)),
/// leaving Rng(seed) to the weight initialization.
BuiltData build_dataset(const RunConfig& cfg);

}  // namespace bnbias
