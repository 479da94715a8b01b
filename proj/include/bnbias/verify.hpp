#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bnbias {

enum class Suite { kIdentities, kInequalities, kGradients, kAll };

Suite parse_suite(const std::string& text);

struct VerifyOptions {
  std::int64_t trials = 100;
  std::uint64_t seed = 7;
  /// Negative control: perturbs the analytic gradient before it is checked.
  bool corrupt_gradient = false;
};

struct PropertyResult {
  std::string name;
  std::int64_t instances = 0;
  std::int64_t failures = 0;
  /// Largest observed error measure (relative error or ratio, per property).
  double worst = 0.0;
  double tolerance = 0.0;
  /// JSON of the first failing instance (trial index and seed for replay).
  std::string failing_instance;

  bool passed() const { return failures == 0; }
};

/// Trial k of every property draws from Rng(split_seed(seed, k)). The
/// auxiliary-inequality property runs 100 instances per trial; anchors run once.
std::vector<PropertyResult> run_suite(Suite suite, const VerifyOptions& opts);

}  // namespace bnbias
