#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bnbias/dataset.hpp"
#include "bnbias/linalg.hpp"
#include "bnbias/trainer.hpp"

namespace bnbias {

/// Worker cap: BNML_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

struct RateFit {
  double slope = 0.0;      // coefficient of log^2 t in log D
  double intercept = 0.0;
  double r_squared = 0.0;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  double loss_band_ratio = 0.0;  // max / min of t * L(t) over the window
  std::size_t rows_used = 0;
  std::size_t clipped = 0;       // rows with D <= 1e-300, clipped before the log
};

inline constexpr double kClipFloor = 1e-300;
inline constexpr std::size_t kMinFitRows = 20;

/// Least squares of log D(t) on (log t)^2 over the last `tail_fraction` of
/// the logged rows (rows with t = 0 are skipped). Throws InsufficientData
/// when fewer than 20 unclipped rows remain.
RateFit fit_rate(const TrainTrace& trace, double tail_fraction = 0.5);
/// Same on bare series; `loss` may be empty (band ratio then stays 0).
RateFit fit_rate_series(std::span<const std::int64_t> t, std::span<const double> d,
                        std::span<const double> loss, double tail_fraction = 0.5);

inline constexpr double kWilsonZ = 1.959963984540054;

struct ProportionEstimate {
  std::int64_t errors = 0;
  std::int64_t samples = 0;
  double rate = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  double wilson_halfwidth = 0.0;
};

/// 95% Wilson score interval for k successes out of n.
ProportionEstimate wilson(std::int64_t k, std::int64_t n);

inline constexpr std::int64_t kMcChunk = 1024;

/// Test error of sign(<w, xbar>) on fresh draws. Chunk c of 1024 draws uses
/// Rng(split_seed(seed, c)), so the result does not depend on the worker
/// count. A zero score counts as an error.
ProportionEstimate mc_test_error(std::span<const double> w, const PointSampler& sampler, std::int64_t mc_samples,
                                 std::uint64_t seed);
/// Several classifiers scored on the same draws.
std::vector<ProportionEstimate> mc_test_errors(const std::vector<std::span<const double>>& ws,
                                               const PointSampler& sampler, std::int64_t mc_samples,
                                               std::uint64_t seed);

struct GenReport {
  std::uint64_t seed = 0;
  ProportionEstimate uniform;
  ProportionEstimate max_margin;
  std::int64_t mc_samples = 0;
  double residual_uniform = 0.0;
  double residual_max = 0.0;
  double kkt_violation = 0.0;
  bool regularized = false;
  /// False when the uniform-margin residual exceeds 1e-6.
  bool valid = true;
  std::vector<std::string> warnings;

  double error_uniform() const { return uniform.rate; }
  double error_max() const { return max_margin.rate; }
  double wilson_halfwidth() const;
};

inline constexpr double kValidResidual = 1e-6;

/// Draws training data with Rng(seed), solves both reference problems and
/// scores them on the same test draws (seeded by split_seed(seed, 1)).
GenReport run_example1(const Example1Config& cfg, std::int64_t mc_samples, std::uint64_t seed);
GenReport run_example2(const Example2Config& cfg, std::int64_t mc_samples, std::uint64_t seed);

struct PairedSummary {
  TrainTrace bn;
  TrainTrace plain;
  double final_d_bn = 0.0;
  double final_d_plain = 0.0;
  /// final_d_bn / final_d_plain (infinite when the plain run reached 0).
  double discrepancy_ratio = 0.0;
};

PairedSummary compare_bn_vs_plain(const Dataset& data, const TrainConfig& cfg_bn, const TrainConfig& cfg_plain,
                                  const Probes& probes);

std::string ratefit_json(const RateFit& fit);
std::string genreport_json(const std::vector<GenReport>& reports);

}  // namespace bnbias
