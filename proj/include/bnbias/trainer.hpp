#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bnbias/dataset.hpp"
#include "bnbias/model.hpp"

namespace bnbias {

enum class ModelKind { kBnLinear, kBnCnn, kPlainLogistic };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct TrainConfig {
  double eta = 0.05;
  std::int64_t steps = 200000;
  double init_scale = 0.01;
  double gamma0 = 1.0;
  std::uint64_t seed = 1;
  std::int64_t log_every = 100;
  ModelKind model_kind = ModelKind::kBnLinear;
  /// Keep y_i * sum_p <w, x_i^(p)> for every sample at every logged row.
  bool record_sample_margins = false;

  void validate() const;
};

/// Optional reference directions used for alignment columns.
struct Probes {
  std::optional<Vec> w_star;
  std::optional<Vec> w_max;
};

struct TraceRow {
  std::int64_t t = 0;
  double loss = 0.0;
  double discrepancy = 0.0;
  double gamma = 0.0;
  double w_norm2 = 0.0;
  double w_sigma_norm = 0.0;
  std::optional<double> align_wstar;
  std::optional<double> align_wmax;
  double min_margin = 0.0;
  double max_margin = 0.0;
  // Kept in memory only; not part of the CSV layout.
  double mean_margin = 0.0;
  std::optional<double> inner_wstar;
};

enum class TrainStatus { kOk, kDiverged, kDegenerate };

struct TrainTrace {
  std::vector<TraceRow> rows;
  /// Per-sample raw margins y_i <w, x_i> at each row (when recorded).
  std::vector<std::vector<double>> sample_margins;
  ModelState final_state;
  TrainStatus status = TrainStatus::kOk;
  std::string message;
  /// Number of single steps where ||w||_2 dropped by more than the slack.
  std::int64_t norm_decrease_steps = 0;
  double eta = 0.0;
  ModelKind model_kind = ModelKind::kBnLinear;
};

/// w0 = init_scale * g / ||g||_2 with g standard normal (redrawn while
/// ||g||_2 < 1e-8), gamma = gamma0.
ModelState init_state(Rng& rng, const TrainConfig& cfg, std::size_t dim);

/// Full-batch gradient descent with simultaneous updates of w and gamma.
/// Rows are logged at t = 0, every log_every steps, and t = steps. A
/// non-finite loss or a collapsed ||w||_Sigma stops the run and the trace up
/// to the last finite row is returned with the status set.
TrainTrace train(const Dataset& data, const TrainConfig& cfg, const Probes& probes = {});

/// Slack for one-step norm decreases: 1e-12 * max(1, ||w||_2).
inline constexpr double kNormSlack = 1e-12;

struct MonotonicityReport {
  std::int64_t transitions = 0;
  std::int64_t norm_violations = 0;
  std::int64_t wstar_violations = 0;
  std::int64_t wstar_transitions = 0;
};

/// ||w||_2 nondecreasing across rows; when inner products with w* were
/// recorded, <w, w*> nondecreasing after the first row with gamma >= 1/2.
MonotonicityReport monotonicity_report(const TrainTrace& trace);

struct GammaEnvelopeReport {
  bool triggered = false;
  std::int64_t t_start = 0;
  double gamma_start = 0.0;
  std::int64_t checked = 0;
  std::int64_t violations = 0;
};

/// From the first row whose margin spread is <= 1/4 of the mean margin,
/// checks log((eta/8) dt + e^g1) <= gamma_t <= log(8 eta dt + 2 e^g1).
GammaEnvelopeReport gamma_envelope_report(const TrainTrace& trace);

/// Fixed header `t,loss,discrepancy,gamma,w_norm2,w_sigma_norm,align_wstar,
/// align_wmax,min_margin,max_margin`; absent probes print as empty fields.
void write_trace_csv(std::ostream& out, const TrainTrace& trace);
/// Reads the columns back (in-memory-only fields stay empty).
TrainTrace read_trace_csv(std::istream& in);

}  // namespace bnbias
