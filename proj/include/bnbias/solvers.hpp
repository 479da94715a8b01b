#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bnbias/dataset.hpp"
#include "bnbias/linalg.hpp"

namespace bnbias {

struct SolverReport {
  Vec solution;
  /// Max constraint violation, recomputed from `solution`.
  double residual = 0.0;
  std::int64_t iterations = 0;
  /// Per-constraint slack <w, z> - 1.
  std::vector<double> slacks;
  /// Dual variables (max-margin) or Gram coefficients (uniform-margin).
  std::vector<double> duals;
  double ridge = 0.0;
  /// Set when the Gram system needed a ridge to solve.
  bool regularized = false;
  /// Max KKT violation (max-margin only).
  double kkt_violation = 0.0;
};

struct SpectrumReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::size_t rank = 0;
  /// All eigenvalues of the Gram form, descending.
  std::vector<double> eigenvalues;
};

/// Orthonormal basis of span{x_r} built from the Gram eigendecomposition.
class SpanBasis {
 public:
  explicit SpanBasis(const Dataset& data);
  std::size_t rank() const noexcept { return basis_.size(); }
  Vec project(std::span<const double> w) const;

 private:
  std::vector<Vec> basis_;
};

/// Minimum-norm solution of <w, z_r> = 1 over all constraint rows
/// (z_r = y_i x_r, one per patch), via the Gram system with the ridge
/// ladder {0, 1e-12, 1e-10} * tr(G)/m. Throws Infeasible when the recomputed
/// residual stays above 1e-6.
SolverReport solve_uniform_margin(const Dataset& data);

struct MaxMarginOptions {
  double tolerance = 1e-8;
  std::int64_t max_sweeps = 1000000;
};

/// Hard-margin SVM through the origin on the patch sums xbar_i, by dual
/// coordinate ascent with shrinking. Throws NotSeparable when the dual
/// objective runs away, NoConvergence at the sweep cap.
SolverReport solve_max_margin(const Dataset& data, const MaxMarginOptions& opts = {});

/// Nonzero spectrum of Sigma restricted to span{x_r}, from the m x m matrix
/// K / m (m = nP). Eigenvalues below 1e-10 * lambda_max count as rank deficiency.
SpectrumReport span_spectrum(const Dataset& data);

struct AuxInequality {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// lhs = sum_{i,i'} max(b_i, b_i') (a_i - a_i')^2,
/// rhs = (sum b_i) / (4n) * sum_{i,i'} (a_i - a_i')^2.
/// `a` must be nondecreasing and `b` nonincreasing and nonnegative (NotSorted otherwise).
AuxInequality check_aux_inequality(std::span<const double> a, std::span<const double> b);

struct GammaRecurrence {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool bracketed = false;
};

/// Iterates a <- a + c exp(-a) t times from a0 and compares with
/// [log(c t + e^a0), c e^-a0 + log(c t + e^a0)].
GammaRecurrence gamma_recurrence_bounds(double a0, double c, std::int64_t t);

std::string solver_report_json(const SolverReport& report);
std::string spectrum_report_json(const SpectrumReport& report);

}  // namespace bnbias
