#include "bnbias/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "bnbias/errors.hpp"

namespace bnbias {

namespace {

constexpr double kRankRelTol = 1e-10;
constexpr double kFeasibilityTol = 1e-6;

SymMat gram(const std::vector<Vec>& rows) {
  SymMat g(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a; b < rows.size(); ++b) g.set(a, b, dot(rows[a].span(), rows[b].span()));
  return g;
}

std::vector<Vec> input_rows(const Dataset& data) {
  std::vector<Vec> rows;
  rows.reserve(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) rows.emplace_back(std::vector<double>(data.row(r).begin(), data.row(r).end()));
  return rows;
}

Vec combine(const std::vector<Vec>& rows, std::span<const double> coeffs, std::size_t dim) {
  Vec w(dim);
  for (std::size_t r = 0; r < rows.size(); ++r) axpy(coeffs[r], rows[r].span(), w.span());
  return w;
}

}  // namespace

SpanBasis::SpanBasis(const Dataset& data) {
  const auto rows = input_rows(data);
  const auto pairs = sym_eigs(gram(rows));
  if (pairs.empty() || !(pairs.front().value > 0.0)) return;
  const double cutoff = kRankRelTol * pairs.front().value;
  for (const auto& p : pairs) {
    if (!(p.value > cutoff)) break;
    Vec q = combine(rows, p.vector.span(), data.dim());
    const double scale = 1.0 / std::sqrt(p.value);
    for (double& x : q.span()) x *= scale;
    basis_.push_back(std::move(q));
  }
}

Vec SpanBasis::project(std::span<const double> w) const {
  Vec out(w.size());
  for (const Vec& q : basis_) axpy(dot(q.span(), w), q.span(), out.span());
  return out;
}

SolverReport solve_uniform_margin(const Dataset& data) {
  std::vector<Vec> z;
  z.reserve(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) z.push_back(data.signed_row(r));
  const SymMat g = gram(z);
  const std::size_t m = z.size();
  const double base = g.trace() / static_cast<double>(m);
  const std::vector<double> ones(m, 1.0);

  SolverReport best;
  best.residual = std::numeric_limits<double>::infinity();
  std::int64_t attempts = 0;
  for (double factor : {0.0, 1e-12, 1e-10}) {
    const double ridge = factor * base;
    ++attempts;
    Vec coeffs;
    try {
      coeffs = solve_spd(g, ones, ridge);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotPositiveDefinite) throw;
      continue;
    }
    SolverReport report;
    report.solution = combine(z, coeffs.span(), data.dim());
    report.duals = coeffs.values();
    report.ridge = ridge;
    report.regularized = ridge > 0.0;
    report.iterations = attempts;
    report.slacks.resize(m);
    report.residual = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      report.slacks[r] = dot(report.solution.span(), z[r].span()) - 1.0;
      report.residual = std::max(report.residual, std::abs(report.slacks[r]));
    }
    if (!std::isfinite(report.residual)) continue;
    if (report.residual <= kFeasibilityTol) return report;
    if (report.residual < best.residual) best = std::move(report);
  }
  throw Error(ErrorCode::kInfeasible, "uniform-margin system has no solution (best residual " +
                                          std::to_string(best.residual) + ")");
}

SolverReport solve_max_margin(const Dataset& data, const MaxMarginOptions& opts) {
  const std::size_t n = data.n();
  std::vector<Vec> zbar;
  zbar.reserve(n);
  double min_norm = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    Vec s = data.patch_sum(i);
    for (double& x : s.span()) x *= data.label(i);
    const double ns = norm2(s.span());
    if (ns == 0.0) throw Error(ErrorCode::kNotSeparable, "sample " + std::to_string(i) + " has a zero input");
    min_norm = std::min(min_norm, ns);
    zbar.push_back(std::move(s));
  }
  const SymMat q = gram(zbar);
  const double scale = 1.0 / min_norm;
  // The certificate is recomputed from w afterwards; stop well inside the
  // tolerance so rounding in that recomputation cannot push it over.
  const double target = 1e-2 * opts.tolerance;

  std::vector<double> alpha(n, 0.0), margin(n, 0.0);
  auto violation = [&](std::size_t i) {
    if (alpha[i] > 0.0) return std::abs(1.0 - margin[i]) * std::max(1.0, alpha[i]);
    return std::max(0.0, 1.0 - margin[i]);
  };
  auto refresh_margins = [&] {
    for (std::size_t i = 0; i < n; ++i) margin[i] = dot(q.row(i), alpha);
  };

  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;
  std::int64_t sweeps = 0;
  bool converged = false;
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    double worst = 0.0;
    for (std::size_t i : active) {
      const double updated = std::max(0.0, alpha[i] + (1.0 - margin[i]) / q(i, i));
      const double delta = updated - alpha[i];
      if (delta != 0.0) {
        alpha[i] = updated;
        axpy(delta, q.row(i), margin);
      }
    }
    for (std::size_t i : active) worst = std::max(worst, violation(i));

    double wsq = 0.0, asum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wsq += alpha[i] * margin[i];
      asum += alpha[i];
    }
    if (std::sqrt(std::max(0.0, wsq)) > 1e8 * scale)
      throw Error(ErrorCode::kNotSeparable, "dual iterates diverged; the data is not linearly separable");

    if (worst <= target) {
      refresh_margins();
      double full = 0.0;
      for (std::size_t i = 0; i < n; ++i) full = std::max(full, violation(i));
      if (full <= target) {
        converged = true;
        break;
      }
      active.resize(n);
      for (std::size_t i = 0; i < n; ++i) active[i] = i;
    } else if (sweeps % 10 == 0) {
      std::vector<std::size_t> kept;
      for (std::size_t i : active)
        if (alpha[i] > 0.0 || margin[i] < 1.0) kept.push_back(i);
      if (!kept.empty()) active.swap(kept);
    }
    if (sweeps == opts.max_sweeps && asum > 0.0 && wsq / asum < 1e-3)
      throw Error(ErrorCode::kNotSeparable, "dual objective grows without bound; the data is not linearly separable");
  }
  if (!converged) throw Error(ErrorCode::kNoConvergence, "max-margin solver hit the sweep cap");

  SolverReport report;
  report.solution = combine(zbar, alpha, data.dim());
  report.duals = alpha;
  report.iterations = sweeps;
  report.slacks.resize(n);
  double worst_slack = 0.0, kkt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    report.slacks[i] = dot(report.solution.span(), zbar[i].span()) - 1.0;
    worst_slack = std::max(worst_slack, -report.slacks[i]);
    kkt = std::max(kkt, alpha[i] * std::abs(report.slacks[i]));
  }
  report.residual = worst_slack;
  report.kkt_violation = std::max(kkt, worst_slack);
  return report;
}

SpectrumReport span_spectrum(const Dataset& data) {
  const auto rows = input_rows(data);
  SymMat k = gram(rows);
  const double inv = 1.0 / static_cast<double>(rows.size());
  SymMat scaled(k.dim());
  for (std::size_t a = 0; a < k.dim(); ++a)
    for (std::size_t b = a; b < k.dim(); ++b) scaled.set(a, b, k(a, b) * inv);
  SpectrumReport report;
  for (const auto& p : sym_eigs(scaled)) report.eigenvalues.push_back(p.value);
  if (report.eigenvalues.empty() || !(report.eigenvalues.front() > 0.0)) return report;
  report.lambda_max = report.eigenvalues.front();
  const double cutoff = kRankRelTol * report.lambda_max;
  for (double v : report.eigenvalues) {
    if (!(v > cutoff)) break;
    report.lambda_min = v;
    ++report.rank;
  }
  return report;
}

AuxInequality check_aux_inequality(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "sequences differ in length");
  if (a.empty()) throw Error(ErrorCode::kInvalidArgument, "sequences are empty");
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] < a[i - 1]) throw Error(ErrorCode::kNotSorted, "a must be nondecreasing");
    if (b[i] > b[i - 1]) throw Error(ErrorCode::kNotSorted, "b must be nonincreasing");
  }
  if (b.back() < 0.0) throw Error(ErrorCode::kNotSorted, "b must be nonnegative");
  const std::size_t n = a.size();
  double lhs = 0.0, pair_sum = 0.0, bsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    bsum += b[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = (a[i] - a[j]) * (a[i] - a[j]);
      lhs += std::max(b[i], b[j]) * diff;
      pair_sum += diff;
    }
  }
  AuxInequality out;
  out.lhs = lhs;
  out.rhs = bsum / (4.0 * static_cast<double>(n)) * pair_sum;
  out.holds = out.lhs >= out.rhs - 1e-12 * std::max(1.0, std::abs(out.rhs));
  return out;
}

GammaRecurrence gamma_recurrence_bounds(double a0, double c, std::int64_t t) {
  if (t < 0) throw Error(ErrorCode::kInvalidArgument, "t must be >= 0");
  if (!(c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "c must be > 0");
  double a = a0;
  for (std::int64_t k = 0; k < t; ++k) a += c * std::exp(-a);
  GammaRecurrence out;
  out.value = a;
  out.lower = std::log(c * static_cast<double>(t) + std::exp(a0));
  out.upper = c * std::exp(-a0) + out.lower;
  const double slack = 1e-12 * std::max(1.0, std::abs(a));
  out.bracketed = out.lower <= a + slack && a <= out.upper + slack;
  return out;
}

std::string solver_report_json(const SolverReport& report) {
  nlohmann::ordered_json j;
  j["solution"] = report.solution.values();
  j["residual"] = report.residual;
  j["iterations"] = report.iterations;
  j["certificate"] = {{"slacks", report.slacks},
                      {"duals", report.duals},
                      {"ridge", report.ridge},
                      {"regularized", report.regularized},
                      {"kkt_violation", report.kkt_violation}};
  return j.dump(2);
}

std::string spectrum_report_json(const SpectrumReport& report) {
  nlohmann::ordered_json j;
  j["lambda_min"] = report.lambda_min;
  j["lambda_max"] = report.lambda_max;
  j["rank"] = report.rank;
  j["eigenvalues"] = report.eigenvalues;
  return j.dump(2);
}

}  // namespace bnbias
