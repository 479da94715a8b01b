#include "bnbias/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "json.hpp"

#include "bnbias/dataset.hpp"
#include "bnbias/errors.hpp"
#include "bnbias/model.hpp"
#include "bnbias/rng.hpp"
#include "bnbias/solvers.hpp"

namespace bnbias {

Suite parse_suite(const std::string& text) {
  if (text == "identities") return Suite::kIdentities;
  if (text == "inequalities") return Suite::kInequalities;
  if (text == "gradients") return Suite::kGradients;
  if (text == "all") return Suite::kAll;
  throw Error(ErrorCode::kInvalidArgument, "unknown suite '" + text + "'");
}

namespace {

using Json = nlohmann::ordered_json;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
}

double pick_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Dataset random_data(Rng& rng, std::size_t n, std::size_t d, std::size_t patches) {
  std::vector<double> rows(n * patches * d);
  for (double& v : rows) v = rng.normal();
  std::vector<int> labels(n);
  for (int& y : labels) y = rng.rademacher();
  return Dataset::from_rows(std::move(rows), std::move(labels), d, patches, false);
}

Vec random_vec(Rng& rng, std::size_t d, double scale) {
  Vec w(d);
  for (double& v : w.span()) v = scale * rng.normal();
  return w;
}

/// <a, b>_Sigma from row inner products.
double sigma_inner(const Dataset& data, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) s += dot(data.row(r), a) * dot(data.row(r), b);
  return s / static_cast<double>(data.rows());
}

double rel_err(double a, double b, double scale) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), scale, 1e-300});
}

struct Recorder {
  PropertyResult result;
  std::uint64_t seed;

  void record(std::int64_t trial, double err, bool ok, Json detail) {
    ++result.instances;
    if (std::isfinite(err)) result.worst = std::max(result.worst, err);
    else result.worst = err;
    if (ok) return;
    ++result.failures;
    if (result.failing_instance.empty()) {
      Json j;
      j["property"] = result.name;
      j["trial"] = trial;
      j["seed"] = seed;
      j["trial_seed"] = Rng::split_seed(seed, static_cast<std::uint64_t>(trial));
      j["detail"] = std::move(detail);
      result.failing_instance = j.dump();
    }
  }
};

Recorder make(const std::string& name, double tol, const VerifyOptions& opts) {
  Recorder r{{}, opts.seed};
  r.result.name = name;
  r.result.tolerance = tol;
  return r;
}

LossAndGrads grads(const ModelState& state, const Dataset& data, const VerifyOptions& opts) {
  LossAndGrads g = loss_and_grads(state, data);
  if (opts.corrupt_gradient) {
    g.grad_w[0] += 1e-3 * (1.0 + std::abs(g.grad_w[0]));
    g.grad_gamma *= 1.01;
  }
  return g;
}

/// Right-hand side of the gradient/w* identity and the absolute-sum scale
/// of its terms. u holds signed unnormalized margins per row.
std::pair<double, double> identity_rhs(const Dataset& data, const ModelState& state) {
  const std::size_t n = data.n(), P = data.patches();
  const double s = bn_norm(state.w.span(), data);
  std::vector<double> U(n, 0.0), lp(n);
  std::vector<std::vector<double>> u(n, std::vector<double>(P));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < P; ++p) {
      u[i][p] = data.label(i) * dot(state.w.span(), data.patch(i, p));
      U[i] += u[i][p];
    }
    lp[i] = std::abs(logistic_derivative(state.gamma * U[i] / s));
  }
  const double nn = static_cast<double>(n), pp = static_cast<double>(P);
  const double pre = state.gamma / (2.0 * nn * nn * pp * s * s * s);
  double sum = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double term = lp[i] * lp[j] * (U[j] - U[i]) * (U[j] / lp[j] - U[i] / lp[i]);
      sum += term;
      abs_sum += std::abs(term);
    }
  if (P > 1) {
    double lsum = 0.0, patch_term = 0.0;
    for (double l : lp) lsum += l;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t q = 0; q < P; ++q) patch_term += (u[j][p] - u[j][q]) * (u[j][p] - u[j][q]);
    sum += lsum * patch_term;
    abs_sum += lsum * patch_term;
  }
  return {pre * sum, pre * abs_sum};
}

PropertyResult grad_wstar_identity(const VerifyOptions& opts, bool cnn) {
  auto rec = make(cnn ? "grad-wstar identity (cnn)" : "grad-wstar identity (linear)", 1e-8, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    const std::size_t P = cnn ? pick(rng, 2, 3) : 1;
    const std::size_t n = pick(rng, 2, cnn ? 50 / P : 30);
    const std::size_t d = pick(rng, n * P, std::max<std::size_t>(50, n * P));
    const Dataset data = random_data(rng, n, d, P);
    ModelState state{random_vec(rng, d, pick_real(rng, 0.1, 3.0)), pick_real(rng, 0.2, 3.0)};
    const Vec wstar = solve_uniform_margin(data).solution;
    const LossAndGrads g = grads(state, data, opts);
    const double lhs = -dot(g.grad_w.span(), wstar.span());
    const auto [rhs, scale] = identity_rhs(data, state);
    const double err = rel_err(lhs, rhs, scale);
    rec.record(k, err, err <= rec.result.tolerance, {{"n", n}, {"d", d}, {"P", P}, {"lhs", lhs}, {"rhs", rhs}});
  }
  return rec.result;
}

PropertyResult distance_identity(const VerifyOptions& opts) {
  auto rec = make("discrepancy distance identity", 1e-10, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t d = pick(rng, n, 50);
    const Dataset data = random_data(rng, n, d, 1);
    Vec w(d);
    for (std::size_t i = 0; i < n; ++i) axpy(rng.normal(), data.row(i), w.span());
    const Vec wstar = solve_uniform_margin(data).solution;
    const double s = bn_norm(w.span(), data);
    const double lhs = s * s * discrepancy(w.span(), data);
    Vec diff = w;
    axpy(-sigma_inner(data, wstar.span(), w.span()), wstar.span(), diff.span());
    const double rhs = 2.0 * sigma_inner(data, diff.span(), diff.span());
    const double err = rel_err(lhs, rhs, 0.0);
    rec.record(k, err, err <= rec.result.tolerance, {{"n", n}, {"d", d}, {"lhs", lhs}, {"rhs", rhs}});
  }
  return rec.result;
}

PropertyResult metric_sandwich(const VerifyOptions& opts) {
  auto rec = make("metric sandwich", 1e-10, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t d = pick(rng, n, 50);
    const Dataset data = random_data(rng, n, d, 1);
    Vec w(d);
    for (std::size_t i = 0; i < n; ++i) axpy(rng.normal(), data.row(i), w.span());
    const Vec wstar = solve_uniform_margin(data).solution;
    const SpectrumReport spec = span_spectrum(data);
    Vec v1 = w;
    axpy(-dot(wstar.span(), w.span()) / dot(wstar.span(), wstar.span()), wstar.span(), v1.span());
    Vec v2 = w;
    axpy(-sigma_inner(data, wstar.span(), w.span()), wstar.span(), v2.span());
    const double e1 = dot(v1.span(), v1.span());
    const double lo = spec.lambda_min * e1, mid = sigma_inner(data, v2.span(), v2.span()), hi = spec.lambda_max * e1;
    const double slack = rec.result.tolerance * std::max(hi, 1e-300);
    const double excess = std::max(lo - mid, mid - hi) / std::max(hi, 1e-300);
    rec.record(k, std::max(0.0, excess), lo <= mid + slack && mid <= hi + slack,
               {{"n", n}, {"d", d}, {"lower", lo}, {"middle", mid}, {"upper", hi}});
  }
  return rec.result;
}

PropertyResult distance_anchor(const VerifyOptions& opts) {
  auto rec = make("distance identity anchor", 1e-12, opts);
  const Dataset data = Dataset::from_rows({1, 0, 0, 1}, {1, 1}, 2, 1, false);
  const Vec w{2.0, 1.0};
  const Vec wstar = solve_uniform_margin(data).solution;
  const double s = bn_norm(w.span(), data);
  const double lhs = s * s * discrepancy(w.span(), data);
  Vec diff = w;
  axpy(-sigma_inner(data, wstar.span(), w.span()), wstar.span(), diff.span());
  const double rhs = 2.0 * sigma_inner(data, diff.span(), diff.span());
  const double err = std::max(std::abs(lhs - 0.5), std::abs(rhs - 0.5));
  rec.record(0, err, err <= rec.result.tolerance, {{"lhs", lhs}, {"rhs", rhs}});
  return rec.result;
}

Dataset gradient_instance(Rng& rng, ModelState& state) {
  const std::size_t P = pick(rng, 1, 3);
  const std::size_t n = pick(rng, 2, 30);
  const std::size_t d = pick(rng, 2, 50);
  Dataset data = random_data(rng, n, d, P);
  state = ModelState{random_vec(rng, d, pick_real(rng, 0.1, 3.0)), pick_real(rng, 0.2, 3.0)};
  return data;
}

PropertyResult finite_differences(const VerifyOptions& opts) {
  auto rec = make("finite differences", 1e-5, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    ModelState state;
    const Dataset data = gradient_instance(rng, state);
    const LossAndGrads g = grads(state, data, opts);
    const double h = 1e-6;
    double err2 = 0.0, norm2sq = g.grad_gamma * g.grad_gamma;
    for (std::size_t j = 0; j < state.w.size(); ++j) {
      const double step = h * std::max(1.0, std::abs(state.w[j]));
      ModelState plus = state, minus = state;
      plus.w[j] += step;
      minus.w[j] -= step;
      const double fd = (loss_and_grads(plus, data).loss - loss_and_grads(minus, data).loss) / (2.0 * step);
      err2 += (fd - g.grad_w[j]) * (fd - g.grad_w[j]);
      norm2sq += g.grad_w[j] * g.grad_w[j];
    }
    {
      const double step = h * std::max(1.0, std::abs(state.gamma));
      ModelState plus = state, minus = state;
      plus.gamma += step;
      minus.gamma -= step;
      const double fd = (loss_and_grads(plus, data).loss - loss_and_grads(minus, data).loss) / (2.0 * step);
      err2 += (fd - g.grad_gamma) * (fd - g.grad_gamma);
    }
    const double err = std::sqrt(err2) / std::max(std::sqrt(norm2sq), 1e-300);
    rec.record(k, err, err <= rec.result.tolerance,
               {{"n", data.n()}, {"d", data.dim()}, {"P", data.patches()}, {"gamma", state.gamma}});
  }
  return rec.result;
}

PropertyResult orthogonality(const VerifyOptions& opts) {
  auto rec = make("gradient orthogonal to w", 1e-10, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    ModelState state;
    const Dataset data = gradient_instance(rng, state);
    const LossAndGrads g = grads(state, data, opts);
    const double scale = norm2(g.grad_w.span()) * norm2(state.w.span());
    const double err = std::abs(dot(g.grad_w.span(), state.w.span())) / std::max(scale, 1e-300);
    rec.record(k, err, err <= rec.result.tolerance, {{"n", data.n()}, {"d", data.dim()}, {"P", data.patches()}});
  }
  return rec.result;
}

PropertyResult at_wstar(const VerifyOptions& opts) {
  auto rec = make("gradient at w* along w*", 1e-10, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    const std::size_t P = pick(rng, 1, 3);
    const std::size_t n = pick(rng, 2, 50 / P);
    const std::size_t d = pick(rng, n * P, std::max<std::size_t>(50, n * P));
    const Dataset data = random_data(rng, n, d, P);
    const Vec wstar = solve_uniform_margin(data).solution;
    Vec w = wstar;
    const double c = pick_real(rng, 0.1, 10.0);
    for (double& v : w.span()) v *= c;
    const ModelState state{w, pick_real(rng, 0.2, 3.0)};
    const LossAndGrads g = grads(state, data, opts);
    const double err = std::abs(dot(g.grad_w.span(), wstar.span()));
    rec.record(k, err, err <= rec.result.tolerance, {{"n", n}, {"d", d}, {"P", P}, {"value", -err}});
  }
  return rec.result;
}

PropertyResult aux_random(const VerifyOptions& opts) {
  auto rec = make("sorted-sequence inequality", 0.0, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = pick(rng, 1, 50);
      const bool ties = rng.uniform() < 0.2;
      std::vector<double> a(n), b(n);
      for (double& v : a) v = ties ? std::round(pick_real(rng, -5, 5) * 2.0) / 2.0 : pick_real(rng, -5, 5);
      for (double& v : b) v = rng.uniform() < 0.1 ? 0.0 : pick_real(rng, 0, 3);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end(), std::greater<>());
      const AuxInequality r = check_aux_inequality(a, b);
      const double gap = r.rhs > 0.0 ? std::max(0.0, (r.rhs - r.lhs) / r.rhs) : 0.0;
      rec.record(k, gap, r.holds, {{"a", a}, {"b", b}, {"lhs", r.lhs}, {"rhs", r.rhs}});
    }
  }
  return rec.result;
}

PropertyResult aux_anchor(const VerifyOptions& opts) {
  auto rec = make("sorted-sequence anchor", 1e-12, opts);
  const std::vector<double> a{0.0, 1.0}, b{2.0, 1.0};
  const AuxInequality r = check_aux_inequality(a, b);
  const double err = std::max(std::abs(r.lhs - 4.0), std::abs(r.rhs - 0.75));
  rec.record(0, err, r.holds && err <= rec.result.tolerance, {{"lhs", r.lhs}, {"rhs", r.rhs}});
  return rec.result;
}

PropertyResult gamma_random(const VerifyOptions& opts) {
  auto rec = make("scale recurrence envelope", 0.0, opts);
  for (std::int64_t k = 0; k < opts.trials; ++k) {
    Rng rng(Rng::split_seed(opts.seed, static_cast<std::uint64_t>(k)));
    const double a0 = pick_real(rng, 0.1, 3.0);
    const double c = std::pow(10.0, pick_real(rng, -3.0, 0.0));
    const auto t = static_cast<std::int64_t>(std::floor(std::pow(10.0, pick_real(rng, 0.0, 6.0))));
    const GammaRecurrence r = gamma_recurrence_bounds(a0, c, t);
    const double out = std::max({0.0, r.lower - r.value, r.value - r.upper});
    rec.record(k, out, r.bracketed,
               {{"a0", a0}, {"c", c}, {"t", t}, {"value", r.value}, {"lower", r.lower}, {"upper", r.upper}});
  }
  return rec.result;
}

PropertyResult gamma_anchor(const VerifyOptions& opts) {
  auto rec = make("scale recurrence anchor", 1e-12, opts);
  const GammaRecurrence r = gamma_recurrence_bounds(1.0, 1.0, 1);
  const double err = std::abs(r.value - (1.0 + std::exp(-1.0)));
  rec.record(0, err, r.bracketed && err <= rec.result.tolerance, {{"value", r.value}});
  return rec.result;
}

}  // namespace

std::vector<PropertyResult> run_suite(Suite suite, const VerifyOptions& opts) {
  if (opts.trials < 0) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 0");
  std::vector<PropertyResult> out;
  const bool all = suite == Suite::kAll;
  if (all || suite == Suite::kIdentities) {
    out.push_back(grad_wstar_identity(opts, false));
    out.push_back(grad_wstar_identity(opts, true));
    out.push_back(distance_identity(opts));
    out.push_back(metric_sandwich(opts));
    if (opts.trials > 0) out.push_back(distance_anchor(opts));
  }
  if (all || suite == Suite::kGradients) {
    out.push_back(finite_differences(opts));
    out.push_back(orthogonality(opts));
    out.push_back(at_wstar(opts));
  }
  if (all || suite == Suite::kInequalities) {
    out.push_back(aux_random(opts));
    if (opts.trials > 0) out.push_back(aux_anchor(opts));
    out.push_back(gamma_random(opts));
    if (opts.trials > 0) out.push_back(gamma_anchor(opts));
  }
  return out;
}

}  // namespace bnbias
