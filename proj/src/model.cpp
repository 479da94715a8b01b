#include "bnbias/model.hpp"

#include <cmath>

#include "bnbias/errors.hpp"

namespace bnbias {

double logistic_loss(double z) {
  if (z > 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double logistic_derivative(double z) {
  if (z > 0.0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

namespace {

void check_dim(std::span<const double> w, const Dataset& data) {
  if (w.size() != data.dim()) throw Error(ErrorCode::kDimensionMismatch, "w has the wrong dimension");
}

// Row inner products <w, x_r> and ||w||_Sigma.
struct RowProducts {
  std::vector<double> u;
  double sigma_norm = 0.0;
};

RowProducts row_products(std::span<const double> w, const Dataset& data, const ModelOptions& opts) {
  check_dim(w, data);
  RowProducts rp;
  const std::size_t m = data.rows();
  rp.u.resize(m);
  double sq = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    rp.u[r] = dot(w, data.row(r));
    sq += rp.u[r] * rp.u[r];
  }
  rp.sigma_norm = std::sqrt(sq / static_cast<double>(m));
  const double floor = opts.degeneracy_tol * norm2(w) * std::sqrt(data.sigma_top_eigenvalue());
  if (!(rp.sigma_norm > floor) || rp.sigma_norm == 0.0)
    throw Error(ErrorCode::kDegenerateDirection, "||w||_Sigma collapsed to " + std::to_string(rp.sigma_norm));
  return rp;
}

}  // namespace

double bn_norm(std::span<const double> w, const Dataset& data, const ModelOptions& opts) {
  return row_products(w, data, opts).sigma_norm;
}

double predict_linear(const ModelState& state, const Dataset& data, std::span<const double> x,
                      const ModelOptions& opts) {
  if (x.size() != data.dim()) throw Error(ErrorCode::kDimensionMismatch, "test point has the wrong dimension");
  const double s = bn_norm(state.w.span(), data, opts);
  return state.gamma * dot(state.w.span(), x) / s;
}

double predict_cnn(const ModelState& state, const Dataset& data, std::span<const double> patches,
                   const ModelOptions& opts) {
  const std::size_t d = data.dim();
  if (patches.size() % d != 0 || patches.empty())
    throw Error(ErrorCode::kDimensionMismatch, "patch data is not a multiple of d");
  const double s = bn_norm(state.w.span(), data, opts);
  double acc = 0.0;
  for (std::size_t off = 0; off < patches.size(); off += d) acc += dot(state.w.span(), patches.subspan(off, d));
  return state.gamma * acc / s;
}

LossAndGrads loss_and_grads(const ModelState& state, const Dataset& data, const ModelOptions& opts) {
  const auto rp = row_products(state.w.span(), data, opts);
  const std::size_t n = data.n();
  const std::size_t patches = data.patches();
  const std::size_t m = data.rows();
  const double s = rp.sigma_norm;
  const double gamma = state.gamma;

  // Per sample: U_i = sum_p u_ip, f_i = gamma U_i / s, l'_i = l'(y_i f_i).
  std::vector<double> lprime_y(n);
  double loss = 0.0;
  double weighted = 0.0;  // A = sum_i l'_i y_i U_i
  for (std::size_t i = 0; i < n; ++i) {
    double sum_u = 0.0;
    for (std::size_t p = 0; p < patches; ++p) sum_u += rp.u[i * patches + p];
    const double margin = data.label(i) * gamma * sum_u / s;
    loss += logistic_loss(margin);
    const double lp = logistic_derivative(margin);
    lprime_y[i] = lp * data.label(i);
    weighted += lprime_y[i] * sum_u;
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  // grad_w = gamma/(n s) [ sum_r l'_i y_i x_r - Sigma w * A / s^2 ],
  // Sigma w = (1/m) sum_r u_r x_r.
  LossAndGrads out;
  out.loss = loss * inv_n;
  out.grad_w = Vec(data.dim());
  const double proj = weighted / (s * s * static_cast<double>(m));
  for (std::size_t r = 0; r < m; ++r) {
    const double coeff = lprime_y[r / patches] - proj * rp.u[r];
    axpy(coeff, data.row(r), out.grad_w.span());
  }
  const double scale = gamma * inv_n / s;
  for (double& g : out.grad_w.span()) g *= scale;
  out.grad_gamma = weighted * inv_n / s;
  return out;
}

PlainLossAndGrad plain_loss_and_grad(std::span<const double> w, const Dataset& data) {
  check_dim(w, data);
  const std::size_t n = data.n();
  const std::size_t patches = data.patches();
  PlainLossAndGrad out;
  out.grad_w = Vec(data.dim());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t p = 0; p < patches; ++p) f += dot(w, data.patch(i, p));
    const double z = data.label(i) * f;
    loss += logistic_loss(z);
    const double coeff = logistic_derivative(z) * data.label(i);
    for (std::size_t p = 0; p < patches; ++p) axpy(coeff, data.patch(i, p), out.grad_w.span());
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = loss * inv_n;
  for (double& g : out.grad_w.span()) g *= inv_n;
  return out;
}

MarginProfile margin_profile(std::span<const double> w, const Dataset& data, const ModelOptions& opts) {
  const auto rp = row_products(w, data, opts);
  MarginProfile profile;
  profile.margins.resize(rp.u.size());
  for (std::size_t r = 0; r < rp.u.size(); ++r) profile.margins[r] = data.row_label(r) * rp.u[r] / rp.sigma_norm;
  return profile;
}

double discrepancy(const MarginProfile& profile) {
  const auto& m = profile.margins;
  if (m.empty()) return 0.0;
  const double count = static_cast<double>(m.size());
  double mean = 0.0;
  for (double x : m) mean += x;
  mean /= count;
  double var = 0.0;
  for (double x : m) var += (x - mean) * (x - mean);
  return 2.0 * var / count;
}

double discrepancy(std::span<const double> w, const Dataset& data, const ModelOptions& opts) {
  return discrepancy(margin_profile(w, data, opts));
}

}  // namespace bnbias
