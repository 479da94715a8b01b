#include "bnbias/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bnbias/errors.hpp"

namespace bnbias {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values)) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " has non-finite entries");
}

constexpr double kPivotRelTol = 1e-14;
constexpr double kJacobiRelTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

}  // namespace

Vec::Vec(std::size_t size, double fill) : data_(size, fill) { require_finite(data_, "Vec"); }

Vec::Vec(std::vector<double> values) : data_(std::move(values)) { require_finite(data_, "Vec"); }

Vec::Vec(std::initializer_list<double> values) : data_(values) { require_finite(data_, "Vec"); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "dot of vectors with different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "axpy of vectors with different lengths");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

SymMat::SymMat(std::size_t dim, std::vector<double> row_major) : dim_(dim), data_(std::move(row_major)) {
  if (data_.size() != dim * dim) throw Error(ErrorCode::kDimensionMismatch, "SymMat data is not dim*dim");
  require_finite(data_, "SymMat");
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i + 1; j < dim; ++j)
      if (data_[i * dim + j] != data_[j * dim + i]) throw Error(ErrorCode::kInvalidArgument, "SymMat input is not symmetric");
}

SymMat::SymMat(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.size()) throw Error(ErrorCode::kDimensionMismatch, "SymMat rows must be square");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  *this = SymMat(rows.size(), std::move(flat));
}

double SymMat::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
  return t;
}

double SymMat::frobenius() const { return norm2(data_); }

Vec SymMat::multiply(std::span<const double> x) const {
  if (x.size() != dim_) throw Error(ErrorCode::kDimensionMismatch, "SymMat::multiply size mismatch");
  Vec out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = dot(row(i), x);
  return out;
}

double SymMat::quadratic_form(std::span<const double> x) const {
  const Vec ax = multiply(x);
  return dot(ax.span(), x);
}

namespace {

// Returns false if a pivot drops to or below `pivot_floor`.
bool cholesky(const SymMat& a, double ridge, double pivot_floor, std::vector<double>& lower) {
  const std::size_t n = a.dim();
  lower.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j) + ridge;
    for (std::size_t k = 0; k < j; ++k) diag -= lower[j * n + k] * lower[j * n + k];
    if (!(diag > pivot_floor)) return false;
    const double ljj = std::sqrt(diag);
    lower[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower[i * n + k] * lower[j * n + k];
      lower[i * n + j] = s / ljj;
    }
  }
  return true;
}

void cholesky_solve(const std::vector<double>& lower, std::size_t n, std::span<double> x) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= lower[i * n + k] * x[k];
    x[i] = s / lower[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower[k * n + ii] * x[k];
    x[ii] = s / lower[ii * n + ii];
  }
}

Vec shifted_residual(const SymMat& a, double ridge, std::span<const double> x, std::span<const double> b) {
  Vec r = a.multiply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i] - ridge * x[i];
  return r;
}

}  // namespace

Vec solve_spd(const SymMat& a, std::span<const double> b, double ridge) {
  const std::size_t n = a.dim();
  if (b.size() != n) throw Error(ErrorCode::kDimensionMismatch, "solve_spd right-hand side size mismatch");
  if (!(ridge >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "solve_spd ridge must be >= 0");
  if (n == 0) return Vec{};
  const double floor = kPivotRelTol * std::abs(a.trace()) / static_cast<double>(n);

  std::vector<double> lower;
  if (cholesky(a, ridge, floor, lower)) {
    Vec x(std::vector<double>(b.begin(), b.end()));
    cholesky_solve(lower, n, x.span());
    // One step of iterative refinement.
    Vec r = shifted_residual(a, ridge, x.span(), b);
    cholesky_solve(lower, n, r.span());
    axpy(1.0, r.span(), x.span());
    return x;
  }

  SymMat shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted.add(i, i, ridge);
  const auto pairs = sym_eigs(shifted);
  if (!(pairs.back().value > floor))
    throw Error(ErrorCode::kNotPositiveDefinite,
                "smallest eigenvalue " + std::to_string(pairs.back().value) + " of A + ridge*I is not above the pivot floor");
  Vec x(n);
  for (const auto& p : pairs) axpy(dot(p.vector.span(), b) / p.value, p.vector.span(), x.span());
  return x;
}

std::vector<EigenPair> sym_eigs(const SymMat& input) {
  const std::size_t n = input.dim();
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = input(i, j);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  const double threshold = kJacobiRelTol * input.frobenius();
  auto max_off = [&] {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::abs(a[i * n + j]));
    return m;
  };

  int sweep = 0;
  while (max_off() > threshold) {
    if (++sweep > kJacobiMaxSweeps) throw Error(ErrorCode::kNoConvergence, "Jacobi did not converge in 100 sweeps");
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
  std::vector<EigenPair> out;
  out.reserve(n);
  for (std::size_t idx : order) {
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + idx];
    out.push_back({a[idx * n + idx], Vec(std::move(col))});
  }
  return out;
}

void sample_gaussian_into(Rng& rng, const CovOp& cov, std::span<double> out) {
  const double sigma = std::visit([](const auto& c) { return c.sigma; }, cov);
  for (double& x : out) x = rng.normal();
  if (const auto* projected = std::get_if<ProjectedCov>(&cov)) {
    for (const Vec& q : projected->removed) {
      if (q.size() != out.size()) throw Error(ErrorCode::kDimensionMismatch, "projected direction has wrong dimension");
      axpy(-dot(q.span(), out), q.span(), out);
    }
  }
  for (double& x : out) x *= sigma;
}

Vec sample_gaussian(Rng& rng, const Vec& mean, const CovOp& cov) {
  Vec out(mean.size());
  sample_gaussian_into(rng, cov, out.span());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += mean[i];
  return out;
}

}  // namespace bnbias
