#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <variant>
#include <vector>

#include "bnbias/rng.hpp"

namespace bnbias {

/// Dense real vector. Entries are checked finite when built from data.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t size, double fill = 0.0);
  explicit Vec(std::vector<double> values);
  Vec(std::initializer_list<double> values);

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> a);

/// Symmetric d x d matrix stored densely; every write mirrors across the diagonal.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}
  /// Row-major input; must be exactly symmetric and finite.
  SymMat(std::size_t dim, std::vector<double> row_major);
  SymMat(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double value) {
    data_[i * dim_ + j] = value;
    data_[j * dim_ + i] = value;
  }
  void add(std::size_t i, std::size_t j, double value) {
    data_[i * dim_ + j] += value;
    if (i != j) data_[j * dim_ + i] += value;
  }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  double trace() const;
  double frobenius() const;
  Vec multiply(std::span<const double> x) const;
  double quadratic_form(std::span<const double> x) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Solves (A + ridge I) x = b. Cholesky first; if a pivot fails the check
/// the system is re-solved through the eigendecomposition.
/// Throws NotPositiveDefinite when the smallest pivot/eigenvalue of
/// A + ridge I is <= 1e-14 * trace(A) / d.
Vec solve_spd(const SymMat& a, std::span<const double> b, double ridge = 0.0);

struct EigenPair {
  double value;
  Vec vector;
};

/// Cyclic Jacobi. Sweeps until the largest off-diagonal entry is
/// <= 1e-12 * ||A||_F; eigenvalues come back sorted descending.
/// Throws NoConvergence after 100 sweeps.
std::vector<EigenPair> sym_eigs(const SymMat& a);

struct IsotropicCov {
  double sigma = 1.0;
};

/// sigma^2 (I - sum_k q_k q_k^T) for an orthonormal set {q_k}.
struct ProjectedCov {
  double sigma = 1.0;
  std::vector<Vec> removed;  // orthonormal directions
};

using CovOp = std::variant<IsotropicCov, ProjectedCov>;

/// mean + sigma * g with g ~ N(0, I) drawn by Box-Muller from `rng`. For
/// ProjectedCov the components along each removed direction are subtracted
/// from g afterwards.
Vec sample_gaussian(Rng& rng, const Vec& mean, const CovOp& cov);

/// Same as sample_gaussian with zero mean, written into `out`.
void sample_gaussian_into(Rng& rng, const CovOp& cov, std::span<double> out);

}  // namespace bnbias
