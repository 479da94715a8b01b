#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bnbias/linalg.hpp"
#include "bnbias/rng.hpp"

namespace bnbias {

/// Sigma is cached as a dense matrix only up to this dimension; above it the
/// matrix would dominate memory (d = 9780 is ~760 MB) and callers work from
/// inner products instead.
inline constexpr std::size_t kSigmaCacheMaxDim = 4096;

/// Training set of n samples with P patches each (P = 1 is the plain linear
/// setting). Row r = i * P + p of `inputs` holds patch p of sample i.
/// Immutable after construction.
class Dataset {
 public:
  /// Builds from rows laid out as above. When `center` is set the mean over
  /// all n*P rows is subtracted and stored as train_mean.
  static Dataset from_rows(std::vector<double> rows, std::vector<int> labels, std::size_t dim,
                           std::size_t patches, bool center);

  std::size_t n() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t patches() const noexcept { return patches_; }
  std::size_t rows() const noexcept { return labels_.size() * patches_; }
  bool is_patched() const noexcept { return patches_ > 1; }

  std::span<const double> row(std::size_t r) const { return {inputs_.data() + r * dim_, dim_}; }
  std::span<const double> patch(std::size_t i, std::size_t p) const { return row(i * patches_ + p); }
  int label(std::size_t i) const { return labels_[i]; }
  int row_label(std::size_t r) const { return labels_[r / patches_]; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  std::span<const double> inputs() const noexcept { return inputs_; }
  const Vec& train_mean() const noexcept { return train_mean_; }
  bool centered() const noexcept { return centered_; }

  /// Cached Sigma = (nP)^-1 sum_r x_r x_r^T, present when dim <= kSigmaCacheMaxDim.
  const std::optional<SymMat>& sigma() const noexcept { return sigma_; }
  /// Sigma recomputed from the rows (test cross-check; O(n P d^2)).
  SymMat recompute_sigma() const;
  /// Largest eigenvalue of Sigma by power iteration on x -> (nP)^-1 sum_r x_r <x_r, x>.
  double sigma_top_eigenvalue() const noexcept { return sigma_top_eig_; }

  /// z_r = y_i x_r.
  Vec signed_row(std::size_t r) const;
  /// xbar_i = sum_p x_i^(p).
  Vec patch_sum(std::size_t i) const;

 private:
  Dataset() = default;

  std::size_t dim_ = 0;
  std::size_t patches_ = 1;
  std::vector<double> inputs_;
  std::vector<int> labels_;
  Vec train_mean_;
  bool centered_ = false;
  std::optional<SymMat> sigma_;
  double sigma_top_eig_ = 0.0;
};

/// Centers raw linear inputs (P = 1).
Dataset center(const std::vector<Vec>& raw_inputs, const std::vector<int>& labels);
/// Centers raw patched inputs: raw_inputs[i][p] is patch p of sample i.
Dataset center_patched(const std::vector<std::vector<Vec>>& raw_inputs, const std::vector<int>& labels);

/// Draws labeled points from a fixed distribution. `draw` writes the P
/// patches of one point (P*d entries, patch-major) and returns its label.
class PointSampler {
 public:
  virtual ~PointSampler() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t patches() const = 0;
  virtual int draw(Rng& rng, std::span<double> patches_out) const = 0;
};

struct Example1Config {
  Vec u;
  std::size_t patches = 4;
  double sigma = 0.0;
  std::size_t n = 20;
  std::size_t dim = 40;

  /// u = e_1 (unit), d = 2n, P = 4, sigma = 20 ||u|| sqrt(P d).
  static Example1Config default_scaling(std::size_t n, std::size_t patches = 4);
};

struct Example2Config {
  Vec u;
  Vec v;
  double rho = 0.0;
  double alpha = 0.5;
  double sigma = 0.0;
  std::size_t n = 50;
  std::size_t dim = 0;

  /// d = ceil(n^2 ln n), sigma = d^-1/2, rho = n^-3/4, alpha = n^-1/2,
  /// u = e_1, v = alpha^2 e_2.
  static Example2Config default_scaling(std::size_t n);
};

struct GeneratedData {
  Dataset data;
  std::shared_ptr<const PointSampler> test_sampler;
  std::vector<std::string> warnings;
};

/// Standard normal inputs with random labels, then centered. With
/// `balanced_labels` the labels are a uniformly random arrangement of
/// floor(n/2) (+1) and ceil(n/2) (-1) values with the odd one out chosen by a
/// fair coin; otherwise they are i.i.d. Rademacher.
Dataset gen_gaussian_experiment(Rng& rng, std::size_t n, std::size_t dim, bool balanced_labels = true);

std::shared_ptr<const PointSampler> make_example1_sampler(const Example1Config& cfg);
std::shared_ptr<const PointSampler> make_example2_sampler(const Example2Config& cfg);

GeneratedData gen_example1(Rng& rng, const Example1Config& cfg, bool center = false);
GeneratedData gen_example2(Rng& rng, const Example2Config& cfg, bool center = false);

/// Header `# n=<n> d=<d> P=<P>`, then one `i,p,y,x_1,...,x_d` row per patch,
/// all reals printed with 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void save_dataset_csv(const std::string& path, const Dataset& data);
/// Loads rows verbatim (no centering).
Dataset read_dataset_csv(std::istream& in);
Dataset load_dataset_csv(const std::string& path);

}  // namespace bnbias
