#include "bnbias/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bnbias/errors.hpp"

namespace bnbias {

namespace {

double power_iteration_top(const std::vector<double>& rows, std::size_t m, std::size_t d) {
  if (m == 0 || d == 0) return 0.0;
  std::vector<double> v(d), next(d);
  for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 + 0.5 * std::sin(static_cast<double>(j) + 1.0);
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      std::span<const double> x(rows.data() + r * d, d);
      axpy(dot(x, v), x, next);
    }
    for (double& x : next) x /= static_cast<double>(m);
    const double updated = dot(next, v);
    v.swap(next);
    if (it > 5 && std::abs(updated - lambda) <= 1e-10 * std::abs(updated)) return updated;
    lambda = updated;
  }
  return lambda;
}

void check_labels(const std::vector<int>& labels) {
  for (int y : labels)
    if (y != 1 && y != -1) throw Error(ErrorCode::kInvalidArgument, "labels must be +1 or -1");
}

}  // namespace

Dataset Dataset::from_rows(std::vector<double> rows, std::vector<int> labels, std::size_t dim,
                           std::size_t patches, bool center) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyDataset, "dataset has no samples");
  if (patches == 0) throw Error(ErrorCode::kInvalidArgument, "patch count must be >= 1");
  if (dim == 0) throw Error(ErrorCode::kDimensionMismatch, "dimension must be >= 1");
  if (rows.size() != labels.size() * patches * dim)
    throw Error(ErrorCode::kDimensionMismatch, "row data does not match n * P * d");
  if (!all_finite(rows)) throw Error(ErrorCode::kInvalidArgument, "inputs have non-finite entries");
  check_labels(labels);

  Dataset ds;
  ds.dim_ = dim;
  ds.patches_ = patches;
  ds.labels_ = std::move(labels);
  ds.inputs_ = std::move(rows);
  ds.train_mean_ = Vec(dim);
  const std::size_t m = ds.rows();
  if (center) {
    for (std::size_t r = 0; r < m; ++r) axpy(1.0, ds.row(r), ds.train_mean_.span());
    for (std::size_t j = 0; j < dim; ++j) ds.train_mean_[j] /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      double* x = ds.inputs_.data() + r * dim;
      for (std::size_t j = 0; j < dim; ++j) x[j] -= ds.train_mean_[j];
    }
    ds.centered_ = true;
  }
  if (dim <= kSigmaCacheMaxDim) ds.sigma_ = ds.recompute_sigma();
  ds.sigma_top_eig_ = power_iteration_top(ds.inputs_, m, dim);
  return ds;
}

SymMat Dataset::recompute_sigma() const {
  SymMat s(dim_);
  const std::size_t m = rows();
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t a = 0; a < dim_; ++a) {
    for (std::size_t b = a; b < dim_; ++b) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m; ++r) acc += inputs_[r * dim_ + a] * inputs_[r * dim_ + b];
      s.set(a, b, acc * inv);
    }
  }
  return s;
}

Vec Dataset::signed_row(std::size_t r) const {
  Vec z(dim_);
  const double y = row_label(r);
  const auto x = row(r);
  for (std::size_t j = 0; j < dim_; ++j) z[j] = y * x[j];
  return z;
}

Vec Dataset::patch_sum(std::size_t i) const {
  Vec s(dim_);
  for (std::size_t p = 0; p < patches_; ++p) axpy(1.0, patch(i, p), s.span());
  return s;
}

Dataset center(const std::vector<Vec>& raw_inputs, const std::vector<int>& labels) {
  if (raw_inputs.empty()) throw Error(ErrorCode::kEmptyDataset, "no inputs");
  if (raw_inputs.size() != labels.size()) throw Error(ErrorCode::kDimensionMismatch, "inputs and labels differ in count");
  const std::size_t d = raw_inputs.front().size();
  std::vector<double> rows;
  rows.reserve(raw_inputs.size() * d);
  for (const Vec& x : raw_inputs) {
    if (x.size() != d) throw Error(ErrorCode::kDimensionMismatch, "inputs have different dimensions");
    rows.insert(rows.end(), x.begin(), x.end());
  }
  return Dataset::from_rows(std::move(rows), labels, d, 1, true);
}

Dataset center_patched(const std::vector<std::vector<Vec>>& raw_inputs, const std::vector<int>& labels) {
  if (raw_inputs.empty()) throw Error(ErrorCode::kEmptyDataset, "no inputs");
  if (raw_inputs.size() != labels.size()) throw Error(ErrorCode::kDimensionMismatch, "inputs and labels differ in count");
  const std::size_t patches = raw_inputs.front().size();
  if (patches == 0 || raw_inputs.front().front().size() == 0)
    throw Error(ErrorCode::kDimensionMismatch, "empty patch list");
  const std::size_t d = raw_inputs.front().front().size();
  std::vector<double> rows;
  for (const auto& sample : raw_inputs) {
    if (sample.size() != patches) throw Error(ErrorCode::kDimensionMismatch, "samples have different patch counts");
    for (const Vec& x : sample) {
      if (x.size() != d) throw Error(ErrorCode::kDimensionMismatch, "patches have different dimensions");
      rows.insert(rows.end(), x.begin(), x.end());
    }
  }
  return Dataset::from_rows(std::move(rows), labels, d, patches, true);
}

Dataset gen_gaussian_experiment(Rng& rng, std::size_t n, std::size_t dim, bool balanced_labels) {
  if (n == 0 || dim == 0) throw Error(ErrorCode::kInvalidArgument, "n and d must be >= 1");
  std::vector<double> rows(n * dim);
  for (double& x : rows) x = rng.normal();
  std::vector<int> labels(n);
  if (balanced_labels) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? 1 : -1;
    if (n % 2 == 1) labels[n - 1] = rng.rademacher();
    // Fisher-Yates
    for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[rng.uniform_index(i)]);
  } else {
    for (int& y : labels) y = rng.rademacher();
  }
  return Dataset::from_rows(std::move(rows), std::move(labels), dim, 1, true);
}

namespace {

Vec unit(const Vec& v) {
  const double nv = norm2(v.span());
  Vec out = v;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] /= nv;
  return out;
}

class Example1Sampler final : public PointSampler {
 public:
  explicit Example1Sampler(Example1Config cfg)
      : cfg_(std::move(cfg)), noise_(ProjectedCov{cfg_.sigma, {unit(cfg_.u)}}) {}

  std::size_t dim() const override { return cfg_.dim; }
  std::size_t patches() const override { return cfg_.patches; }

  int draw(Rng& rng, std::span<double> out) const override {
    const int y = rng.rademacher();
    const std::size_t d = cfg_.dim;
    for (std::size_t p = 0; p < cfg_.patches; ++p) {
      auto patch = out.subspan(p * d, d);
      sample_gaussian_into(rng, noise_, patch);
      for (std::size_t j = 0; j < d; ++j) patch[j] += y * cfg_.u[j];
    }
    return y;
  }

 private:
  Example1Config cfg_;
  CovOp noise_;
};

class Example2Sampler final : public PointSampler {
 public:
  explicit Example2Sampler(Example2Config cfg)
      : cfg_(std::move(cfg)),
        strong_noise_(ProjectedCov{cfg_.sigma, {unit(cfg_.u), unit(cfg_.v)}}),
        weak_noise_(IsotropicCov{cfg_.sigma}) {}

  std::size_t dim() const override { return cfg_.dim; }
  std::size_t patches() const override { return 2; }

  int draw(Rng& rng, std::span<double> out) const override {
    const int y = rng.rademacher();
    const bool weak = rng.uniform() < cfg_.rho;
    const std::size_t signal_slot = rng.uniform_index(2);
    const std::size_t d = cfg_.dim;
    auto signal = out.subspan(signal_slot * d, d);
    auto other = out.subspan((1 - signal_slot) * d, d);
    const Vec& feature = weak ? cfg_.v : cfg_.u;
    for (std::size_t j = 0; j < d; ++j) signal[j] = y * feature[j];
    if (weak) {
      sample_gaussian_into(rng, weak_noise_, other);
      const double zeta = rng.rademacher();
      axpy(cfg_.alpha * zeta, cfg_.u.span(), other);
    } else {
      sample_gaussian_into(rng, strong_noise_, other);
    }
    return y;
  }

 private:
  Example2Config cfg_;
  CovOp strong_noise_;
  CovOp weak_noise_;
};

void validate(const Example1Config& cfg) {
  if (cfg.u.size() != cfg.dim) throw Error(ErrorCode::kConfigInvalid, "u must have dimension d");
  if (!(norm2(cfg.u.span()) > 0.0)) throw Error(ErrorCode::kConfigInvalid, "u must be nonzero");
  if (cfg.patches < 1) throw Error(ErrorCode::kConfigInvalid, "P must be >= 1");
  if (!(cfg.sigma >= 0.0)) throw Error(ErrorCode::kConfigInvalid, "sigma must be >= 0");
  if (cfg.n < 1) throw Error(ErrorCode::kConfigInvalid, "n must be >= 1");
}

void validate(const Example2Config& cfg) {
  if (cfg.u.size() != cfg.dim || cfg.v.size() != cfg.dim)
    throw Error(ErrorCode::kConfigInvalid, "u and v must have dimension d");
  const double nu = norm2(cfg.u.span());
  const double nv = norm2(cfg.v.span());
  if (!(nu > 0.0) || !(nv > 0.0)) throw Error(ErrorCode::kConfigInvalid, "u and v must be nonzero");
  if (std::abs(dot(cfg.u.span(), cfg.v.span())) > 1e-12 * nu * nv)
    throw Error(ErrorCode::kConfigInvalid, "u and v must be orthogonal");
  if (!(cfg.rho >= 0.0 && cfg.rho < 0.5)) throw Error(ErrorCode::kConfigInvalid, "rho must lie in [0, 0.5)");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::kConfigInvalid, "alpha must lie in (0, 1)");
  if (!(cfg.sigma >= 0.0)) throw Error(ErrorCode::kConfigInvalid, "sigma must be >= 0");
  if (cfg.n < 1) throw Error(ErrorCode::kConfigInvalid, "n must be >= 1");
  if (cfg.dim > 200000) throw Error(ErrorCode::kConfigInvalid, "d above the 2e5 cap");
}

GeneratedData draw_training_set(Rng& rng, std::shared_ptr<const PointSampler> sampler, std::size_t n, bool center) {
  const std::size_t width = sampler->patches() * sampler->dim();
  std::vector<double> rows(n * width);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = sampler->draw(rng, std::span<double>(rows).subspan(i * width, width));
  return {Dataset::from_rows(std::move(rows), std::move(labels), sampler->dim(), sampler->patches(), center),
          std::move(sampler), {}};
}

Vec basis_vector(std::size_t dim, std::size_t k, double scale) {
  Vec e(dim);
  e[k] = scale;
  return e;
}

}  // namespace

Example1Config Example1Config::default_scaling(std::size_t n, std::size_t patches) {
  Example1Config cfg;
  cfg.n = n;
  cfg.dim = 2 * n;
  cfg.patches = patches;
  cfg.u = basis_vector(cfg.dim, 0, 1.0);
  cfg.sigma = 20.0 * std::sqrt(static_cast<double>(patches * cfg.dim));
  return cfg;
}

Example2Config Example2Config::default_scaling(std::size_t n) {
  Example2Config cfg;
  const double nd = static_cast<double>(n);
  cfg.n = n;
  cfg.dim = static_cast<std::size_t>(std::ceil(nd * nd * std::log(nd)));
  if (cfg.dim < 2) cfg.dim = 2;
  cfg.sigma = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  cfg.rho = std::pow(nd, -0.75);
  cfg.alpha = 1.0 / std::sqrt(nd);
  cfg.u = basis_vector(cfg.dim, 0, 1.0);
  cfg.v = basis_vector(cfg.dim, 1, cfg.alpha * cfg.alpha);
  return cfg;
}

std::shared_ptr<const PointSampler> make_example1_sampler(const Example1Config& cfg) {
  validate(cfg);
  return std::make_shared<Example1Sampler>(cfg);
}

std::shared_ptr<const PointSampler> make_example2_sampler(const Example2Config& cfg) {
  validate(cfg);
  return std::make_shared<Example2Sampler>(cfg);
}

GeneratedData gen_example1(Rng& rng, const Example1Config& cfg, bool center) {
  auto out = draw_training_set(rng, make_example1_sampler(cfg), cfg.n, center);
  const double nu = norm2(cfg.u.span());
  const double threshold = 20.0 * nu * std::sqrt(static_cast<double>(cfg.patches * cfg.dim));
  if (cfg.dim != 2 * cfg.n) out.warnings.push_back("example1: d != 2n, outside the proved regime");
  if (cfg.patches < 4) out.warnings.push_back("example1: P < 4, outside the proved regime");
  if (cfg.sigma < threshold) out.warnings.push_back("example1: sigma below 20 ||u|| sqrt(P d), outside the proved regime");
  return out;
}

GeneratedData gen_example2(Rng& rng, const Example2Config& cfg, bool center) {
  auto out = draw_training_set(rng, make_example2_sampler(cfg), cfg.n, center);
  const double nu = norm2(cfg.u.span());
  const double nv = norm2(cfg.v.span());
  if (std::abs(nu - 1.0) > 1e-12) out.warnings.push_back("example2: ||u|| != 1");
  if (std::abs(nv - cfg.alpha * cfg.alpha) > 1e-12 * cfg.alpha * cfg.alpha)
    out.warnings.push_back("example2: ||v|| != alpha^2");
  if (cfg.n < 20) out.warnings.push_back("example2: n < 20, far from the asymptotic regime");
  return out;
}

namespace {

void append_real(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "# n=" << data.n() << " d=" << data.dim() << " P=" << data.patches() << '\n';
  std::string line;
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t p = 0; p < data.patches(); ++p) {
      line = std::to_string(i) + ',' + std::to_string(p) + ',' + std::to_string(data.label(i));
      for (double x : data.patch(i, p)) {
        line += ',';
        append_real(line, x);
      }
      out << line << '\n';
    }
  }
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_dataset_csv(out, data);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIo, "empty dataset file");
  std::size_t n = 0, d = 0, patches = 0;
  if (std::sscanf(line.c_str(), "# n=%zu d=%zu P=%zu", &n, &d, &patches) != 3)
    throw Error(ErrorCode::kIo, "bad dataset header: " + line);
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "dataset file declares n=0");
  std::vector<double> rows(n * patches * d);
  std::vector<int> labels(n, 0);
  std::vector<bool> seen(n * patches, false);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tok;
    auto next = [&]() -> std::string {
      if (!std::getline(fields, tok, ',')) throw Error(ErrorCode::kIo, "short dataset row: " + line);
      return tok;
    };
    const std::size_t i = std::stoul(next());
    const std::size_t p = std::stoul(next());
    const int y = std::stoi(next());
    if (i >= n || p >= patches) throw Error(ErrorCode::kIo, "row index out of range: " + line);
    if (seen[i * patches + p]) throw Error(ErrorCode::kIo, "duplicate row: " + line);
    if (labels[i] != 0 && labels[i] != y) throw Error(ErrorCode::kIo, "inconsistent label for sample " + std::to_string(i));
    labels[i] = y;
    double* dst = rows.data() + (i * patches + p) * d;
    for (std::size_t j = 0; j < d; ++j) {
      const std::string field = next();
      char* end = nullptr;
      dst[j] = std::strtod(field.c_str(), &end);
      if (field.empty() || *end != '\0') throw Error(ErrorCode::kIo, "bad number '" + field + "' in row: " + line);
    }
    if (std::getline(fields, tok, ',')) throw Error(ErrorCode::kIo, "long dataset row: " + line);
    seen[i * patches + p] = true;
    ++count;
  }
  if (count != n * patches) throw Error(ErrorCode::kIo, "dataset file is missing rows");
  return Dataset::from_rows(std::move(rows), std::move(labels), d, patches, false);
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_dataset_csv(in);
}

}  // namespace bnbias
