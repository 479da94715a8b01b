#include "bnbias/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "json.hpp"

#include "bnbias/errors.hpp"
#include "bnbias/solvers.hpp"

namespace bnbias {

std::size_t worker_count() {
  if (const char* env = std::getenv("BNML_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RateFit fit_rate_series(std::span<const std::int64_t> t, std::span<const double> d, std::span<const double> loss,
                        double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "tail fraction must lie in (0, 1]");
  if (t.size() != d.size() || (!loss.empty() && loss.size() != t.size()))
    throw Error(ErrorCode::kDimensionMismatch, "trace columns differ in length");
  const std::size_t total = t.size();
  const auto first = static_cast<std::size_t>(std::floor(static_cast<double>(total) * (1.0 - tail_fraction)));

  RateFit fit;
  std::vector<double> xs, ys;
  double band_lo = std::numeric_limits<double>::infinity(), band_hi = 0.0;
  bool have_window = false;
  for (std::size_t k = first; k < total; ++k) {
    if (t[k] < 1) continue;
    if (!have_window) fit.t_start = t[k];
    have_window = true;
    fit.t_end = t[k];
    const double lt = std::log(static_cast<double>(t[k]));
    if (!loss.empty() && loss[k] > 0.0) {
      const double tl = static_cast<double>(t[k]) * loss[k];
      band_lo = std::min(band_lo, tl);
      band_hi = std::max(band_hi, tl);
    }
    if (!(d[k] > kClipFloor)) {
      ++fit.clipped;
      continue;
    }
    xs.push_back(lt * lt);
    ys.push_back(std::log(d[k]));
  }
  if (xs.size() < kMinFitRows)
    throw Error(ErrorCode::kInsufficientData, "tail window has " + std::to_string(xs.size()) +
                                                  " usable rows, need " + std::to_string(kMinFitRows));
  const double m = static_cast<double>(xs.size());
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    xbar += xs[k];
    ybar += ys[k];
  }
  xbar /= m;
  ybar /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - xbar) * (xs[k] - xbar);
    sxy += (xs[k] - xbar) * (ys[k] - ybar);
    syy += (ys[k] - ybar) * (ys[k] - ybar);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::kInsufficientData, "tail window has a single time value");
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  // A constant series still leaves rounding noise in syy after centering.
  const double flat = 1e-13 * std::max(1.0, std::abs(ybar));
  if (syy > m * flat * flat) {
    double sse = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double e = ys[k] - (fit.intercept + fit.slope * xs[k]);
      sse += e * e;
    }
    fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  } else {
    fit.r_squared = 1.0;
  }
  fit.rows_used = xs.size();
  if (band_hi > 0.0) fit.loss_band_ratio = band_hi / band_lo;
  return fit;
}

RateFit fit_rate(const TrainTrace& trace, double tail_fraction) {
  std::vector<std::int64_t> t;
  std::vector<double> d, loss;
  for (const auto& row : trace.rows) {
    t.push_back(row.t);
    d.push_back(row.discrepancy);
    loss.push_back(row.loss);
  }
  return fit_rate_series(t, d, loss, tail_fraction);
}

ProportionEstimate wilson(std::int64_t k, std::int64_t n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "wilson interval needs n >= 1");
  if (k < 0 || k > n) throw Error(ErrorCode::kInvalidArgument, "wilson interval needs 0 <= k <= n");
  ProportionEstimate e;
  e.errors = k;
  e.samples = n;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = kWilsonZ * kWilsonZ;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = kWilsonZ / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  e.rate = p;
  e.wilson_halfwidth = half;
  e.wilson_low = std::max(0.0, centre - half);
  e.wilson_high = std::min(1.0, centre + half);
  return e;
}

std::vector<ProportionEstimate> mc_test_errors(const std::vector<std::span<const double>>& ws,
                                               const PointSampler& sampler, std::int64_t mc_samples,
                                               std::uint64_t seed) {
  if (mc_samples < 1) throw Error(ErrorCode::kInvalidArgument, "mc_samples must be >= 1");
  const std::size_t d = sampler.dim();
  const std::size_t patches = sampler.patches();
  for (const auto& w : ws)
    if (w.size() != d) throw Error(ErrorCode::kDimensionMismatch, "classifier and sampler dimensions differ");
  const std::size_t k = ws.size();
  const std::int64_t chunks = (mc_samples + kMcChunk - 1) / kMcChunk;
  std::vector<std::int64_t> chunk_errors(static_cast<std::size_t>(chunks) * k, 0);
  std::atomic<std::int64_t> next{0};

  auto work = [&] {
    std::vector<double> buf(d * patches), xbar(d);
    for (std::int64_t c = next++; c < chunks; c = next++) {
      Rng rng(Rng::split_seed(seed, static_cast<std::uint64_t>(c)));
      const std::int64_t count = std::min(kMcChunk, mc_samples - c * kMcChunk);
      std::int64_t* errors = chunk_errors.data() + static_cast<std::size_t>(c) * k;
      for (std::int64_t s = 0; s < count; ++s) {
        const int y = sampler.draw(rng, buf);
        std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(d), xbar.begin());
        for (std::size_t p = 1; p < patches; ++p)
          axpy(1.0, std::span<const double>(buf.data() + p * d, d), xbar);
        for (std::size_t j = 0; j < k; ++j)
          if (!(y * dot(ws[j], xbar) > 0.0)) ++errors[j];
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(worker_count(), static_cast<std::size_t>(chunks));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  std::vector<ProportionEstimate> out;
  for (std::size_t j = 0; j < k; ++j) {
    std::int64_t total = 0;
    for (std::int64_t c = 0; c < chunks; ++c) total += chunk_errors[static_cast<std::size_t>(c) * k + j];
    out.push_back(wilson(total, mc_samples));
  }
  return out;
}

ProportionEstimate mc_test_error(std::span<const double> w, const PointSampler& sampler, std::int64_t mc_samples,
                                 std::uint64_t seed) {
  return mc_test_errors({w}, sampler, mc_samples, seed).front();
}

double GenReport::wilson_halfwidth() const {
  return std::max(uniform.wilson_halfwidth, max_margin.wilson_halfwidth);
}

namespace {

GenReport score_example(GeneratedData gen, std::int64_t mc_samples, std::uint64_t seed) {
  GenReport report;
  report.seed = seed;
  report.mc_samples = mc_samples;
  report.warnings = std::move(gen.warnings);
  const SolverReport uni = solve_uniform_margin(gen.data);
  const SolverReport mm = solve_max_margin(gen.data);
  report.residual_uniform = uni.residual;
  report.residual_max = mm.residual;
  report.kkt_violation = mm.kkt_violation;
  report.regularized = uni.regularized;
  report.valid = uni.residual <= kValidResidual;
  if (!report.valid) report.warnings.push_back("uniform-margin residual above 1e-6; report is not usable");
  const std::uint64_t test_seed = Rng::split_seed(seed, 1);
  const auto est = mc_test_errors({uni.solution.span(), mm.solution.span()}, *gen.test_sampler, mc_samples, test_seed);
  report.uniform = est[0];
  report.max_margin = est[1];
  return report;
}

}  // namespace

GenReport run_example1(const Example1Config& cfg, std::int64_t mc_samples, std::uint64_t seed) {
  Rng rng(seed);
  return score_example(gen_example1(rng, cfg), mc_samples, seed);
}

GenReport run_example2(const Example2Config& cfg, std::int64_t mc_samples, std::uint64_t seed) {
  Rng rng(seed);
  return score_example(gen_example2(rng, cfg), mc_samples, seed);
}

PairedSummary compare_bn_vs_plain(const Dataset& data, const TrainConfig& cfg_bn, const TrainConfig& cfg_plain,
                                  const Probes& probes) {
  if (cfg_bn.model_kind == ModelKind::kPlainLogistic)
    throw Error(ErrorCode::kConfigInvalid, "the BN side of the comparison needs a BN model");
  if (cfg_plain.model_kind != ModelKind::kPlainLogistic)
    throw Error(ErrorCode::kConfigInvalid, "the plain side of the comparison needs model 'plain'");
  PairedSummary out;
  out.bn = train(data, cfg_bn, probes);
  out.plain = train(data, cfg_plain, probes);
  if (out.bn.rows.empty() || out.plain.rows.empty())
    throw Error(ErrorCode::kDiverged, "a comparison run produced no rows");
  out.final_d_bn = out.bn.rows.back().discrepancy;
  out.final_d_plain = out.plain.rows.back().discrepancy;
  out.discrepancy_ratio = out.final_d_plain > 0.0 ? out.final_d_bn / out.final_d_plain
                                                  : std::numeric_limits<double>::infinity();
  return out;
}

std::string ratefit_json(const RateFit& fit) {
  nlohmann::ordered_json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r_squared"] = fit.r_squared;
  j["window"] = {fit.t_start, fit.t_end};
  j["loss_band_ratio"] = fit.loss_band_ratio;
  j["rows_used"] = fit.rows_used;
  j["clipped"] = fit.clipped;
  return j.dump(2);
}

namespace {

nlohmann::ordered_json estimate_json(const ProportionEstimate& e) {
  return {{"rate", e.rate},
          {"errors", e.errors},
          {"samples", e.samples},
          {"wilson_low", e.wilson_low},
          {"wilson_high", e.wilson_high},
          {"wilson_halfwidth", e.wilson_halfwidth}};
}

}  // namespace

std::string genreport_json(const std::vector<GenReport>& reports) {
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  double sum_u = 0.0, sum_m = 0.0;
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["seed"] = r.seed;
    j["error_uniform"] = r.error_uniform();
    j["error_max"] = r.error_max();
    j["mc_samples"] = r.mc_samples;
    j["wilson_halfwidth"] = r.wilson_halfwidth();
    j["uniform"] = estimate_json(r.uniform);
    j["max_margin"] = estimate_json(r.max_margin);
    j["residual_uniform"] = r.residual_uniform;
    j["residual_max"] = r.residual_max;
    j["kkt_violation"] = r.kkt_violation;
    j["regularized"] = r.regularized;
    j["valid"] = r.valid;
    j["warnings"] = r.warnings;
    runs.push_back(std::move(j));
    sum_u += r.error_uniform();
    sum_m += r.error_max();
  }
  nlohmann::ordered_json out;
  const double k = reports.empty() ? 1.0 : static_cast<double>(reports.size());
  out["mean_error_uniform"] = sum_u / k;
  out["mean_error_max"] = sum_m / k;
  out["runs"] = std::move(runs);
  return out.dump(2);
}

}  // namespace bnbias
