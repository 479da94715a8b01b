#include "bnbias/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "bnbias/errors.hpp"
#include "bnbias/solvers.hpp"

namespace bnbias {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBnLinear: return "bn-linear";
    case ModelKind::kBnCnn: return "bn-cnn";
    case ModelKind::kPlainLogistic: return "plain";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "bn-linear" || text == "bn_linear") return ModelKind::kBnLinear;
  if (text == "bn-cnn" || text == "bn_cnn") return ModelKind::kBnCnn;
  if (text == "plain" || text == "plain_logistic" || text == "plain-logistic") return ModelKind::kPlainLogistic;
  throw Error(ErrorCode::kConfigInvalid, "unknown model kind '" + text + "'");
}

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::kConfigInvalid, "eta must be > 0");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw Error(ErrorCode::kConfigInvalid, "init_scale must be > 0");
  if (!std::isfinite(gamma0)) throw Error(ErrorCode::kConfigInvalid, "gamma0 must be finite");
  if (steps < 0) throw Error(ErrorCode::kConfigInvalid, "steps must be >= 0");
  if (log_every < 1) throw Error(ErrorCode::kConfigInvalid, "log_every must be >= 1");
}

ModelState init_state(Rng& rng, const TrainConfig& cfg, std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "dimension must be >= 1");
  std::vector<double> g(dim);
  double norm = 0.0;
  do {
    for (double& x : g) x = rng.normal();
    norm = norm2(g);
  } while (norm < 1e-8);
  for (double& x : g) x *= cfg.init_scale / norm;
  return {Vec(std::move(g)), cfg.gamma0};
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

struct RowContext {
  const Dataset& data;
  const Probes& probes;
  const SpanBasis* basis;
  bool record_margins;
};

TraceRow make_row(const RowContext& ctx, std::int64_t t, const ModelState& state, double loss, bool plain,
                  std::vector<std::vector<double>>* sample_margins) {
  TraceRow row;
  row.t = t;
  row.loss = loss;
  row.gamma = plain ? 0.0 : state.gamma;
  row.w_norm2 = norm2(state.w.span());
  const MarginProfile profile = margin_profile(state.w.span(), ctx.data);
  row.discrepancy = discrepancy(profile);
  row.w_sigma_norm = bn_norm(state.w.span(), ctx.data);
  const auto [lo, hi] = std::minmax_element(profile.margins.begin(), profile.margins.end());
  row.min_margin = *lo;
  row.max_margin = *hi;
  double mean = 0.0;
  for (double m : profile.margins) mean += m;
  row.mean_margin = mean / static_cast<double>(profile.margins.size());
  if (ctx.basis != nullptr) {
    const Vec projected = ctx.basis->project(state.w.span());
    if (ctx.probes.w_star) {
      row.align_wstar = cosine(projected.span(), ctx.probes.w_star->span());
      row.inner_wstar = dot(state.w.span(), ctx.probes.w_star->span());
    }
    if (ctx.probes.w_max) row.align_wmax = cosine(projected.span(), ctx.probes.w_max->span());
  }
  if (ctx.record_margins && sample_margins != nullptr) {
    const Dataset& d = ctx.data;
    std::vector<double> raw(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
      double f = 0.0;
      for (std::size_t p = 0; p < d.patches(); ++p) f += dot(state.w.span(), d.patch(i, p));
      raw[i] = d.label(i) * f;
    }
    sample_margins->push_back(std::move(raw));
  }
  return row;
}

}  // namespace

TrainTrace train(const Dataset& data, const TrainConfig& cfg, const Probes& probes) {
  cfg.validate();
  if (cfg.model_kind == ModelKind::kBnLinear && data.is_patched())
    throw Error(ErrorCode::kConfigInvalid, "bn-linear needs unpatched data (use bn-cnn for P > 1)");
  for (const auto* probe : {&probes.w_star, &probes.w_max})
    if (*probe && (*probe)->size() != data.dim()) throw Error(ErrorCode::kDimensionMismatch, "probe has the wrong dimension");

  Rng rng(cfg.seed);
  TrainTrace trace;
  trace.eta = cfg.eta;
  trace.model_kind = cfg.model_kind;
  ModelState state = init_state(rng, cfg, data.dim());
  const bool plain = cfg.model_kind == ModelKind::kPlainLogistic;

  std::optional<SpanBasis> basis;
  if (probes.w_star || probes.w_max) basis.emplace(data);
  const RowContext ctx{data, probes, basis ? &*basis : nullptr, cfg.record_sample_margins};

  double norm_sq = dot(state.w.span(), state.w.span());
  try {
    for (std::int64_t t = 0;; ++t) {
      double loss = 0.0;
      Vec grad_w;
      double grad_gamma = 0.0;
      if (plain) {
        auto lg = plain_loss_and_grad(state.w.span(), data);
        loss = lg.loss;
        grad_w = std::move(lg.grad_w);
      } else {
        auto lg = loss_and_grads(state, data);
        loss = lg.loss;
        grad_w = std::move(lg.grad_w);
        grad_gamma = lg.grad_gamma;
      }
      if (!std::isfinite(loss) || !all_finite(grad_w.span()) || !std::isfinite(grad_gamma)) {
        trace.status = TrainStatus::kDiverged;
        trace.message = "loss or gradient became non-finite at t=" + std::to_string(t);
        break;
      }
      const bool last = t == cfg.steps;
      if (t % cfg.log_every == 0 || last) trace.rows.push_back(make_row(ctx, t, state, loss, plain, &trace.sample_margins));
      if (last) break;

      for (std::size_t j = 0; j < grad_w.size(); ++j) state.w[j] -= cfg.eta * grad_w[j];
      if (!plain) state.gamma -= cfg.eta * grad_gamma;

      const double next_sq = dot(state.w.span(), state.w.span());
      if (!plain && std::sqrt(next_sq) < std::sqrt(norm_sq) - kNormSlack * std::max(1.0, std::sqrt(norm_sq)))
        ++trace.norm_decrease_steps;
      norm_sq = next_sq;
      if (!std::isfinite(next_sq) || !std::isfinite(state.gamma)) {
        trace.status = TrainStatus::kDiverged;
        trace.message = "parameters became non-finite after t=" + std::to_string(t);
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateDirection) throw;
    trace.status = TrainStatus::kDegenerate;
    trace.message = e.what();
  }
  trace.final_state = std::move(state);
  return trace;
}

MonotonicityReport monotonicity_report(const TrainTrace& trace) {
  MonotonicityReport report;
  const auto& rows = trace.rows;
  bool gamma_reached = false;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ++report.transitions;
    const double prev = rows[k - 1].w_norm2;
    if (rows[k].w_norm2 < prev - kNormSlack * std::max(1.0, prev)) ++report.norm_violations;
    if (rows[k - 1].gamma >= 0.5) gamma_reached = true;
    if (gamma_reached && rows[k - 1].inner_wstar && rows[k].inner_wstar) {
      ++report.wstar_transitions;
      const double a = *rows[k - 1].inner_wstar;
      if (*rows[k].inner_wstar < a - kNormSlack * std::max(1.0, std::abs(a))) ++report.wstar_violations;
    }
  }
  return report;
}

GammaEnvelopeReport gamma_envelope_report(const TrainTrace& trace) {
  GammaEnvelopeReport report;
  const auto& rows = trace.rows;
  std::size_t start = rows.size();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (r.mean_margin > 0.0 && r.max_margin - r.min_margin <= 0.25 * r.mean_margin) {
      start = k;
      break;
    }
  }
  if (start == rows.size()) return report;
  report.triggered = true;
  report.t_start = rows[start].t;
  report.gamma_start = rows[start].gamma;
  const double e0 = std::exp(report.gamma_start);
  for (std::size_t k = start; k < rows.size(); ++k) {
    const double dt = static_cast<double>(rows[k].t - report.t_start);
    const double lower = std::log(trace.eta / 8.0 * dt + e0);
    const double upper = std::log(8.0 * trace.eta * dt + 2.0 * e0);
    ++report.checked;
    if (rows[k].gamma < lower || rows[k].gamma > upper) ++report.violations;
  }
  return report;
}

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kTraceHeader =
    "t,loss,discrepancy,gamma,w_norm2,w_sigma_norm,align_wstar,align_wmax,min_margin,max_margin";

}  // namespace

void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    out << r.t << ',' << real(r.loss) << ',' << real(r.discrepancy) << ',' << real(r.gamma) << ',' << real(r.w_norm2)
        << ',' << real(r.w_sigma_norm) << ',' << (r.align_wstar ? real(*r.align_wstar) : "") << ','
        << (r.align_wmax ? real(*r.align_wmax) : "") << ',' << real(r.min_margin) << ',' << real(r.max_margin) << '\n';
  }
}

TrainTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw Error(ErrorCode::kIo, "trace file has an unexpected header");
  TrainTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 10) throw Error(ErrorCode::kIo, "trace row does not have 10 fields: " + line);
    auto num = [](const std::string& s) { return std::strtod(s.c_str(), nullptr); };
    TraceRow r;
    r.t = std::stoll(fields[0]);
    r.loss = num(fields[1]);
    r.discrepancy = num(fields[2]);
    r.gamma = num(fields[3]);
    r.w_norm2 = num(fields[4]);
    r.w_sigma_norm = num(fields[5]);
    if (!fields[6].empty()) r.align_wstar = num(fields[6]);
    if (!fields[7].empty()) r.align_wmax = num(fields[7]);
    r.min_margin = num(fields[8]);
    r.max_margin = num(fields[9]);
    if (!trace.rows.empty() && r.t <= trace.rows.back().t) throw Error(ErrorCode::kIo, "trace t is not increasing");
    trace.rows.push_back(r);
  }
  return trace;
}

}  // namespace bnbias
