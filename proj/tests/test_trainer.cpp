#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "bnbias/errors.hpp"
#include "bnbias/solvers.hpp"
#include "bnbias/trainer.hpp"

using namespace bnbias;

namespace {

Dataset small_gaussian(std::uint64_t seed, std::size_t n = 12, std::size_t d = 30) {
  Rng rng(seed);
  return gen_gaussian_experiment(rng, n, d);
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("init_state: scale, gamma default, determinism") {
    TrainConfig cfg;
    CHECK(cfg.gamma0 == 1.0);
    Rng a(5), b(5);
    const ModelState s1 = init_state(a, cfg, 100), s2 = init_state(b, cfg, 100);
    CHECK(std::abs(norm2(s1.w.span()) - 0.01) <= 1e-15);
    CHECK(s1.gamma == 1.0);
    CHECK(s1.w == s2.w);
    CHECK_THROWS_AS(init_state(a, cfg, 0), Error);
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.eta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.init_scale = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.log_every = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(parse_model_kind("bn-cnn") == ModelKind::kBnCnn);
    CHECK(parse_model_kind("plain") == ModelKind::kPlainLogistic);
    CHECK_THROWS_AS(parse_model_kind("mlp"), Error);
  }

  TEST_CASE("one step matches the hand update on two points in the plane") {
    const Dataset data = Dataset::from_rows({1, 0, 0, 1}, {1, -1}, 2, 1, false);
    TrainConfig cfg;
    cfg.steps = 1;
    cfg.eta = 0.1;
    cfg.init_scale = 1.0;
    cfg.seed = 3;
    Rng rng(cfg.seed);
    const ModelState s0 = init_state(rng, cfg, 2);
    // Sigma = I/2, s = |w|/sqrt2, f_i = gamma <w,x_i> / s.
    const double w1 = s0.w[0], w2 = s0.w[1], g = s0.gamma;
    const double s = std::sqrt((w1 * w1 + w2 * w2) / 2.0);
    const double z1 = g * w1 / s, z2 = -g * w2 / s;
    const double l1 = -1.0 / (1.0 + std::exp(z1)), l2 = -1.0 / (1.0 + std::exp(z2));
    // d z1/dw = g (e1/s - w1 Sigma w / s^3), d z2/dw = -g (e2/s - w2 Sigma w / s^3)
    const double s3 = s * s * s;
    const double gw1 = 0.5 * (l1 * g * (1.0 / s - w1 * (w1 / 2.0) / s3) + l2 * (-g) * (-w2 * (w1 / 2.0) / s3));
    const double gw2 = 0.5 * (l1 * g * (-w1 * (w2 / 2.0) / s3) + l2 * (-g) * (1.0 / s - w2 * (w2 / 2.0) / s3));
    const double gg = 0.5 * (l1 * w1 / s + l2 * (-w2) / s);
    const TrainTrace tr = train(data, cfg);
    CHECK(std::abs(tr.final_state.w[0] - (w1 - 0.1 * gw1)) <= 1e-12);
    CHECK(std::abs(tr.final_state.w[1] - (w2 - 0.1 * gw2)) <= 1e-12);
    CHECK(std::abs(tr.final_state.gamma - (g - 0.1 * gg)) <= 1e-12);
  }

  TEST_CASE("update is exactly w - eta * grad") {
    const Dataset data = small_gaussian(1);
    TrainConfig cfg;
    cfg.steps = 1;
    Rng rng(cfg.seed);
    const ModelState s0 = init_state(rng, cfg, data.dim());
    const LossAndGrads g = loss_and_grads(s0, data);
    const TrainTrace tr = train(data, cfg);
    for (std::size_t j = 0; j < data.dim(); ++j) CHECK(tr.final_state.w[j] == s0.w[j] - cfg.eta * g.grad_w[j]);
    CHECK(tr.final_state.gamma == s0.gamma - cfg.eta * g.grad_gamma);
  }

  TEST_CASE("row schedule: t = 0, multiples of log_every, and the last step") {
    const Dataset data = small_gaussian(2);
    TrainConfig cfg;
    cfg.steps = 0;
    TrainTrace tr = train(data, cfg);
    REQUIRE(tr.rows.size() == 1);
    CHECK(tr.rows[0].t == 0);
    cfg.steps = 250;
    tr = train(data, cfg);
    std::vector<std::int64_t> ts;
    for (const auto& r : tr.rows) ts.push_back(r.t);
    CHECK(ts == std::vector<std::int64_t>{0, 100, 200, 250});
  }

  TEST_CASE("BN run: margins equalize, norm never decreases, gamma envelope holds") {
    const Dataset data = small_gaussian(3, 16, 60);
    Probes probes;
    probes.w_star = solve_uniform_margin(data).solution;
    TrainConfig cfg;
    cfg.init_scale = 1.0;
    cfg.steps = 20000;
    const TrainTrace tr = train(data, cfg, probes);
    CHECK(tr.status == TrainStatus::kOk);
    CHECK(tr.norm_decrease_steps == 0);
    const MonotonicityReport mono = monotonicity_report(tr);
    CHECK(mono.norm_violations == 0);
    CHECK(mono.wstar_violations == 0);
    CHECK(mono.wstar_transitions > 0);
    CHECK(tr.rows.back().discrepancy < 1e-8 * tr.rows.front().discrepancy);
    CHECK(*tr.rows.back().align_wstar > 0.999);
    const GammaEnvelopeReport env = gamma_envelope_report(tr);
    CHECK(env.triggered);
    CHECK(env.violations == 0);
    for (const auto& r : tr.rows) {
      CHECK(std::isfinite(r.loss));
      CHECK(std::isfinite(r.discrepancy));
    }
  }

  TEST_CASE("BN-CNN run on example 1 data") {
    Rng rng(4);
    const Dataset data = gen_example1(rng, Example1Config::default_scaling(10)).data;
    TrainConfig cfg;
    cfg.model_kind = ModelKind::kBnCnn;
    cfg.init_scale = 1.0;
    cfg.steps = 3000;
    const TrainTrace tr = train(data, cfg);
    CHECK(tr.status == TrainStatus::kOk);
    CHECK(tr.norm_decrease_steps == 0);
    CHECK(tr.rows.back().discrepancy < tr.rows.front().discrepancy);
    cfg.model_kind = ModelKind::kBnLinear;
    CHECK_THROWS_AS(train(data, cfg), Error);
  }

  TEST_CASE("plain run keeps gamma at 0 in the trace") {
    const Dataset data = small_gaussian(5);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::kPlainLogistic;
    cfg.steps = 300;
    const TrainTrace tr = train(data, cfg);
    for (const auto& r : tr.rows) CHECK(r.gamma == 0.0);
    CHECK(tr.rows.back().loss < tr.rows.front().loss);
  }

  TEST_CASE("divergence and degeneracy stop the run with a status") {
    const Dataset data = small_gaussian(6);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::kPlainLogistic;
    cfg.eta = 1e306;
    cfg.steps = 50;
    TrainTrace tr = train(data, cfg);
    CHECK(tr.status == TrainStatus::kDiverged);
    for (const auto& r : tr.rows) CHECK(std::isfinite(r.loss));

    const Dataset zeros = Dataset::from_rows(std::vector<double>(6, 0.0), {1, -1, 1}, 2, 1, false);
    cfg = {};
    cfg.steps = 5;
    tr = train(zeros, cfg);
    CHECK(tr.status == TrainStatus::kDegenerate);
    CHECK(tr.rows.empty());
  }

  TEST_CASE("monotonicity: empty, single-row and corrupted traces") {
    TrainTrace tr;
    CHECK(monotonicity_report(tr).norm_violations == 0);
    tr.rows.resize(1);
    CHECK(monotonicity_report(tr).transitions == 0);
    tr.rows.resize(4);
    const double norms[] = {1.0, 1.5, 1.2, 2.0};
    for (int k = 0; k < 4; ++k) tr.rows[k].w_norm2 = norms[k];
    CHECK(monotonicity_report(tr).norm_violations == 1);
  }

  TEST_CASE("trace CSV: header, empty probe fields, round trip, determinism") {
    const Dataset data = small_gaussian(7);
    TrainConfig cfg;
    cfg.steps = 200;
    cfg.log_every = 50;
    const TrainTrace tr = train(data, cfg);
    std::stringstream a, b;
    write_trace_csv(a, tr);
    write_trace_csv(b, train(data, cfg));
    CHECK(a.str() == b.str());
    std::string header;
    std::getline(a, header);
    CHECK(header == "t,loss,discrepancy,gamma,w_norm2,w_sigma_norm,align_wstar,align_wmax,min_margin,max_margin");
    std::string first;
    std::getline(a, first);
    CHECK(first.find(",,") != std::string::npos);
    a.seekg(0);
    const TrainTrace back = read_trace_csv(a);
    REQUIRE(back.rows.size() == tr.rows.size());
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
      CHECK(back.rows[k].t == tr.rows[k].t);
      CHECK(back.rows[k].loss == tr.rows[k].loss);
      CHECK(back.rows[k].discrepancy == tr.rows[k].discrepancy);
      CHECK(!back.rows[k].align_wstar.has_value());
    }
    std::stringstream bad("t,loss\n1,2\n");
    CHECK_THROWS_AS(read_trace_csv(bad), Error);
  }
}
