#include <cmath>
#include <functional>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

#include "bnbias/errors.hpp"
#include "bnbias/solvers.hpp"

using namespace bnbias;

namespace {

Dataset rows2(std::vector<double> rows, std::vector<int> labels) {
  return Dataset::from_rows(std::move(rows), std::move(labels), 2, 1, false);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIo;
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("uniform margin hand anchors") {
    SolverReport r = solve_uniform_margin(rows2({1, 0, 0, 1}, {1, 1}));
    CHECK(std::abs(r.solution[0] - 1.0) <= 1e-12);
    CHECK(std::abs(r.solution[1] - 1.0) <= 1e-12);
    CHECK(r.residual <= 1e-12);
    CHECK(!r.regularized);
    r = solve_uniform_margin(Dataset::from_rows({2, 0}, {1}, 2, 1, false));
    CHECK(std::abs(r.solution[0] - 0.5) <= 1e-12);
    CHECK(r.solution[1] == 0.0);
  }

  TEST_CASE("uniform margin: infeasible and duplicated constraints") {
    CHECK(code_of([] { solve_uniform_margin(rows2({1, 0, 1, 0}, {1, -1})); }) == ErrorCode::kInfeasible);
    const SolverReport r = solve_uniform_margin(rows2({1, 0, 1, 0}, {1, 1}));
    CHECK(r.regularized);
    CHECK(r.residual <= 1e-6);
    CHECK(r.solution[0] == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("uniform margin: minimum norm, lies in the span, residual recomputed") {
    Rng rng(1);
    for (int k = 0; k < 10; ++k) {
      const Dataset data = oracle::gaussian(rng, 8, 25, 1 + k % 2);
      const SolverReport r = solve_uniform_margin(data);
      CHECK(r.residual <= 1e-10);
      double worst = 0.0;
      for (std::size_t row = 0; row < data.rows(); ++row)
        worst = std::max(worst, std::abs(data.row_label(row) * oracle::inner(r.solution.span(), data.row(row)) - 1.0));
      CHECK(worst <= 1e-10);
      const Vec proj = SpanBasis(data).project(r.solution.span());
      Vec diff = r.solution;
      axpy(-1.0, proj.span(), diff.span());
      CHECK(norm2(diff.span()) <= 1e-10 * norm2(r.solution.span()));
    }
  }

  TEST_CASE("max margin hand anchors") {
    SolverReport r = solve_max_margin(rows2({1, 0, -1, 0}, {1, -1}));
    CHECK(std::abs(r.solution[0] - 1.0) <= 1e-8);
    CHECK(std::abs(r.solution[1]) <= 1e-8);
    r = solve_max_margin(rows2({1, 1, 1, -1, -1, 1, -1, -1}, {1, 1, -1, -1}));
    CHECK(std::abs(r.solution[0] - 1.0) <= 1e-8);
    CHECK(std::abs(r.solution[1]) <= 1e-8);
    r = solve_max_margin(Dataset::from_rows({2, 0}, {1}, 2, 1, false));
    CHECK(std::abs(r.solution[0] - 0.5) <= 1e-8);
  }

  TEST_CASE("max margin: non-separable data") {
    CHECK(code_of([] { solve_max_margin(rows2({1, 0, 1, 0}, {1, -1})); }) == ErrorCode::kNotSeparable);
    CHECK(code_of([] { solve_max_margin(rows2({0, 0, 1, 0}, {1, -1})); }) == ErrorCode::kNotSeparable);
    CHECK(code_of([] { solve_max_margin(rows2({1, 0, -1, 0, 0, 1, 0, -1}, {1, 1, 1, 1})); }) == ErrorCode::kNotSeparable);
  }

  TEST_CASE("max margin: sweep cap without separability evidence") {
    Rng rng(2);
    const Dataset data = oracle::gaussian(rng, 30, 40);
    MaxMarginOptions opts;
    opts.max_sweeps = 1;
    CHECK(code_of([&] { solve_max_margin(data, opts); }) == ErrorCode::kNoConvergence);
  }

  TEST_CASE("max margin certificates and the optimality cross-check") {
    Rng rng(3);
    for (int k = 0; k < 10; ++k) {
      const std::size_t P = 1 + k % 3;
      const Dataset data = oracle::gaussian(rng, 10 + k, 60, P);
      const SolverReport r = solve_max_margin(data);
      CHECK(r.kkt_violation <= 1e-8);
      Vec rebuilt(data.dim());
      for (std::size_t i = 0; i < data.n(); ++i) {
        const Vec xbar = data.patch_sum(i);
        CHECK(r.duals[i] >= 0.0);
        CHECK(r.slacks[i] >= -1e-8);
        CHECK(r.duals[i] * std::abs(r.slacks[i]) <= 1e-8);
        axpy(r.duals[i] * data.label(i), xbar.span(), rebuilt.span());
      }
      for (std::size_t j = 0; j < data.dim(); ++j) CHECK(std::abs(rebuilt[j] - r.solution[j]) <= 1e-10);
      if (P == 1) {
        // w* scaled to satisfy every constraint with margin >= 1 is feasible.
        const SolverReport u = solve_uniform_margin(data);
        double min_m = INFINITY;
        for (std::size_t i = 0; i < data.n(); ++i)
          min_m = std::min(min_m, data.label(i) * oracle::inner(u.solution.span(), data.row(i)));
        CHECK(norm2(r.solution.span()) <= norm2(u.solution.span()) / min_m + 1e-8);
      }
    }
  }

  TEST_CASE("span spectrum anchors") {
    SpectrumReport s = span_spectrum(rows2({1, 0, -1, 0}, {1, -1}));
    CHECK(s.rank == 1);
    CHECK(s.lambda_min == doctest::Approx(1.0));
    CHECK(s.lambda_max == doctest::Approx(1.0));
    s = span_spectrum(rows2({1, 0, 0, 1}, {1, 1}));
    CHECK(s.rank == 2);
    CHECK(s.lambda_min == doctest::Approx(0.5));
    CHECK(s.lambda_max == doctest::Approx(0.5));
    Rng rng(4);
    s = span_spectrum(oracle::gaussian(rng, 20, 400));
    CHECK(s.lambda_min >= 0.01);
    CHECK(s.lambda_max <= 100.0);
    CHECK(s.rank == 20);
    s = span_spectrum(oracle::gaussian(rng, 200, 5));
    CHECK(s.rank == 5);
    CHECK(s.lambda_min >= 0.01);
    CHECK(s.lambda_max <= 100.0);
  }

  TEST_CASE("span spectrum agrees with the restricted quadratic form") {
    Rng rng(5);
    const Dataset data = oracle::gaussian(rng, 6, 15);
    const SpectrumReport s = span_spectrum(data);
    const auto sig = oracle::sigma(data);
    for (int k = 0; k < 50; ++k) {
      Vec w(15);
      for (std::size_t i = 0; i < 6; ++i) axpy(rng.normal(), data.row(i), w.span());
      double q = 0.0;
      for (std::size_t a = 0; a < 15; ++a)
        for (std::size_t b = 0; b < 15; ++b) q += w[a] * sig[a][b] * w[b];
      const double ww = dot(w.span(), w.span());
      CHECK(q >= s.lambda_min * ww * (1 - 1e-10));
      CHECK(q <= s.lambda_max * ww * (1 + 1e-10));
    }
  }

  TEST_CASE("sorted-sequence inequality anchors and validation") {
    AuxInequality r = check_aux_inequality(std::vector<double>{0, 1}, std::vector<double>{2, 1});
    CHECK(r.lhs == 4.0);
    CHECK(r.rhs == 0.75);
    CHECK(r.holds);
    r = check_aux_inequality(std::vector<double>{2, 2, 2}, std::vector<double>{3, 1, 0});
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs == 0.0);
    CHECK(r.holds);
    const std::vector<double> a{-1, 0, 0.5, 3};
    r = check_aux_inequality(a, std::vector<double>{0.7, 0.7, 0.7, 0.7});
    double pairs = 0.0;
    for (double x : a)
      for (double y : a) pairs += (x - y) * (x - y);
    CHECK(r.lhs == doctest::Approx(0.7 * pairs));
    CHECK(r.rhs == doctest::Approx(0.7 * pairs / 4.0));
    CHECK(code_of([] { check_aux_inequality(std::vector<double>{1, 0}, std::vector<double>{1, 1}); }) == ErrorCode::kNotSorted);
    CHECK(code_of([] { check_aux_inequality(std::vector<double>{0, 1}, std::vector<double>{1, 2}); }) == ErrorCode::kNotSorted);
    CHECK(code_of([] { check_aux_inequality(std::vector<double>{0, 1}, std::vector<double>{1, -1}); }) == ErrorCode::kNotSorted);
  }

  TEST_CASE("scale recurrence anchors") {
    GammaRecurrence g = gamma_recurrence_bounds(1.0, 1.0, 1);
    CHECK(g.value == doctest::Approx(1.3678794411714423).epsilon(1e-15));
    CHECK(g.bracketed);
    g = gamma_recurrence_bounds(0.7, 0.3, 0);
    CHECK(g.value == 0.7);
    CHECK(std::abs(g.lower - 0.7) <= 1e-15);
    CHECK(g.upper == doctest::Approx(0.7 + 0.3 * std::exp(-0.7)));
    g = gamma_recurrence_bounds(0.5, 0.125, 1000000);
    CHECK(g.bracketed);
    CHECK(g.lower <= g.value);
    CHECK(g.value <= g.upper);
    CHECK_THROWS_AS(gamma_recurrence_bounds(0.5, 0.0, 3), Error);
    CHECK_THROWS_AS(gamma_recurrence_bounds(0.5, 1.0, -1), Error);
  }

  TEST_CASE("JSON layout") {
    const auto j = nlohmann::json::parse(solver_report_json(solve_uniform_margin(rows2({1, 0, 0, 1}, {1, 1}))));
    CHECK(j.contains("solution"));
    CHECK(j.contains("residual"));
    CHECK(j.contains("iterations"));
    CHECK(j["certificate"].contains("slacks"));
    CHECK(j["solution"][0].get<double>() == doctest::Approx(1.0));
    const auto s = nlohmann::json::parse(spectrum_report_json(span_spectrum(rows2({1, 0, 0, 1}, {1, 1}))));
    CHECK(s["rank"].get<int>() == 2);
  }
}
