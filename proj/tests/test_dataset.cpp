#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "bnbias/dataset.hpp"
#include "bnbias/errors.hpp"
#include "bnbias/solvers.hpp"

using namespace bnbias;

namespace {

bool is_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("center: two-point mean") {
    const Dataset d = center({Vec{1, 0}, Vec{3, 0}}, {1, -1});
    CHECK(d.row(0)[0] == -1.0);
    CHECK(d.row(1)[0] == 1.0);
    CHECK(d.train_mean() == Vec{2, 0});
    CHECK(d.centered());
  }

  TEST_CASE("center is idempotent on centered data") {
    const Dataset d = center({Vec{-1, 2}, Vec{1, -2}}, {1, -1});
    CHECK(d.train_mean() == Vec{0, 0});
    CHECK(d.row(0)[1] == 2.0);
  }

  TEST_CASE("center: Sigma of the centered pair") {
    const Dataset d = center({Vec{1, 0}, Vec{0, 1}}, {1, -1});
    REQUIRE(d.sigma().has_value());
    const SymMat& s = *d.sigma();
    CHECK(s(0, 0) == doctest::Approx(0.25));
    CHECK(s(0, 1) == doctest::Approx(-0.25));
    CHECK(s(1, 1) == doctest::Approx(0.25));
  }

  TEST_CASE("center errors") {
    CHECK(is_code(ErrorCode::kEmptyDataset, [] { center({}, {}); }));
    CHECK(is_code(ErrorCode::kDimensionMismatch, [] { center({Vec{1, 0}, Vec{1}}, {1, 1}); }));
    CHECK(is_code(ErrorCode::kDimensionMismatch, [] { center({Vec{1, 0}}, {1, 1}); }));
    CHECK(is_code(ErrorCode::kInvalidArgument, [] { center({Vec{1, 0}}, {0}); }));
  }

  TEST_CASE("centered mean is zero and cached Sigma matches a recomputation") {
    Rng rng(12);
    for (std::size_t P : {1u, 3u}) {
      std::vector<std::vector<Vec>> raw;
      std::vector<int> labels;
      for (int i = 0; i < 15; ++i) {
        std::vector<Vec> patches;
        for (std::size_t p = 0; p < P; ++p) {
          Vec x(6);
          for (double& v : x.span()) v = 3.0 + rng.normal();
          patches.push_back(x);
        }
        raw.push_back(patches);
        labels.push_back(rng.rademacher());
      }
      const Dataset d = center_patched(raw, labels);
      double maxnorm = 0.0;
      for (std::size_t r = 0; r < d.rows(); ++r) maxnorm = std::max(maxnorm, norm2(d.row(r)));
      for (std::size_t j = 0; j < d.dim(); ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < d.rows(); ++r) s += d.row(r)[j];
        CHECK(std::abs(s) <= 1e-10 * static_cast<double>(d.rows()) * maxnorm);
      }
      const auto ref = oracle::sigma(d);
      for (std::size_t a = 0; a < d.dim(); ++a)
        for (std::size_t b = 0; b < d.dim(); ++b) {
          CHECK(std::abs((*d.sigma())(a, b) - ref[a][b]) <= 1e-12);
          CHECK(std::abs(d.recompute_sigma()(a, b) - ref[a][b]) <= 1e-12);
        }
    }
  }

  TEST_CASE("gaussian experiment: shape, single point, solvable when d >= n") {
    Rng rng(1);
    const Dataset d = gen_gaussian_experiment(rng, 50, 1000);
    CHECK(d.n() == 50);
    CHECK(d.dim() == 1000);
    CHECK(!d.sigma().has_value() == false);
    int pos = 0;
    for (int y : d.labels()) pos += y > 0;
    CHECK(pos == 25);
    CHECK(solve_uniform_margin(d).residual <= 1e-8);

    Rng one(2);
    const Dataset s = gen_gaussian_experiment(one, 1, 5);
    for (double v : s.row(0)) CHECK(v == 0.0);

    Rng a(3), b(3);
    const Dataset d1 = gen_gaussian_experiment(a, 10, 20), d2 = gen_gaussian_experiment(b, 10, 20);
    CHECK(std::equal(d1.inputs().begin(), d1.inputs().end(), d2.inputs().begin()));
    CHECK(d1.labels() == d2.labels());
  }

  TEST_CASE("gaussian experiment: iid labels option is roughly balanced over many draws") {
    Rng rng(4);
    int pos = 0, total = 0;
    for (int k = 0; k < 200; ++k) {
      const Dataset d = gen_gaussian_experiment(rng, 25, 3, false);
      for (int y : d.labels()) pos += y > 0;
      total += 25;
    }
    CHECK(std::abs(static_cast<double>(pos) / total - 0.5) < 0.03);
  }

  TEST_CASE("example 1: noiseless and orthogonal noise") {
    Example1Config cfg = Example1Config::default_scaling(20);
    CHECK(cfg.dim == 40);
    CHECK(cfg.patches == 4);
    CHECK(cfg.sigma == doctest::Approx(20.0 * std::sqrt(160.0)));

    Rng rng(5);
    GeneratedData g = gen_example1(rng, cfg);
    CHECK(g.warnings.empty());
    CHECK(!g.data.centered());
    for (std::size_t i = 0; i < g.data.n(); ++i)
      for (std::size_t p = 0; p < 4; ++p) CHECK(g.data.patch(i, p)[0] == g.data.label(i));

    Example1Config quiet = cfg;
    quiet.sigma = 0.0;
    Rng rng2(6);
    GeneratedData q = gen_example1(rng2, quiet);
    for (std::size_t i = 0; i < q.data.n(); ++i)
      for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t j = 0; j < q.data.dim(); ++j)
          CHECK(q.data.patch(i, p)[j] == (j == 0 ? q.data.label(i) : 0.0));
  }

  TEST_CASE("example 1: non-axis signal keeps exact orthogonality up to rounding") {
    Example1Config cfg = Example1Config::default_scaling(10);
    cfg.u = Vec(cfg.dim, 0.0);
    cfg.u[0] = 0.6;
    cfg.u[3] = 0.8;
    Rng rng(7);
    GeneratedData g = gen_example1(rng, cfg);
    for (std::size_t i = 0; i < g.data.n(); ++i)
      for (std::size_t p = 0; p < 4; ++p) {
        Vec noise(std::vector<double>(g.data.patch(i, p).begin(), g.data.patch(i, p).end()));
        axpy(-g.data.label(i), cfg.u.span(), noise.span());
        CHECK(std::abs(dot(noise.span(), cfg.u.span())) <= 1e-12 * cfg.sigma);
      }
  }

  TEST_CASE("example 1: warnings outside the proved regime, rejection of bad configs") {
    Example1Config cfg = Example1Config::default_scaling(10, 2);
    cfg.sigma = 1.0;
    Rng rng(8);
    CHECK(gen_example1(rng, cfg).warnings.size() == 2);
    cfg.u = Vec(cfg.dim);
    CHECK(is_code(ErrorCode::kConfigInvalid, [&] { gen_example1(rng, cfg); }));
  }

  TEST_CASE("example 1 sampler: labels balanced, noise orthogonal") {
    const Example1Config cfg = Example1Config::default_scaling(20);
    auto sampler = make_example1_sampler(cfg);
    Rng rng(9);
    std::vector<double> buf(cfg.dim * cfg.patches);
    int pos = 0;
    const int draws = 20000;
    for (int k = 0; k < draws; ++k) {
      const int y = sampler->draw(rng, buf);
      pos += y > 0;
      for (std::size_t p = 0; p < cfg.patches; ++p) CHECK(buf[p * cfg.dim] == y);
    }
    CHECK(std::abs(static_cast<double>(pos) / draws - 0.5) < 0.015);
  }

  TEST_CASE("example 2: default scaling") {
    const Example2Config cfg = Example2Config::default_scaling(50);
    CHECK(cfg.dim == static_cast<std::size_t>(std::ceil(2500.0 * std::log(50.0))));
    CHECK(cfg.dim == 9781);
    CHECK(cfg.sigma == doctest::Approx(1.0 / std::sqrt(9781.0)));
    CHECK(cfg.rho == doctest::Approx(std::pow(50.0, -0.75)));
    CHECK(cfg.alpha == doctest::Approx(std::pow(50.0, -0.5)));
    CHECK(norm2(cfg.u.span()) == doctest::Approx(1.0));
    CHECK(norm2(cfg.v.span()) == doctest::Approx(cfg.alpha * cfg.alpha));
    CHECK(dot(cfg.u.span(), cfg.v.span()) == 0.0);
  }

  Example2Config small_example2(double rho) {
    Example2Config cfg;
    cfg.dim = 12;
    cfg.n = 40;
    cfg.alpha = 0.3;
    cfg.rho = rho;
    cfg.sigma = 1.0 / std::sqrt(12.0);
    cfg.u = Vec(12);
    cfg.u[0] = 1.0;
    cfg.v = Vec(12);
    cfg.v[1] = 0.09;
    return cfg;
  }

  /// Weak points carry y*v as one patch; strong points carry y*u.
  bool is_weak(std::span<const double> buf, std::size_t d, int y, const Example2Config& cfg) {
    for (std::size_t p = 0; p < 2; ++p) {
      bool eq = true;
      for (std::size_t j = 0; j < d; ++j) eq = eq && buf[p * d + j] == y * cfg.v[j];
      if (eq) return true;
    }
    return false;
  }

  TEST_CASE("example 2: weak fraction within the binomial band") {
    const Example2Config cfg = small_example2(0.2);
    auto sampler = make_example2_sampler(cfg);
    Rng rng(10);
    std::vector<double> buf(24);
    const int draws = 100000;
    int weak = 0;
    for (int k = 0; k < draws; ++k) {
      const int y = sampler->draw(rng, buf);
      weak += is_weak(buf, 12, y, cfg);
    }
    CHECK(std::abs(static_cast<double>(weak) / draws - 0.2) <= 3.0 * std::sqrt(0.2 * 0.8 / draws));
  }

  TEST_CASE("example 2: rho = 0 gives only strong points with noise orthogonal to u and v") {
    const Example2Config cfg = small_example2(0.0);
    auto sampler = make_example2_sampler(cfg);
    Rng rng(11);
    std::vector<double> buf(24);
    for (int k = 0; k < 2000; ++k) {
      const int y = sampler->draw(rng, buf);
      CHECK(!is_weak(buf, 12, y, cfg));
      const bool first_is_signal = buf[0] == y && std::all_of(buf.begin() + 1, buf.begin() + 12, [](double v) { return v == 0.0; });
      const double* noise = buf.data() + (first_is_signal ? 12 : 0);
      CHECK(noise[0] == 0.0);
      CHECK(noise[1] == 0.0);
    }
  }

  TEST_CASE("example 2: config validation and warnings") {
    Example2Config cfg = small_example2(0.1);
    Rng rng(12);
    const GeneratedData g = gen_example2(rng, cfg);
    CHECK(g.data.patches() == 2);
    CHECK(g.warnings.empty());
    cfg.v[0] = 0.01;
    CHECK(is_code(ErrorCode::kConfigInvalid, [&] { gen_example2(rng, cfg); }));
    cfg = small_example2(0.5);
    CHECK(is_code(ErrorCode::kConfigInvalid, [&] { gen_example2(rng, cfg); }));
    cfg = small_example2(0.1);
    cfg.alpha = 1.0;
    CHECK(is_code(ErrorCode::kConfigInvalid, [&] { gen_example2(rng, cfg); }));
    cfg = small_example2(0.1);
    cfg.n = 10;
    CHECK(gen_example2(rng, cfg).warnings.size() == 1);
  }

  TEST_CASE("CSV round trip is lossless") {
    Rng rng(13);
    const Dataset d = oracle::gaussian(rng, 4, 3, 2);
    std::stringstream ss;
    write_dataset_csv(ss, d);
    const Dataset back = read_dataset_csv(ss);
    CHECK(back.n() == 4);
    CHECK(back.patches() == 2);
    CHECK(back.labels() == d.labels());
    CHECK(std::equal(d.inputs().begin(), d.inputs().end(), back.inputs().begin()));
  }

  TEST_CASE("CSV reader rejects malformed files") {
    auto bad = [](const std::string& text) {
      std::stringstream ss(text);
      return is_code(ErrorCode::kIo, [&] { read_dataset_csv(ss); });
    };
    CHECK(bad(""));
    CHECK(bad("n=1 d=1 P=1\n0,0,1,2\n"));
    CHECK(bad("# n=2 d=1 P=1\n0,0,1,2\n"));
    CHECK(bad("# n=1 d=2 P=1\n0,0,1,2\n"));
    CHECK(bad("# n=1 d=1 P=1\n0,0,1,2,3\n"));
    CHECK(bad("# n=2 d=1 P=1\n0,0,1,2\n0,0,1,2\n"));
    CHECK(bad("# n=1 d=2 P=1\n0,0,1,abc,2\n"));
    CHECK(bad("# n=1 d=2 P=1\n0,0,1,,2\n"));
    CHECK(bad("# n=1 d=2 P=1\n0,0,1,1.5x,2\n"));
  }
}
