#include "doctest.h"
#include "json.hpp"

#include "bnbias/errors.hpp"
#include "bnbias/verify.hpp"

using namespace bnbias;

TEST_SUITE("verify") {
  TEST_CASE("suite names") {
    CHECK(parse_suite("identities") == Suite::kIdentities);
    CHECK(parse_suite("inequalities") == Suite::kInequalities);
    CHECK(parse_suite("gradients") == Suite::kGradients);
    CHECK(parse_suite("all") == Suite::kAll);
    CHECK_THROWS_AS(parse_suite("everything"), Error);
  }

  TEST_CASE("every property holds on the default seed") {
    VerifyOptions opts;
    opts.trials = 30;
    const auto results = run_suite(Suite::kAll, opts);
    CHECK(results.size() >= 10);
    for (const auto& r : results) {
      INFO(r.name, " worst ", r.worst);
      CHECK(r.passed());
      CHECK(r.instances > 0);
      CHECK(r.worst <= r.tolerance);
      CHECK(r.failing_instance.empty());
    }
  }

  TEST_CASE("a corrupted gradient is caught and the instance is reported") {
    VerifyOptions opts;
    opts.trials = 10;
    opts.corrupt_gradient = true;
    const auto results = run_suite(Suite::kGradients, opts);
    bool caught = false;
    for (const auto& r : results) {
      if (r.passed()) continue;
      caught = true;
      const auto j = nlohmann::json::parse(r.failing_instance);
      CHECK(j["property"].get<std::string>() == r.name);
      CHECK(j.contains("trial_seed"));
    }
    CHECK(caught);
  }

  TEST_CASE("zero trials runs nothing random") {
    VerifyOptions opts;
    opts.trials = 0;
    for (const auto& r : run_suite(Suite::kAll, opts)) {
      CHECK(r.instances == 0);
      CHECK(r.passed());
    }
  }

  TEST_CASE("results are a function of the seed") {
    VerifyOptions opts;
    opts.trials = 5;
    const auto a = run_suite(Suite::kIdentities, opts), b = run_suite(Suite::kIdentities, opts);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].worst == b[k].worst);
  }
}
