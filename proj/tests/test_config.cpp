#include <algorithm>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

#include "bnbias/config.hpp"
#include "bnbias/errors.hpp"
#include "bnbias/svg.hpp"

using namespace bnbias;
using nlohmann::json;

namespace {

ErrorCode apply_code(const json& doc) {
  RunConfig cfg;
  try {
    apply_config_json(cfg, doc);
    cfg.validate();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;  // sentinel: nothing thrown
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t c = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++c;
  return c;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("nested keys are applied") {
    RunConfig cfg;
    apply_config_json(cfg, json::parse(R"({"seed": 9, "dataset": {"kind": "example1", "n": 12, "P": 3},
      "train": {"model": "bn-cnn", "eta": 0.2, "steps": 10}, "harness": {"mc": 50, "seeds": 2}})"));
    CHECK(cfg.seed == 9);
    CHECK(cfg.data == "example1");
    CHECK(cfg.n == 12);
    CHECK(cfg.patches == 3);
    CHECK(cfg.train.model_kind == ModelKind::kBnCnn);
    CHECK(cfg.train.eta == 0.2);
    CHECK(cfg.train.steps == 10);
    CHECK(cfg.mc == 50);
    CHECK(cfg.seeds == 2);
  }

  TEST_CASE("unknown keys and wrong types are rejected") {
    CHECK(apply_code(json::parse(R"({"sede": 1})")) == ErrorCode::kConfigInvalid);
    CHECK(apply_code(json::parse(R"({"train": {"lr": 0.1}})")) == ErrorCode::kConfigInvalid);
    CHECK(apply_code(json::parse(R"({"dataset": {"n": "fifty"}})")) == ErrorCode::kConfigInvalid);
    CHECK(apply_code(json::parse(R"({"harness": {"tail": 1.5}})")) == ErrorCode::kConfigInvalid);
    CHECK(apply_code(json::parse(R"({"train": {"model": "mlp"}})")) == ErrorCode::kConfigInvalid);
  }

  TEST_CASE("the echoed config loads back to the same values") {
    RunConfig cfg;
    cfg.data = "example2";
    cfg.n = 20;
    cfg.d = 333;
    cfg.train.steps = 77;
    cfg.train.model_kind = ModelKind::kPlainLogistic;
    cfg.seed = 123456789012345ULL;
    cfg.tail = 0.25;
    const auto echo = run_config_json(cfg);
    RunConfig back;
    apply_config_json(back, json::parse(echo.dump()));
    CHECK(run_config_json(back).dump() == echo.dump());
    CHECK(back.seed == cfg.seed);
    CHECK(back.d == cfg.d);
  }

  TEST_CASE("config files: overrides start from the base, missing files are IO errors") {
    const std::string path = "test_config_tmp.json";
    std::ofstream(path) << R"({"train": {"steps": 5}})";
    RunConfig base;
    base.seed = 42;
    const RunConfig cfg = load_run_config(path, base);
    CHECK(cfg.train.steps == 5);
    CHECK(cfg.seed == 42);
    std::remove(path.c_str());
    try {
      load_run_config("does/not/exist.json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIo);
    }
  }

  TEST_CASE("dataset construction defaults") {
    RunConfig cfg;
    cfg.n = 10;
    BuiltData b = build_dataset(cfg);
    CHECK(b.data.dim() == 1000);
    CHECK(b.data.n() == 10);
    CHECK(b.data.centered());
    cfg.data = "example1";
    b = build_dataset(cfg);
    CHECK(b.data.dim() == 20);
    CHECK(b.data.patches() == 4);
    CHECK(b.test_sampler != nullptr);
    cfg.data = "example2";
    cfg.d = 50;
    CHECK(example2_config(cfg).dim == 50);
    cfg.data = "file:does/not/exist.csv";
    CHECK_THROWS_AS(build_dataset(cfg), Error);
  }
}

TEST_SUITE("svg") {
  TEST_CASE("one polyline per series, well-formed ends, deterministic") {
    std::vector<Series> series;
    for (int k = 0; k < 3; ++k) series.push_back({"s" + std::to_string(k), {0, 1, 2}, {double(k), 1.0 + k, 0.5}});
    ChartOptions opts;
    opts.title = "t & <x>";
    const std::string svg = line_chart_svg(series, opts);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(count(svg, "<polyline") == 3);
    CHECK(svg.find("t &amp; &lt;x&gt;") != std::string::npos);
    CHECK(svg == line_chart_svg(series, opts));
  }

  TEST_CASE("log axis and legend cap") {
    std::vector<Series> series;
    for (int k = 0; k < 12; ++k) series.push_back({"m" + std::to_string(k), {1, 10, 100, 1000}, {1, 2, 3, double(k)}});
    ChartOptions opts;
    opts.log_x = true;
    const std::string svg = line_chart_svg(series, opts);
    CHECK(count(svg, "<polyline") == 12);
    CHECK(svg.find(">m11</text>") == std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
  }
}
