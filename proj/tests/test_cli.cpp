#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BNML_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bnml_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("train --eta -1") == 2);
    CHECK(run("train --model mlp") == 2);
    CHECK(run("train --data example1 --model bn-linear --steps 1") == 2);
    CHECK(run("verify --suite nope") == 2);
  }

  TEST_CASE("unknown config key exits 2, missing config file exits 3") {
    const fs::path dir = scratch("cfg");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << R"({"train": {"stepz": 3}})";
    CHECK(run("train --config " + (dir / "bad.json").string()) == 2);
    CHECK(run("train --config " + (dir / "missing.json").string()) == 3);
    fs::remove_all(dir);
  }

  TEST_CASE("train with zero steps writes a single trace row") {
    const fs::path dir = scratch("train0");
    REQUIRE(run("train --n 8 --d 20 --steps 0 --out " + dir.string()) == 0);
    std::ifstream in(dir / "trace.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 2);
    const auto cfg = nlohmann::json::parse(slurp(dir / "config.json"));
    CHECK(cfg.contains("train"));
    CHECK(fs::exists(dir / "final_state.json"));
    fs::remove_all(dir);
  }

  TEST_CASE("train --plot writes the margin chart") {
    const fs::path dir = scratch("plot");
    REQUIRE(run("train --n 6 --d 15 --steps 50 --log-every 10 --plot --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "margins.csv"));
    CHECK(slurp(dir / "margins.svg").find("</svg>") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("verify: pass exits 0, corrupted gradient exits 1") {
    CHECK(run("verify --suite gradients --trials 3") == 0);
    CHECK(run("verify --suite gradients --trials 3 --corrupt-gradient") == 1);
    CHECK(run("verify --trials 0") == 0);
  }

  TEST_CASE("example with a single Monte Carlo draw still reports") {
    const fs::path dir = scratch("example");
    REQUIRE(run("example --which 1 --n 10 --mc 1 --seeds 2 --out " + dir.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "genreport.json"));
    CHECK(j["runs"].size() == 2);
    CHECK(j["which"].get<int>() == 1);
    fs::remove_all(dir);
  }

  TEST_CASE("ratefit on a short trace exits 3") {
    const fs::path dir = scratch("ratefit");
    REQUIRE(run("train --n 6 --d 15 --steps 100 --out " + dir.string()) == 0);
    CHECK(run("ratefit --trace " + (dir / "trace.csv").string()) == 3);
    CHECK(run("ratefit --trace " + (dir / "nope.csv").string()) == 3);
    fs::remove_all(dir);
  }

  TEST_CASE("solve writes all three reports") {
    const fs::path dir = scratch("solve");
    REQUIRE(run("solve --n 8 --d 30 --out " + dir.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "solve.json"));
    CHECK(j.size() >= 3);
    fs::remove_all(dir);
  }

  TEST_CASE("a diverging run exits 3") {
    const fs::path dir = scratch("diverge");
    CHECK(run("train --n 6 --d 15 --model plain --eta 1e306 --steps 20 --out " + dir.string()) == 3);
    fs::remove_all(dir);
  }
}
