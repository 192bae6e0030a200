// Drives the sso binary end to end: exit codes, messages and output files.

#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sso_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result run(const std::string& args, const fs::path& work) {
  const fs::path out = work / "stdout.txt", err = work / "stderr.txt";
  const std::string cmd = std::string("\"") + SSO_BINARY + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, slurp(out), slurp(err)};
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kLine = R"(dimension = 1
box = [6]
resolution = [301]
backend = "multiphase"
seed = 0
)";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("solve writes a run directory and exits 0 on convergence") {
    const fs::path w = scratch("solve");
    const auto cfg = write_config(w, "a.toml", std::string(kLine) + "lambda = 1\n");
    const Result r = run("solve --config \"" + cfg.string() + "\" --out \"" + (w / "run").string() + "\"", w);
    CHECK(r.code == 0);
    for (const char* f : {"state.json", "manifest.json", "history.csv", "u.csv", "mask_plus.csv", "mask_minus.csv"})
      CHECK(fs::exists(w / "run" / f));
    const auto manifest = nlohmann::json::parse(slurp(w / "run" / "manifest.json"));
    for (const auto& f : manifest.at("files")) CHECK(fs::exists(w / "run" / f.get<std::string>()));
  }

  TEST_CASE("solve rejects a nonpositive lambda") {
    const fs::path w = scratch("badlambda");
    const auto cfg = write_config(w, "a.toml", std::string(kLine) + "lambda = -1\n");
    const Result r = run("solve --config \"" + cfg.string() + "\" --out \"" + (w / "run").string() + "\"", w);
    CHECK(r.code == 1);
    CHECK(r.err.find("lambda must be positive") != std::string::npos);
  }

  TEST_CASE("unparsable config names the key") {
    const fs::path w = scratch("badkey");
    const auto cfg = write_config(w, "a.toml", std::string(kLine) + "lambda = 1\nstep = 2\n");
    const Result r = run("solve --config \"" + cfg.string() + "\" --out \"" + (w / "run").string() + "\"", w);
    CHECK(r.code == 1);
    CHECK(r.err.find("step") != std::string::npos);
  }

  TEST_CASE("solve is deterministic") {
    const fs::path w = scratch("determinism");
    const auto cfg = write_config(w, "a.toml", std::string(kLine) + "lambda = 1\n");
    for (const char* d : {"r1", "r2"}) REQUIRE(run("solve --config \"" + cfg.string() + "\" --out \"" + (w / d).string() + "\"", w).code == 0);
    CHECK(slurp(w / "r1" / "state.json") == slurp(w / "r2" / "state.json"));
    CHECK(slurp(w / "r1" / "u.csv") == slurp(w / "r2" / "u.csv"));
  }

  TEST_CASE("diagnose fills the report") {
    const fs::path w = scratch("diagnose");
    const auto cfg = write_config(w, "a.toml", std::string(kLine) + "lambda = 1\n");
    REQUIRE(run("solve --config \"" + cfg.string() + "\" --out \"" + (w / "run").string() + "\"", w).code == 0);
    const Result r = run("diagnose \"" + (w / "run").string() + "\" --centers auto", w);
    CHECK(r.code == 0);
    for (const char* f : {"weiss.csv", "fits.csv", "report.json"}) CHECK(fs::exists(w / "run" / f));
    const auto j = nlohmann::json::parse(slurp(w / "run" / "report.json"));
    for (const char* k : {"energy_balance_residual", "eigen_match_residual", "lipschitz_estimate", "nondegeneracy_eta",
                          "gradient_trace_plus", "gradient_trace_minus"}) {
      REQUIRE(j.contains(k));
      CHECK(j[k].is_number());
    }
    CHECK(j["flags"].empty());
    CHECK(slurp(w / "run" / "weiss.csv").rfind("center_x,center_y,r,W,C", 0) == 0);
  }

  TEST_CASE("diagnose on a missing directory exits 1") {
    const fs::path w = scratch("missing");
    CHECK(run("diagnose \"" + (w / "nothing").string() + "\"", w).code == 1);
  }

  TEST_CASE("validate") {
    const fs::path w = scratch("validate");
    CHECK(run("validate eigen", w).code == 0);
    const Result bad = run("validate bogus", w);
    CHECK(bad.code == 1);
    for (const char* s : {"eigen", "onedim", "twodim", "properties"}) CHECK(bad.err.find(s) != std::string::npos);
  }

  TEST_CASE("sweep follows the one-dimensional closed form") {
    const fs::path w = scratch("sweep");
    const auto cfg = write_config(w, "s.toml", std::string(kLine) + "lambdas = [0.5, 1, 2]\n");
    const Result r = run("sweep --config \"" + cfg.string() + "\" --out \"" + (w / "out").string() + "\"", w);
    CHECK(r.code == 0);
    std::ifstream in(w / "out" / "sweep.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "lambda,lambda2,volume,objective,contact_distance");
    int rows = 0;
    while (std::getline(in, line)) {
      double lambda = 0, lambda2 = 0, volume = 0;
      REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &lambda, &lambda2, &volume) == 3);
      const double ell = volume / 2, expect = std::cbrt(std::numbers::pi * std::numbers::pi / lambda);
      CHECK(std::abs(ell - expect) <= 0.03 * expect);
      CHECK(fs::exists(w / "out" / ("lambda_" + std::string(lambda == 0.5 ? "0.5" : lambda == 1 ? "1" : "2")) / "state.json"));
      ++rows;
    }
    CHECK(rows == 3);
  }

  TEST_CASE("sweep keeps going past a failing lambda") {
    const fs::path w = scratch("sweepfail");
    const auto cfg = write_config(w, "s.toml", std::string(kLine) + "lambdas = [1, -1, 2]\n");
    const Result r = run("sweep --config \"" + cfg.string() + "\" --out \"" + (w / "out").string() + "\"", w);
    CHECK(r.code == 2);
    std::ifstream in(w / "out" / "sweep.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
  }

  TEST_CASE("sweep with no lambdas exits 1") {
    const fs::path w = scratch("sweepempty");
    const auto cfg = write_config(w, "s.toml", std::string(kLine) + "lambda = 1\n");
    CHECK(run("sweep --config \"" + cfg.string() + "\" --out \"" + (w / "out").string() + "\"", w).code == 1);
  }
}
