#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "sso/io.hpp"

using namespace sso;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sso_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kConfig1D = R"(
# one-dimensional reference run
[domain]
dimension = 1
box = [6]
resolution = [601]

[solver]
lambda = 1.0
backend = "multiphase"
seed = 3
)";

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("number rendering round-trips") {
    for (double x : {0.1, 1.0 / 3, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(x)) == x);
    CHECK(format_double(0.5) == "0.5");
  }

  TEST_CASE("field and mask CSV round-trip") {
    const fs::path dir = scratch_dir("csv");
    Geometry g;
    g.dimension = 2;
    g.extent = Point(2, 1);
    auto grid = build_grid(g, {9, 5});
    Eigen::VectorXd values = Eigen::VectorXd::Zero(grid->size());
    Mask m = Mask::Constant(grid->size(), false);
    for (Index i = 0; i < grid->size(); ++i) {
      if (!grid->inside()[i]) continue;
      values[i] = std::sin(double(i)) / 3;
      m[i] = i % 3 == 0;
    }
    const Field f(grid, values);
    write_field_csv(dir / "u.csv", f);
    write_mask_csv(dir / "m.csv", *grid, m);
    CHECK(slurp(dir / "u.csv").rfind("ix,iy,value\n", 0) == 0);
    const Field back = read_field_csv(grid, dir / "u.csv");
    CHECK((back.values().array() == f.values().array()).all());
    CHECK((read_mask_csv(grid, dir / "m.csv") == m).all());

    write_grid_json(dir / "grid.json", *grid);
    auto g2 = read_grid_json(dir / "grid.json");
    CHECK(g2->nx() == grid->nx());
    CHECK(g2->ny() == grid->ny());
    CHECK(g2->h() == grid->h());
    CHECK((g2->inside() == grid->inside()).all());

    std::ofstream(dir / "bad.csv") << "ix,value\n0,1\n";
    CHECK_THROWS_AS(read_field_csv(grid, dir / "bad.csv"), InvalidArgument);
  }

  TEST_CASE("config parsing") {
    const RunConfig c = parse_config(kConfig1D);
    CHECK(c.geometry.dimension == 1);
    CHECK(c.geometry.extent[0] == 6);
    CHECK(c.resolution[0] == 601);
    CHECK(c.solver.lambda == 1);
    CHECK(c.solver.seed == 3);
    CHECK(c.solver.backend == Backend::multiphase);
    CHECK(build_grid(c)->h() == doctest::Approx(0.01));

    // Canonical text reproduces the config.
    const RunConfig again = parse_config(config_text(c));
    CHECK(config_text(again) == config_text(c));

    const RunConfig two = parse_config("dimension = 2\nbox = [6, 3]\nresolution = [193]\nlambdas = [0.5, 1, 2]\n");
    CHECK(two.resolution[1] == 97);
    CHECK(two.lambdas.size() == 3);
  }

  TEST_CASE("config errors name the key") {
    CHECK_THROWS_WITH_AS(parse_config("dimension = 1\nbox = [6]\nresolution = [61]\nlamda = 1\n"),
                         "unknown config key 'lamda'", InvalidArgument);
    CHECK_THROWS_WITH_AS(parse_config("dimension = 1\nbox = [6]\nresolution = [61]\nlambda = [1, 2]\n"),
                         "config key 'lambda': expected a number", InvalidArgument);
    CHECK_THROWS_WITH_AS(parse_config("dimension = 1\nbox = [6]\nresolution = [61]\nbackend = \"fast\"\n"),
                         "config key 'backend': expected multiphase or relaxed", InvalidArgument);
    CHECK_THROWS_AS(parse_config("box = [6]\nresolution = [61]\n"), InvalidArgument);
  }

  TEST_CASE("run directory round-trip") {
    const fs::path dir = scratch_dir("run");
    const RunConfig c = parse_config("dimension = 1\nbox = [6]\nresolution = [301]\nseed = 5\n");
    auto grid = build_grid(c);
    const PhaseState s = solve(c.solver, grid);
    save_run(dir, c, s, {0.25});

    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    for (const auto& f : manifest.at("files")) CHECK(fs::exists(dir / f.get<std::string>()));
    CHECK(manifest.at("seed") == 5);

    const LoadedRun run = load_run(dir);
    CHECK(run.state.objective == s.objective);
    CHECK(run.state.lambda2 == s.lambda2);
    CHECK(run.state.a_plus == s.a_plus);
    CHECK(run.state.converged == s.converged);
    CHECK((run.state.mask_plus == s.mask_plus).all());
    CHECK((run.state.u.values().array() == s.u.values().array()).all());
    CHECK(run.state.history == s.history);
    CHECK(config_text(run.config) == config_text(c));

    register_output(dir, "report.json");
    const auto m2 = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(std::find(m2.at("files").begin(), m2.at("files").end(), "report.json") != m2.at("files").end());

    CHECK_THROWS_AS(load_run(dir / "missing"), InvalidArgument);
  }

  TEST_CASE("equal configs give byte-identical state files") {
    const RunConfig c = parse_config("dimension = 1\nbox = [6]\nresolution = [301]\ninit = \"random\"\nseed = 11\n");
    const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
    save_run(a, c, solve(c.solver, build_grid(c)), {1.0});
    save_run(b, c, solve(c.solver, build_grid(c)), {2.0});
    for (const char* f : {"state.json", "u.csv", "mask_plus.csv", "mask_minus.csv", "history.csv"})
      CHECK(slurp(a / f) == slurp(b / f));
  }

  TEST_CASE("file initialization from a run directory") {
    const fs::path dir = scratch_dir("init");
    const RunConfig c = parse_config("dimension = 1\nbox = [6]\nresolution = [301]\n");
    auto grid = build_grid(c);
    const PhaseState s = solve(c.solver, grid);
    save_run(dir, c, s, {});
    SolverConfig warm = c.solver;
    warm.init = InitKind::file;
    warm.init_path = dir.string();
    const PhaseState start = initialize(warm, grid);
    CHECK((start.mask_plus == s.mask_plus).all());
    CHECK((start.mask_minus == s.mask_minus).all());
  }
}
