#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sso/functional.hpp"
#include "sso/mask.hpp"
#include "sso/optimizer.hpp"

using namespace sso;
using std::numbers::pi;

namespace {

GridPtr<double> line(double length, int n) {
  Geometry g;
  g.dimension = 1;
  g.extent = Point(length, 0);
  return build_grid(g, {n, 1});
}

GridPtr<double> box(double w, double h, int per_unit) {
  Geometry g;
  g.dimension = 2;
  g.extent = Point(w, h);
  return build_grid(g, {int(w * per_unit) + 1, int(h * per_unit) + 1});
}

Mask interval(const Grid& g, double a, double b) {
  Mask m(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const double x = g.position(i)[0];
    m[i] = g.inside()[i] && x > a + 1e-12 && x < b - 1e-12;
  }
  return m;
}

// Every PhaseState invariant that does not depend on convergence.
void check_state(const PhaseState& s) {
  const Grid& g = s.grid();
  CHECK_FALSE((s.mask_plus && s.mask_minus).any());
  CHECK_FALSE((s.mask_plus && !g.inside()).any());
  CHECK_FALSE((s.mask_minus && !g.inside()).any());
  const Field up = s.u.positive_part(), um = s.u.negative_part();
  CHECK(l2_norm(up) == doctest::Approx(1).epsilon(1e-8));
  CHECK(l2_norm(um) == doctest::Approx(1).epsilon(1e-8));
  CHECK(s.a_plus + s.a_minus == doctest::Approx(1).epsilon(1e-8));
  CHECK(s.a_plus >= 0);
  CHECK(s.a_minus >= 0);
  const double f = j_infty(dirichlet_energy(up), dirichlet_energy(um)) + s.lambda * s.volume();
  CHECK(std::abs(s.objective - f) <= 1e-8 * std::abs(f));
}

double phase_length(const PhaseState& s, const Mask& m) { return double(m.count()) * s.grid().h(); }

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("config validation") {
    SolverConfig c;
    CHECK_NOTHROW(validate(c));
    c.lambda = 0;
    CHECK_THROWS_WITH_AS(validate(c), "lambda must be positive", InvalidArgument);
    c.lambda = -1;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = SolverConfig{};
    c.p_schedule = {2, 8, 4};
    CHECK_THROWS_WITH_AS(validate(c), "p_schedule must be ascending", InvalidArgument);
    c.p_schedule = {1, 2};
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    c = SolverConfig{};
    c.tol_objective = 0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);

    // A frozen support is the one place lambda = 0 is allowed.
    auto grid = line(6, 61);
    c = SolverConfig{};
    c.lambda = 0;
    c.frozen_support = grid->inside();
    CHECK_NOTHROW(validate(c));
  }

  TEST_CASE("two-ball initialization") {
    auto grid = box(6, 3, 16);
    SolverConfig c;
    c.radius = 0.8;
    const PhaseState s = initialize(c, grid);
    check_state(s);
    CHECK(std::isfinite(s.objective));
    CHECK(count_components(*grid, s.mask_plus) == 1);
    CHECK(count_components(*grid, s.mask_minus) == 1);

    c.radius = 2;
    CHECK_THROWS_AS(initialize(c, grid), InvalidArgument);
    c.radius = 0.8;
    c.centers = {Point(2, 1.5), Point(3, 1.5)};
    CHECK_THROWS_WITH_AS(initialize(c, grid), "seed balls overlap", InvalidArgument);
  }

  TEST_CASE("random initialization is seeded") {
    auto grid = box(6, 3, 8);
    SolverConfig c;
    c.init = InitKind::random;
    c.seed = 7;
    const PhaseState a = initialize(c, grid), b = initialize(c, grid);
    CHECK((a.mask_plus == b.mask_plus).all());
    CHECK((a.mask_minus == b.mask_minus).all());
    CHECK(a.objective == b.objective);
    check_state(a);
    c.seed = 8;
    const PhaseState d = initialize(c, grid);
    CHECK_FALSE(((a.mask_plus == d.mask_plus).all() && (a.mask_minus == d.mask_minus).all()));
  }

  TEST_CASE("multiphase 1D optimum") {
    auto grid = line(6, 601);
    SolverConfig c;
    const PhaseState s = solve_multiphase(c, grid);
    const double ell = std::cbrt(pi * pi);
    CHECK(s.converged);
    check_state(s);
    CHECK(std::abs(phase_length(s, s.mask_plus) - ell) <= 0.03 * ell);
    CHECK(std::abs(phase_length(s, s.mask_minus) - ell) <= 0.03 * ell);
    CHECK(std::abs(s.objective - 3 * ell) <= 0.02 * 3 * ell);
    CHECK(count_components(*grid, s.mask_plus) == 1);
    CHECK(count_components(*grid, s.mask_minus) == 1);
    CHECK(s.a_plus >= 0.05);
    CHECK(s.a_minus >= 0.05);
    for (std::size_t k = 1; k < s.history.size(); ++k) CHECK(s.history[k] < s.history[k - 1]);
  }

  TEST_CASE("multiphase optimal length scales as lambda^(-1/3)") {
    auto grid = line(6, 1201);
    SolverConfig c;
    c.lambda = 8;
    c.radius = 0.5;
    const PhaseState s = solve_multiphase(c, grid);
    const double ell = std::cbrt(pi * pi / 8);
    CHECK(s.converged);
    CHECK(std::abs(phase_length(s, s.mask_plus) - ell) <= 0.03 * ell);
    CHECK(std::abs(phase_length(s, s.mask_minus) - ell) <= 0.03 * ell);
  }

  TEST_CASE("multiphase reports non-convergence") {
    auto grid = line(6, 601);
    SolverConfig c;
    c.max_outer_iters = 1;
    const PhaseState s = solve_multiphase(c, grid);
    CHECK_FALSE(s.converged);
    CHECK(s.iterations == 1);
    check_state(s);
  }

  TEST_CASE("relaxed 1D optimum agrees with multiphase") {
    auto grid = line(6, 601);
    SolverConfig c;
    c.backend = Backend::relaxed;
    const PhaseState s = solve(c, grid);
    const double ell = std::cbrt(pi * pi);
    CHECK(s.converged);
    check_state(s);
    CHECK(std::abs(phase_length(s, s.mask_plus) - ell) <= 0.03 * ell);
    CHECK(std::abs(phase_length(s, s.mask_minus) - ell) <= 0.03 * ell);
    CHECK(std::abs(s.objective - 3 * ell) <= 0.02 * 3 * ell);
    // Symmetric box and seeds.
    CHECK(std::abs(s.a_plus - 0.5) <= 0.1);
    CHECK(std::abs(s.a_minus - 0.5) <= 0.1);

    c.backend = Backend::multiphase;
    const PhaseState m = solve(c, grid);
    CHECK(std::abs(s.objective - m.objective) <= 0.03 * m.objective);

    // Monotone line search: the objective never rises within a stage.
    REQUIRE_FALSE(s.stage_breaks.empty());
    for (std::size_t k = 0; k < s.stage_breaks.size(); ++k) {
      const std::size_t a = std::size_t(s.stage_breaks[k]);
      const std::size_t b = k + 1 < s.stage_breaks.size() ? std::size_t(s.stage_breaks[k + 1]) : s.history.size();
      for (std::size_t i = a + 1; i < b; ++i) CHECK(s.history[i] < s.history[i - 1]);
    }
  }

  TEST_CASE("relaxed J_inf on a frozen support is lambda_2") {
    auto grid = line(6, 601);
    const Mask support = interval(*grid, 0.5, 5.5);
    SolverConfig c;
    c.backend = Backend::relaxed;
    c.lambda = 0;
    c.frozen_support = support;
    const PhaseState s = solve(c, grid);
    const double lam2 = smallest_eigenpairs(grid, support, 2).eigenvalues[1];
    CHECK(std::abs(j_infty(s.lambda1_plus, s.lambda1_minus) - lam2) <= 0.01 * lam2);
    CHECK_FALSE((s.mask_plus && !support).any());
    CHECK_FALSE((s.mask_minus && !support).any());
  }

  TEST_CASE("relaxed phase collapse") {
    auto grid = line(6, 601);
    SolverConfig c;
    c.backend = Backend::relaxed;
    c.radius = 0.015;
    CHECK_THROWS_AS(solve(c, grid), PhaseCollapseError);
    try {
      solve(c, grid);
    } catch (const PhaseCollapseError& e) {
      CHECK(std::string(e.what()).find("phase collapse") == 0);
    }
  }

  TEST_CASE("sign split") {
    auto grid = line(6, 601);
    const PhaseState s = evaluate_masks(grid, interval(*grid, 0.5, 2.5), interval(*grid, 3.5, 5.5), 1.0);
    const Field u = assemble_sign_split(s);
    CHECK(l2_norm(u.positive_part()) == doctest::Approx(1).epsilon(1e-10));
    CHECK(l2_norm(u.negative_part()) == doctest::Approx(1).epsilon(1e-10));
    CHECK((u.support() == (s.mask_plus || s.mask_minus)).all());
    // Odd about the midpoint of the box.
    const Index n = grid->size();
    for (Index i = 0; i < n; ++i) CHECK(u[i] == doctest::Approx(-u[n - 1 - i]).epsilon(1e-8).scale(1));
    // Equal intervals: equal eigenvalues and symmetric weights.
    CHECK(s.lambda1_plus == doctest::Approx(s.lambda1_minus).epsilon(1e-10));
    CHECK(s.a_plus == doctest::Approx(0.5).epsilon(1e-8));

    PhaseState empty = s;
    empty.mask_minus.setConstant(false);
    CHECK_THROWS_AS(assemble_sign_split(empty), DegeneratePhaseError);
  }

  TEST_CASE("multiphase 2D coarse two-disk run") {
    auto grid = box(6, 3, 16);
    SolverConfig c;
    const PhaseState s = solve_multiphase(c, grid);
    CHECK(s.converged);
    check_state(s);
    CHECK(count_components(*grid, s.mask_plus) == 1);
    CHECK(count_components(*grid, s.mask_minus) == 1);
    const double r = std::pow(2.404825557695773 * 2.404825557695773 / (2 * pi), 0.25);
    const double f = 2 * 2.404825557695773 * 2.404825557695773 / (r * r);
    CHECK(std::abs(s.objective - f) <= 0.05 * f);
    CHECK(contour_metrics(*grid, s.mask_plus).circularity() >= 0.9);
  }
}
