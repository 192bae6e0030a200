#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "sso/eigensolver.hpp"
#include "sso/mask.hpp"

using namespace sso;
using std::numbers::pi;

namespace {

GridPtr<double> line(double length, int n) {
  Geometry g;
  g.dimension = 1;
  g.extent = Point(length, 0);
  return build_grid(g, {n, 1});
}

// Nodes strictly inside the open interval (a, b).
Mask interval(const Grid& g, double a, double b) {
  Mask m(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const double x = g.position(i)[0];
    m[i] = x > a + 1e-12 && x < b - 1e-12;
  }
  return m;
}

double discrete_sine_value(double h, int m) {
  const double s = std::sin(pi * m * h / 2);
  return 4 / (h * h) * s * s;
}

Mask random_blob(const Grid& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.3, 0.7), r(0.15, 0.3);
  const Point c(u(rng), u(rng));
  const double rad = r(rng);
  Mask m(g.size());
  for (Index i = 0; i < g.size(); ++i) m[i] = g.inside()[i] && (g.position(i) - c).norm() < rad;
  return largest_component(g, m);
}

}  // namespace

TEST_SUITE("eigensolver") {
  TEST_CASE("unit square matches the discrete sine spectrum") {
    Geometry box;
    auto g = build_grid(box, {65, 65});
    const double h = g->h();
    const auto res = smallest_eigenpairs(g, g->inside(), 3);
    const double l1 = 2 * discrete_sine_value(h, 1);
    const double l2 = discrete_sine_value(h, 1) + discrete_sine_value(h, 2);
    CHECK(l1 == doctest::Approx(19.7352).epsilon(1e-5));
    CHECK(res.eigenvalues[0] == doctest::Approx(l1).epsilon(1e-9));
    CHECK(res.eigenvalues[1] == doctest::Approx(l2).epsilon(1e-9));
    CHECK(res.eigenvalues[2] == doctest::Approx(l2).epsilon(1e-9));  // (1,2) and (2,1)
    CHECK(std::abs(res.eigenvalues[1] - 5 * pi * pi) / (5 * pi * pi) < 5e-3);
    CHECK(std::abs(res.eigenvalues[0] - 2 * pi * pi) / (2 * pi * pi) < 5e-3);
    CHECK(res.max_residual <= 1e-8);
  }

  TEST_CASE("eigenpair invariants") {
    Geometry box;
    box.extent = Point(2, 1);
    auto g = build_grid(box, {65, 33});
    std::mt19937 rng(5);
    const auto res = smallest_eigenpairs(g, g->inside(), 4);
    for (std::size_t a = 0; a < res.eigenfunctions.size(); ++a) {
      CHECK(std::abs(l2_norm(res.eigenfunctions[a]) - 1) <= 1e-10);
      CHECK(std::abs(dirichlet_energy(res.eigenfunctions[a]) - res.eigenvalues[a]) <= 1e-7 * res.eigenvalues[a]);
      if (a > 0) CHECK(res.eigenvalues[a] >= res.eigenvalues[a - 1]);
      for (std::size_t b = 0; b < a; ++b) CHECK(std::abs(l2_inner(res.eigenfunctions[a], res.eigenfunctions[b])) <= 1e-8);
    }
    // First eigenfunction has one sign.
    CHECK((res.eigenfunctions[0].values().array() >= -1e-12).all());
  }

  TEST_CASE("1D interval") {
    auto g = line(1, 257);
    const auto res = smallest_eigenpairs(g, g->inside(), 2);
    CHECK(std::abs(res.eigenvalues[0] - pi * pi) / (pi * pi) < 1e-4);
    CHECK(res.eigenvalues[1] == doctest::Approx(discrete_sine_value(g->h(), 2)).epsilon(1e-9));
  }

  TEST_CASE("disjoint intervals share the eigenvalue, one eigenfunction each") {
    auto g = line(4, 1025);
    const Mask left = interval(*g, 0.5, 1.5), right = interval(*g, 2.5, 3.5);
    const auto res = smallest_eigenpairs(g, Mask(left || right), 2);
    CHECK(std::abs(res.eigenvalues[0] - pi * pi) / (pi * pi) < 1e-3);
    CHECK(res.eigenvalues[1] == doctest::Approx(res.eigenvalues[0]).epsilon(1e-10));
    auto on = [](const Field& f, const Mask& m) { return (f.values().array().abs() > 0 && m).count(); };
    const Field& u0 = res.eigenfunctions[0];
    const Field& u1 = res.eigenfunctions[1];
    CHECK(((on(u0, left) == 0) != (on(u0, right) == 0)));
    CHECK(((on(u1, left) == 0) != (on(u1, right) == 0)));
    CHECK((on(u0, left) == 0) != (on(u1, left) == 0));
  }

  TEST_CASE("two components: merged spectrum equals per-component solves") {
    auto g = line(3, 769);
    const Mask a = interval(*g, 0.2, 1.0), b = interval(*g, 1.5, 2.9);
    const auto ra = smallest_eigenpairs(g, a, 2), rb = smallest_eigenpairs(g, b, 2);
    std::vector<double> merged = {ra.eigenvalues[0], ra.eigenvalues[1], rb.eigenvalues[0], rb.eigenvalues[1]};
    std::sort(merged.begin(), merged.end());
    const auto r = smallest_eigenpairs(g, Mask(a || b), 2);
    CHECK(r.eigenvalues[0] == doctest::Approx(merged[0]).epsilon(1e-10));
    CHECK(r.eigenvalues[1] == doctest::Approx(merged[1]).epsilon(1e-10));
  }

  TEST_CASE("domain monotonicity on nested random masks") {
    Geometry box;
    auto g = build_grid(box, {41, 41});
    std::mt19937 rng(17);
    for (int trial = 0; trial < 6; ++trial) {
      const Mask big = random_blob(*g, rng);
      Mask small = big;
      std::bernoulli_distribution drop(0.1);
      for (Index i = 0; i < g->size(); ++i)
        if (small[i] && drop(rng)) small[i] = false;
      const double lb = smallest_eigenpairs(g, big, 1).eigenvalues[0];
      const double ls = smallest_eigenpairs(g, small, 1).eigenvalues[0];
      CHECK(ls >= lb * (1 - 1e-10));
    }
  }

  TEST_CASE("rayleigh_quotient") {
    auto g = line(1, 257);
    const Field s = Field::sample(g, [](const Point& x) { return std::sin(pi * x[0]); });
    CHECK(std::abs(rayleigh_quotient(s) - pi * pi) / (pi * pi) < 1e-4);
    CHECK(std::isinf(rayleigh_quotient(Field(g))));
    CHECK_THROWS_AS(rayleigh_quotient(-1.0 * s), InvalidArgument);
    for (double alpha : {1e-3, 0.7, 42.0})
      CHECK(rayleigh_quotient(alpha * s) == doctest::Approx(rayleigh_quotient(s)).epsilon(1e-13));

    Geometry box;
    auto g2 = build_grid(box, {41, 41});
    std::mt19937 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
      const Mask m = random_blob(*g2, rng);
      const auto res = smallest_eigenpairs(g2, m, 1);
      CHECK(rayleigh_quotient(res.eigenfunctions[0]) == doctest::Approx(res.eigenvalues[0]).epsilon(1e-9));
      // Any nonnegative field on the mask lies above lambda_1.
      std::uniform_real_distribution<double> u(0, 1);
      Field::Vector v = Field::Vector::Zero(g2->size());
      for (Index i = 0; i < g2->size(); ++i)
        if (m[i]) v[i] = u(rng);
      CHECK(rayleigh_quotient(Field(g2, v)) >= res.eigenvalues[0]);
    }
  }

  TEST_CASE("errors") {
    Geometry box;
    auto g = build_grid(box, {17, 17});
    CHECK_THROWS_AS(smallest_eigenpairs(g, Mask(Mask::Constant(g->size(), false)), 1), EmptyDomainError);
    CHECK_THROWS_AS(smallest_eigenpairs(g, Mask(Mask::Constant(g->size(), true)), 1), InvalidArgument);
    CHECK_THROWS_AS(smallest_eigenpairs(g, g->inside(), 0), InvalidArgument);
    EigenOptions tight;
    tight.max_iterations = 1;
    try {
      auto big = build_grid(box, {65, 65});
      (void)smallest_eigenpairs(big, big->inside(), 2, 1e-14, {}, tight);
      FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
      CHECK(e.last_residual() > 0);
    }
  }

  TEST_CASE("warm start reproduces the same pairs") {
    Geometry box;
    auto g = build_grid(box, {49, 49});
    const auto cold = smallest_eigenpairs(g, g->inside(), 2);
    std::vector<Eigen::VectorXd> warm = {cold.eigenfunctions[0].values(), cold.eigenfunctions[1].values()};
    const auto hot = smallest_eigenpairs(g, g->inside(), 2, 1e-8, warm);
    CHECK(hot.eigenvalues[0] == doctest::Approx(cold.eigenvalues[0]).epsilon(1e-10));
    CHECK(hot.eigenvalues[1] == doctest::Approx(cold.eigenvalues[1]).epsilon(1e-10));
    CHECK(hot.iterations <= cold.iterations);
  }
}
