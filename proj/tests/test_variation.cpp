#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "sso/eigensolver.hpp"
#include "sso/variation.hpp"

using namespace sso;
using std::numbers::pi;

namespace {

GridPtr<double> centered_square(int n, double half = 1.0) {
  Geometry g;
  g.extent = Point(2 * half, 2 * half);
  g.origin = Point(-half, -half);
  return build_grid(g, {n, n});
}

// Smooth step: 1 for s <= a, 0 for s >= b.
double cutoff(double s, double a, double b) {
  if (s <= a) return 1;
  if (s >= b) return 0;
  const double t = (s - a) / (b - a);
  const double f0 = std::exp(-1 / (1 - t)), f1 = std::exp(-1 / t);
  return f0 / (f0 + f1);
}

Field unit(const Field& f) { return (1 / l2_norm(f)) * f; }

}  // namespace

TEST_SUITE("variation") {
  TEST_CASE("zero field gives zero variations") {
    auto g = centered_square(33);
    const Field u = unit(Field::sample(g, [](const Point& x) { return std::cos(pi * x[0] / 2) * std::cos(pi * x[1] / 2); }));
    const auto zero = VectorField::zero(g);
    CHECK(first_variation_rayleigh(u, rayleigh_quotient(u), zero) == 0);
    CHECK(first_variation_volume(u, zero) == 0);
    CHECK_THROWS_AS(first_variation_rayleigh(2.0 * u, 1.0, zero), InvalidArgument);
  }

  TEST_CASE("translation leaves a disk eigenvalue stationary") {
    auto g = centered_square(97);
    Mask disk(g->size());
    for (Index i = 0; i < g->size(); ++i) disk[i] = g->inside()[i] && g->position(i).norm() < 0.5;
    const auto eig = smallest_eigenpairs(g, disk, 1);
    const VectorField xi =
        VectorField::sample(g, [](const Point& x) { return Point(1.0, 0.5) * cutoff(x.norm(), 0.7, 0.9); });
    CHECK(std::abs(first_variation_rayleigh(eig.eigenfunctions[0], eig.eigenvalues[0], xi)) <= 1e-4);
  }

  TEST_CASE("dilation of an interval: dR = -2 lambda") {
    Geometry line;
    line.dimension = 1;
    line.extent = Point(3, 0);
    auto g = build_grid(line, {601, 1});
    Mask m(g->size());
    for (Index i = 0; i < g->size(); ++i) m[i] = std::abs(g->position(i)[0] - 1.2) < 0.5 - 1e-9;
    const auto eig = smallest_eigenpairs(g, m, 1);
    const VectorField xi = VectorField::sample(g, [](const Point& x) {
      return Point((x[0] - 1.2) * cutoff(std::abs(x[0] - 1.2), 0.6, 0.9), 0);
    });
    const double lam = eig.eigenvalues[0];
    CHECK(first_variation_rayleigh(eig.eigenfunctions[0], lam, xi) == doctest::Approx(-2 * lam).epsilon(1e-2));
    // dVol of a dilation: |Omega| * d.
    CHECK(mask_volume_variation(*g, m, xi) == doctest::Approx(1.0).epsilon(1e-2));
  }

  TEST_CASE("first_variation_volume") {
    auto g = centered_square(257, 1.5);
    const Field disk = Field::sample(g, [](const Point& x) { return x.norm() < 1 ? 1.0 : 0.0; });
    const VectorField dil = VectorField::sample(g, [](const Point& x) { return Point(x * cutoff(x.norm(), 1.1, 1.35)); });
    CHECK(std::abs(first_variation_volume(disk, dil) - 2 * pi) / (2 * pi) < 1e-2);
    const VectorField rot =
        VectorField::sample(g, [](const Point& x) { return Point(Point(-x[1], x[0]) * cutoff(x.norm(), 0.5, 1.3)); });
    CHECK(std::abs(first_variation_volume(disk, rot)) < 1e-3);
  }

  TEST_CASE("finite-difference consistency on random smooth fields") {
    auto g = centered_square(257);
    const Field u = unit(Field::sample(g, [](const Point& x) {
      const double r = (x - Point(0.1, -0.05)).norm();
      return cutoff(r, 0.0, 0.75) * (1 + 0.3 * x[0] + 0.2 * x[1] * x[1]);
    }));
    const double lam = rayleigh_quotient(u);
    std::mt19937 rng(99);
    std::normal_distribution<double> n01;
    int passed = 0;
    for (int trial = 0; trial < 10; ++trial) {
      double c[2][3][3];
      for (auto& comp : c)
        for (auto& row : comp)
          for (double& v : row) v = n01(rng);
      const VectorField xi = VectorField::sample(g, [&](const Point& x) {
        Point out(0, 0);
        for (int a = 0; a < 2; ++a)
          for (int kx = 0; kx < 3; ++kx)
            for (int ky = 0; ky < 3; ++ky)
              out[a] += c[a][kx][ky] * std::cos(kx * pi * x[0] / 2 + 0.3 * a) * std::cos(ky * pi * x[1] / 2 + 0.7 * a);
        return Point(out * cutoff(x.norm(), 0.8, 0.95));
      });
      const double exact = first_variation_rayleigh(u, lam, xi);
      const double fd = rayleigh_variation_fd(u, xi, 1e-4);
      const double rel = std::abs(exact - fd) / std::abs(fd);
      CAPTURE(rel);
      CHECK(rel <= 1e-3);
      passed += rel <= 1e-3;
    }
    CHECK(passed == 10);
  }

  TEST_CASE("stationarity residual is linear in xi") {
    Geometry box;
    box.extent = Point(2, 1);
    auto g = build_grid(box, {65, 33});
    PhaseState s(g);
    for (Index i = 0; i < g->size(); ++i) {
      const Point p = g->position(i);
      s.mask_plus[i] = g->inside()[i] && (p - Point(0.5, 0.5)).norm() < 0.4;
      s.mask_minus[i] = g->inside()[i] && (p - Point(1.45, 0.5)).norm() < 0.35;
    }
    const auto ep = smallest_eigenpairs(g, s.mask_plus, 1), em = smallest_eigenpairs(g, s.mask_minus, 1);
    s.u = ep.eigenfunctions[0] - em.eigenfunctions[0];
    s.lambda1_plus = ep.eigenvalues[0];
    s.lambda1_minus = em.eigenvalues[0];
    s.a_plus = 0.4;
    s.a_minus = 0.6;
    s.lambda = 3;
    const VectorField x1 = VectorField::sample(g, [](const Point& x) { return Point(std::sin(x[0]), x[1] * x[0]); });
    const VectorField x2 = VectorField::sample(g, [](const Point& x) { return Point(x[1], -std::cos(3 * x[0])); });
    const auto r1 = stationarity_residual(s, x1), r2 = stationarity_residual(s, x2), r12 = stationarity_residual(s, x1 + x2);
    CHECK(r12.combined_residual == doctest::Approx(r1.combined_residual + r2.combined_residual).epsilon(1e-10).scale(1));
    CHECK(r1.combined_residual ==
          doctest::Approx(0.4 * r1.rayleigh_variation_plus + 0.6 * r1.rayleigh_variation_minus +
                          3 * (r1.volume_variation_plus + r1.volume_variation_minus)));
    const auto r0 = stationarity_residual(s, VectorField::zero(g));
    CHECK(r0.combined_residual == 0);
    CHECK(r0.rayleigh_variation_plus == 0);
    s.a_minus = 0.7;
    CHECK_THROWS_AS(stationarity_residual(s, x1), InvalidArgument);
  }
}
