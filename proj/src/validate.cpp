#include "sso/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <random>

#include "sso/eigensolver.hpp"
#include "sso/functional.hpp"
#include "sso/mask.hpp"
#include "sso/variation.hpp"

namespace sso {

namespace {

using std::numbers::pi;
constexpr double kJ01 = 2.404825557695773;

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

GridPtr<double> box(double w, double h, int per_unit) {
  Geometry g;
  g.extent = Point(w, h);
  return build_grid(g, {int(std::lround(w * per_unit)) + 1, int(std::lround(h * per_unit)) + 1});
}

GridPtr<double> line(double length, int nodes) {
  Geometry g;
  g.dimension = 1;
  g.extent = Point(length, 0);
  return build_grid(g, {nodes, 1});
}

GridPtr<double> centered_square(int nodes) {
  Geometry g;
  g.extent = Point(2, 2);
  g.origin = Point(-1, -1);
  return build_grid(g, {nodes, nodes});
}

// Smooth step: 1 for s <= a, 0 for s >= b.
double cutoff(double s, double a, double b) {
  if (s <= a) return 1;
  if (s >= b) return 0;
  const double t = (s - a) / (b - a);
  const double f0 = std::exp(-1 / (1 - t)), f1 = std::exp(-1 / t);
  return f0 / (f0 + f1);
}

SolvedCase timed_solve(std::string label, const SolverConfig& c, const GridPtr<double>& grid) {
  const auto t0 = std::chrono::steady_clock::now();
  PhaseState s = solve(c, grid);
  return {std::move(label), std::move(s), seconds_since(t0)};
}

Field two_plane(const GridPtr<double>& grid, double bp, double bm, const Point& nu) {
  return Field::sample(grid, [&](const Point& x) {
    const double t = x.dot(nu);
    return t > 0 ? bp * t : bm * t;
  });
}

}  // namespace

SolvedCase onedim_case(Backend backend) {
  SolverConfig c;
  c.backend = backend;
  return timed_solve(backend == Backend::multiphase ? "1D multiphase" : "1D relaxed", c, line(6, 601));
}

SolvedCase twodim_case() { return timed_solve("2D two-disk", SolverConfig{}, box(6, 3, 32)); }

SolvedCase contact_case(int nodes_per_unit) {
  SolverConfig c;
  c.lambda = 8;
  c.radius = 0.3;
  return timed_solve(fmt("contact h=1/%d", nodes_per_unit), c, box(2, 1, nodes_per_unit));
}

Check square_eigen_check() {
  const auto t0 = std::chrono::steady_clock::now();
  auto grid = box(1, 1, 64);
  const auto eig = smallest_eigenpairs(grid, grid->inside(), 2);
  const double t = seconds_since(t0), h = grid->h();
  const double l1 = eig.eigenvalues[0], l2 = eig.eigenvalues[1];
  const auto s2 = [&](int m) { return std::pow(std::sin(pi * m * h / 2), 2); };
  const double d1 = 4 / (h * h) * 2 * s2(1), d2 = 4 / (h * h) * (s2(1) + s2(2));
  Check c{"unit square eigenvalues, h = 1/64", false, {}};
  c.pass = rel(l1, 2 * pi * pi) <= 5e-3 && rel(l2, 5 * pi * pi) <= 5e-3 && rel(l1, d1) <= 1e-8 && rel(l2, d2) <= 1e-8 &&
           t < 10;
  c.detail = fmt("l1 %.6f (2pi^2 %.4f, discrete %.6f)  l2 %.6f (5pi^2 %.4f, discrete %.6f)  %.2fs", l1, 2 * pi * pi, d1,
                 l2, 5 * pi * pi, d2, t);
  return c;
}

Check interval_eigen_check() {
  auto grid = line(1, 257);
  const auto eig = smallest_eigenpairs(grid, grid->inside(), 3);
  const double h = grid->h();
  double worst = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = 4 / (h * h) * std::pow(std::sin((k + 1) * pi * h / 2), 2);
    worst = std::max(worst, rel(eig.eigenvalues[k], exact));
  }
  return {"unit interval eigenvalues, h = 1/256", worst <= 1e-8, fmt("max relative error %.2e", worst)};
}

Check onedim_check(const SolvedCase& c) {
  const PhaseState& s = c.state;
  const double ell = std::cbrt(pi * pi), h = s.grid().h();
  const double lp = double(s.mask_plus.count()) * h, lm = double(s.mask_minus.count()) * h;
  const int comps = count_components(s.grid(), s.mask_plus) + count_components(s.grid(), s.mask_minus);
  Check out{c.label + " optimum", false, {}};
  out.pass = s.converged && comps == 2 && rel(lp, ell) <= 0.03 && rel(lm, ell) <= 0.03 &&
             rel(s.objective, 3 * ell) <= 0.02 && c.seconds < 60;
  out.detail = fmt("lengths %.4f %.4f (%.5f)  F %.5f (%.5f)  converged %d  %.2fs", lp, lm, ell, s.objective, 3 * ell,
                   int(s.converged), c.seconds);
  return out;
}

Check twodim_check(const SolvedCase& c) {
  const PhaseState& s = c.state;
  const Grid& g = s.grid();
  const double r = std::pow(kJ01 * kJ01 / (2 * pi * s.lambda), 0.25);
  const double f = 2 * kJ01 * kJ01 / (r * r);
  const int np = count_components(g, s.mask_plus), nm = count_components(g, s.mask_minus);
  const double cp = contour_metrics(g, s.mask_plus).circularity(), cm = contour_metrics(g, s.mask_minus).circularity();
  Check out{c.label + " optimum", false, {}};
  out.pass = s.converged && np == 1 && nm == 1 && rel(s.objective, f) <= 0.05 && cp >= 0.9 && cm >= 0.9 &&
             c.seconds < 1800;
  out.detail = fmt("F %.4f (%.4f, %.2f%%)  components %d+%d  circularity %.3f %.3f  converged %d  %.1fs", s.objective,
                   f, 100 * rel(s.objective, f), np, nm, cp, cm, int(s.converged), c.seconds);
  return out;
}

Check identity_check(const SolvedCase& c, const DiagnosticsReport& r) {
  const PhaseState& s = c.state;
  const Mask rp = inner_boundary(s.grid(), s.mask_plus), rm = inner_boundary(s.grid(), s.mask_minus);
  const Index available = std::min<Index>(25, rp.count()) + std::min<Index>(25, rm.count());
  Check out{c.label + " identities", false, {}};
  out.pass = r.energy_balance_residual <= 0.02 && r.eigen_match_residual <= 0.02 && r.removal_violations == 0 &&
             r.removal_checks == std::min<Index>(50, available);
  out.detail = fmt("energy %.2e  eigen %.2e  removal %d/%d violations (min change %.3e)", r.energy_balance_residual,
                   r.eigen_match_residual, r.removal_violations, r.removal_checks, r.min_removal_change);
  return out;
}

Check contact_distance_check(const SolvedCase& c, const DiagnosticsReport& r) {
  const double h = c.state.grid().h();
  Check out{c.label + " contact distance", false, {}};
  out.pass = c.state.converged && r.contact_distance >= 2 * h;
  out.detail = std::isfinite(r.contact_distance) ? fmt("%.4f (2h = %.4f)", r.contact_distance, 2 * h)
                                                 : std::string("phases never meet");
  return out;
}

Check variation_check() {
  auto g = centered_square(257);
  const Field raw = Field::sample(g, [](const Point& x) {
    const double r = (x - Point(0.1, -0.05)).norm();
    return cutoff(r, 0.0, 0.75) * (1 + 0.3 * x[0] + 0.2 * x[1] * x[1]);
  });
  const Field u = (1 / l2_norm(raw)) * raw;
  const double lam = rayleigh_quotient(u);
  std::mt19937 rng(99);
  std::normal_distribution<double> n01;
  double worst = 0;
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
    worst = std::max(worst, rel(first_variation_rayleigh(u, lam, xi), rayleigh_variation_fd(u, xi, 1e-4)));
  }

  Geometry big;
  big.extent = Point(3, 3);
  big.origin = Point(-1.5, -1.5);
  auto gb = build_grid(big, {257, 257});
  const Field disk = Field::sample(gb, [](const Point& x) { return x.norm() < 1 ? 1.0 : 0.0; });
  const VectorField dil = VectorField::sample(gb, [](const Point& x) { return Point(x * cutoff(x.norm(), 1.1, 1.35)); });
  const double dv = first_variation_volume(disk, dil);

  Check out{"variation consistency", false, {}};
  out.pass = worst <= 1e-3 && rel(dv, 2 * pi) <= 0.01;
  out.detail = fmt("worst finite-difference mismatch %.2e over 10 fields  disk dilation %.5f (2pi %.5f)", worst, dv, 2 * pi);
  return out;
}

Check functional_check() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> lx(-1, 1), lp(std::log(1.01), std::log(1000.0));
  int bracket_fail = 0;
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double x = std::exp(3 * lx(rng)), y = std::exp(3 * lx(rng)), p = std::exp(lp(rng));
    const double jinf = j_infty(x, y), jp = j_p(x, y, p);
    if (jp < jinf * (1 - 1e-15) || jp > std::pow(2.0, 1 / p) * jinf * (1 + 1e-15)) ++bracket_fail;
  }
  for (int trial = 0; trial < 10000; ++trial) {
    const double x = std::exp(3 * lx(rng)), y = std::exp(3 * lx(rng)), p = std::exp(lp(rng));
    const auto [ap, am] = coefficients_a(x, y, p);
    const double q = p / (p - 1);
    worst = std::max(worst, std::abs(std::pow(ap, q) + std::pow(am, q) - 1));
  }
  Check out{"functional properties", false, {}};
  out.pass = bracket_fail == 0 && worst <= 1e-12;
  out.detail = fmt("J_p bracket failures %d/10000  coefficient identity max error %.2e", bracket_fail, worst);
  return out;
}

Check partition_check(int dimension) {
  GridPtr<double> grid;
  Mask support;
  SolverConfig c;
  c.lambda = 0;
  c.backend = Backend::relaxed;
  if (dimension == 1) {
    grid = line(6, 601);
    support = Mask(grid->size());
    for (Index i = 0; i < grid->size(); ++i) {
      const double x = grid->position(i)[0];
      support[i] = grid->inside()[i] && x > 0.5 + 1e-12 && x < 5.5 - 1e-12;
    }
  } else {
    // A disk with a bar through it.
    grid = box(3, 2, 32);
    support = Mask(grid->size());
    for (Index i = 0; i < grid->size(); ++i) {
      const Point p = grid->position(i);
      const bool in = (p - Point(1.5, 1)).norm() < 0.9 || (std::abs(p[0] - 1.5) < 1.2 && std::abs(p[1] - 1) < 0.4);
      support[i] = grid->inside()[i] && in;
    }
    c.centers = {Point(1.0, 1.0), Point(2.0, 1.0)};
    c.radius = 0.3;
  }
  c.frozen_support = support;
  const PhaseState s = solve(c, grid);
  const double lam2 = smallest_eigenpairs(grid, support, 2).eigenvalues[1];
  const double j = j_infty(s.lambda1_plus, s.lambda1_minus);
  Check out{fmt("partition equivalence %dD", dimension), false, {}};
  out.pass = count_components(*grid, support) == 1 && rel(j, lam2) <= 0.01;
  out.detail = fmt("J_inf %.5f  lambda_2 %.5f  (%.3f%%)", j, lam2, 100 * rel(j, lam2));
  return out;
}

Check weiss_homogeneous_check() {
  auto grid = centered_square(129);
  const double h = grid->h();
  std::vector<double> radii;
  for (int k = 0; k < 8; ++k) radii.push_back(4 * h * std::pow(0.9 / (4 * h), k / 7.0));
  double worst_var = 0, worst_c = 0;
  struct Model {
    double bp, bm, ap, theta;
  };
  // a+ bp^2 = a- bm^2 in every model.
  for (const Model& m : {Model{std::sqrt(2.0), std::sqrt(2.0), 0.5, 0.0}, Model{std::sqrt(2.0), std::sqrt(2.0), 0.5, 0.3},
                         Model{std::sqrt(6.0), std::sqrt(3.0), 1.0 / 3, 1.1}}) {
    PhaseState s(grid);
    s.u = two_plane(grid, m.bp, m.bm, Point(std::cos(m.theta), std::sin(m.theta)));
    s.mask_plus = s.u.values().array() > 0;
    s.mask_minus = s.u.values().array() < 0;
    s.a_plus = m.ap;
    s.a_minus = 1 - m.ap;
    s.lambda = 1;
    const WeissCurve w = weiss_scan(s, Point(0, 0), radii);
    const auto [lo, hi] = std::minmax_element(w.values.begin(), w.values.end());
    worst_var = std::max(worst_var, *hi - *lo);
    worst_c = std::max(worst_c, w.slack);
  }
  Check out{"Weiss curve on two-plane fields", false, {}};
  out.pass = worst_var <= 1e-2 && worst_c <= 1e-2;
  out.detail = fmt("max variation %.2e  max C %.2e", worst_var, worst_c);
  return out;
}

Check weiss_contact_check(const SolvedCase& c, const DiagnosticsReport& r) {
  int curves = 0, bad = 0;
  double max_c = 0;
  for (const WeissCurve& w : r.weiss) {
    ++curves;
    max_c = std::max(max_c, w.slack);
    if (!std::isfinite(w.slack)) ++bad;
    for (std::size_t k = 1; k < w.radii.size(); ++k) {
      const double prev = w.values[k - 1] + w.slack * w.radii[k - 1], cur = w.values[k] + w.slack * w.radii[k];
      if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev))) ++bad;
    }
  }
  Check out{c.label + " Weiss curves", false, {}};
  out.pass = c.state.converged && r.contact_points > 0 && curves > 0 && bad == 0;
  out.detail = fmt("%d curves (%d at contact)  max C %.3f  monotonicity failures %d", curves, r.contact_points, max_c, bad);
  return out;
}

Check blowup_contact_check(const SolvedCase& c, const DiagnosticsReport& r) {
  const PhaseState& s = c.state;
  const double sp = std::sqrt(s.lambda / s.a_plus), sm = std::sqrt(s.lambda / s.a_minus);
  // beta >= 0.9 sqrt(lambda / a) in terms of the reported margins.
  const bool bounds = r.slope_margin_plus >= -0.1 * sp && r.slope_margin_minus >= -0.1 * sm;
  Check out{c.label + " blow-up classification", false, {}};
  out.pass = s.converged && r.contact_points > 0 && r.contact_fit_residual <= 0.1 && r.slope_identity_residual <= 0.1 &&
             bounds;
  out.detail = fmt("%d contact points  fit residual %.3f  identity %.3f  beta/bound >= %.3f, %.3f", r.contact_points,
                   r.contact_fit_residual, r.slope_identity_residual, 1 + r.slope_margin_plus / sp,
                   1 + r.slope_margin_minus / sm);
  return out;
}

Check fit_exactness_check() {
  auto ref = reference_ball_grid(2);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> slope(0, 3);
  std::uniform_int_distribution<int> angle(0, 719);
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const double th = 2 * pi * angle(rng) / 720;
    const TwoPlaneFit f = fit_two_plane(two_plane(ref, slope(rng), slope(rng), Point(std::cos(th), std::sin(th))));
    worst = std::max(worst, f.relative_residual);
  }
  return {"two-plane fit exactness", worst <= 1e-6, fmt("max residual %.2e over 50 models", worst)};
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"eigen", "onedim", "twodim", "properties"};
  return names;
}

std::vector<Check> run_suite(const std::string& name) {
  std::vector<Check> out;
  if (name == "eigen") {
    out.push_back(square_eigen_check());
    out.push_back(interval_eigen_check());
  } else if (name == "onedim") {
    for (Backend b : {Backend::multiphase, Backend::relaxed}) {
      const SolvedCase c = onedim_case(b);
      const DiagnosticsReport r = identity_suite(c.state);
      out.push_back(onedim_check(c));
      out.push_back(identity_check(c, r));
      out.push_back(contact_distance_check(c, r));
    }
  } else if (name == "twodim") {
    const SolvedCase c = twodim_case();
    const DiagnosticsReport r = identity_suite(c.state);
    out.push_back(twodim_check(c));
    out.push_back(identity_check(c, r));
    out.push_back(contact_distance_check(c, r));
  } else if (name == "properties") {
    out.push_back(functional_check());
    out.push_back(variation_check());
    out.push_back(partition_check(1));
    out.push_back(weiss_homogeneous_check());
    out.push_back(fit_exactness_check());
  } else {
    std::string known;
    for (const auto& n : suite_names()) known += (known.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown suite '" + name + "' (known suites: " + known + ")");
  }
  return out;
}

}  // namespace sso
