#include "sso/diagnostics.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "sso/eigensolver.hpp"
#include "sso/functional.hpp"
#include "sso/mask.hpp"

namespace sso {

namespace {

constexpr double kRho = 64.0 / 62.0;
constexpr int kBoundarySamples = 256;
constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_d(const Grid& g, const Point& p) { return g.dimension() == 1 ? std::abs(p[0]) : p.norm(); }

// Least-squares affine fit through the nodes of one sign in the index box
// [lo, hi]; coordinates are in cells relative to `base`. Empty when the nodes
// do not determine a plane (a line in 1D).
std::optional<Eigen::Vector3d> phase_plane(const Field& u, int sign, const int lo[2], const int hi[2], const int base[2]) {
  const auto& g = u.grid();
  const int cols = g.dimension() == 1 ? 2 : 3;
  Eigen::MatrixXd a(16, cols);
  Eigen::VectorXd b(16);
  int n = 0;
  for (int iy = lo[1]; iy <= hi[1]; ++iy)
    for (int ix = lo[0]; ix <= hi[0]; ++ix) {
      const double v = u[g.index(ix, iy)];
      if (sign * v <= 0) continue;
      a(n, 0) = 1;
      a(n, 1) = ix - base[0];
      if (cols == 3) a(n, 2) = iy - base[1];
      b[n++] = v;
    }
  if (n < cols) return std::nullopt;
  const auto qr = a.topRows(n).colPivHouseholderQr();
  if (qr.rank() < cols) return std::nullopt;
  const Eigen::VectorXd c = qr.solve(b.head(n));
  return Eigen::Vector3d(c[0], c[1], cols == 3 ? c[2] : 0.0);
}

// Bilinear interpolation, except in cells whose corners are not all of one
// strict sign. A phase boundary crosses such a cell, so each phase is
// extended by its affine fit over the surrounding 4x4 nodes and x takes the
// value of the phase whose extension claims it. Kinks across the zero set are
// then reproduced exactly instead of being smeared over a cell.
double interpolate_phases(const Field& u, const Point& x) {
  const auto& g = u.grid();
  const bool two = g.dimension() == 2;
  const double sx = (x[0] - g.origin()[0]) / g.h(), sy = two ? (x[1] - g.origin()[1]) / g.h() : 0.0;
  if (!(sx >= 0 && sx <= g.nx() - 1) || !(sy >= 0 && sy <= g.ny() - 1)) return 0;
  const int base[2] = {std::min(int(std::floor(sx)), g.nx() - 2), two ? std::min(int(std::floor(sy)), g.ny() - 2) : 0};
  int pos = 0, neg = 0, corners = 0;
  for (int dy = 0; dy <= (two ? 1 : 0); ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double v = u[g.index(base[0] + dx, base[1] + dy)];
      pos += v > 0;
      neg += v < 0;
      ++corners;
    }
  if (pos == corners || neg == corners) return interpolate(u, x);
  const int lo[2] = {std::max(base[0] - 1, 0), two ? std::max(base[1] - 1, 0) : 0};
  const int hi[2] = {std::min(base[0] + 2, g.nx() - 1), two ? std::min(base[1] + 2, g.ny() - 1) : 0};
  const Eigen::Vector3d q(1, sx - base[0], sy - base[1]);
  std::optional<double> p, m;
  if (pos > 0) {
    const auto c = phase_plane(u, 1, lo, hi, base);
    if (!c) return interpolate(u, x);
    p = c->dot(q);
  }
  if (neg > 0) {
    const auto c = phase_plane(u, -1, lo, hi, base);
    if (!c) return interpolate(u, x);
    m = c->dot(q);
  }
  const bool claim_p = p && *p > 0, claim_m = m && *m < 0;
  if (claim_p && claim_m) return interpolate(u, x);
  if (claim_p) return *p;
  if (claim_m) return *m;
  return 0;
}

Field resample(const Field& u, const Point& x0, double r) {
  const GridPtr<double> ref = reference_ball_grid(u.grid().dimension());
  return Field::sample(ref, [&](const Point& x) { return interpolate_phases(u, Point(x0 + r * x)) / r; });
}

// Calls f(i, j, midpoint) for every lattice link.
template <typename F>
void for_each_link(const Grid& g, F&& f) {
  const double h = g.h();
  for (int iy = 0; iy < g.ny(); ++iy)
    for (int ix = 0; ix + 1 < g.nx(); ++ix) {
      const Index i = g.index(ix, iy);
      f(i, i + 1, Point(g.position(i) + Point(h / 2, 0)));
    }
  if (g.dimension() == 2)
    for (int iy = 0; iy + 1 < g.ny(); ++iy)
      for (int ix = 0; ix < g.nx(); ++ix) {
        const Index i = g.index(ix, iy);
        f(i, i + g.nx(), Point(g.position(i) + Point(0, h / 2)));
      }
}

// int_{B_r(x0)} |grad u|^2 |x - x0|^(2-d) by the link-midpoint rule.
double weighted_energy(const Field& u, const Point& x0, double r) {
  const Grid& g = u.grid();
  const double scale = g.cell_volume() / (g.h() * g.h());
  double sum = 0;
  for_each_link(g, [&](Index i, Index j, const Point& m) {
    const double dist = norm_d(g, m - x0);
    if (dist >= r) return;
    const double d = u[j] - u[i];
    sum += d * d * (g.dimension() == 1 ? dist : 1.0);
  });
  return sum * scale;
}

void require_disjoint(const std::vector<const Field*>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i)
    for (std::size_t j = i + 1; j < fields.size(); ++j) {
      const Field a(fields[i]->grid_ptr(), fields[i]->values().cwiseAbs());
      const Field b(fields[j]->grid_ptr(), fields[j]->values().cwiseAbs());
      if (l2_inner(a, b) > 1e-10) throw InvalidArgument("phase supports overlap");
    }
}

double phase_product(const std::vector<const Field*>& fields, const Point& x0, double r, double eps_exp) {
  require_disjoint(fields);
  const Grid& g = fields.front()->grid();
  if (!g.contains_ball(x0, r)) throw InvalidArgument("ball leaves the domain");
  double prod = 1;
  for (const Field* f : fields) prod *= weighted_energy(*f, x0, r) / std::pow(r, 2 + eps_exp);
  return prod;
}

double distance_to_outside(const Grid& g, const Point& p) {
  double best = kInf;
  for (Index i = 0; i < g.size(); ++i)
    if (!g.inside()[i]) best = std::min(best, norm_d(g, g.position(i) - p));
  return best;
}

}  // namespace

GridPtr<double> reference_ball_grid(int dimension) {
  Geometry geo;
  geo.dimension = dimension;
  geo.origin = Point(-kRho, -kRho);
  geo.extent = Point(2 * kRho, 2 * kRho);
  return build_grid(geo, {kReferenceNodes, kReferenceNodes});
}

Field blow_up(const Field& u, const Point& x0, double r) {
  const Grid& g = u.grid();
  if (!(r >= 8 * g.h() * (1 - 1e-12))) throw InvalidArgument("blow-up radius must be at least 8h");
  if (!g.contains_ball(x0, r)) throw InvalidArgument("blow-up ball leaves the domain");
  return resample(u, x0, r);
}

double weiss_energy(const Field& ref, double a_plus, double a_minus, double lambda) {
  if (std::abs(a_plus + a_minus - 1) > 1e-6) throw InvalidArgument("a+ + a- must equal 1");
  const Grid& g = ref.grid();
  const double scale = g.cell_volume() / (g.h() * g.h());
  double bulk = 0;
  for_each_link(g, [&](Index i, Index j, const Point& m) {
    if (norm_d(g, m) >= 1) return;
    const double d = ref[j] - ref[i];
    if (ref[i] * ref[j] < 0) {
      // Split the link at the zero of the linear interpolant; each phase
      // keeps the full slope over its share.
      const double t = ref[i] / (ref[i] - ref[j]);
      const double ai = ref[i] > 0 ? a_plus : a_minus, aj = ref[j] > 0 ? a_plus : a_minus;
      bulk += d * d * (ai * t + aj * (1 - t));
    } else {
      bulk += (ref[i] > 0 || ref[j] > 0 ? a_plus : a_minus) * d * d;
    }
  });
  bulk *= scale;

  auto trace = [&](double v) { return a_plus * std::pow(std::max(v, 0.0), 2) + a_minus * std::pow(std::max(-v, 0.0), 2); };
  double boundary = 0;
  if (g.dimension() == 1) {
    boundary = trace(interpolate_phases(ref, Point(-1, 0))) + trace(interpolate_phases(ref, Point(1, 0)));
  } else {
    for (int k = 0; k < kBoundarySamples; ++k) {
      const double t = 2 * std::numbers::pi * k / kBoundarySamples;
      boundary += trace(interpolate_phases(ref, Point(std::cos(t), std::sin(t))));
    }
    boundary *= 2 * std::numbers::pi / kBoundarySamples;
  }

  // A zero node on the edge of the support counts half for each phase next
  // to it: the zero level passes through the node.
  double count = 0;
  for (Index i = 0; i < g.size(); ++i) {
    if (!g.inside()[i] || norm_d(g, g.position(i)) >= 1) continue;
    if (ref[i] != 0) {
      count += 1;
      continue;
    }
    bool pos = false, neg = false;
    g.for_each_neighbor(i, [&](Index j) {
      pos = pos || ref[j] > 0;
      neg = neg || ref[j] < 0;
    });
    count += 0.5 * (int(pos) + int(neg));
  }
  return bulk - boundary + lambda * count * g.cell_volume();
}

double weiss_slack(const std::vector<double>& radii, const std::vector<double>& values) {
  if (radii.size() != values.size()) throw InvalidArgument("radii and values differ in length");
  double c = 0;
  for (std::size_t i = 0; i < radii.size(); ++i)
    for (std::size_t j = i + 1; j < radii.size(); ++j)
      if (radii[j] > radii[i]) c = std::max(c, (values[i] - values[j]) / (radii[j] - radii[i]));
  return c;
}

WeissCurve weiss_scan(const PhaseState& s, const Point& x0, const std::vector<double>& radii) {
  const Grid& g = s.grid();
  if (radii.empty()) throw InvalidArgument("radius list must not be empty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] >= 4 * g.h() * (1 - 1e-12))) throw InvalidArgument("Weiss radii must be at least 4h");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw InvalidArgument("Weiss radii must be ascending");
    if (!g.contains_ball(x0, radii[i])) throw InvalidArgument("Weiss ball leaves the domain");
  }
  WeissCurve c;
  c.center = x0;
  c.radii = radii;
  for (double r : radii) c.values.push_back(weiss_energy(resample(s.u, x0, r), s.a_plus, s.a_minus, s.lambda));
  c.slack = weiss_slack(c.radii, c.values);
  return c;
}

TwoPlaneFit fit_two_plane(const Field& ref) {
  const Grid& g = ref.grid();
  std::vector<Point> x;
  std::vector<double> u;
  double norm2 = 0;
  for (Index i = 0; i < g.size(); ++i) {
    if (!g.inside()[i] || norm_d(g, g.position(i)) > 1) continue;
    x.push_back(g.position(i));
    u.push_back(ref[i]);
    norm2 += ref[i] * ref[i];
  }
  if (norm2 == 0) throw InvalidArgument("cannot fit an all-zero field");

  // For fixed nu the two slopes decouple into one-sided least squares.
  auto fit_at = [&](const Point& nu) {
    double up = 0, pp = 0, um = 0, mm = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double t = x[k].dot(nu);
      if (t > 0) {
        up += u[k] * t;
        pp += t * t;
      } else if (t < 0) {
        um += u[k] * t;
        mm += t * t;
      }
    }
    TwoPlaneFit f;
    f.nu = nu;
    f.beta_plus = pp > 0 ? std::max(0.0, up / pp) : 0;
    f.beta_minus = mm > 0 ? std::max(0.0, um / mm) : 0;
    double res = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double t = x[k].dot(nu);
      const double model = t > 0 ? f.beta_plus * t : f.beta_minus * t;
      res += (u[k] - model) * (u[k] - model);
    }
    f.relative_residual = std::sqrt(res / norm2);
    return f;
  };

  if (g.dimension() == 1) {
    const TwoPlaneFit a = fit_at(Point(1, 0)), b = fit_at(Point(-1, 0));
    return a.relative_residual <= b.relative_residual ? a : b;
  }
  auto at_angle = [&](double t) { return fit_at(Point(std::cos(t), std::sin(t))); };
  constexpr int kAngles = 720;
  const double step = 2 * std::numbers::pi / kAngles;
  int best = 0;
  double best_res = kInf;
  for (int k = 0; k < kAngles; ++k) {
    const double r = at_angle(k * step).relative_residual;
    if (r < best_res) {
      best_res = r;
      best = k;
    }
  }
  // Golden-section refinement within one grid step either side.
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double lo = (best - 1) * step, hi = (best + 1) * step;
  double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
  double fc = at_angle(c).relative_residual, fd = at_angle(d).relative_residual;
  while (hi - lo > 1e-10) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = at_angle(c).relative_residual;
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = at_angle(d).relative_residual;
    }
  }
  const TwoPlaneFit refined = at_angle((lo + hi) / 2), grid_best = at_angle(best * step);
  return refined.relative_residual <= grid_best.relative_residual ? refined : grid_best;
}

SlopeIdentity slope_identity_residual(const TwoPlaneFit& fit, double a_plus, double a_minus, double lambda) {
  SlopeIdentity s;
  const double p = a_plus * fit.beta_plus * fit.beta_plus, m = a_minus * fit.beta_minus * fit.beta_minus;
  const double top = std::max(p, m);
  s.identity_residual = top > 0 ? std::abs(p - m) / top : 0;
  s.margin_plus = fit.beta_plus - (a_plus > 0 ? std::sqrt(lambda / a_plus) : kInf);
  s.margin_minus = fit.beta_minus - (a_minus > 0 ? std::sqrt(lambda / a_minus) : kInf);
  return s;
}

double nondegeneracy_eta(const Field& u, const Point& x0, const std::vector<double>& radii) {
  if (radii.empty()) throw InvalidArgument("radius list must not be empty");
  const Field mag(u.grid_ptr(), u.values().cwiseAbs());
  double eta = kInf;
  for (double r : radii) eta = std::min(eta, sphere_average(mag, x0, r) / r);
  return eta;
}

double three_phase_product(const Field& u1, const Field& u2, const Field& u3, const Point& x0, double r,
                           double eps_exp) {
  return phase_product({&u1, &u2, &u3}, x0, r, eps_exp);
}

double two_phase_product(const Field& u1, const Field& u2, const Point& x0, double r, double eps_exp) {
  return phase_product({&u1, &u2}, x0, r, eps_exp);
}

double PotentialPair::ratio() const {
  if (rhs > 0) return lhs / rhs;
  return lhs > 0 ? kInf : 0;
}

PotentialPair potential_estimate_pair(const Field& u, const Point& x0, double r) {
  const Grid& g = u.grid();
  if (!g.contains_ball(x0, r)) throw InvalidArgument("ball leaves the domain");
  Mask ball(g.size());
  for (Index i = 0; i < g.size(); ++i) ball[i] = g.inside()[i] && norm_d(g, g.position(i) - x0) < r;
  PotentialPair out;
  if (ball.count() == 0) return out;

  const double scale = u.values().cwiseAbs().maxCoeff();
  Index zeros = 0;
  for (Index i = 0; i < g.size(); ++i)
    if (ball[i] && std::abs(u[i]) <= 1e-14 * scale) ++zeros;
  const double mean = sphere_average(u, x0, r);
  out.lhs = double(zeros) * g.cell_volume() * mean * mean / (r * r);

  // Harmonic extension of the values just outside the ball.
  const auto idx = detail::index_mask(ball);
  const Index n = Index(idx.nodes.size());
  const double inv_h2 = 1 / (g.h() * g.h());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (Index k = 0; k < n; ++k)
    g.for_each_neighbor(idx.nodes[k], [&](Index j) {
      if (!ball[j]) rhs[k] += u[j] * inv_h2;
    });
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(masked_laplacian(g, ball));
  if (solver.info() != Eigen::Success) throw ConvergenceError("harmonic extension failed", 0);
  const Eigen::VectorXd harmonic = solver.solve(rhs);
  Eigen::VectorXd diff = Eigen::VectorXd::Zero(g.size());
  for (Index k = 0; k < n; ++k) diff[idx.nodes[k]] = u[idx.nodes[k]] - harmonic[k];
  out.rhs = dirichlet_energy(Field(u.grid_ptr(), diff));
  return out;
}

Mask contact_nodes(const PhaseState& s) {
  const Grid& g = s.grid();
  return (s.mask_plus && dilate(g, s.mask_minus, 2)) || (s.mask_minus && dilate(g, s.mask_plus, 2));
}

Mask free_boundary_nodes(const Grid& g, const Mask& mask) {
  return dilate(g, mask, 1) && dilate(g, Mask(!mask), 1) && g.inside();
}

double contact_distance(const PhaseState& s) {
  const Grid& g = s.grid();
  const Mask contact = contact_nodes(s);
  if (!contact.any()) return kInf;
  const Eigen::VectorXd dist = distance_to(g, Mask(!g.inside()));
  double best = kInf;
  for (Index i = 0; i < g.size(); ++i)
    if (contact[i]) best = std::min(best, dist[i]);
  return best;
}

DiagnosticCenters select_centers(const PhaseState& s, int per_kind) {
  const Grid& g = s.grid();
  DiagnosticCenters out;
  const Mask contact = contact_nodes(s);
  const Mask near_contact = dilate(g, contact, 2);
  const Eigen::VectorXd to_box = distance_to(g, Mask(!g.inside()));

  // Contact: zero crossings of the interpolant on links joining the phases,
  // one per connected contact region, the crossing nearest its centroid.
  std::vector<int> labels;
  const int regions = count_components(g, contact, &labels);
  std::vector<std::vector<Point>> crossings(regions);
  for_each_link(g, [&](Index i, Index j, const Point&) {
    const bool joins = (s.mask_plus[i] && s.mask_minus[j]) || (s.mask_minus[i] && s.mask_plus[j]);
    if (!joins || labels[i] < 0) return;
    const double t = s.u[i] / (s.u[i] - s.u[j]);
    crossings[labels[i]].push_back(g.position(i) + t * (g.position(j) - g.position(i)));
  });
  struct Candidate {
    Point p;
    double clearance;
  };
  std::vector<Candidate> picks;
  for (const auto& pts : crossings) {
    if (pts.empty()) continue;
    Point mean = Point::Zero();
    for (const Point& p : pts) mean += p;
    mean /= double(pts.size());
    const Point best = *std::min_element(pts.begin(), pts.end(), [&](const Point& a, const Point& b) {
      return (a - mean).squaredNorm() < (b - mean).squaredNorm();
    });
    picks.push_back({best, distance_to_outside(g, best)});
  }
  std::stable_sort(picks.begin(), picks.end(), [](const Candidate& a, const Candidate& b) { return a.clearance > b.clearance; });
  for (std::size_t k = 0; k < picks.size() && int(k) < per_kind; ++k) out.contact.push_back(picks[k].p);

  // One-phase: zero nodes next to exactly one phase, away from contact,
  // farthest from the box first, alternating between the phases.
  std::vector<std::pair<double, Index>> rim[2];
  for (Index i = 0; i < g.size(); ++i) {
    if (!g.inside()[i] || s.mask_plus[i] || s.mask_minus[i] || near_contact[i]) continue;
    bool near[2] = {false, false};
    g.for_each_neighbor(i, [&](Index j) {
      near[0] = near[0] || s.mask_plus[j];
      near[1] = near[1] || s.mask_minus[j];
    });
    for (int p = 0; p < 2; ++p)
      if (near[p] && !near[1 - p]) rim[p].push_back({-to_box[i], i});
  }
  for (auto& r : rim) std::sort(r.begin(), r.end());
  for (std::size_t k = 0; int(out.one_phase.size()) < per_kind; ++k) {
    bool any = false;
    for (int p = 0; p < 2 && int(out.one_phase.size()) < per_kind; ++p)
      if (k < rim[p].size()) {
        // Skip near-duplicates of an earlier pick.
        const Point q = g.position(rim[p][k].second);
        bool close = false;
        for (const Point& o : out.one_phase) close = close || norm_d(g, o - q) < 8 * g.h();
        if (!close) out.one_phase.push_back(q);
        any = true;
      }
    if (!any) break;
  }
  return out;
}

std::vector<double> default_radii(const Grid& g, const Point& x0, int count) {
  const double lo = 4 * g.h();
  const double hi = std::min(0.9 * distance_to_outside(g, x0), 32 * g.h());
  std::vector<double> out;
  if (!(hi > lo) || count < 1) return out;
  for (int k = 0; k < count; ++k) {
    const double r = count == 1 ? lo : lo * std::pow(hi / lo, double(k) / (count - 1));
    if (g.contains_ball(x0, r)) out.push_back(r);
  }
  return out;
}

DiagnosticsReport identity_suite(const PhaseState& s, const DiagnoseOptions& options) {
  const Grid& g = s.grid();
  const double h = g.h(), w = g.cell_volume();
  DiagnosticsReport rep;
  const Field up = s.u.positive_part(), um = s.u.negative_part();

  const double ep = dirichlet_energy(up), em = dirichlet_energy(um);
  rep.energy_balance_residual = std::max(ep, em) > 0 ? std::abs(ep - em) / std::max(ep, em) : 0;
  rep.eigen_match_residual =
      std::max(std::abs(s.lambda1_plus - s.lambda2), std::abs(s.lambda1_minus - s.lambda2)) / s.lambda2;

  const auto grad = gradient_field(s.u);
  const Mask interior = margin_mask(g, 1);
  for (Index i = 0; i < g.size(); ++i)
    if (interior[i]) rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, grad.row(i).norm());

  // Gradient trace on the one-phase free boundary: rim nodes with no
  // other-phase node in their 5x5 stencil and not pressed against the box.
  const Mask contact = contact_nodes(s);
  const Mask wall = dilate(g, Mask(!g.inside()), 1);
  for (int p = 0; p < 2; ++p) {
    const Mask& own = p == 0 ? s.mask_plus : s.mask_minus;
    const auto gp = gradient_field(p == 0 ? up : um);
    const double a = p == 0 ? s.a_plus : s.a_minus;
    double sum = 0;
    int n = 0;
    const Mask rim = inner_boundary(g, own);
    for (Index i = 0; i < g.size(); ++i) {
      if (!rim[i] || contact[i] || wall[i]) continue;
      sum += std::sqrt(a) * gp.row(i).norm();
      ++n;
    }
    (p == 0 ? rep.gradient_trace_plus : rep.gradient_trace_minus) = n ? sum / n : 0;
  }

  rep.contact_distance = contact_distance(s);

  std::vector<std::pair<Point, bool>> centers;
  if (options.auto_centers) {
    const DiagnosticCenters c = select_centers(s);
    for (const Point& p : c.contact) centers.push_back({p, true});
    for (const Point& p : c.one_phase) centers.push_back({p, false});
  } else {
    for (const Point& p : options.centers) {
      bool near_contact = false;
      for (Index i = 0; i < g.size(); ++i)
        if (contact[i] && norm_d(g, g.position(i) - p) <= h) near_contact = true;
      centers.push_back({p, near_contact});
    }
  }

  rep.nondegeneracy_eta = kInf;
  rep.slope_margin_plus = rep.slope_margin_minus = kInf;
  for (const auto& [x0, is_contact] : centers) {
    std::vector<double> radii;
    if (options.radii.empty()) {
      radii = default_radii(g, x0);
    } else {
      for (double r : options.radii)
        if (r >= 4 * h * (1 - 1e-12) && g.contains_ball(x0, r)) radii.push_back(r);
      std::sort(radii.begin(), radii.end());
      radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    }
    if (radii.empty()) continue;
    rep.weiss.push_back(weiss_scan(s, x0, radii));
    rep.nondegeneracy_eta = std::min(rep.nondegeneracy_eta, nondegeneracy_eta(s.u, x0, radii));
    bool first = true;
    for (double r : radii) {
      if (r < 8 * h * (1 - 1e-12)) continue;
      const TwoPlaneFit fit = fit_two_plane(blow_up(s.u, x0, r));
      rep.fits.push_back({x0, r, is_contact, fit});
      if (is_contact && first) {
        const SlopeIdentity id = slope_identity_residual(fit, s.a_plus, s.a_minus, s.lambda);
        rep.slope_identity_residual = std::max(rep.slope_identity_residual, id.identity_residual);
        rep.slope_margin_plus = std::min(rep.slope_margin_plus, id.margin_plus);
        rep.slope_margin_minus = std::min(rep.slope_margin_minus, id.margin_minus);
        rep.contact_fit_residual = std::max(rep.contact_fit_residual, fit.relative_residual);
        ++rep.contact_points;
      }
      first = false;
    }
  }
  if (!std::isfinite(rep.nondegeneracy_eta)) rep.nondegeneracy_eta = 0;
  if (rep.contact_points == 0) rep.slope_margin_plus = rep.slope_margin_minus = 0;

  // Inward minimality: removing one rim node of either phase must not lower
  // lambda_1 + lambda |.| of that phase. Samples are spread evenly over the
  // rims, alternating between the phases.
  std::vector<Index> rims[2];
  for (int p = 0; p < 2; ++p) {
    const Mask rim = inner_boundary(g, p == 0 ? s.mask_plus : s.mask_minus);
    for (Index i = 0; i < g.size(); ++i)
      if (rim[i]) rims[p].push_back(i);
  }
  const int want[2] = {options.removal_samples - options.removal_samples / 2, options.removal_samples / 2};
  rep.min_removal_change = kInf;
  const double tol = 1e-9 * std::max(1.0, s.objective);
  for (int p = 0; p < 2; ++p) {
    const Mask& own = p == 0 ? s.mask_plus : s.mask_minus;
    const double lam = p == 0 ? s.lambda1_plus : s.lambda1_minus;
    const Index n = Index(rims[p].size());
    const Index take = std::min<Index>(want[p], n);
    if (own.count() <= 2) continue;
    const Field& warm = p == 0 ? up : um;
    for (Index k = 0; k < take; ++k) {
      const Index node = rims[p][std::size_t(k * n / take)];
      Mask reduced = own;
      reduced[node] = false;
      const auto eig = smallest_eigenpairs(s.grid_ptr(), reduced, 1, 1e-10, {warm.values()});
      const double change = eig.eigenvalues[0] - lam - s.lambda * w;
      rep.min_removal_change = std::min(rep.min_removal_change, change);
      ++rep.removal_checks;
      if (change < -tol) ++rep.removal_violations;
    }
  }
  if (rep.removal_checks == 0) rep.min_removal_change = 0;

  if (rep.energy_balance_residual > 0.02) rep.flags.push_back("energy_balance");
  if (rep.eigen_match_residual > 0.02) rep.flags.push_back("eigen_match");
  if (rep.removal_violations > 0) rep.flags.push_back("inward_removal");
  if (rep.contact_distance < 2 * h) rep.flags.push_back("contact_distance");
  if (rep.contact_points > 0 && rep.slope_identity_residual > 0.1) rep.flags.push_back("slope_identity");
  return rep;
}

}  // namespace sso
