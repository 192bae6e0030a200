#pragma once

#include <string>
#include <vector>

#include "sso/grid.hpp"
#include "sso/state.hpp"

namespace sso {

// Nodes per axis of the blow-up reference grid.
inline constexpr int kReferenceNodes = 129;

// The reference grid spans [-rho, rho]^d, rho = 64/62, so that B_1 and a
// two-cell margin around it are resolved with the outer layer still outside.
GridPtr<double> reference_ball_grid(int dimension);

// u_{x0,r}(x) = u(x0 + r x) / r sampled on the reference grid by bilinear
// interpolation. Requires B_r(x0) inside D and r >= 8h.
Field blow_up(const Field& u, const Point& x0, double r);

// a+ int_B1 |grad u+|^2 + a- int_B1 |grad u-|^2 - a+ int_dB1 u+^2
//   - a- int_dB1 u-^2 + lambda |{u != 0} cap B1|
// for a field on the reference grid.
double weiss_energy(const Field& ref, double a_plus, double a_minus, double lambda);

struct WeissCurve {
  Point center = Point::Zero();
  std::vector<double> radii;
  std::vector<double> values;
  double slack = 0;  // smallest C >= 0 with r -> W + C r nondecreasing
};

// Smallest C >= 0 such that values[i] + C radii[i] is nondecreasing.
double weiss_slack(const std::vector<double>& radii, const std::vector<double>& values);

// Radii ascending, each >= 4h, every ball inside D.
WeissCurve weiss_scan(const PhaseState& state, const Point& x0, const std::vector<double>& radii);

struct TwoPlaneFit {
  double beta_plus = 0;
  double beta_minus = 0;
  Point nu = Point(1, 0);
  double relative_residual = 0;
};

// Least-squares fit of beta+ (x.nu)+ - beta- (x.nu)- over the reference
// nodes in B_1.
TwoPlaneFit fit_two_plane(const Field& ref);

struct SlopeIdentity {
  double identity_residual = 0;  // |a+ b+^2 - a- b-^2| / max(a+ b+^2, a- b-^2)
  double margin_plus = 0;        // b+ - sqrt(lambda / a+)
  double margin_minus = 0;
};

SlopeIdentity slope_identity_residual(const TwoPlaneFit& fit, double a_plus, double a_minus, double lambda);

// min over r of sphere_average(|u|, x0, r) / r.
double nondegeneracy_eta(const Field& u, const Point& x0, const std::vector<double>& radii);

// prod_i r^-(2+eps) int_{B_r(x0)} |grad u_i|^2 |x - x0|^(2-d). The fields
// must have pairwise disjoint supports.
double three_phase_product(const Field& u1, const Field& u2, const Field& u3, const Point& x0, double r,
                           double eps_exp = 0.1);
// The same normalization with two factors.
double two_phase_product(const Field& u1, const Field& u2, const Point& x0, double r, double eps_exp = 0.1);

struct PotentialPair {
  double lhs = 0;  // |{u = 0} cap B_r| (mean_{dB_r} u)^2 / r^2
  double rhs = 0;  // int_{B_r} |grad (u - h)|^2, h the discrete harmonic extension
  double ratio() const;
};

PotentialPair potential_estimate_pair(const Field& u, const Point& x0, double r);

// Phase nodes with a node of the other phase in their 5x5 stencil.
Mask contact_nodes(const PhaseState& state);
// Nodes whose 3x3 stencil meets both the mask and its complement.
Mask free_boundary_nodes(const Grid& grid, const Mask& mask);

// Distance from the contact nodes to the nodes outside D; +inf without contact.
double contact_distance(const PhaseState& state);

struct DiagnosticCenters {
  std::vector<Point> contact;    // zero crossings between the phases
  std::vector<Point> one_phase;  // zero nodes on the rim of one phase
};

// At most `per_kind` centers of each kind, preferring points far from the box.
DiagnosticCenters select_centers(const PhaseState& state, int per_kind = 4);

// Geometric radii from 4h to min(0.9 dist(x0, dD), 32h); empty if that
// range is empty.
std::vector<double> default_radii(const Grid& grid, const Point& x0, int count = 8);

struct DiagnoseOptions {
  bool auto_centers = true;
  std::vector<Point> centers;  // used when auto_centers is false
  std::vector<double> radii;   // empty selects default_radii per center
  int removal_samples = 50;
};

struct FitRecord {
  Point center = Point::Zero();
  double radius = 0;
  bool contact = false;
  TwoPlaneFit fit;
};

struct DiagnosticsReport {
  double energy_balance_residual = 0;
  double eigen_match_residual = 0;
  double lipschitz_estimate = 0;
  double contact_distance = 0;
  double nondegeneracy_eta = 0;
  // Worst contact-point fit at the smallest radius >= 8h; 0 without contact.
  double slope_identity_residual = 0;
  double slope_margin_plus = 0;
  double slope_margin_minus = 0;
  double contact_fit_residual = 0;
  int contact_points = 0;
  // Mean of sqrt(a) |grad u| on the one-phase rim of each phase.
  double gradient_trace_plus = 0;
  double gradient_trace_minus = 0;
  int removal_checks = 0;
  int removal_violations = 0;
  double min_removal_change = 0;  // smallest change of lambda_1 + lambda |.|
  std::vector<WeissCurve> weiss;
  std::vector<FitRecord> fits;
  std::vector<std::string> flags;  // names of failing checks
};

DiagnosticsReport identity_suite(const PhaseState& state, const DiagnoseOptions& options = {});

}  // namespace sso
