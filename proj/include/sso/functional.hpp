#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <type_traits>
#include <utility>

#include "sso/eigensolver.hpp"
#include "sso/error.hpp"
#include "sso/grid.hpp"

namespace sso {

template <typename Scalar>
struct BasicObjectiveBreakdown {
  Scalar energy_plus = 0;     // int |grad v+|^2
  Scalar energy_minus = 0;    // int |grad v-|^2
  Scalar rayleigh_plus = 0;   // R(v+)
  Scalar rayleigh_minus = 0;  // R(v-)
  Scalar coupling = 0;        // J_p(R+, R-) or J_inf
  Scalar volume = 0;
  Scalar fidelity = 0;
  Scalar total = 0;           // coupling + lambda * volume + weight * fidelity
};

template <typename Scalar>
Scalar j_infty(Scalar x, Scalar y) {
  if (x < 0 || y < 0) throw InvalidArgument("j_infty arguments must be nonnegative");
  return std::max(x, y);
}

// (x^p + y^p)^(1/p), evaluated as m * (1 + (min/m)^p)^(1/p) so large p
// cannot overflow.
template <typename Scalar>
Scalar j_p(Scalar x, Scalar y, Scalar p) {
  if (!(p > 1)) throw InvalidArgument("j_p requires p > 1");
  if (x < 0 || y < 0) throw InvalidArgument("j_p arguments must be nonnegative");
  const Scalar m = std::max(x, y);
  if (m == 0) return 0;
  if (std::isinf(m)) return m;
  const Scalar ratio = std::min(x, y) / m;
  return m * std::exp(std::log1p(std::pow(ratio, p)) / p);
}

// Partial derivatives of J_p(R+, R-):
//   a+- = R+-^(p-1) / (R+^p + R-^p)^(1-1/p),
// computed in the log domain.
template <typename Scalar>
std::pair<Scalar, Scalar> coefficients_a(Scalar rp, Scalar rm, Scalar p) {
  if (!(p > 1)) throw InvalidArgument("coefficients_a requires p > 1");
  if (!(rp > 0) || !(rm > 0)) throw InvalidArgument("Rayleigh quotients must be positive");
  const Scalar lp = std::log(rp), lm = std::log(rm);
  const Scalar top = std::max(lp, lm);
  const Scalar log_sum = std::log(std::exp(p * (lp - top)) + std::exp(p * (lm - top)));
  const Scalar shrink = (1 - 1 / p) * log_sum;
  return {std::exp((p - 1) * (lp - top) - shrink), std::exp((p - 1) * (lm - top) - shrink)};
}

template <typename Scalar>
Scalar support_measure(const BasicField<Scalar>& v, Scalar threshold = 0) {
  if (threshold < 0) throw InvalidArgument("threshold must be nonnegative");
  return Scalar(v.support(threshold).count()) * v.grid().cell_volume();
}

// h^d * sum v^2 / (v^2 + eps^2): differentiable surrogate for |{v != 0}|.
template <typename Scalar>
Scalar smoothed_volume(const BasicField<Scalar>& v, Scalar eps) {
  if (!(eps > 0)) throw InvalidArgument("smoothing width must be positive");
  const auto s2 = v.values().array().square();
  return (s2 / (s2 + eps * eps)).sum() * v.grid().cell_volume();
}

template <typename Scalar>
struct RelaxedParameters {
  Scalar p = 2;
  Scalar lambda = 1;
  Scalar eps = Scalar(1e-2);
  Scalar fidelity_weight = 0;
};

// J_p(R(v+), R(v-)) + lambda * smoothed_volume(v) + w * ||v - u_ref||^2.
template <typename Scalar>
BasicObjectiveBreakdown<Scalar> objective_relaxed(const BasicField<Scalar>& v,
                                                  const std::type_identity_t<BasicField<Scalar>>* u_ref,
                                                  const RelaxedParameters<Scalar>& prm) {
  if (!(prm.p > 1)) throw InvalidArgument("p must exceed 1");
  if (prm.lambda < 0 || prm.fidelity_weight < 0) throw InvalidArgument("weights must be nonnegative");
  const BasicField<Scalar> plus = v.positive_part(), minus = v.negative_part();
  const Scalar mass_plus = l2_inner(plus, plus), mass_minus = l2_inner(minus, minus);
  if (mass_plus == 0 || mass_minus == 0) throw DegeneratePhaseError();
  BasicObjectiveBreakdown<Scalar> out;
  out.energy_plus = dirichlet_energy(plus);
  out.energy_minus = dirichlet_energy(minus);
  out.rayleigh_plus = out.energy_plus / mass_plus;
  out.rayleigh_minus = out.energy_minus / mass_minus;
  out.coupling = j_p(out.rayleigh_plus, out.rayleigh_minus, prm.p);
  out.volume = prm.lambda > 0 ? smoothed_volume(v, prm.eps) : Scalar(0);
  if (u_ref) {
    const BasicField<Scalar> diff = v - *u_ref;
    out.fidelity = l2_inner(diff, diff);
  }
  out.total = out.coupling + prm.lambda * out.volume + prm.fidelity_weight * out.fidelity;
  return out;
}

// Nodal gradient (per unit nodal value, not divided by h^d) of
// objective_relaxed. At v_j = 0 the phase split is not differentiable; the
// component is the steepest one-sided descent direction of the two phases.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> objective_relaxed_gradient(const BasicField<Scalar>& v,
                                                                    const std::type_identity_t<BasicField<Scalar>>* u_ref,
                                                                    const RelaxedParameters<Scalar>& prm) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto& g = v.grid();
  const BasicField<Scalar> plus = v.positive_part(), minus = v.negative_part();
  const Scalar mass_plus = l2_inner(plus, plus), mass_minus = l2_inner(minus, minus);
  if (mass_plus == 0 || mass_minus == 0) throw DegeneratePhaseError();
  const Scalar rp = dirichlet_energy(plus) / mass_plus;
  const Scalar rm = dirichlet_energy(minus) / mass_minus;
  const auto [ap, am] = coefficients_a(rp, rm, prm.p);
  const Scalar w = g.cell_volume();
  const Scalar inv_h2 = 1 / (g.h() * g.h());
  const Scalar eps2 = prm.eps * prm.eps;

  // dR(phi)/dphi_j = 2 w ((A phi)_j - R phi_j) / mass.
  auto rayleigh_gradient = [&](const Vector& phi, Scalar r, Scalar mass, Index j) {
    Scalar lap = 2 * g.dimension() * phi[j];
    g.for_each_neighbor(j, [&](Index k) { lap -= phi[k]; });
    return 2 * w * (lap * inv_h2 - r * phi[j]) / mass;
  };

  Vector grad = Vector::Zero(g.size());
  for (Index j = 0; j < g.size(); ++j) {
    if (!g.inside()[j]) continue;
    const Scalar x = v[j];
    Scalar gj;
    if (x > 0) {
      gj = ap * rayleigh_gradient(plus.values(), rp, mass_plus, j);
    } else if (x < 0) {
      gj = -am * rayleigh_gradient(minus.values(), rm, mass_minus, j);
    } else {
      // Raising v_j feeds the + phase, lowering it feeds the - phase.
      const Scalar up = ap * rayleigh_gradient(plus.values(), rp, mass_plus, j);
      const Scalar down = am * rayleigh_gradient(minus.values(), rm, mass_minus, j);
      if (up < 0 && up <= down)
        gj = up;
      else if (down < 0)
        gj = -down;
      else
        gj = 0;
    }
    if (prm.lambda > 0) gj += prm.lambda * w * 2 * eps2 * x / ((x * x + eps2) * (x * x + eps2));
    if (u_ref && prm.fidelity_weight > 0) gj += prm.fidelity_weight * 2 * w * (x - (*u_ref)[j]);
    grad[j] = gj;
  }
  return grad;
}

// lambda_2(mask) + lambda * |mask|.
template <typename Scalar>
Scalar f_lambda(const GridPtr<Scalar>& grid, const Mask& mask, Scalar lambda, Scalar tol = Scalar(1e-8)) {
  if (mask.count() == 0) throw EmptyDomainError();
  if (mask.count() < 2) throw InvalidArgument("mask must carry at least two eigenpairs");
  const auto eig = smallest_eigenpairs(grid, mask, 2, tol);
  return eig.eigenvalues[1] + lambda * Scalar(mask.count()) * grid->cell_volume();
}

using ObjectiveBreakdown = BasicObjectiveBreakdown<double>;

}  // namespace sso
