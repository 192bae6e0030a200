#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "sso/error.hpp"
#include "sso/grid.hpp"
#include "sso/state.hpp"

namespace sso {

template <typename Scalar>
struct BasicStationarityReport {
  Scalar rayleigh_variation_plus = 0;
  Scalar rayleigh_variation_minus = 0;
  Scalar volume_variation_plus = 0;
  Scalar volume_variation_minus = 0;
  Scalar combined_residual = 0;  // a+ dR+ + a- dR- + lambda (dV+ + dV-)
};

// Centered divergence at the nodes.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> divergence(const BasicVectorField<Scalar>& xi) {
  const auto& g = xi.grid();
  const BasicField<Scalar> x(xi.grid_ptr(), xi.components().col(0));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> div = gradient_field(x).col(0);
  if (g.dimension() == 2) {
    // The inside mask zeroes fields on the outer layer; xi already vanishes there.
    const auto y = xi.components().col(1);
    for (int iy = 1; iy + 1 < g.ny(); ++iy)
      for (int ix = 0; ix < g.nx(); ++ix) {
        const Index i = g.index(ix, iy);
        div[i] += (y[i + g.nx()] - y[i - g.nx()]) / (2 * g.h());
      }
  }
  return div;
}

namespace detail {

// Calls f(weights, corner indices) for every lattice cell (link in 1D).
template <typename Scalar, typename F>
void for_each_cell(const BasicGrid<Scalar>& g, F&& f) {
  if (g.dimension() == 1) {
    for (int ix = 0; ix + 1 < g.nx(); ++ix) f(std::array<Index, 4>{ix, ix + 1, ix, ix + 1});
    return;
  }
  for (int iy = 0; iy + 1 < g.ny(); ++iy)
    for (int ix = 0; ix + 1 < g.nx(); ++ix)
      f(std::array<Index, 4>{g.index(ix, iy), g.index(ix + 1, iy), g.index(ix, iy + 1), g.index(ix + 1, iy + 1)});
}

}  // namespace detail

// delta R(u)[xi] = int (|grad u|^2 - lambda u^2) div xi - 2 grad u . Dxi grad u,
// for unit-norm u with lambda = R(u). Midpoint rule on lattice cells: grad u,
// Dxi and div xi by centered differences about the cell centre, u^2 averaged
// over the corners. Cell-centred differences stay second order across the
// kink of an eigenfunction at its mask boundary.
template <typename Scalar>
Scalar first_variation_rayleigh(const BasicField<Scalar>& u, Scalar lambda, const BasicVectorField<Scalar>& xi) {
  require_same_grid(u.grid(), xi.grid());
  const Scalar norm = l2_norm(u);
  if (std::abs(norm - 1) > Scalar(1e-6)) throw InvalidArgument("first_variation_rayleigh expects a unit-norm field");
  const auto& g = u.grid();
  const auto& v = u.values();
  const auto& c = xi.components();
  const Scalar h = g.h();
  Scalar sum = 0;
  detail::for_each_cell(g, [&](const std::array<Index, 4>& k) {
    using M2 = Eigen::Matrix<Scalar, 2, 2>;
    using V2 = Eigen::Matrix<Scalar, 2, 1>;
    V2 du;
    M2 dxi;  // dxi(a, b) = d xi_a / d x_b
    Scalar u2;
    if (g.dimension() == 1) {
      du << (v[k[1]] - v[k[0]]) / h, 0;
      dxi << (c(k[1], 0) - c(k[0], 0)) / h, 0, 0, 0;
      u2 = (v[k[0]] * v[k[0]] + v[k[1]] * v[k[1]]) / 2;
    } else {
      auto dx = [&](auto&& s) { return (s(k[1]) + s(k[3]) - s(k[0]) - s(k[2])) / (2 * h); };
      auto dy = [&](auto&& s) { return (s(k[2]) + s(k[3]) - s(k[0]) - s(k[1])) / (2 * h); };
      auto uu = [&](Index i) { return v[i]; };
      auto x0 = [&](Index i) { return c(i, 0); };
      auto x1 = [&](Index i) { return c(i, 1); };
      du << dx(uu), dy(uu);
      dxi << dx(x0), dy(x0), dx(x1), dy(x1);
      u2 = (v[k[0]] * v[k[0]] + v[k[1]] * v[k[1]] + v[k[2]] * v[k[2]] + v[k[3]] * v[k[3]]) / 4;
    }
    sum += (du.squaredNorm() - lambda * u2) * dxi.trace() - 2 * du.dot(dxi * du);
  });
  return sum * g.cell_volume();
}

// delta Vol[xi] = int over {|u| > tau} of div xi.
template <typename Scalar>
Scalar first_variation_volume(const BasicField<Scalar>& u, const BasicVectorField<Scalar>& xi, Scalar tau = 0) {
  require_same_grid(u.grid(), xi.grid());
  return u.support(tau).select(divergence(xi).array(), Scalar(0)).sum() * u.grid().cell_volume();
}

template <typename Scalar>
Scalar mask_volume_variation(const BasicGrid<Scalar>& g, const Mask& mask, const BasicVectorField<Scalar>& xi) {
  return mask.select(divergence(xi).array(), Scalar(0)).sum() * g.cell_volume();
}

// x -> u(x - t xi(x)) by bilinear interpolation: the first-order transport
// of u by the flow of xi.
template <typename Scalar>
BasicField<Scalar> transport(const BasicField<Scalar>& u, const BasicVectorField<Scalar>& xi, Scalar t) {
  require_same_grid(u.grid(), xi.grid());
  const auto& g = u.grid();
  typename BasicField<Scalar>::Vector out(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const Point2<Scalar> y = g.position(i) - t * xi.components().row(i).transpose();
    out[i] = interpolate(u, y);
  }
  return BasicField<Scalar>(u.grid_ptr(), std::move(out));
}

// Central difference of t -> R(transport(u, xi, t)+) at t = 0.
template <typename Scalar>
Scalar rayleigh_variation_fd(const BasicField<Scalar>& u, const BasicVectorField<Scalar>& xi, Scalar t = Scalar(1e-4)) {
  auto r = [&](Scalar s) {
    const BasicField<Scalar> w = transport(u, xi, s).positive_part();
    return dirichlet_energy(w) / l2_inner(w, w);
  };
  return (r(t) - r(-t)) / (2 * t);
}

// Left side of the limit optimality identity evaluated on a state. The state
// need not be converged: perturbed states are how the residual is calibrated.
template <typename Scalar>
BasicStationarityReport<Scalar> stationarity_residual(const BasicPhaseState<Scalar>& s,
                                                      const BasicVectorField<Scalar>& xi) {
  if (std::abs(s.a_plus + s.a_minus - 1) > Scalar(1e-6)) throw InvalidArgument("a_plus + a_minus must equal 1");
  BasicStationarityReport<Scalar> r;
  r.rayleigh_variation_plus = first_variation_rayleigh(s.u.positive_part(), s.lambda1_plus, xi);
  r.rayleigh_variation_minus = first_variation_rayleigh(s.u.negative_part(), s.lambda1_minus, xi);
  r.volume_variation_plus = mask_volume_variation(s.grid(), s.mask_plus, xi);
  r.volume_variation_minus = mask_volume_variation(s.grid(), s.mask_minus, xi);
  r.combined_residual = s.a_plus * r.rayleigh_variation_plus + s.a_minus * r.rayleigh_variation_minus +
                        s.lambda * (r.volume_variation_plus + r.volume_variation_minus);
  return r;
}

using StationarityReport = BasicStationarityReport<double>;

}  // namespace sso
