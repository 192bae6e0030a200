#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>

#include "sso/error.hpp"

namespace sso {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

// Rectangle [origin, origin + extent] (the y components are ignored in 1D),
// optionally restricted to its inscribed disk.
template <typename Scalar>
struct BoxGeometry {
  int dimension = 2;
  Point2<Scalar> extent = Point2<Scalar>::Ones();
  Point2<Scalar> origin = Point2<Scalar>::Zero();
  bool disk = false;
};

// Uniform Cartesian node lattice. Node (ix, iy) has linear index ix + nx * iy;
// in 1D ny == 1. The outermost node layer is never inside, which realizes
// the homogeneous Dirichlet condition on the box.
template <typename Scalar>
class BasicGrid {
 public:
  using Point = Point2<Scalar>;

  BasicGrid(const BoxGeometry<Scalar>& geometry, std::array<int, 2> nodes)
      : geometry_(geometry) {
    const int d = geometry.dimension;
    if (d != 1 && d != 2) throw InvalidArgument("dimension must be 1 or 2");
    for (int a = 0; a < d; ++a) {
      if (!(geometry.extent[a] > 0)) throw InvalidArgument("extent must be positive");
      if (nodes[a] < 3) throw InvalidArgument("resolution must be at least 3 nodes per axis");
    }
    if (d == 1) {
      nodes[1] = 1;
      geometry_.extent[1] = 0;
      geometry_.disk = false;
    }
    nodes_ = nodes;
    h_ = geometry.extent[0] / Scalar(nodes[0] - 1);
    if (d == 2) {
      const Scalar hy = geometry.extent[1] / Scalar(nodes[1] - 1);
      if (std::abs(hy - h_) > Scalar(1e-9) * h_)
        throw InvalidArgument("grid spacing must be uniform across axes");
    }
    inside_ = Mask::Constant(size(), false);
    const Point c = center();
    const Scalar radius = disk_radius();
    for (int iy = 0; iy < ny(); ++iy) {
      for (int ix = 0; ix < nx(); ++ix) {
        const bool interior_x = ix > 0 && ix < nx() - 1;
        const bool interior_y = d == 1 || (iy > 0 && iy < ny() - 1);
        bool in = interior_x && interior_y;
        if (in && geometry_.disk) in = (position(index(ix, iy)) - c).norm() < radius;
        inside_[index(ix, iy)] = in;
      }
    }
  }

  int dimension() const { return geometry_.dimension; }
  int nx() const { return nodes_[0]; }
  int ny() const { return nodes_[1]; }
  std::array<int, 2> nodes() const { return nodes_; }
  Index size() const { return Index(nodes_[0]) * nodes_[1]; }
  Scalar h() const { return h_; }
  // h^d, the quadrature weight of one node.
  Scalar cell_volume() const { return dimension() == 1 ? h_ : h_ * h_; }
  const BoxGeometry<Scalar>& geometry() const { return geometry_; }
  const Point& origin() const { return geometry_.origin; }
  const Point& extent() const { return geometry_.extent; }
  const Mask& inside() const { return inside_; }
  bool is_disk() const { return geometry_.disk; }

  Point center() const { return geometry_.origin + geometry_.extent / Scalar(2); }
  Scalar disk_radius() const {
    return dimension() == 1 ? geometry_.extent[0] / 2
                            : std::min(geometry_.extent[0], geometry_.extent[1]) / 2;
  }

  Index index(int ix, int iy = 0) const { return Index(ix) + Index(nx()) * iy; }
  int ix(Index i) const { return int(i % nx()); }
  int iy(Index i) const { return int(i / nx()); }

  Point position(Index i) const {
    Point p = geometry_.origin;
    p[0] += h_ * ix(i);
    if (dimension() == 2) p[1] += h_ * iy(i);
    return p;
  }

  // Calls f(j) for every axis neighbour j of node i present in the array.
  template <typename F>
  void for_each_neighbor(Index i, F&& f) const {
    const int x = ix(i), y = iy(i);
    if (x > 0) f(i - 1);
    if (x < nx() - 1) f(i + 1);
    if (dimension() == 2) {
      if (y > 0) f(i - nx());
      if (y < ny() - 1) f(i + nx());
    }
  }

  // B_r(c) is contained in the open set D.
  bool contains_ball(const Point& c, Scalar r) const {
    if (geometry_.disk) return (c - center()).norm() + r < disk_radius();
    for (int a = 0; a < dimension(); ++a) {
      if (c[a] - r <= geometry_.origin[a]) return false;
      if (c[a] + r >= geometry_.origin[a] + geometry_.extent[a]) return false;
    }
    return true;
  }

  bool operator==(const BasicGrid& o) const {
    return nodes_ == o.nodes_ && h_ == o.h_ && geometry_.origin == o.geometry_.origin &&
           geometry_.disk == o.geometry_.disk && geometry_.dimension == o.geometry_.dimension;
  }

 private:
  BoxGeometry<Scalar> geometry_;
  std::array<int, 2> nodes_{};
  Scalar h_{};
  Mask inside_;
};

template <typename Scalar>
using GridPtr = std::shared_ptr<const BasicGrid<Scalar>>;

template <typename Scalar>
GridPtr<Scalar> build_grid(const BoxGeometry<Scalar>& geometry, std::array<int, 2> resolution) {
  return std::make_shared<const BasicGrid<Scalar>>(geometry, resolution);
}

// Nodal values on a grid, identically zero off the inside mask.
template <typename Scalar>
class BasicField {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Point = Point2<Scalar>;

  explicit BasicField(GridPtr<Scalar> grid)
      : grid_(std::move(grid)), values_(Vector::Zero(grid_->size())) {}

  BasicField(GridPtr<Scalar> grid, Vector values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) throw InvalidArgument("field size does not match grid");
    if (!values_.allFinite()) throw InvalidArgument("field values must be finite");
    values_ = grid_->inside().select(values_, Vector::Zero(values_.size()));
  }

  template <typename F>
  static BasicField sample(GridPtr<Scalar> grid, F&& f) {
    Vector v(grid->size());
    for (Index i = 0; i < v.size(); ++i) v[i] = grid->inside()[i] ? Scalar(f(grid->position(i))) : Scalar(0);
    return BasicField(std::move(grid), std::move(v));
  }

  const BasicGrid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const Vector& values() const { return values_; }
  Scalar operator[](Index i) const { return values_[i]; }
  Index size() const { return values_.size(); }

  BasicField positive_part() const { return BasicField(grid_, values_.cwiseMax(Scalar(0))); }
  BasicField negative_part() const { return BasicField(grid_, (-values_).cwiseMax(Scalar(0))); }
  Mask support(Scalar threshold = 0) const { return values_.array().abs() > threshold; }

  friend BasicField operator+(const BasicField& a, const BasicField& b) {
    return BasicField(a.grid_, a.values_ + b.values_);
  }
  friend BasicField operator-(const BasicField& a, const BasicField& b) {
    return BasicField(a.grid_, a.values_ - b.values_);
  }
  friend BasicField operator*(Scalar s, const BasicField& a) { return BasicField(a.grid_, s * a.values_); }

 private:
  GridPtr<Scalar> grid_;
  Vector values_;
};

template <typename Scalar>
Mask margin_mask(const BasicGrid<Scalar>& grid, int margin);

// Vector field with compact support: components vanish on the nodes within
// `margin` nodes (Chebyshev distance) of the complement of the inside mask.
template <typename Scalar>
class BasicVectorField {
 public:
  using Components = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
  using Point = Point2<Scalar>;

  BasicVectorField(GridPtr<Scalar> grid, Components components, int margin = 2)
      : grid_(std::move(grid)), components_(std::move(components)), margin_(margin) {
    if (components_.rows() != grid_->size()) throw InvalidArgument("vector field size does not match grid");
    if (!components_.allFinite()) throw InvalidArgument("vector field must be finite");
    const Mask support = margin_mask(*grid_, margin_);
    for (Index i = 0; i < components_.rows(); ++i)
      if (!support[i]) components_.row(i).setZero();
    if (grid_->dimension() == 1) components_.col(1).setZero();
  }

  template <typename F>
  static BasicVectorField sample(GridPtr<Scalar> grid, F&& f, int margin = 2) {
    Components c(grid->size(), 2);
    for (Index i = 0; i < c.rows(); ++i) c.row(i) = Point(f(grid->position(i))).transpose();
    return BasicVectorField(std::move(grid), std::move(c), margin);
  }

  static BasicVectorField zero(GridPtr<Scalar> grid) {
    const Index n = grid->size();
    return BasicVectorField(std::move(grid), Components::Zero(n, 2));
  }

  const BasicGrid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const Components& components() const { return components_; }
  int margin() const { return margin_; }

  friend BasicVectorField operator+(const BasicVectorField& a, const BasicVectorField& b) {
    return BasicVectorField(a.grid_, a.components_ + b.components_, std::min(a.margin_, b.margin_));
  }

 private:
  GridPtr<Scalar> grid_;
  Components components_;
  int margin_;
};

// Nodes at Chebyshev distance > margin from every node outside the box/disk.
template <typename Scalar>
Mask margin_mask(const BasicGrid<Scalar>& grid, int margin) {
  Mask ok = grid.inside();
  for (int step = 0; step < margin; ++step) {
    Mask next = ok;
    for (Index i = 0; i < grid.size(); ++i) {
      if (!ok[i]) continue;
      const int x = grid.ix(i), y = grid.iy(i);
      for (int dy = (grid.dimension() == 2 ? -1 : 0); dy <= (grid.dimension() == 2 ? 1 : 0); ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= grid.nx() || yy >= grid.ny() || !ok[grid.index(xx, yy)]) next[i] = false;
        }
    }
    ok = next;
  }
  return ok;
}

template <typename Scalar>
void require_same_grid(const BasicGrid<Scalar>& a, const BasicGrid<Scalar>& b) {
  if (&a != &b && !(a == b)) throw InvalidArgument("fields live on different grids");
}

// Discrete integral of |grad f|^2: sum over lattice links of squared forward
// differences, weighted h^d / h^2. Links into the zero exterior are counted,
// so for a unit-norm eigenvector this equals its eigenvalue.
template <typename Scalar>
Scalar dirichlet_energy(const BasicField<Scalar>& f) {
  const auto& g = f.grid();
  const auto& v = f.values();
  Scalar sum = 0;
  for (int iy = 0; iy < g.ny(); ++iy)
    for (int ix = 0; ix + 1 < g.nx(); ++ix) {
      const Scalar d = v[g.index(ix + 1, iy)] - v[g.index(ix, iy)];
      sum += d * d;
    }
  if (g.dimension() == 2)
    for (int iy = 0; iy + 1 < g.ny(); ++iy)
      for (int ix = 0; ix < g.nx(); ++ix) {
        const Scalar d = v[g.index(ix, iy + 1)] - v[g.index(ix, iy)];
        sum += d * d;
      }
  return sum * g.cell_volume() / (g.h() * g.h());
}

template <typename Scalar>
Scalar l2_inner(const BasicField<Scalar>& f, const BasicField<Scalar>& g) {
  require_same_grid(f.grid(), g.grid());
  return f.values().dot(g.values()) * f.grid().cell_volume();
}

template <typename Scalar>
Scalar l2_norm(const BasicField<Scalar>& f) {
  return std::sqrt(l2_inner(f, f));
}

// Multilinear interpolation; zero outside the node array.
template <typename Scalar>
Scalar interpolate(const BasicField<Scalar>& f, const Point2<Scalar>& p) {
  const auto& g = f.grid();
  const auto& v = f.values();
  const Scalar sx = (p[0] - g.origin()[0]) / g.h();
  if (!(sx >= 0 && sx <= g.nx() - 1)) return 0;
  const int x0 = std::min(int(std::floor(sx)), g.nx() - 2);
  const Scalar fx = sx - x0;
  if (g.dimension() == 1) return (1 - fx) * v[x0] + fx * v[x0 + 1];
  const Scalar sy = (p[1] - g.origin()[1]) / g.h();
  if (!(sy >= 0 && sy <= g.ny() - 1)) return 0;
  const int y0 = std::min(int(std::floor(sy)), g.ny() - 2);
  const Scalar fy = sy - y0;
  return (1 - fx) * (1 - fy) * v[g.index(x0, y0)] + fx * (1 - fy) * v[g.index(x0 + 1, y0)] +
         (1 - fx) * fy * v[g.index(x0, y0 + 1)] + fx * fy * v[g.index(x0 + 1, y0 + 1)];
}

// Mean of f over the sphere dB_r(center): M equi-angular samples in 2D, the
// two endpoints in 1D.
template <typename Scalar>
Scalar sphere_average(const BasicField<Scalar>& f, const Point2<Scalar>& center, Scalar r, int samples = 64) {
  const auto& g = f.grid();
  if (r < 2 * g.h() * (1 - 1e-12)) throw InvalidArgument("sphere radius must be at least 2h");
  if (!g.contains_ball(center, r)) throw InvalidArgument("ball leaves the domain");
  if (g.dimension() == 1) {
    const Point2<Scalar> e(r, 0);
    return (interpolate(f, Point2<Scalar>(center - e)) + interpolate(f, Point2<Scalar>(center + e))) / 2;
  }
  if (samples < 3) throw InvalidArgument("at least 3 sphere samples required");
  Scalar sum = 0;
  for (int k = 0; k < samples; ++k) {
    const Scalar t = 2 * std::numbers::pi_v<Scalar> * k / samples;
    sum += interpolate(f, Point2<Scalar>(center + r * Point2<Scalar>(std::cos(t), std::sin(t))));
  }
  return sum / samples;
}

// Per-node gradient: centered differences, one-sided on the outer node layer.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 2> gradient_field(const BasicField<Scalar>& f) {
  const auto& g = f.grid();
  const auto& v = f.values();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> grad = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>::Zero(g.size(), 2);
  const Scalar h = g.h();
  for (int iy = 0; iy < g.ny(); ++iy)
    for (int ix = 0; ix < g.nx(); ++ix) {
      const Index i = g.index(ix, iy);
      if (ix == 0)
        grad(i, 0) = (v[i + 1] - v[i]) / h;
      else if (ix == g.nx() - 1)
        grad(i, 0) = (v[i] - v[i - 1]) / h;
      else
        grad(i, 0) = (v[i + 1] - v[i - 1]) / (2 * h);
      if (g.dimension() == 2) {
        const Index up = i + g.nx(), down = i - g.nx();
        if (iy == 0)
          grad(i, 1) = (v[up] - v[i]) / h;
        else if (iy == g.ny() - 1)
          grad(i, 1) = (v[i] - v[down]) / h;
        else
          grad(i, 1) = (v[up] - v[down]) / (2 * h);
      }
    }
  return grad;
}

using Grid = BasicGrid<double>;
using Geometry = BoxGeometry<double>;
using Field = BasicField<double>;
using VectorField = BasicVectorField<double>;
using Point = Point2<double>;

}  // namespace sso
