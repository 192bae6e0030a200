#include "sso/mask.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sso {

Mask inner_boundary(const Grid& grid, const Mask& mask) {
  Mask out = Mask::Constant(grid.size(), false);
  for (Index i = 0; i < grid.size(); ++i) {
    if (!mask[i]) continue;
    grid.for_each_neighbor(i, [&](Index j) {
      if (!mask[j]) out[i] = true;
    });
  }
  return out;
}

Mask outer_boundary(const Grid& grid, const Mask& mask) {
  Mask out = Mask::Constant(grid.size(), false);
  for (Index i = 0; i < grid.size(); ++i) {
    if (mask[i] || !grid.inside()[i]) continue;
    grid.for_each_neighbor(i, [&](Index j) {
      if (mask[j]) out[i] = true;
    });
  }
  return out;
}

Mask dilate(const Grid& grid, const Mask& mask, int radius) {
  Mask out = mask;
  const int ry = grid.dimension() == 2 ? radius : 0;
  for (Index i = 0; i < grid.size(); ++i) {
    if (!mask[i]) continue;
    const int x = grid.ix(i), y = grid.iy(i);
    for (int dy = -ry; dy <= ry; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx, yy = y + dy;
        if (xx >= 0 && yy >= 0 && xx < grid.nx() && yy < grid.ny()) out[grid.index(xx, yy)] = true;
      }
  }
  return out;
}

int count_components(const Grid& grid, const Mask& mask, std::vector<int>* labels) {
  std::vector<int> label(grid.size(), -1);
  std::vector<Index> stack;
  int count = 0;
  for (Index s = 0; s < grid.size(); ++s) {
    if (!mask[s] || label[s] >= 0) continue;
    label[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index i = stack.back();
      stack.pop_back();
      grid.for_each_neighbor(i, [&](Index j) {
        if (mask[j] && label[j] < 0) {
          label[j] = count;
          stack.push_back(j);
        }
      });
    }
    ++count;
  }
  if (labels) *labels = std::move(label);
  return count;
}

Mask largest_component(const Grid& grid, const Mask& mask) {
  std::vector<int> labels;
  const int n = count_components(grid, mask, &labels);
  if (n <= 1) return mask;
  std::vector<Index> sizes(n, 0);
  for (int l : labels)
    if (l >= 0) ++sizes[l];
  const int best = int(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  Mask out(grid.size());
  for (Index i = 0; i < grid.size(); ++i) out[i] = labels[i] == best;
  return out;
}

Eigen::VectorXd distance_to(const Grid& grid, const Mask& target) {
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(grid.size(), std::numeric_limits<double>::infinity());
  // The nearest target node to a non-target node lies on the target's rim.
  std::vector<Point> rim;
  for (Index i = 0; i < grid.size(); ++i) {
    if (!target[i]) continue;
    bool edge = false;
    grid.for_each_neighbor(i, [&](Index j) { edge = edge || !target[j]; });
    if (edge) rim.push_back(grid.position(i));
  }
  for (Index i = 0; i < grid.size(); ++i) {
    if (target[i]) {
      dist[i] = 0;
      continue;
    }
    const Point p = grid.position(i);
    double best = std::numeric_limits<double>::infinity();
    for (const Point& q : rim) best = std::min(best, (p - q).squaredNorm());
    dist[i] = std::sqrt(best);
  }
  return dist;
}

double ContourMetrics::circularity() const {
  return perimeter > 0 ? 4 * std::numbers::pi * area / (perimeter * perimeter) : 0;
}

ContourMetrics contour_metrics(const Grid& grid, const Mask& mask) {
  if (grid.dimension() != 2) throw InvalidArgument("contour metrics require a 2D grid");
  const int nx = grid.nx(), ny = grid.ny();
  const double h = grid.h();

  // A 3x3 mean of the indicator gives the contour sub-cell positions; the raw
  // 0/1 staircase overstates the perimeter by about 6% on a disk.
  Eigen::VectorXd f = Eigen::VectorXd::Zero(grid.size());
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      double s = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx >= 0 && yy >= 0 && xx < nx && yy < ny && mask[grid.index(xx, yy)]) s += 1;
        }
      f[grid.index(x, y)] = s / 9 - 0.5;
    }

  ContourMetrics m;
  using P = Eigen::Vector2d;
  for (int y = 0; y + 1 < ny; ++y)
    for (int x = 0; x + 1 < nx; ++x) {
      // Corners counter-clockwise, in cell units.
      const P corner[4] = {P(0, 0), P(1, 0), P(1, 1), P(0, 1)};
      const double v[4] = {f[grid.index(x, y)], f[grid.index(x + 1, y)], f[grid.index(x + 1, y + 1)],
                           f[grid.index(x, y + 1)]};
      int above = 0;
      for (double w : v) above += w > 0;
      if (above == 0) continue;
      if (above == 4) {
        m.area += h * h;
        continue;
      }
      P cross[4];
      bool has[4] = {false, false, false, false};
      std::vector<P> poly;
      for (int e = 0; e < 4; ++e) {
        const int n = (e + 1) % 4;
        if (v[e] > 0) poly.push_back(corner[e]);
        if ((v[e] > 0) != (v[n] > 0)) {
          const double t = v[e] / (v[e] - v[n]);
          cross[e] = corner[e] + t * (corner[n] - corner[e]);
          has[e] = true;
          poly.push_back(cross[e]);
        }
      }
      double area = 0;
      for (std::size_t k = 0; k < poly.size(); ++k) {
        const P& p = poly[k];
        const P& q = poly[(k + 1) % poly.size()];
        area += p[0] * q[1] - q[0] * p[1];
      }
      area = std::abs(area) / 2;
      const bool saddle = above == 2 && (v[0] > 0) == (v[2] > 0);
      if (!saddle) {
        P ends[2];
        int k = 0;
        for (int e = 0; e < 4; ++e)
          if (has[e]) ends[k++] = cross[e];
        m.perimeter += h * (ends[1] - ends[0]).norm();
      } else if ((v[0] + v[1] + v[2] + v[3]) / 4 > 0) {
        // Joined through the centre: the two cut corners are the below ones.
        const int lo = v[0] > 0 ? 1 : 0;
        m.perimeter += h * ((cross[lo] - cross[(lo + 3) % 4]).norm() + (cross[lo + 1] - cross[lo + 2]).norm());
      } else {
        const int hi = v[0] > 0 ? 0 : 1;
        const P q[4] = {cross[0], cross[1], cross[2], cross[3]};
        const double inner = std::abs((q[0] - q[2])[0] * (q[1] - q[3])[1] - (q[0] - q[2])[1] * (q[1] - q[3])[0]) / 2;
        area -= inner;
        m.perimeter += h * ((cross[hi] - cross[(hi + 3) % 4]).norm() + (cross[hi + 1] - cross[hi + 2]).norm());
      }
      m.area += h * h * area;
    }
  return m;
}

}  // namespace sso
