#pragma once

#include <Eigen/Dense>

#include <vector>

#include "sso/grid.hpp"

namespace sso {

// Mask nodes with an axis neighbour outside the mask.
Mask inner_boundary(const Grid& grid, const Mask& mask);

// Inside-D nodes not in the mask with an axis neighbour in the mask.
Mask outer_boundary(const Grid& grid, const Mask& mask);

// Square-stencil dilation by `radius` nodes, clipped to the node array.
Mask dilate(const Grid& grid, const Mask& mask, int radius);

// Number of 4-connected components; optional per-node labels (-1 off mask).
int count_components(const Grid& grid, const Mask& mask, std::vector<int>* labels = nullptr);

Mask largest_component(const Grid& grid, const Mask& mask);

// Euclidean distance from every node to the nearest node of `target`
// (+inf everywhere when the target is empty).
Eigen::VectorXd distance_to(const Grid& grid, const Mask& target);

struct ContourMetrics {
  double area = 0;
  double perimeter = 0;
  double circularity() const;
};

// Marching squares on the 0/1 indicator at level 1/2 (2D only).
ContourMetrics contour_metrics(const Grid& grid, const Mask& mask);

}  // namespace sso
