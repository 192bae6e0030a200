#pragma once

#include <vector>

#include "sso/grid.hpp"

namespace sso {

// A two-phase configuration: u = u+ - u- with u+- the unit-norm first
// eigenfunctions of mask_plus / mask_minus.
template <typename Scalar>
struct BasicPhaseState {
  BasicField<Scalar> u;
  Mask mask_plus;
  Mask mask_minus;
  Scalar lambda1_plus = 0;
  Scalar lambda1_minus = 0;
  Scalar lambda2 = 0;  // second eigenvalue of mask_plus | mask_minus
  // Limit weights of the optimality condition, a_plus + a_minus = 1. The raw
  // per-phase estimates are kept for reporting before clamping/normalizing.
  Scalar a_plus = Scalar(0.5);
  Scalar a_minus = Scalar(0.5);
  Scalar a_plus_raw = Scalar(0.5);
  Scalar a_minus_raw = Scalar(0.5);
  Scalar lambda = 0;  // volume weight
  Scalar objective = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<Scalar> history;  // objective per outer iteration
  // Relaxed backend: history indices where a continuation stage (new p or
  // smoothing width) starts; the objective is monotone within a stage.
  std::vector<int> stage_breaks;

  explicit BasicPhaseState(GridPtr<Scalar> grid)
      : u(grid),
        mask_plus(Mask::Constant(grid->size(), false)),
        mask_minus(Mask::Constant(grid->size(), false)) {}

  const BasicGrid<Scalar>& grid() const { return u.grid(); }
  const GridPtr<Scalar>& grid_ptr() const { return u.grid_ptr(); }
  Scalar volume() const { return Scalar((mask_plus || mask_minus).count()) * grid().cell_volume(); }
};

using PhaseState = BasicPhaseState<double>;

}  // namespace sso
