#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sso/grid.hpp"
#include "sso/state.hpp"

namespace sso {

enum class Backend { relaxed, multiphase };
enum class InitKind { two_balls, random, file };

struct SolverConfig {
  double lambda = 1;
  Backend backend = Backend::multiphase;
  std::vector<double> p_schedule{2, 4, 8, 16, 32};
  // Final width of the smoothed volume; 0 selects 0.05 * sqrt(lambda) * h.
  double eps_vol = 0;
  double fidelity_weight = 0;
  double step_size = 1;
  int max_outer_iters = 500;
  int max_inner_iters = 400;
  double tol_objective = 1e-9;
  double kappa = 0.5;
  unsigned seed = 0;
  InitKind init = InitKind::two_balls;
  // two_balls: empty centers select 1/4 and 3/4 of the box width at mid height.
  std::vector<Point> centers;
  double radius = 0.8;
  std::string init_path;  // init = file: a run directory or a u.csv
  // Relaxed backend only: pin the support of v to this mask. This is the one
  // case where lambda = 0 is accepted.
  std::optional<Mask> frozen_support;
};

// Throws InvalidArgument naming the offending field.
void validate(const SolverConfig& config);

// Eigensolves on the two masks and fills every derived field of the state
// (u, eigenvalues, lambda_2 of the union, weights, objective).
PhaseState evaluate_masks(const GridPtr<double>& grid, const Mask& plus, const Mask& minus, double lambda);

// Variational estimate of the limit weights a+- from dilation-type fields
// supported on the one-phase part of each phase; see optimizer.cpp.
void estimate_weights(PhaseState& state);

PhaseState initialize(const SolverConfig& config, const GridPtr<double>& grid);

PhaseState solve_multiphase(const SolverConfig& config, const GridPtr<double>& grid);
PhaseState solve_relaxed(const SolverConfig& config, const GridPtr<double>& grid);
PhaseState solve(const SolverConfig& config, const GridPtr<double>& grid);

// u+ - u- from the first eigenfunctions of the two masks.
Field assemble_sign_split(const PhaseState& state);

}  // namespace sso
