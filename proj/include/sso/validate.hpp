#pragma once

#include <string>
#include <vector>

#include "sso/diagnostics.hpp"
#include "sso/optimizer.hpp"

namespace sso {

// One row of a validation table.
struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// A reference solve kept around so several checks can inspect it.
struct SolvedCase {
  std::string label;
  PhaseState state;
  double seconds = 0;
};

// D = (0, 6), lambda = 1, h = 1/100.
SolvedCase onedim_case(Backend backend);
// D = (0, 6) x (0, 3), lambda = 1, h = 1/32, multiphase.
SolvedCase twodim_case();
// D = (0, 2) x (0, 1), lambda = 8, seed balls of radius 0.3: the phases
// meet along a vertical interface away from the walls.
SolvedCase contact_case(int nodes_per_unit = 32);

Check square_eigen_check();
Check interval_eigen_check();
Check onedim_check(const SolvedCase& c);
Check twodim_check(const SolvedCase& c);
// Energy balance, eigenvalue match and inward removal.
Check identity_check(const SolvedCase& c, const DiagnosticsReport& r);
Check contact_distance_check(const SolvedCase& c, const DiagnosticsReport& r);
Check variation_check();
Check functional_check();
Check partition_check(int dimension);
Check weiss_homogeneous_check();
Check weiss_contact_check(const SolvedCase& c, const DiagnosticsReport& r);
Check blowup_contact_check(const SolvedCase& c, const DiagnosticsReport& r);
Check fit_exactness_check();

const std::vector<std::string>& suite_names();
// Throws InvalidArgument for an unknown suite.
std::vector<Check> run_suite(const std::string& name);

}  // namespace sso
