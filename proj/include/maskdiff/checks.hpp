#ifndef MASKDIFF_CHECKS_HPP
#define MASKDIFF_CHECKS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "maskdiff/state_space.hpp"

namespace maskdiff {

// Exhaustive forward-process invariants over a list of (d, K) sizes:
// rate-column conservation, kernel row normalization, the
// Chapman-Kolmogorov identity, and the finite-difference generator
// limit.  Violations are reported as maxima so slack is visible.
struct ForwardInvariantReport {
  double max_column_violation = 0.0;
  double max_row_violation = 0.0;
  double max_chapman_violation = 0.0;
  double max_generator_violation = 0.0;

  bool pass(double closed_form_tol, double finite_difference_tol) const {
    return max_column_violation <= closed_form_tol && max_row_violation <= closed_form_tol &&
           max_chapman_violation <= closed_form_tol &&
           max_generator_violation <= finite_difference_tol;
  }
};
ForwardInvariantReport check_forward_invariants(
    const std::vector<std::pair<int, int>>& sizes, std::uint64_t seed);

// Initialization bound (exponentially decreasing KL): random sparse
// targets with d <= 5, K <= 4 on the grid t in {0.5, 1, ..., 8}, plus
// the mixing-time rule t = ln(4d/eps) at eps in {0.1, 0.01}.
struct InitBoundReport {
  int points_checked = 0;
  int violations = 0;
  double max_kl_minus_bound = -1e300;  // <= 0 means the bound held everywhere
  double max_ratio = 0.0;              // worst kl / bound
  double mixing_kl_at_01 = 0.0;        // kl at t = ln(4d/0.1), worst target
  double mixing_kl_at_001 = 0.0;
};
InitBoundReport check_init_bound(int num_targets, std::uint64_t seed);

// Outgoing-rate bound and the reverse density-ratio bound with the
// exact oracle on (d, K) = (3, 3) over a uniform time grid.
struct RateBoundReport {
  int points_checked = 0;
  int violations = 0;
  double max_outgoing_over_beta = 0.0;  // <= 1 passes
  double max_score_over_limit = 0.0;    // score * (e^{T-t} - 1), <= 1 passes
};
RateBoundReport check_rate_bounds(int grid_points, std::uint64_t seed);

}  // namespace maskdiff

#endif  // MASKDIFF_CHECKS_HPP
