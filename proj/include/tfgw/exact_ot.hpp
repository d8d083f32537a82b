#pragma once

#include <vector>

#include "tfgw/types.hpp"

namespace tfgw {

/// Transport plan with its prescribed marginals.
struct Coupling {
  Matrix plan;
  Vector source_marginal;
  Vector target_marginal;
};

struct OtResult {
  Coupling coupling;
  double objective = 0.0;
  int pivots = 0;
  /// Some nonbasic arc has zero reduced cost at the optimum, so the
  /// optimal plan may not be unique.
  bool ties = false;
  /// Final spanning-tree basis (row-major arc ids); reusable as a warm start
  /// for another cost with the same marginals.
  std::vector<int> basis;
};

/// Exact minimiser of <cost, T> over couplings of (source, target).
///
/// Transportation simplex on the bipartite spanning-tree basis. The entering
/// arc is the first arc (row-major order) with negative reduced cost and the
/// leaving arc is the blocking arc of smallest index. Marginals are perturbed
/// internally so that no basis is degenerate; the reported plan is the exact
/// basic solution of the final basis for the unperturbed marginals.
/// `warm_basis`, when given, replaces the north-west corner start and must be
/// a basis returned by an earlier solve with the same marginals.
OtResult solve_exact_ot(const Matrix& cost, const Vector& source, const Vector& target,
                        const std::vector<int>* warm_basis = nullptr);

/// Reference value by enumeration of every basic feasible solution
/// (spanning-tree supports). Limited to 4x4 problems.
double brute_force_ot(const Matrix& cost, const Vector& source, const Vector& target);

/// Max absolute deviation of the plan's row/column sums from its marginals.
double marginal_violation(const Coupling& c);

}  // namespace tfgw
