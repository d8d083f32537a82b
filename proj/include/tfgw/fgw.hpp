#pragma once

#include <cstdint>
#include <optional>

#include "tfgw/exact_ot.hpp"
#include "tfgw/graph.hpp"

namespace tfgw {

struct FgwCost {
  double total = 0.0;
  double gw_part = 0.0;
  double w_part = 0.0;
};

struct FgwResult {
  double value = 0.0;
  Coupling coupling;
  double gw_part = 0.0;
  double w_part = 0.0;
  int iterations = 0;
  bool converged = false;
  /// The linear subproblem at the returned coupling had tied optima; the
  /// distance is not differentiable there in general.
  bool degenerate = false;
  /// Cost after initialisation and after every iteration (non-increasing).
  std::vector<double> trace;
};

enum class InitialCoupling : std::uint8_t { Product, Provided };

struct CgOptions {
  int max_iterations = 1000;
  double relative_tolerance = 1e-9;
  InitialCoupling init = InitialCoupling::Product;
  /// Used when init == Provided; must lie in U(h, h_bar).
  Matrix initial_plan;
  /// Extra starts from random vertices of U(h, h_bar); the best value is kept.
  int restarts = 1;
  std::uint64_t restart_seed = 0;
  bool record_trace = false;
};

void validate_options(const CgOptions& options);

/// Squared Euclidean feature cost M_ik = ||f_i - fbar_k||^2.
Matrix feature_cost(const Matrix& features, const Matrix& template_features);

/// FGW cost of a coupling using the factored GW form
/// <C^2 h, h> + <Cbar^2 hbar, hbar> - 2 <T^T C T, Cbar>, with h, hbar the
/// marginals of T.
FgwCost fgw_cost(const Matrix& structure, const Matrix& features, const Matrix& template_structure,
                 const Matrix& template_features, double alpha, const Matrix& plan);

/// Same, with a precomputed feature cost matrix.
FgwCost fgw_cost_with_feature_cost(const Matrix& structure, const Matrix& template_structure,
                                   const Matrix& cost, double alpha, const Matrix& plan);

/// Literal quadruple sum over (i, j, k, l); reference for small problems.
double fgw_cost_naive(const Matrix& structure, const Matrix& features, const Matrix& template_structure,
                      const Matrix& template_features, double alpha, const Matrix& plan);

/// Gradient of the FGW cost in T:
/// 2 alpha [(C^2 h)_i + (Cbar^2 hbar)_k - 2 (C T Cbar)_ik] + (1 - alpha) M_ik.
Matrix cg_linearized_gradient(const Matrix& structure, const Matrix& features, const Matrix& template_structure,
                              const Matrix& template_features, double alpha, const Matrix& plan);

Matrix cg_linearized_gradient_with_feature_cost(const Matrix& structure, const Matrix& template_structure,
                                                const Matrix& cost, double alpha, const Matrix& plan);

/// q(tau) = a tau^2 + b tau + c along T + tau * direction.
struct LineSearch {
  double tau = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Exact minimiser of the quadratic cost over tau in [0, 1]. The direction
/// must have zero row and column sums.
LineSearch exact_line_search(const Matrix& plan, const Matrix& direction, const Matrix& structure,
                             const Matrix& template_structure, double alpha, const Matrix& cost);

/// Conditional gradient (Frank-Wolfe) with exact line search. Returns a
/// stationary value, an upper bound on the FGW distance.
FgwResult solve_fgw(const Graph& graph, const Graph& target, double alpha, const CgOptions& options = {});

/// Same solve on raw triples; `cost` is the feature cost matrix.
FgwResult solve_fgw(const Matrix& structure, const Vector& weights, const Matrix& template_structure,
                    const Vector& template_weights, const Matrix& cost, double alpha,
                    const CgOptions& options = {});

}  // namespace tfgw
