#include "tfgw/fgw.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace tfgw {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
}

void check_shapes(const Matrix& structure, const Matrix& template_structure, const Matrix& plan) {
  if (structure.rows() != structure.cols() || template_structure.rows() != template_structure.cols())
    throw ValidationError("structure matrices must be square");
  if (plan.rows() != structure.rows() || plan.cols() != template_structure.rows())
    throw ValidationError("coupling shape does not match the structures");
}

void check_features(const Matrix& features, const Matrix& template_features) {
  if (features.cols() != template_features.cols()) throw ValidationError("feature dimensions differ");
}

/// <T^T C T, Cbar> computed as sum((C T) .* (T Cbar)).
double cross_term(const Matrix& structure, const Matrix& template_structure, const Matrix& plan) {
  return ((structure * plan).array() * (plan * template_structure).array()).sum();
}

}  // namespace

void validate_options(const CgOptions& options) {
  if (options.max_iterations < 1) throw ValidationError("max_iterations must be at least 1");
  if (!(options.relative_tolerance > 0.0)) throw ValidationError("relative_tolerance must be positive");
  if (options.restarts < 1) throw ValidationError("restarts must be at least 1");
}

Matrix feature_cost(const Matrix& features, const Matrix& template_features) {
  check_features(features, template_features);
  const auto n = features.rows(), m = template_features.rows();
  Matrix cost(n, m);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index i = 0; i < n; ++i) cost(i, k) = (features.row(i) - template_features.row(k)).squaredNorm();
  return cost;
}

FgwCost fgw_cost_with_feature_cost(const Matrix& structure, const Matrix& template_structure, const Matrix& cost,
                                   double alpha, const Matrix& plan) {
  check_alpha(alpha);
  check_shapes(structure, template_structure, plan);
  if (cost.rows() != plan.rows() || cost.cols() != plan.cols()) throw ValidationError("feature cost shape mismatch");
  const Vector h = plan.rowwise().sum();
  const Vector hbar = plan.colwise().sum().transpose();
  const double own = h.dot(structure.cwiseProduct(structure) * h);
  const double other = hbar.dot(template_structure.cwiseProduct(template_structure) * hbar);
  FgwCost out;
  out.gw_part = std::max(0.0, own + other - 2.0 * cross_term(structure, template_structure, plan));
  out.w_part = std::max(0.0, (cost.array() * plan.array()).sum());
  out.total = alpha * out.gw_part + (1.0 - alpha) * out.w_part;
  return out;
}

FgwCost fgw_cost(const Matrix& structure, const Matrix& features, const Matrix& template_structure,
                 const Matrix& template_features, double alpha, const Matrix& plan) {
  check_shapes(structure, template_structure, plan);
  if (features.rows() != structure.rows() || template_features.rows() != template_structure.rows())
    throw ValidationError("feature rows do not match node counts");
  return fgw_cost_with_feature_cost(structure, template_structure, feature_cost(features, template_features), alpha,
                                    plan);
}

double fgw_cost_naive(const Matrix& structure, const Matrix& features, const Matrix& template_structure,
                      const Matrix& template_features, double alpha, const Matrix& plan) {
  check_alpha(alpha);
  check_shapes(structure, template_structure, plan);
  check_features(features, template_features);
  const auto n = structure.rows(), m = template_structure.rows();
  if (n * m > 64) throw ValidationError("fgw_cost_naive is limited to n * m <= 64");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < m; ++k) {
      const double feature_gap = (features.row(i) - template_features.row(k)).squaredNorm();
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index l = 0; l < m; ++l) {
          const double gap = structure(i, j) - template_structure(k, l);
          total += (alpha * gap * gap + (1.0 - alpha) * feature_gap) * plan(i, k) * plan(j, l);
        }
    }
  return total;
}

Matrix cg_linearized_gradient_with_feature_cost(const Matrix& structure, const Matrix& template_structure,
                                                const Matrix& cost, double alpha, const Matrix& plan) {
  check_alpha(alpha);
  check_shapes(structure, template_structure, plan);
  const Vector h = plan.rowwise().sum();
  const Vector hbar = plan.colwise().sum().transpose();
  const Vector own = structure.cwiseProduct(structure) * h;
  const Vector other = template_structure.cwiseProduct(template_structure) * hbar;
  Matrix grad = -2.0 * (structure * plan * template_structure);
  grad.colwise() += own;
  grad.rowwise() += other.transpose();
  return 2.0 * alpha * grad + (1.0 - alpha) * cost;
}

Matrix cg_linearized_gradient(const Matrix& structure, const Matrix& features, const Matrix& template_structure,
                              const Matrix& template_features, double alpha, const Matrix& plan) {
  return cg_linearized_gradient_with_feature_cost(structure, template_structure,
                                                  feature_cost(features, template_features), alpha, plan);
}

LineSearch exact_line_search(const Matrix& plan, const Matrix& direction, const Matrix& structure,
                             const Matrix& template_structure, double alpha, const Matrix& cost) {
  check_alpha(alpha);
  check_shapes(structure, template_structure, plan);
  if (direction.rows() != plan.rows() || direction.cols() != plan.cols())
    throw ValidationError("direction shape mismatch");
  LineSearch ls;
  const Matrix c_dir = structure * direction;
  ls.a = -2.0 * alpha * (c_dir.array() * (direction * template_structure).array()).sum();
  const Matrix c_plan_cbar = structure * plan * template_structure;
  ls.b = -4.0 * alpha * (c_plan_cbar.array() * direction.array()).sum() +
         (1.0 - alpha) * (cost.array() * direction.array()).sum();
  ls.c = fgw_cost_with_feature_cost(structure, template_structure, cost, alpha, plan).total;
  if (ls.a > 0.0) {
    ls.tau = std::clamp(-ls.b / (2.0 * ls.a), 0.0, 1.0);
  } else {
    ls.tau = ls.a + ls.b < 0.0 ? 1.0 : 0.0;
  }
  return ls;
}

namespace {

/// C * P for a coupling supported on an LP basis.
Matrix left_product_on_basis(const Matrix& structure, const Matrix& plan, const std::vector<int>& basis) {
  const auto cols = plan.cols();
  Matrix out = Matrix::Zero(structure.rows(), cols);
  for (int arc : basis) {
    const auto i = arc / cols, k = arc % cols;
    if (plan(i, k) != 0.0) out.col(k) += plan(i, k) * structure.col(i);
  }
  return out;
}

/// P * Cbar for a coupling supported on an LP basis.
Matrix right_product_on_basis(const Matrix& template_structure, const Matrix& plan, const std::vector<int>& basis) {
  const auto cols = plan.cols();
  Matrix out = Matrix::Zero(plan.rows(), template_structure.cols());
  for (int arc : basis) {
    const auto i = arc / cols, k = arc % cols;
    if (plan(i, k) != 0.0) out.row(i) += plan(i, k) * template_structure.row(k);
  }
  return out;
}

FgwResult run_conditional_gradient(const Matrix& structure, const Vector& weights, const Matrix& template_structure,
                                   const Vector& template_weights, const Matrix& cost, double alpha, Matrix plan,
                                   const CgOptions& options) {
  check_shapes(structure, template_structure, plan);
  FgwResult result;
  FgwCost current = fgw_cost_with_feature_cost(structure, template_structure, cost, alpha, plan);
  if (options.record_trace) result.trace.push_back(current.total);

  // Every iterate keeps the marginals, so the squared-structure terms are fixed.
  const Vector own = structure.cwiseProduct(structure) * weights;
  const Vector other = template_structure.cwiseProduct(template_structure) * template_weights;
  const double constant = weights.dot(own) + template_weights.dot(other);
  Matrix c_plan = structure * plan;
  Matrix plan_cbar = plan * template_structure;
  Matrix c_plan_cbar = c_plan * template_structure;

  std::vector<int> basis;
  for (int it = 1; it <= options.max_iterations; ++it) {
    Matrix grad = -2.0 * c_plan_cbar;
    grad.colwise() += own;
    grad.rowwise() += other.transpose();
    grad = 2.0 * alpha * grad + (1.0 - alpha) * cost;
    OtResult lp = solve_exact_ot(grad, weights, template_weights, basis.empty() ? nullptr : &basis);
    basis = std::move(lp.basis);
    result.degenerate = lp.ties;
    const Matrix& vertex = lp.coupling.plan;
    const Matrix direction = vertex - plan;
    const Matrix c_dir = left_product_on_basis(structure, vertex, basis) - c_plan;
    const Matrix dir_cbar = right_product_on_basis(template_structure, vertex, basis) - plan_cbar;

    const double a = -2.0 * alpha * (c_dir.array() * dir_cbar.array()).sum();
    const double b = -4.0 * alpha * (c_plan_cbar.array() * direction.array()).sum() +
                     (1.0 - alpha) * (cost.array() * direction.array()).sum();
    double tau;
    if (a > 0.0) tau = std::clamp(-b / (2.0 * a), 0.0, 1.0);
    else tau = a + b < 0.0 ? 1.0 : 0.0;
    if (tau <= 0.0) {
      result.converged = true;
      break;
    }

    Matrix next = plan + tau * direction;
    Matrix next_c_plan = c_plan + tau * c_dir;
    Matrix next_plan_cbar = plan_cbar + tau * dir_cbar;
    FgwCost next_cost;
    next_cost.gw_part = std::max(0.0, constant - 2.0 * (next_c_plan.array() * next_plan_cbar.array()).sum());
    next_cost.w_part = std::max(0.0, (cost.array() * next.array()).sum());
    next_cost.total = alpha * next_cost.gw_part + (1.0 - alpha) * next_cost.w_part;
    if (next_cost.total > current.total) {
      result.converged = true;
      break;
    }
    const double decrease = current.total - next_cost.total;
    plan = std::move(next);
    c_plan = std::move(next_c_plan);
    plan_cbar = std::move(next_plan_cbar);
    c_plan_cbar = c_plan * template_structure;
    current = next_cost;
    result.iterations = it;
    if (options.record_trace) result.trace.push_back(current.total);
    if (current.total == 0.0 || decrease <= options.relative_tolerance * std::abs(current.total)) {
      result.converged = true;
      break;
    }
  }
  current = fgw_cost_with_feature_cost(structure, template_structure, cost, alpha, plan);
  result.value = current.total;
  result.gw_part = current.gw_part;
  result.w_part = current.w_part;
  result.coupling = Coupling{std::move(plan), weights, template_weights};
  return result;
}

}  // namespace

FgwResult solve_fgw(const Matrix& structure, const Vector& weights, const Matrix& template_structure,
                    const Vector& template_weights, const Matrix& cost, double alpha, const CgOptions& options) {
  check_alpha(alpha);
  validate_options(options);
  const auto n = structure.rows(), m = template_structure.rows();
  if (weights.size() != n || template_weights.size() != m) throw ValidationError("weights do not match node counts");
  if (cost.rows() != n || cost.cols() != m) throw ValidationError("feature cost shape mismatch");
  for (const Vector* w : {&weights, &template_weights})
    if ((w->array() < 0.0).any() || std::abs(w->sum() - 1.0) > 1e-9)
      throw ValidationError("node weights must lie on the simplex");

  Matrix start;
  if (options.init == InitialCoupling::Provided) {
    start = options.initial_plan;
    if (start.rows() != n || start.cols() != m) throw ValidationError("initial coupling shape mismatch");
    if (marginal_violation(Coupling{start, weights, template_weights}) > 1e-9)
      throw ValidationError("initial coupling violates the marginals");
  } else {
    start = weights * template_weights.transpose();
  }
  FgwResult best =
      run_conditional_gradient(structure, weights, template_structure, template_weights, cost, alpha, start, options);

  std::mt19937_64 rng(options.restart_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 1; r < options.restarts; ++r) {
    Matrix random_cost(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < m; ++k) random_cost(i, k) = unit(rng);
    Matrix vertex = solve_exact_ot(random_cost, weights, template_weights).coupling.plan;
    FgwResult candidate = run_conditional_gradient(structure, weights, template_structure, template_weights, cost,
                                                   alpha, std::move(vertex), options);
    if (candidate.value < best.value) best = std::move(candidate);
  }
  return best;
}

FgwResult solve_fgw(const Graph& graph, const Graph& target, double alpha, const CgOptions& options) {
  if (graph.feature_dim() != target.feature_dim()) throw ValidationError("feature dimensions differ");
  return solve_fgw(graph.structure, graph.weights, target.structure, target.weights,
                   feature_cost(graph.features, target.features), alpha, options);
}

}  // namespace tfgw
