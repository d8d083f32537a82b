#include "tfgw/exact_ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tfgw {

namespace {

constexpr double kMarginalTolerance = 1e-9;
constexpr double kPerturbation = 1e-10;
constexpr double kCleanThreshold = 1e-15;

void check_inputs(const Matrix& cost, const Vector& source, const Vector& target) {
  if (cost.rows() != source.size() || cost.cols() != target.size())
    throw ValidationError("cost matrix shape does not match the marginals");
  if (source.size() == 0 || target.size() == 0) throw ValidationError("empty marginal");
  if (!cost.allFinite()) throw ValidationError("cost matrix has non-finite entries");
  for (const Vector* v : {&source, &target}) {
    if (!v->allFinite() || (v->array() < 0.0).any()) throw ValidationError("marginals must be finite and nonnegative");
    if (std::abs(v->sum() - 1.0) > kMarginalTolerance) throw ValidationError("marginals must sum to 1");
  }
}

/// Spanning-tree basis of the bipartite transportation graph. Row i is node i,
/// column j is node rows + j; arc ids are row-major (i * cols + j).
class TransportTree {
public:
  TransportTree(int rows, int cols) : rows_(rows), cols_(cols), start_(rows + cols + 1) {}

  int row_of(int arc) const { return arc / cols_; }
  int col_of(int arc) const { return arc % cols_; }
  int col_node(int arc) const { return rows_ + col_of(arc); }

  void rebuild(const std::vector<int>& basis) {
    std::fill(start_.begin(), start_.end(), 0);
    for (int arc : basis) {
      ++start_[row_of(arc) + 1];
      ++start_[col_node(arc) + 1];
    }
    for (int node = 0; node < rows_ + cols_; ++node) start_[node + 1] += start_[node];
    incident_.resize(2 * basis.size());
    fill_ = start_;
    for (int arc : basis) {
      incident_[fill_[row_of(arc)]++] = arc;
      incident_[fill_[col_node(arc)]++] = arc;
    }
  }

  struct Range {
    const int* first;
    const int* last;
    const int* begin() const { return first; }
    const int* end() const { return last; }
  };
  Range incident(int node) const { return {incident_.data() + start_[node], incident_.data() + start_[node + 1]}; }

  /// Dual potentials with u_0 = 0 so that u_i + v_j = c_ij on every basic arc.
  void potentials(const Matrix& cost, std::vector<double>& u, std::vector<double>& v) {
    seen_.assign(rows_ + cols_, false);
    u.assign(rows_, 0.0);
    v.assign(cols_, 0.0);
    stack_.clear();
    stack_.push_back(0);
    seen_[0] = true;
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      for (int arc : incident(node)) {
        const int i = row_of(arc), j = col_of(arc);
        const int other = node < rows_ ? rows_ + j : i;
        if (seen_[other]) continue;
        seen_[other] = true;
        if (node < rows_) v[j] = cost(i, j) - u[i];
        else u[i] = cost(i, j) - v[j];
        stack_.push_back(other);
      }
    }
  }

  /// Arcs on the tree path from `to` back to `from`, ordered starting next to `to`.
  std::vector<int> path(int from, int to) {
    parent_arc_.assign(rows_ + cols_, -1);
    seen_.assign(rows_ + cols_, false);
    stack_.clear();
    stack_.push_back(from);
    seen_[from] = true;
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      if (node == to) break;
      for (int arc : incident(node)) {
        const int other = node < rows_ ? col_node(arc) : row_of(arc);
        if (seen_[other]) continue;
        seen_[other] = true;
        parent_arc_[other] = arc;
        stack_.push_back(other);
      }
    }
    std::vector<int> arcs;
    for (int node = to; node != from;) {
      const int arc = parent_arc_[node];
      arcs.push_back(arc);
      node = node < rows_ ? col_node(arc) : row_of(arc);
    }
    return arcs;
  }

  /// Basic flows for the given marginals, obtained by peeling leaves.
  void solve_flows(const std::vector<int>& basis, const std::vector<double>& supply,
                   const std::vector<double>& demand, std::vector<double>& flow) {
    std::vector<double> remaining(supply);
    remaining.insert(remaining.end(), demand.begin(), demand.end());
    std::vector<int> degree(rows_ + cols_, 0);
    for (int arc : basis) {
      ++degree[row_of(arc)];
      ++degree[col_node(arc)];
    }
    std::vector<char> done(static_cast<std::size_t>(rows_) * cols_, 1);
    for (int arc : basis) done[arc] = 0;
    std::vector<int> leaves;
    for (int node = 0; node < rows_ + cols_; ++node)
      if (degree[node] == 1) leaves.push_back(node);
    while (!leaves.empty()) {
      const int node = leaves.back();
      leaves.pop_back();
      if (degree[node] != 1) continue;
      for (int arc : incident(node)) {
        if (done[arc]) continue;
        done[arc] = 1;
        const int other = node < rows_ ? col_node(arc) : row_of(arc);
        flow[arc] = remaining[node];
        remaining[other] -= remaining[node];
        remaining[node] = 0.0;
        --degree[node];
        if (--degree[other] == 1) leaves.push_back(other);
        break;
      }
    }
  }

private:
  int rows_, cols_;
  std::vector<int> start_, fill_, incident_;
  std::vector<bool> seen_;
  std::vector<int> stack_;
  std::vector<int> parent_arc_;
};

}  // namespace

OtResult solve_exact_ot(const Matrix& cost, const Vector& source, const Vector& target,
                        const std::vector<int>* warm_basis) {
  check_inputs(cost, source, target);
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  const int arcs = rows * cols;

  std::vector<double> supply(source.data(), source.data() + rows);
  std::vector<double> demand(target.data(), target.data() + cols);
  std::vector<double> perturbed_supply(supply), perturbed_demand(demand);
  for (auto& s : perturbed_supply) s += kPerturbation;
  perturbed_demand.back() += rows * kPerturbation;

  // North-west corner staircase; always n + m - 1 arcs.
  std::vector<int> basis;
  basis.reserve(static_cast<std::size_t>(rows + cols - 1));
  if (warm_basis) {
    if (static_cast<int>(warm_basis->size()) != rows + cols - 1) throw ValidationError("warm basis has wrong size");
    basis = *warm_basis;
  } else {
    int i = 0, j = 0;
    double left_supply = perturbed_supply[0], left_demand = perturbed_demand[0];
    while (true) {
      basis.push_back(i * cols + j);
      if (i == rows - 1 && j == cols - 1) break;
      const bool advance_row = j == cols - 1 || (i < rows - 1 && left_supply < left_demand);
      if (advance_row) {
        left_demand -= left_supply;
        left_supply = perturbed_supply[++i];
      } else {
        left_supply -= left_demand;
        left_demand = perturbed_demand[++j];
      }
    }
  }

  std::vector<double> flow(static_cast<std::size_t>(arcs), 0.0);
  std::vector<char> in_basis(static_cast<std::size_t>(arcs), 0);
  for (int arc : basis) in_basis[arc] = 1;
  TransportTree tree(rows, cols);
  tree.rebuild(basis);
  tree.solve_flows(basis, perturbed_supply, perturbed_demand, flow);
  if (warm_basis && *std::min_element(flow.begin(), flow.end()) < 0.0)
    throw ValidationError("warm basis is not primal feasible for these marginals");

  // Reduced-cost threshold relative to the cost range keeps the pivot sequence
  // unchanged under positive scaling and constant shifts of the cost. Differences
  // at roundoff level of the entries themselves are not pivoted on, so a cost that
  // is constant up to rounding keeps the starting basis.
  const double range = cost.maxCoeff() - cost.minCoeff();
  const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * cost.cwiseAbs().maxCoeff();
  const bool flat = range <= roundoff;
  const double tolerance = 1e-12 * range;

  std::vector<double> u, v;
  OtResult result;
  int scan_start = 0;
  const long long max_pivots = 1000LL + 50LL * arcs * (rows + cols);
  while (true) {
    tree.potentials(cost, u, v);
    int entering = -1;
    if (!flat) {
      int i = scan_start / cols, j = scan_start % cols;
      for (int step = 0, arc = scan_start; step < arcs; ++step) {
        if (!in_basis[arc] && cost(i, j) - u[i] - v[j] < -tolerance) {
          entering = arc;
          break;
        }
        if (++arc == arcs) arc = 0;
        if (++j == cols) {
          j = 0;
          if (++i == rows) i = 0;
        }
      }
    }
    if (entering < 0) break;
    scan_start = (entering + 1) % arcs;
    if (++result.pivots > max_pivots) throw std::runtime_error("transportation simplex exceeded its pivot budget");

    const int ei = entering / cols, ej = entering % cols;
    // Cycle: +entering, then alternating -/+ from column ej back to row ei.
    const auto cycle = tree.path(ei, rows + ej);
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const int arc = cycle[k];
      if (flow[arc] < theta || (flow[arc] == theta && arc < leaving)) {
        theta = flow[arc];
        leaving = arc;
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t k = 0; k < cycle.size(); ++k) flow[cycle[k]] += (k % 2 == 0) ? -theta : theta;
    flow[entering] = theta;
    flow[leaving] = 0.0;
    in_basis[leaving] = 0;
    in_basis[entering] = 1;
    *std::find(basis.begin(), basis.end(), leaving) = entering;
    tree.rebuild(basis);
  }

  if (!flat) {
    for (int arc = 0; arc < arcs && !result.ties; ++arc) {
      if (in_basis[arc]) continue;
      const int i = arc / cols, j = arc % cols;
      if (cost(i, j) - u[i] - v[j] <= tolerance) result.ties = true;
    }
  } else {
    result.ties = arcs > 1;
  }

  // Exact basic solution for the unperturbed marginals.
  std::fill(flow.begin(), flow.end(), 0.0);
  tree.solve_flows(basis, supply, demand, flow);
  Matrix plan = Matrix::Zero(rows, cols);
  for (int arc : basis) {
    const double x = flow[arc];
    plan(arc / cols, arc % cols) = x < kCleanThreshold ? 0.0 : x;
  }
  result.objective = (cost.array() * plan.array()).sum();
  result.coupling = Coupling{std::move(plan), source, target};
  result.basis = std::move(basis);
  return result;
}

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

double brute_force_ot(const Matrix& cost, const Vector& source, const Vector& target) {
  check_inputs(cost, source, target);
  const int rows = static_cast<int>(cost.rows()), cols = static_cast<int>(cost.cols());
  if (rows > 4 || cols > 4) throw ValidationError("brute_force_ot is limited to 4x4 problems");
  const int arcs = rows * cols;
  const int basis_size = rows + cols - 1;

  // Equality constraints A x = b over all arcs; a support's basic solution
  // solves the restricted system exactly.
  Matrix constraints = Matrix::Zero(rows + cols, arcs);
  Vector rhs(rows + cols);
  for (int i = 0; i < rows; ++i) rhs(i) = source(i);
  for (int j = 0; j < cols; ++j) rhs(rows + j) = target(j);
  for (int a = 0; a < arcs; ++a) {
    constraints(a / cols, a) = 1.0;
    constraints(rows + a % cols, a) = 1.0;
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> chosen;
  auto visit = [&](auto&& self, int next) -> void {
    if (static_cast<int>(chosen.size()) == basis_size) {
      std::vector<int> parent(static_cast<std::size_t>(rows + cols));
      for (int k = 0; k < rows + cols; ++k) parent[k] = k;
      for (int a : chosen) {
        const int r1 = find_root(parent, a / cols), r2 = find_root(parent, rows + a % cols);
        if (r1 == r2) return;  // cycle: not a tree support
        parent[r1] = r2;
      }
      Matrix sub(rows + cols, basis_size);
      for (int k = 0; k < basis_size; ++k) sub.col(k) = constraints.col(chosen[k]);
      const Vector x = sub.fullPivHouseholderQr().solve(rhs);
      if ((sub * x - rhs).cwiseAbs().maxCoeff() > 1e-12) return;
      if (x.minCoeff() < -1e-13) return;
      double value = 0.0;
      for (int k = 0; k < basis_size; ++k) value += cost(chosen[k] / cols, chosen[k] % cols) * std::max(0.0, x(k));
      best = std::min(best, value);
      return;
    }
    const int needed = basis_size - static_cast<int>(chosen.size());
    for (int a = next; a <= arcs - needed; ++a) {
      chosen.push_back(a);
      self(self, a + 1);
      chosen.pop_back();
    }
  };
  visit(visit, 0);
  return best;
}

double marginal_violation(const Coupling& c) {
  const double rows = (c.plan.rowwise().sum() - c.source_marginal).cwiseAbs().maxCoeff();
  const double cols = (c.plan.colwise().sum().transpose() - c.target_marginal).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

}  // namespace tfgw
