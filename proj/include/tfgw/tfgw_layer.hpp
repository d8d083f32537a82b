#pragma once

#include <utility>
#include <vector>

#include "tfgw/fgw.hpp"
#include "tfgw/graph.hpp"

namespace tfgw {

/// Learnable template graph (Cbar, Fbar, hbar). Nodes whose weight is exactly
/// zero are pruned from every solve but keep their slot.
struct Template {
  Matrix structure;
  Matrix features;
  Vector weights;

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
  std::size_t active_size() const { return static_cast<std::size_t>((weights.array() > 0.0).count()); }
};

struct TfgwForwardRecord {
  Vector distances;
  /// Full-size couplings (pruned template columns are zero).
  std::vector<Coupling> couplings;
  /// Per template (gw_part, w_part).
  std::vector<std::pair<double, double>> parts;
  /// Per template: the solve ended on tied linear subproblems.
  std::vector<bool> degenerate;
};

struct TemplateGrads {
  Matrix structure;
  Matrix features;
  Vector weights;
};

struct TfgwGrads {
  std::vector<TemplateGrads> templates;
  double alpha = 0.0;
  Matrix features;
};

/// Distances from `graph` to each template.
TfgwForwardRecord tfgw_forward(const Graph& graph, const std::vector<Template>& templates, double alpha,
                               const CgOptions& options = {});

/// Envelope-theorem gradients of sum_k upstream[k] * distances[k], holding
/// each optimal coupling fixed.
TfgwGrads tfgw_backward(const Graph& graph, const std::vector<Template>& templates, double alpha,
                        const TfgwForwardRecord& record, const Vector& upstream);

/// Zero-initialised gradient container shaped like `templates`.
TfgwGrads zero_grads(const std::vector<Template>& templates, Eigen::Index nodes, Eigen::Index feature_dim);

/// Euclidean projection onto the probability simplex (sort and threshold).
Vector simplex_project(const Vector& v);

/// Projects templates and alpha back onto their feasible sets: symmetric
/// structures clamped to [0, 1] (adjacency) or [0, inf) (shortest path),
/// simplex weights, alpha in [0, 1].
void apply_constraints(std::vector<Template>& templates, double& alpha, StructureKind kind,
                       bool project_weights = true);

}  // namespace tfgw
