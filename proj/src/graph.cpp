#include "tfgw/graph.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace tfgw {

std::string to_string(StructureKind kind) {
  return kind == StructureKind::Adjacency ? "adj" : "sp";
}

StructureKind parse_structure_kind(const std::string& text) {
  if (text == "adj" || text == "adjacency" || text == "Adjacency") return StructureKind::Adjacency;
  if (text == "sp" || text == "shortest_path" || text == "ShortestPath") return StructureKind::ShortestPath;
  throw ValidationError("unknown structure kind '" + text + "' (expected adj or sp)");
}

Vector uniform_weights(std::size_t n) {
  if (n == 0) throw ValidationError("graph must have at least one node");
  return Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

Graph make_graph(Matrix structure, Matrix features) {
  const auto n = static_cast<std::size_t>(structure.rows());
  Vector w = uniform_weights(n);
  return make_graph(std::move(structure), std::move(features), std::move(w));
}

Graph make_graph(Matrix structure, Matrix features, Vector weights) {
  Graph g{std::move(structure), std::move(features), std::move(weights)};
  validate_graph(g);
  return g;
}

void validate_graph(const Graph& g) {
  const auto n = g.structure.rows();
  if (n == 0) throw ValidationError("graph has no nodes");
  if (g.structure.cols() != n) throw ValidationError("structure matrix is not square");
  if (g.features.rows() != n) {
    std::ostringstream os;
    os << "feature matrix has " << g.features.rows() << " rows for " << n << " nodes";
    throw ValidationError(os.str());
  }
  if (g.weights.size() != n) throw ValidationError("weight vector length differs from node count");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (g.structure(i, i) != 0.0) throw ValidationError("structure diagonal must be zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = g.structure(i, j);
      if (!std::isfinite(c) || c < 0.0) throw ValidationError("structure entries must be finite and nonnegative");
      if (c != g.structure(j, i)) throw ValidationError("structure matrix is not symmetric");
    }
  }
  if (!g.features.allFinite()) throw ValidationError("features must be finite");
  if ((g.weights.array() < 0.0).any() || !g.weights.allFinite())
    throw ValidationError("node weights must be finite and nonnegative");
  if (std::abs(g.weights.sum() - 1.0) > 1e-12) throw ValidationError("node weights must sum to 1");
}

void validate_dataset(const LabeledDataset& ds) {
  if (ds.labels.size() != ds.graphs.size()) throw ValidationError("labels and graphs differ in length");
  if (!ds.adjacency.empty() && ds.adjacency.size() != ds.graphs.size())
    throw ValidationError("adjacency list and graphs differ in length");
  const auto d = ds.feature_dim();
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    validate_graph(ds.graphs[g]);
    if (ds.graphs[g].feature_dim() != d) throw ValidationError("graphs disagree on feature dimension");
    if (ds.labels[g] < 0 || ds.labels[g] >= ds.class_count) throw ValidationError("label out of range");
  }
}

namespace {

void check_adjacency(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("adjacency matrix is not square");
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (a(i, i) != 0.0) throw ValidationError("adjacency diagonal must be zero");
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != a(j, i)) throw ValidationError("adjacency matrix is not symmetric");
  }
}

}  // namespace

Matrix shortest_path_matrix(const Matrix& adjacency) {
  check_adjacency(adjacency);
  const auto n = adjacency.rows();
  constexpr int kUnreached = -1;
  Eigen::MatrixXi hops = Eigen::MatrixXi::Constant(n, n, kUnreached);
  int longest = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    std::queue<Eigen::Index> q;
    hops(s, s) = 0;
    q.push(s);
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (Eigen::Index v = 0; v < n; ++v) {
        if (adjacency(u, v) != 0.0 && hops(s, v) == kUnreached) {
          hops(s, v) = hops(s, u) + 1;
          longest = std::max(longest, hops(s, v));
          q.push(v);
        }
      }
    }
  }
  Matrix sp(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sp(i, j) = hops(i, j) == kUnreached ? longest + 1.0 : static_cast<double>(hops(i, j));
  return sp;
}

int max_degree(const Matrix& adjacency) {
  int best = 0;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    best = std::max(best, static_cast<int>((adjacency.row(i).array() != 0.0).count()));
  return best;
}

Matrix degree_features(const Matrix& adjacency, int max_degree) {
  if (max_degree < 1) throw ValidationError("max_degree must be at least 1");
  const auto n = adjacency.rows();
  Matrix f = Matrix::Zero(n, max_degree + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int deg = static_cast<int>((adjacency.row(i).array() != 0.0).count());
    f(i, std::min(deg, max_degree)) = 1.0;
  }
  return f;
}

LabeledDataset with_structure(const LabeledDataset& ds, StructureKind kind) {
  LabeledDataset out = ds;
  out.structure_kind = kind;
  if (ds.adjacency.size() != ds.graphs.size())
    throw ValidationError("dataset carries no adjacency matrices to derive structures from");
  for (std::size_t g = 0; g < ds.graphs.size(); ++g)
    out.graphs[g].structure =
        kind == StructureKind::Adjacency ? ds.adjacency[g] : shortest_path_matrix(ds.adjacency[g]);
  return out;
}

Matrix permute_symmetric(const Matrix& m, const std::vector<std::size_t>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = m(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j]));
  return out;
}

Graph permute_graph(const Graph& g, const std::vector<std::size_t>& perm) {
  if (perm.size() != g.node_count()) throw ValidationError("permutation size differs from node count");
  Graph out;
  out.structure = permute_symmetric(g.structure, perm);
  out.features.resize(g.features.rows(), g.features.cols());
  out.weights.resize(g.weights.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(perm[i]);
    out.features.row(static_cast<Eigen::Index>(i)) = g.features.row(src);
    out.weights(static_cast<Eigen::Index>(i)) = g.weights(src);
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
  LabeledDataset out;
  out.name = ds.name;
  out.class_count = ds.class_count;
  out.structure_kind = ds.structure_kind;
  for (auto i : indices) {
    out.graphs.push_back(ds.graphs.at(i));
    out.labels.push_back(ds.labels.at(i));
    if (!ds.adjacency.empty()) out.adjacency.push_back(ds.adjacency.at(i));
  }
  return out;
}

}  // namespace tfgw
