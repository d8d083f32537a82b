#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfgw/types.hpp"

namespace tfgw {

enum class StructureKind : std::uint8_t { Adjacency, ShortestPath };

std::string to_string(StructureKind kind);
StructureKind parse_structure_kind(const std::string& text);

/// Attributed graph (C, F, h). `structure` is symmetric with zero diagonal,
/// `features` has one row per node and `weights` lies on the simplex.
struct Graph {
  Matrix structure;
  Matrix features;
  Vector weights;

  std::size_t node_count() const { return static_cast<std::size_t>(structure.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Builds a graph with uniform node weights; throws ValidationError on bad input.
Graph make_graph(Matrix structure, Matrix features);
Graph make_graph(Matrix structure, Matrix features, Vector weights);

/// Checks every Graph invariant and throws ValidationError naming the first violation.
void validate_graph(const Graph& g);

Vector uniform_weights(std::size_t n);

struct LabeledDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<int> labels;
  int class_count = 0;
  StructureKind structure_kind = StructureKind::Adjacency;
  /// Per-graph adjacency (kept so structures can be re-derived and GIN can aggregate).
  std::vector<Matrix> adjacency;

  std::size_t size() const { return graphs.size(); }
  std::size_t feature_dim() const { return graphs.empty() ? 0 : graphs.front().feature_dim(); }
};

void validate_dataset(const LabeledDataset& ds);

/// Minimum hop counts; unreachable pairs get (largest finite distance + 1).
Matrix shortest_path_matrix(const Matrix& adjacency);

/// One-hot degree encoding capped at `max_degree`.
Matrix degree_features(const Matrix& adjacency, int max_degree);

int max_degree(const Matrix& adjacency);

/// Returns a copy of `ds` whose structure matrices are of the requested kind.
LabeledDataset with_structure(const LabeledDataset& ds, StructureKind kind);

/// Applies node permutation `perm` (new index i takes old node perm[i]).
Graph permute_graph(const Graph& g, const std::vector<std::size_t>& perm);
Matrix permute_symmetric(const Matrix& m, const std::vector<std::size_t>& perm);

/// Subset of a dataset by index, preserving metadata.
LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices);

}  // namespace tfgw
