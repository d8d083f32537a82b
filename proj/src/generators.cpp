#include "tfgw/generators.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace tfgw {

Matrix circulant_adjacency(int n, int skip) {
  if (n < 3) throw ValidationError("circulant graph needs at least 3 nodes");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int step : {1, skip}) {
      const int j = (i + step) % n;
      if (j == i) continue;
      a(i, j) = a(j, i) = 1.0;
    }
  }
  return a;
}

Matrix disjoint_cycles_adjacency(const std::vector<int>& lengths) {
  const int n = std::accumulate(lengths.begin(), lengths.end(), 0);
  Matrix a = Matrix::Zero(n, n);
  int offset = 0;
  for (int len : lengths) {
    if (len < 3) throw ValidationError("cycle length must be at least 3");
    for (int i = 0; i < len; ++i) {
      const int u = offset + i;
      const int v = offset + (i + 1) % len;
      a(u, v) = a(v, u) = 1.0;
    }
    offset += len;
  }
  return a;
}

bool has_four_cycle(const Matrix& adjacency) {
  const auto n = adjacency.rows();
  for (Eigen::Index u = 0; u < n; ++u) {
    for (Eigen::Index v = u + 1; v < n; ++v) {
      int common = 0;
      for (Eigen::Index w = 0; w < n; ++w)
        if (adjacency(u, w) != 0.0 && adjacency(v, w) != 0.0) ++common;
      if (common >= 2) return true;
    }
  }
  return false;
}

namespace {

std::vector<std::size_t> random_order(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

void append_permuted(LabeledDataset& ds, const Matrix& base, int label, std::mt19937_64& rng,
                     NodeOrders* orders) {
  const auto n = static_cast<std::size_t>(base.rows());
  auto perm = random_order(n, rng);
  Matrix adj = permute_symmetric(base, perm);
  ds.graphs.push_back(make_graph(adj, Matrix::Ones(base.rows(), 1)));
  ds.adjacency.push_back(std::move(adj));
  ds.labels.push_back(label);
  if (orders) orders->push_back(std::move(perm));
}

}  // namespace

LabeledDataset gen_four_cycles(int num_graphs, int nodes_per_graph, std::uint64_t seed,
                               NodeOrders* node_orders) {
  if (num_graphs <= 0 || num_graphs % 2 != 0) throw ValidationError("num_graphs must be positive and even");
  // n = 8 would make the negative class two 4-cycles.
  if (nodes_per_graph < 10 || nodes_per_graph % 2 != 0)
    throw ValidationError("nodes_per_graph must be even and at least 10");
  const Matrix positive = disjoint_cycles_adjacency({4, nodes_per_graph - 4});
  const Matrix negative = disjoint_cycles_adjacency({nodes_per_graph / 2, nodes_per_graph / 2});

  LabeledDataset ds;
  ds.name = "FOUR_CYCLES";
  ds.class_count = 2;
  ds.structure_kind = StructureKind::Adjacency;
  if (node_orders) node_orders->clear();
  std::mt19937_64 rng(seed);
  for (int g = 0; g < num_graphs; ++g) {
    const int label = g % 2;
    append_permuted(ds, label == 1 ? positive : negative, label, rng, node_orders);
  }
  return ds;
}

LabeledDataset gen_skip_circles(int copies_per_class, std::uint64_t seed, NodeOrders* node_orders) {
  if (copies_per_class < 1) throw ValidationError("copies_per_class must be at least 1");
  LabeledDataset ds;
  ds.name = "SKIP_CIRCLES";
  ds.class_count = 10;
  ds.structure_kind = StructureKind::Adjacency;
  if (node_orders) node_orders->clear();
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 10; ++c) {
    const Matrix base = circulant_adjacency(kSkipCircleNodes, kSkipLengths[c]);
    for (int k = 0; k < copies_per_class; ++k) append_permuted(ds, base, c, rng, node_orders);
  }
  return ds;
}

}  // namespace tfgw
