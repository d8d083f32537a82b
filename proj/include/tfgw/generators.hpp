#pragma once

#include <cstdint>
#include <vector>

#include "tfgw/graph.hpp"

namespace tfgw {

/// Skip lengths of the ten SKIP-CIRCLES classes, in label order.
inline constexpr int kSkipLengths[10] = {2, 3, 4, 5, 6, 9, 11, 12, 13, 16};
inline constexpr int kSkipCircleNodes = 41;

/// Node orders used to build each generated graph: graph g node i is node
/// `node_orders[g][i]` of the unpermuted construction.
using NodeOrders = std::vector<std::vector<std::size_t>>;

/// Binary dataset: label 1 is C4 + C(n-4), label 0 is C(n/2) + C(n/2).
LabeledDataset gen_four_cycles(int num_graphs, int nodes_per_graph, std::uint64_t seed,
                               NodeOrders* node_orders = nullptr);

/// Ten classes of permuted 41-node circulant graphs with one skip length each.
LabeledDataset gen_skip_circles(int copies_per_class, std::uint64_t seed,
                                NodeOrders* node_orders = nullptr);

/// Circulant adjacency with edges (i, i+1) and (i, i+skip) mod n.
Matrix circulant_adjacency(int n, int skip);

/// Adjacency of the disjoint union of cycles with the given lengths.
Matrix disjoint_cycles_adjacency(const std::vector<int>& lengths);


/// True if the graph contains a simple cycle of exactly length 4.
bool has_four_cycle(const Matrix& adjacency);

}  // namespace tfgw
