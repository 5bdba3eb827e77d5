#pragma once

#include "partlift/types.hpp"

#include <span>
#include <vector>

namespace partlift {

struct Edge {
  PointIndex a = 0;
  PointIndex b = 0;
  double weight = 1.0;
};

/// Undirected graph in compressed adjacency form. Neighbor lists are sorted
/// and free of duplicates and self-loops; every edge is stored in both
/// directions with the same weight.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  /// Builds from an edge list; duplicates keep the first weight seen.
  AdjacencyGraph(std::size_t num_nodes, const std::vector<Edge>& edges);

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }

  std::span<const PointIndex> neighbors(PointIndex p) const {
    return {neighbors_.data() + offsets_[p], neighbors_.data() + offsets_[p + 1]};
  }
  std::span<const double> weights(PointIndex p) const {
    return {weights_.data() + offsets_[p], weights_.data() + offsets_[p + 1]};
  }
  bool has_edge(PointIndex a, PointIndex b) const;

  /// Each undirected edge once, with a < b, in (a, b) order.
  std::vector<Edge> edges() const;

  /// Component id per node; ids are dense and ordered by lowest member.
  std::vector<std::uint32_t> connected_components() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<PointIndex> neighbors_;
  std::vector<double> weights_;
};

/// Per-point feature rows: (normal, color_weight * color). N x 6.
Eigen::MatrixXd build_features(const PointCloud& cloud, double color_weight);

/// Exact k nearest neighbors of every point (self excluded), ordered by
/// (distance, index). Ties go to the lower index.
std::vector<std::vector<PointIndex>> knn(const std::vector<Vec3>& positions, std::size_t k);

/// Symmetrized kNN graph with unit weights. Requires N >= 2 and k < N.
AdjacencyGraph build_knn_graph(const PointCloud& cloud, std::size_t k);

struct PartitionEnergy {
  double data = 0.0;      // sum of squared distances to the superpoint mean
  double boundary = 0.0;  // rho * weight of cut edges
  double total() const { return data + boundary; }
};

/// Energy of a piecewise-constant approximation. Superpoint means are
/// recomputed from `features`; partition.means is not consulted.
PartitionEnergy energy(const Partition& partition, const Eigen::MatrixXd& features,
                       const AdjacencyGraph& graph, double rho);

struct CutPursuitTrace {
  /// Energy after initialization and after every accepted split, swap,
  /// merge or point-move sweep.
  std::vector<double> energies;
  int iterations = 0;
  std::size_t accepted_splits = 0;
  std::size_t accepted_swaps = 0;
  std::size_t accepted_merges = 0;
  std::size_t accepted_moves = 0;  // point-move sweeps that changed something
  /// Set when a trivial partition beat the split/merge result and was returned.
  bool fell_back_to_trivial = false;
};

/// Approximate minimizer of  sum_i |f_i - g_i|^2 + rho * sum_{ij in E} w_ij [g_i != g_j]
/// over piecewise-constant g.
///
/// Starts from one superpoint per connected component. Each iteration tries
/// a binary split of every superpoint (two-means seeded by the farthest
/// feature pair, then alternating graph-cut refinement on the superpoint's
/// induced subgraph; pieces are split into connected parts) and keeps it when
/// the energy strictly decreases, then re-cuts the boundary between adjacent
/// pairs, merges adjacent superpoints, and moves single points to adjacent
/// superpoints, each only when the energy strictly decreases. Stops when an
/// iteration changes nothing or
/// after max_iters iterations. The result never has higher energy than the
/// all-singletons or the per-component partition.
Partition cut_pursuit(const Eigen::MatrixXd& features, const AdjacencyGraph& graph, double rho,
                      int max_iters, CutPursuitTrace* trace = nullptr);

}  // namespace partlift
