#include "partlift/superpoints.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace partlift {

AdjacencyGraph::AdjacencyGraph(std::size_t num_nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::pair<PointIndex, double>>> adj(num_nodes);
  for (const Edge& e : edges) {
    if (e.a == e.b) continue;
    if (e.a >= num_nodes || e.b >= num_nodes) throw Error("AdjacencyGraph: edge endpoint out of range");
    adj[e.a].emplace_back(e.b, e.weight);
    adj[e.b].emplace_back(e.a, e.weight);
  }
  offsets_.assign(num_nodes + 1, 0);
  for (std::size_t p = 0; p < num_nodes; ++p) {
    auto& list = adj[p];
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    list.erase(std::unique(list.begin(), list.end(),
                           [](const auto& l, const auto& r) { return l.first == r.first; }),
               list.end());
    offsets_[p + 1] = offsets_[p] + list.size();
    for (const auto& [q, w] : list) {
      neighbors_.push_back(q);
      weights_.push_back(w);
    }
  }
}

bool AdjacencyGraph::has_edge(PointIndex a, PointIndex b) const {
  const auto n = neighbors(a);
  return std::binary_search(n.begin(), n.end(), b);
}

std::vector<Edge> AdjacencyGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (PointIndex a = 0; a < num_nodes(); ++a) {
    const auto n = neighbors(a);
    const auto w = weights(a);
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (a < n[i]) out.push_back({a, n[i], w[i]});
    }
  }
  return out;
}

std::vector<std::uint32_t> AdjacencyGraph::connected_components() const {
  constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> comp(num_nodes(), kUnset);
  std::uint32_t next = 0;
  std::vector<PointIndex> stack;
  for (PointIndex seed = 0; seed < num_nodes(); ++seed) {
    if (comp[seed] != kUnset) continue;
    comp[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const PointIndex cur = stack.back();
      stack.pop_back();
      for (PointIndex q : neighbors(cur)) {
        if (comp[q] == kUnset) {
          comp[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  return comp;
}

Eigen::MatrixXd build_features(const PointCloud& cloud, double color_weight) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(cloud.size()), 6);
  for (std::size_t p = 0; p < cloud.size(); ++p) {
    const auto row = static_cast<Eigen::Index>(p);
    f.block<1, 3>(row, 0) = cloud.normals[p].transpose();
    f.block<1, 3>(row, 3) = color_weight * cloud.colors[p].transpose();
  }
  return f;
}

namespace {

// Static 3-d tree over point indices.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts), order_(pts.size()) {
    std::iota(order_.begin(), order_.end(), PointIndex{0});
    if (!pts.empty()) root_ = build(0, order_.size());
  }

  // (squared distance, index) pairs, ascending.
  std::vector<std::pair<double, PointIndex>> query(PointIndex self, std::size_t k) const {
    Heap heap;
    search(root_, self, k, heap);
    std::vector<std::pair<double, PointIndex>> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin = 0, end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };
  // Max-heap on (distance, index): top is the current worst neighbor.
  using Heap = std::priority_queue<std::pair<double, PointIndex>>;

  int build(std::size_t begin, std::size_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = pts_[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(pts_[order_[i]]);
      hi = hi.cwiseMax(pts_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](PointIndex a, PointIndex b) {
                       if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                       return a < b;
                     });
    const double split = pts_[order_[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(int id, PointIndex self, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[id];
    const Vec3& q = pts_[self];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const PointIndex p = order_[i];
        if (p == self) continue;
        const std::pair<double, PointIndex> cand{(pts_[p] - q).squaredNorm(), p};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    // Left holds coordinates <= split, right holds >= split.
    const double diff = q[node.axis] - node.split;
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    search(near, self, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().first) search(far, self, k, heap);
  }

  const std::vector<Vec3>& pts_;
  std::vector<PointIndex> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace

std::vector<std::vector<PointIndex>> knn(const std::vector<Vec3>& positions, std::size_t k) {
  const KdTree tree(positions);
  std::vector<std::vector<PointIndex>> out(positions.size());
  for (PointIndex p = 0; p < positions.size(); ++p) {
    const auto found = tree.query(p, k);
    out[p].reserve(found.size());
    for (const auto& [d, q] : found) out[p].push_back(q);
  }
  return out;
}

AdjacencyGraph build_knn_graph(const PointCloud& cloud, std::size_t k) {
  const std::size_t n = cloud.size();
  if (n < 2) throw Error("build_knn_graph: need at least 2 points");
  if (k == 0 || k >= n) throw Error("build_knn_graph: k must satisfy 0 < k < N");
  const auto lists = knn(cloud.positions, k);
  std::vector<Edge> edges;
  edges.reserve(n * k);
  for (PointIndex p = 0; p < n; ++p) {
    for (PointIndex q : lists[p]) edges.push_back({std::min(p, q), std::max(p, q), 1.0});
  }
  return AdjacencyGraph(n, edges);
}

}  // namespace partlift
