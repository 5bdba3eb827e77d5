#pragma once

// Dinic max-flow on real capacities, used for binary graph-cut labeling.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace partlift::detail {

class MaxFlow {
 public:
  explicit MaxFlow(std::size_t num_nodes) : head_(num_nodes, -1) {}

  /// Adds u->v with capacity `cap` and v->u with capacity `rev_cap`.
  void add_edge(int u, int v, double cap, double rev_cap) {
    edges_.push_back({v, head_[u], cap});
    head_[u] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({u, head_[v], rev_cap});
    head_[v] = static_cast<int>(edges_.size()) - 1;
  }

  double solve(int source, int sink) {
    double total = 0.0;
    level_.assign(head_.size(), -1);
    while (bfs(source, sink)) {
      cursor_ = head_;
      total += blocking_flow(source, sink);
    }
    return total;
  }

  /// After solve(): nodes reachable from the source in the residual graph.
  std::vector<char> source_side(int source) const {
    std::vector<char> seen(head_.size(), 0);
    std::vector<int> stack{source};
    seen[source] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int e = head_[u]; e >= 0; e = edges_[e].next) {
        if (edges_[e].cap > kEps && !seen[edges_[e].to]) {
          seen[edges_[e].to] = 1;
          stack.push_back(edges_[e].to);
        }
      }
    }
    return seen;
  }

 private:
  static constexpr double kEps = 1e-13;

  struct Arc {
    int to;
    int next;
    double cap;
  };

  bool bfs(int source, int sink) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<int> queue{source};
    level_[source] = 0;
    for (std::size_t i = 0; i < queue.size(); ++i) {
      const int u = queue[i];
      for (int e = head_[u]; e >= 0; e = edges_[e].next) {
        if (edges_[e].cap > kEps && level_[edges_[e].to] < 0) {
          level_[edges_[e].to] = level_[u] + 1;
          queue.push_back(edges_[e].to);
        }
      }
    }
    return level_[sink] >= 0;
  }

  // Iterative DFS over the level graph with current-arc pointers.
  double blocking_flow(int source, int sink) {
    double pushed = 0.0;
    std::vector<int> path;  // arc indices
    int u = source;
    while (true) {
      if (u == sink) {
        double bottleneck = std::numeric_limits<double>::infinity();
        for (int e : path) bottleneck = std::min(bottleneck, edges_[e].cap);
        std::size_t cut_at = path.size();
        for (std::size_t i = 0; i < path.size(); ++i) {
          Arc& a = edges_[path[i]];
          a.cap -= bottleneck;
          edges_[path[i] ^ 1].cap += bottleneck;
          if (a.cap <= kEps && cut_at == path.size()) cut_at = i;
        }
        pushed += bottleneck;
        path.resize(cut_at);
        u = path.empty() ? source : edges_[path.back()].to;
        continue;
      }
      int& e = cursor_[u];
      while (e >= 0 && !(edges_[e].cap > kEps && level_[edges_[e].to] == level_[u] + 1)) {
        e = edges_[e].next;
      }
      if (e >= 0) {
        path.push_back(e);
        u = edges_[e].to;
        continue;
      }
      level_[u] = -1;  // dead end
      if (u == source) break;
      const int back = path.back();
      path.pop_back();
      u = edges_[back ^ 1].to;
      cursor_[u] = edges_[cursor_[u]].next;
    }
    return pushed;
  }

  std::vector<int> head_;
  std::vector<Arc> edges_;
  std::vector<int> level_;
  std::vector<int> cursor_;
};

}  // namespace partlift::detail
