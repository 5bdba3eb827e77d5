#include "partlift/grouping.hpp"

#include "partlift/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace partlift {

namespace {

std::vector<std::size_t> by_view(const std::vector<Detection>& detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].view < detections[b].view;
  });
  return order;
}

bool seen_in(std::span<const PointIndex> sp, const VisibilityMap& vis, std::size_t view) {
  return std::any_of(sp.begin(), sp.end(), [&](PointIndex p) { return vis.visible(view, p); });
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<std::size_t> shared_boxes(std::span<const PointIndex> u, std::span<const PointIndex> v,
                                      const std::vector<Detection>& detections,
                                      const VisibilityMap& vis, std::optional<CategoryId> category) {
  std::vector<std::size_t> out;
  std::vector<int> shared(vis.num_views(), -1);
  for (std::size_t i : by_view(detections)) {
    const Detection& d = detections[i];
    if (category && d.category != *category) continue;
    if (d.view >= vis.num_views()) throw Error("shared_boxes: view index out of range");
    if (shared[d.view] < 0) shared[d.view] = seen_in(u, vis, d.view) && seen_in(v, vis, d.view);
    if (shared[d.view]) out.push_back(i);
  }
  return out;
}

std::vector<double> coverage(std::span<const PointIndex> u, const std::vector<std::size_t>& boxes,
                             const std::vector<Detection>& detections, const VisibilityMap& vis) {
  std::vector<double> out;
  out.reserve(boxes.size());
  for (std::size_t b : boxes) {
    const Detection& d = detections[b];
    std::size_t visible = 0;
    std::size_t inside = 0;
    for (PointIndex p : u) {
      if (!vis.visible(d.view, p)) continue;
      ++visible;
      const Vec2& px = vis.pixel(d.view, p);
      if (d.box.contains(px.x(), px.y())) ++inside;
    }
    out.push_back(visible == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(visible));
  }
  return out;
}

double coverage_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("coverage_distance: vectors differ in length");
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += std::abs(a[i] - b[i]);
    na += std::abs(a[i]);
    nb += std::abs(b[i]);
  }
  const double denom = std::max(na, nb);
  return denom == 0.0 ? 0.0 : diff / denom;
}

SegmentationResult group_instances(const Partition& partition,
                                   const std::vector<CategoryId>& superpoint_labels,
                                   const std::vector<Detection>& detections,
                                   const VisibilityMap& vis, const AdjacencyGraph& graph,
                                   const ScoreMatrix& scores, const GroupingOptions& options) {
  const std::size_t s = partition.num_superpoints();
  const std::size_t n = partition.num_points();
  const std::size_t views = vis.num_views();
  const CategoryId unlabeled = scores.num_categories;
  if (superpoint_labels.size() != s) throw Error("group_instances: one label per superpoint expected");
  if (graph.num_nodes() != n) throw Error("group_instances: graph size does not match partition");

  // Visible points per (superpoint, view) and per (detection, superpoint).
  std::vector<std::uint32_t> seen(s * views, 0);
  for (std::size_t k = 0; k < views; ++k) {
    for (PointIndex p = 0; p < n; ++p) {
      if (vis.visible(k, p)) ++seen[partition.assignment[p] * views + k];
    }
  }
  std::vector<std::vector<std::uint32_t>> inside(detections.size());
  parallel_for(detections.size(), [&](std::size_t b) {
    const Detection& d = detections[b];
    if (d.view >= views) throw Error("group_instances: view index out of range");
    std::vector<std::uint32_t> count(s, 0);
    for (PointIndex p = 0; p < n; ++p) {
      if (!vis.visible(d.view, p)) continue;
      const Vec2& px = vis.pixel(d.view, p);
      if (d.box.contains(px.x(), px.y())) ++count[partition.assignment[p]];
    }
    inside[b] = std::move(count);
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Edge& e : graph.edges()) {
    std::size_t a = partition.assignment[e.a];
    std::size_t b = partition.assignment[e.b];
    if (a == b || superpoint_labels[a] == unlabeled || superpoint_labels[a] != superpoint_labels[b]) continue;
    pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  const std::vector<std::size_t> order = by_view(detections);
  auto cover = [&](std::size_t sp, std::size_t b) {
    const std::uint32_t total = seen[sp * views + detections[b].view];
    return total == 0 ? 0.0 : static_cast<double>(inside[b][sp]) / static_cast<double>(total);
  };
  std::vector<std::uint8_t> pass(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto [u, v] = pairs[i];
    std::vector<double> iu, iv;
    for (std::size_t b : order) {
      const Detection& d = detections[b];
      if (!options.all_boxes && d.category != superpoint_labels[u]) continue;
      if (seen[u * views + d.view] == 0 || seen[v * views + d.view] == 0) continue;
      iu.push_back(cover(u, b));
      iv.push_back(cover(v, b));
    }
    pass[i] = merge_test(iu, iv, options.tau);
  });

  UnionFind uf(s);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pass[i]) uf.unite(pairs[i].first, pairs[i].second);
  }

  SegmentationResult out;
  out.semantic.resize(n);
  out.instance.assign(n, kNoInstance);
  std::vector<InstanceId> root_instance(s, kNoInstance);
  std::vector<std::uint64_t> hit_sum, visible_sum;
  for (PointIndex p = 0; p < n; ++p) {
    const std::size_t sp = partition.assignment[p];
    const CategoryId label = superpoint_labels[sp];
    out.semantic[p] = label;
    if (label == unlabeled) continue;
    const std::size_t root = uf.find(sp);
    if (root_instance[root] == kNoInstance) {
      root_instance[root] = static_cast<InstanceId>(out.instances.size());
      out.instances.push_back({label, 0.0, 0});
      hit_sum.push_back(0);
      visible_sum.push_back(0);
    }
    const InstanceId id = root_instance[root];
    out.instance[p] = id;
    ++out.instances[id].num_points;
  }
  for (std::size_t sp = 0; sp < s; ++sp) {
    if (superpoint_labels[sp] == unlabeled) continue;
    const InstanceId id = root_instance[uf.find(sp)];
    hit_sum[id] += scores.hit(sp, superpoint_labels[sp]);
    visible_sum[id] += scores.visible[sp];
  }
  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    if (visible_sum[i] > 0) {
      out.instances[i].confidence = static_cast<double>(hit_sum[i]) / static_cast<double>(visible_sum[i]);
    }
  }
  return out;
}

}  // namespace partlift
