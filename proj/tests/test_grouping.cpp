#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "partlift/grouping.hpp"

using namespace partlift;

namespace {

// Points laid out on a row of pixels: x = index, y = 0, in every view.
VisibilityMap strip(std::size_t n, std::size_t views) {
  VisibilityMap vis;
  for (std::size_t k = 0; k < views; ++k) {
    ViewVisibility v;
    v.width = static_cast<int>(n);
    v.height = 1;
    for (std::size_t p = 0; p < n; ++p) {
      v.visible.push_back(1);
      v.pixel.emplace_back(static_cast<double>(p), 0.0);
      v.depth.push_back(1.0);
    }
    vis.views.push_back(v);
  }
  return vis;
}

Detection box(std::size_t view, CategoryId c, double x0, double x1) {
  return Detection{view, c, {x0, -1.0, x1, 1.0}, 1.0};
}

Partition partition_of(const std::vector<std::uint32_t>& a) {
  return make_partition(a, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.size()), 1));
}

AdjacencyGraph chain(std::size_t n) {
  std::vector<Edge> edges;
  for (PointIndex i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return AdjacencyGraph(n, edges);
}

std::vector<int> as_int(const std::vector<InstanceId>& v) { return {v.begin(), v.end()}; }

// Instance labels the long way: all same-label superpoint pairs, adjacency
// from the raw edge list, ratios from the brute-force coverage, DFS components.
std::vector<int> oracle_instances(const fixtures::VoteScene& s, const std::vector<CategoryId>& labels,
                                  double tau, bool all_boxes) {
  const auto members = s.partition.members();
  const std::size_t sp = members.size();
  const CategoryId unlabeled = s.schema.unlabeled();
  std::vector<std::pair<std::size_t, std::size_t>> links;
  for (std::size_t u = 0; u < sp; ++u) {
    for (std::size_t v = u + 1; v < sp; ++v) {
      if (labels[u] == unlabeled || labels[u] != labels[v]) continue;
      bool adjacent = false;
      for (const Edge& e : s.graph.edges()) {
        const auto a = s.partition.assignment[e.a];
        const auto b = s.partition.assignment[e.b];
        adjacent = adjacent || (a == u && b == v) || (a == v && b == u);
      }
      if (!adjacent) continue;
      const auto boxes = oracle::brute_shared_boxes(members[u], members[v], s.detections, s.vis,
                                                    all_boxes ? -1 : labels[u]);
      const double r = oracle::brute_ratio(oracle::brute_coverage(members[u], boxes, s.detections, s.vis),
                                           oracle::brute_coverage(members[v], boxes, s.detections, s.vis));
      if (r < tau) links.emplace_back(u, v);
    }
  }
  const std::vector<int> comp = oracle::dfs_components(sp, links);
  std::vector<int> out(s.partition.num_points());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const auto u = s.partition.assignment[p];
    out[p] = labels[u] == unlabeled ? -1 : comp[u];
  }
  return out;
}

}  // namespace

TEST_CASE("shared boxes come from views both superpoints see") {
  VisibilityMap vis = strip(4, 3);
  // u = {0,1} visible in views 0,1; v = {2,3} visible in views 1,2.
  vis.views[2].visible[0] = vis.views[2].visible[1] = 0;
  vis.views[0].visible[2] = vis.views[0].visible[3] = 0;
  const std::vector<Detection> dets{box(0, 0, 0, 3), box(1, 0, 0, 1), box(2, 0, 0, 3), box(1, 0, 2, 3)};
  const std::vector<PointIndex> u{0, 1}, v{2, 3};
  CHECK(shared_boxes(u, v, dets, vis) == std::vector<std::size_t>{1, 3});

  vis.views[1].visible[2] = vis.views[1].visible[3] = 0;
  CHECK(shared_boxes(u, v, dets, vis).empty());
}

TEST_CASE("shared boxes are ordered by view then index and filtered by category") {
  const VisibilityMap vis = strip(2, 3);
  const std::vector<Detection> dets{box(2, 0, 0, 1), box(0, 1, 0, 1), box(1, 0, 0, 1), box(0, 0, 0, 1)};
  const std::vector<PointIndex> u{0}, v{1};
  CHECK(shared_boxes(u, v, dets, vis) == std::vector<std::size_t>{1, 3, 2, 0});
  CHECK(shared_boxes(u, v, dets, vis, 0) == std::vector<std::size_t>{3, 2, 0});
}

TEST_CASE("coverage examples") {
  const VisibilityMap vis = strip(30, 1);
  std::vector<PointIndex> all(30);
  std::iota(all.begin(), all.end(), 0u);
  const std::vector<Detection> dets{box(0, 0, 0, 29), box(0, 0, 40, 50), box(0, 0, 0, 14)};
  CHECK(coverage(all, {0, 1, 2}, dets, vis) == std::vector<double>{1.0, 0.0, 0.5});

  VisibilityMap hidden = vis;
  std::fill(hidden.views[0].visible.begin(), hidden.views[0].visible.end(), 0);
  CHECK(coverage(all, {0}, dets, hidden) == std::vector<double>{0.0});
}

TEST_CASE("merge_test examples") {
  const std::vector<double> a{0.3, 0.7}, one_zero{1.0, 0.0}, zero_one{0.0, 1.0};
  CHECK(coverage_distance(a, a) == 0.0);
  CHECK(merge_test(a, a, 0.3));
  CHECK(coverage_distance(one_zero, zero_one) == 2.0);
  CHECK_FALSE(merge_test(one_zero, zero_one, 0.3));
  const std::vector<double> u{1.0, 0.9}, v{0.9, 1.0};
  CHECK(coverage_distance(u, v) == doctest::Approx(0.2 / 1.9).epsilon(1e-12));
  CHECK(merge_test(u, v, 0.3));
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(coverage_distance(zeros, zeros) == 0.0);
  CHECK(merge_test(zeros, zeros, 0.3));
  const std::vector<double> empty;
  CHECK(merge_test(empty, empty, 0.3));
}

TEST_CASE("shared boxes, coverage and ratio match set comprehension on random scenes") {
  std::mt19937_64 rng(303);
  for (int t = 0; t < 100; ++t) {
    const auto s = fixtures::random_vote_scene(rng);
    const auto members = s.partition.members();
    for (std::size_t u = 0; u < members.size(); ++u) {
      for (std::size_t v = u + 1; v < members.size(); ++v) {
        for (int cat : {-1, 0}) {
          const auto boxes = cat < 0 ? shared_boxes(members[u], members[v], s.detections, s.vis)
                                     : shared_boxes(members[u], members[v], s.detections, s.vis, cat);
          REQUIRE(boxes == oracle::brute_shared_boxes(members[u], members[v], s.detections, s.vis, cat));
          const auto iu = coverage(members[u], boxes, s.detections, s.vis);
          const auto iv = coverage(members[v], boxes, s.detections, s.vis);
          CHECK(iu == oracle::brute_coverage(members[u], boxes, s.detections, s.vis));
          CHECK(iv == oracle::brute_coverage(members[v], boxes, s.detections, s.vis));
          CHECK(std::abs(coverage_distance(iu, iv) - oracle::brute_ratio(iu, iv)) <= 1e-12);
          CHECK(coverage_distance(iu, iv) == coverage_distance(iv, iu));
        }
      }
    }
  }
}

TEST_CASE("two chairs' legs stay separate instances") {
  // Legs of chair A are superpoints 0,1; chair B's are 2,3. They touch in 3D
  // (a chain of edges) but each chair has its own box in both views.
  const Partition p = partition_of({0, 0, 1, 1, 2, 2, 3, 3});
  const VisibilityMap vis = strip(8, 2);
  const std::vector<Detection> dets{box(0, 0, 0, 3), box(0, 0, 4, 7), box(1, 0, 0, 3), box(1, 0, 4, 7)};
  LabelSchema schema{"chair", {"leg"}};
  const ScoreMatrix scores = vote_scores(p, dets, vis, schema);
  const auto labels = superpoint_semantics(scores);
  const SegmentationResult r = group_instances(p, labels, dets, vis, chain(8), scores);
  CHECK(r.instance == std::vector<InstanceId>{0, 0, 0, 0, 1, 1, 1, 1});
  REQUIRE(r.instances.size() == 2);
  CHECK(r.instances[0] == InstanceInfo{0, 1.0, 4});

  // With one box spanning both chairs they collapse into one.
  const std::vector<Detection> wide{box(0, 0, 0, 7)};
  const ScoreMatrix s2 = vote_scores(p, wide, vis, schema);
  CHECK(group_instances(p, superpoint_semantics(s2), wide, vis, chain(8), s2).instances.size() == 1);
}

TEST_CASE("isolated labeled superpoint is a singleton instance") {
  const Partition p = partition_of({0, 0, 1});
  const VisibilityMap vis = strip(3, 1);
  const std::vector<Detection> dets{box(0, 1, 0, 1), box(0, 0, 2, 2)};
  LabelSchema schema{"obj", {"a", "b"}};
  const ScoreMatrix scores = vote_scores(p, dets, vis, schema);
  const SegmentationResult r =
      group_instances(p, superpoint_semantics(scores), dets, vis, AdjacencyGraph(3, {{0, 1, 1.0}}), scores);
  CHECK(r.semantic == std::vector<CategoryId>{1, 1, 0});
  CHECK(r.instance == std::vector<InstanceId>{0, 0, 1});
  CHECK(r.instances[1] == InstanceInfo{0, 1.0, 1});
}

TEST_CASE("unlabeled superpoints form no instance") {
  const Partition p = partition_of({0, 0, 1, 1});
  const VisibilityMap vis = strip(4, 1);
  const std::vector<Detection> dets{box(0, 0, 0, 1)};
  LabelSchema schema{"obj", {"a"}};
  const ScoreMatrix scores = vote_scores(p, dets, vis, schema);
  const SegmentationResult r = group_instances(p, superpoint_semantics(scores), dets, vis, chain(4), scores);
  CHECK(r.semantic == std::vector<CategoryId>{0, 0, 1, 1});
  CHECK(r.instance == std::vector<InstanceId>{0, 0, kNoInstance, kNoInstance});
  ValidationReport report;
  validate_segmentation(r, schema, report);
  CHECK(report.ok());
}

TEST_CASE("identical coverage everywhere gives one instance") {
  const Partition p = partition_of({0, 1, 2, 3, 4, 5});
  const VisibilityMap vis = strip(6, 2);
  const std::vector<Detection> dets{box(0, 0, -1, 10), box(1, 0, -1, 10)};
  LabelSchema schema{"obj", {"a"}};
  const ScoreMatrix scores = vote_scores(p, dets, vis, schema);
  const SegmentationResult r = group_instances(p, superpoint_semantics(scores), dets, vis, chain(6), scores);
  CHECK(r.instances.size() == 1);
  CHECK(r.instances[0].num_points == 6);
}

TEST_CASE("grouping matches the exhaustive pair oracle on random scenes") {
  std::mt19937_64 rng(404);
  for (int t = 0; t < 150; ++t) {
    const auto s = fixtures::random_vote_scene(rng);
    const ScoreMatrix scores = vote_scores(s.partition, s.detections, s.vis, s.schema);
    const auto labels = superpoint_semantics(scores);
    const bool all_boxes = t % 2 == 1;
    for (double tau : {0.1, 0.3, 0.8}) {
      const SegmentationResult r = group_instances(s.partition, labels, s.detections, s.vis, s.graph, scores,
                                                   {tau, all_boxes});
      INFO("trial " << t << " tau " << tau);
      CHECK(oracle::same_grouping(as_int(r.instance), oracle_instances(s, labels, tau, all_boxes), -1, -1));

      ValidationReport report;
      validate_segmentation(r, s.schema, report);
      CHECK(report.ok());

      // Ids follow the lowest member point; confidence is the pooled vote.
      InstanceId next = 0;
      std::vector<std::uint64_t> hits(r.instances.size(), 0), seen(r.instances.size(), 0);
      for (std::size_t p = 0; p < r.instance.size(); ++p) {
        if (r.instance[p] == kNoInstance) continue;
        CHECK(r.instance[p] <= next);
        if (r.instance[p] == next) ++next;
      }
      const auto members = s.partition.members();
      for (std::size_t u = 0; u < members.size(); ++u) {
        const InstanceId id = r.instance[members[u][0]];
        if (id == kNoInstance) continue;
        hits[id] += scores.hit(u, labels[u]);
        seen[id] += scores.visible[u];
      }
      for (std::size_t i = 0; i < r.instances.size(); ++i) {
        CHECK(r.instances[i].confidence == static_cast<double>(hits[i]) / static_cast<double>(seen[i]));
      }
    }
  }
}

TEST_CASE("raising tau never increases the instance count") {
  std::mt19937_64 rng(505);
  for (int t = 0; t < 60; ++t) {
    const auto s = fixtures::random_vote_scene(rng);
    const ScoreMatrix scores = vote_scores(s.partition, s.detections, s.vis, s.schema);
    const auto labels = superpoint_semantics(scores);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double tau : {0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.5}) {
      const std::size_t count =
          group_instances(s.partition, labels, s.detections, s.vis, s.graph, scores, {tau, false}).instances.size();
      CHECK(count <= previous);
      previous = count;
    }
  }
}
