#pragma once

// Randomized instance generators shared by unit and acceptance tests.

#include "partlift/superpoints.hpp"
#include "partlift/types.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using namespace partlift;

struct GraphInstance {
  Eigen::MatrixXd features;
  AdjacencyGraph graph;
  std::vector<std::pair<PointIndex, PointIndex>> edge_pairs;
  std::vector<double> edge_weights;
  double rho = 0.1;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 1.0) {
  std::uniform_real_distribution<double> pos(-extent, extent);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.positions.emplace_back(pos(rng), pos(rng), pos(rng));
    c.colors.emplace_back(unit(rng), unit(rng), unit(rng));
    Vec3 nrm(gauss(rng), gauss(rng), gauss(rng));
    if (nrm.norm() < 1e-3) nrm = Vec3::UnitZ();
    c.normals.push_back(nrm.normalized());
  }
  return c;
}

/// Scene for voting and grouping checks: random visibility flags and pixel
/// coordinates (half snapped to the integer grid so box edges get hit),
/// random boxes, a random partition and a kNN graph.
struct VoteScene {
  PointCloud cloud;
  Partition partition;
  VisibilityMap vis;
  std::vector<Detection> detections;
  LabelSchema schema;
  AdjacencyGraph graph;
};

inline VoteScene random_vote_scene(std::mt19937_64& rng, std::size_t max_views = 5,
                                   std::size_t max_points = 300, std::size_t max_superpoints = 20,
                                   std::size_t max_boxes = 10) {
  VoteScene s;
  std::uniform_int_distribution<std::size_t> nviews(1, max_views);
  std::uniform_int_distribution<std::size_t> npoints(2, max_points);
  std::uniform_int_distribution<std::size_t> nboxes(0, max_boxes);
  std::uniform_int_distribution<int> ncat(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t views = nviews(rng);
  const std::size_t n = npoints(rng);
  const int width = 32;
  const int height = 24;

  s.cloud = random_cloud(rng, n);
  std::uniform_int_distribution<std::size_t> nsp(1, std::min(max_superpoints, n));
  const std::size_t num_sp = nsp(rng);
  std::uniform_int_distribution<std::uint32_t> sp(0, static_cast<std::uint32_t>(num_sp - 1));
  std::vector<std::uint32_t> raw(n);
  for (auto& r : raw) r = sp(rng);
  s.partition = make_partition(raw, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1));

  const double visible_rate = unit(rng);
  for (std::size_t k = 0; k < views; ++k) {
    ViewVisibility v;
    v.width = width;
    v.height = height;
    for (std::size_t p = 0; p < n; ++p) {
      v.visible.push_back(unit(rng) < visible_rate);
      double x = unit(rng) * width - 0.5;
      double y = unit(rng) * height - 0.5;
      if (unit(rng) < 0.5) {
        x = std::round(x);
        y = std::round(y);
      }
      v.pixel.emplace_back(x, y);
      v.depth.push_back(1.0 + unit(rng));
    }
    s.vis.views.push_back(std::move(v));
  }

  const int categories = ncat(rng);
  for (int c = 0; c < categories; ++c) s.schema.categories.push_back("part" + std::to_string(c));
  s.schema.object_name = "thing";
  std::uniform_int_distribution<std::size_t> view(0, views - 1);
  std::uniform_int_distribution<int> cat(0, categories - 1);
  std::uniform_int_distribution<int> gx(0, width - 1);
  std::uniform_int_distribution<int> gy(0, height - 1);
  const std::size_t boxes = nboxes(rng);
  for (std::size_t b = 0; b < boxes; ++b) {
    int x0 = gx(rng), x1 = gx(rng), y0 = gy(rng), y1 = gy(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    Detection d;
    d.view = view(rng);
    d.category = cat(rng);
    d.box = {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1) + 0.5,
             static_cast<double>(y1) + 0.5};
    d.score = unit(rng);
    s.detections.push_back(d);
  }
  std::uniform_int_distribution<std::size_t> kdist(1, std::min<std::size_t>(6, n - 1));
  s.graph = build_knn_graph(s.cloud, kdist(rng));
  return s;
}

/// Small random graph with clustered or unstructured 6-d features.
inline GraphInstance random_graph_instance(std::mt19937_64& rng, std::size_t n) {
  GraphInstance g;
  const PointCloud cloud = random_cloud(rng, n);
  std::uniform_int_distribution<int> kdist(2, 4);
  std::uniform_int_distribution<int> clusters(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  g.features.resize(static_cast<Eigen::Index>(n), 6);
  const int num_centers = clusters(rng);
  std::vector<Eigen::RowVectorXd> centers;
  for (int c = 0; c < num_centers; ++c) {
    Eigen::RowVectorXd center(6);
    for (int d = 0; d < 6; ++d) center[d] = unit(rng);
    centers.push_back(center);
  }
  const double noise = std::pow(10.0, -2.0 + 2.0 * unit(rng));
  for (std::size_t i = 0; i < n; ++i) {
    // Cluster chosen by position so clusters are spatially coherent.
    const double s = (cloud.positions[i].x() + 1.0) / 2.0;
    const int c = std::min(num_centers - 1, static_cast<int>(s * num_centers));
    for (int d = 0; d < 6; ++d) {
      g.features(static_cast<Eigen::Index>(i), d) = centers[c][d] + noise * gauss(rng);
    }
  }
  g.graph = build_knn_graph(cloud, static_cast<std::size_t>(kdist(rng)));
  for (const Edge& e : g.graph.edges()) {
    g.edge_pairs.emplace_back(e.a, e.b);
    g.edge_weights.push_back(e.weight);
  }
  g.rho = std::pow(10.0, -2.5 + 2.5 * unit(rng));
  return g;
}

}  // namespace fixtures
