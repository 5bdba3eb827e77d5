#include "partlift/pipeline.hpp"

#include "partlift/grouping.hpp"
#include "partlift/projection.hpp"
#include "partlift/superpoints.hpp"
#include "partlift/voting.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

namespace partlift {

std::vector<std::string> config_problems(const PipelineConfig& c) {
  std::vector<std::string> out;
  auto need = [&](bool ok, const char* message) {
    if (!ok) out.emplace_back(message);
  };
  need(c.num_views >= 1, "num_views must be >= 1");
  need(c.tau > 0.0 && std::isfinite(c.tau), "tau must be positive");
  need(c.knn >= 1, "knn must be >= 1");
  need(c.rho > 0.0 && std::isfinite(c.rho), "rho must be positive");
  need(c.color_weight >= 0.0 && std::isfinite(c.color_weight), "color_weight must be >= 0");
  need(c.splat_radius >= 0.0 && std::isfinite(c.splat_radius), "splat_radius must be >= 0");
  need(!c.eps_z || (*c.eps_z > 0.0 && std::isfinite(*c.eps_z)), "eps_z must be positive");
  need(c.noise_fraction >= 0.0 && c.noise_fraction < 1.0, "noise_fraction must lie in [0, 1)");
  need(c.min_score >= 0.0 && c.min_score <= 1.0, "min_score must lie in [0, 1]");
  need(c.threshold >= 0.0 && c.threshold <= 1.0, "threshold must lie in [0, 1]");
  need(c.width >= 1 && c.height >= 1, "resolution must be at least 1x1");
  need(c.max_iters >= 1, "max_iters must be >= 1");
  return out;
}

std::vector<View> make_default_views(const PointCloud& cloud, int num_views, int width, int height) {
  if (num_views < 1) throw Error("make_default_views: need at least one view");
  if (cloud.empty()) throw Error("make_default_views: empty cloud");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : cloud.positions) centroid += p;
  centroid /= static_cast<double>(cloud.size());
  double radius = 0.0;
  for (const Vec3& p : cloud.positions) radius = std::max(radius, (p - centroid).norm());
  if (radius == 0.0) radius = 1.0;

  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<View> views;
  for (int k = 0; k < num_views; ++k) {
    const double z = num_views == 1 ? 1.0 : 1.0 - 2.0 * k / (num_views - 1);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double theta = golden * k;
    const Vec3 direction(r * std::cos(theta), r * std::sin(theta), z);
    const Vec3 eye = centroid + 2.2 * radius * direction;

    const Vec3 forward = -direction.normalized();
    Vec3 up = Vec3::UnitZ();
    if (forward.cross(up).norm() < 1e-6) up = Vec3::UnitX();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);

    View v;
    v.width = width;
    v.height = height;
    v.fx = v.fy = 0.8 * width;
    v.cx = (width - 1) / 2.0;
    v.cy = (height - 1) / 2.0;
    Mat3 rot;
    rot.row(0) = right.transpose();
    rot.row(1) = down.transpose();
    rot.row(2) = forward.transpose();
    v.extrinsic.setIdentity();
    v.extrinsic.topLeftCorner<3, 3>() = rot;
    v.extrinsic.topRightCorner<3, 1>() = -rot * eye;
    views.push_back(v);
  }
  return views;
}

namespace {

// Uniform in [0, 1) from the top 53 bits, identical on every platform.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int cells(double length, double density) {
  return std::max(1, static_cast<int>(std::lround(length * std::sqrt(density))));
}

struct Sample {
  Vec3 position;
  Vec3 normal;
};

void sample_box(const Primitive& prim, double density, std::mt19937_64& rng, std::vector<Sample>& out) {
  const Vec3 half = prim.size / 2.0;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    const int na = cells(prim.size[a], density);
    const int nb = cells(prim.size[b], density);
    for (int sign : {-1, 1}) {
      Vec3 normal = Vec3::Zero();
      normal[axis] = sign;
      for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
          Vec3 p = prim.center;
          p[axis] += sign * half[axis];
          p[a] += -half[a] + prim.size[a] * (i + unit(rng)) / na;
          p[b] += -half[b] + prim.size[b] * (j + unit(rng)) / nb;
          out.push_back({p, normal});
        }
      }
    }
  }
}

void sample_cylinder(const Primitive& prim, double density, std::mt19937_64& rng, std::vector<Sample>& out) {
  const double r = prim.size.x() / 2.0;
  const double h = prim.size.z();
  const double two_pi = 2.0 * std::numbers::pi;
  const int around = std::max(3, cells(two_pi * r, density));
  const int along = cells(h, density);
  for (int i = 0; i < around; ++i) {
    for (int j = 0; j < along; ++j) {
      const double theta = two_pi * (i + unit(rng)) / around;
      const Vec3 radial(std::cos(theta), std::sin(theta), 0.0);
      const double z = -h / 2.0 + h * (j + unit(rng)) / along;
      out.push_back({prim.center + r * radial + Vec3(0, 0, z), radial});
    }
  }
  // Caps on an area-uniform polar grid.
  const int rings = std::max(1, static_cast<int>(std::lround(std::numbers::pi * r * r * density / around)));
  for (int sign : {-1, 1}) {
    for (int i = 0; i < rings; ++i) {
      for (int j = 0; j < around; ++j) {
        const double rho = r * std::sqrt((i + unit(rng)) / rings);
        const double theta = two_pi * (j + unit(rng)) / around;
        const Vec3 p = prim.center + Vec3(rho * std::cos(theta), rho * std::sin(theta), sign * h / 2.0);
        out.push_back({p, Vec3(0, 0, sign)});
      }
    }
  }
}

void sample_sphere(const Primitive& prim, double density, std::mt19937_64& rng, std::vector<Sample>& out) {
  // Uniform z and longitude give uniform area on a sphere.
  const double r = prim.size.x() / 2.0;
  const double two_pi = 2.0 * std::numbers::pi;
  const int around = std::max(3, cells(two_pi * r, density));
  const int bands = std::max(1, static_cast<int>(std::lround(4.0 * std::numbers::pi * r * r * density / around)));
  for (int i = 0; i < bands; ++i) {
    for (int j = 0; j < around; ++j) {
      const double z = -1.0 + 2.0 * (i + unit(rng)) / bands;
      const double theta = two_pi * (j + unit(rng)) / around;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 n(s * std::cos(theta), s * std::sin(theta), z);
      out.push_back({prim.center + r * n, n});
    }
  }
}

bool inside(const Primitive& prim, const Vec3& p) {
  constexpr double slack = 1e-9;
  const Vec3 d = p - prim.center;
  switch (prim.kind) {
    case Primitive::Kind::Box:
      return (d.cwiseAbs() - prim.size / 2.0).maxCoeff() <= slack;
    case Primitive::Kind::Cylinder:
      return d.head<2>().norm() <= prim.size.x() / 2.0 + slack && std::abs(d.z()) <= prim.size.z() / 2.0 + slack;
    case Primitive::Kind::Sphere:
      return d.norm() <= prim.size.x() / 2.0 + slack;
  }
  return false;
}

}  // namespace

SynthScene synth_scene(const SceneSpec& spec) {
  if (!(spec.density > 0.0)) throw Error("synth_scene: density must be positive");
  SynthScene out;
  out.schema = spec.schema;
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = 0; i < spec.parts.size(); ++i) {
    const Primitive& prim = spec.parts[i];
    if (prim.category < 0 || prim.category >= spec.schema.num_categories()) {
      throw Error("synth_scene: part " + std::to_string(i) + " has a category outside the schema");
    }
    if (!(prim.size.minCoeff() > 0.0)) throw Error("synth_scene: part " + std::to_string(i) + " has no volume");
    std::vector<Sample> samples;
    switch (prim.kind) {
      case Primitive::Kind::Box: sample_box(prim, spec.density, rng, samples); break;
      case Primitive::Kind::Cylinder: sample_cylinder(prim, spec.density, rng, samples); break;
      case Primitive::Kind::Sphere: sample_sphere(prim, spec.density, rng, samples); break;
    }
    for (const Sample& s : samples) {
      bool hidden = false;
      for (std::size_t j = 0; j < spec.parts.size() && !hidden; ++j) {
        hidden = j != i && inside(spec.parts[j], s.position);
      }
      if (hidden) continue;
      out.cloud.positions.push_back(s.position);
      out.cloud.normals.push_back(s.normal);
      out.cloud.colors.push_back(prim.color);
      out.semantic.push_back(prim.category);
      out.instance.push_back(prim.instance);
    }
  }
  return out;
}

SceneSpec preset_scene(const std::string& name, std::uint64_t seed) {
  using Kind = Primitive::Kind;
  SceneSpec spec;
  spec.seed = seed;
  if (name == "cube") {
    spec.schema = {"cube", {"seat"}};
    spec.parts.push_back({Kind::Box, Vec3::Zero(), Vec3::Ones(), 0, 0, {0.8, 0.3, 0.25}});
    return spec;
  }
  if (name == "chair") {
    spec.schema = {"chair", {"seat", "back", "leg"}};
    spec.parts.push_back({Kind::Box, {0, 0, 0.5}, {1.0, 1.0, 0.1}, 0, 0, {0.8, 0.3, 0.25}});
    spec.parts.push_back({Kind::Box, {0, 0.45, 0.95}, {1.0, 0.1, 0.8}, 1, 1, {0.3, 0.7, 0.35}});
    InstanceId id = 2;
    for (double x : {-0.4, 0.4}) {
      for (double y : {-0.4, 0.4}) {
        spec.parts.push_back({Kind::Box, {x, y, 0.225}, {0.1, 0.1, 0.45}, 2, id++, {0.25, 0.35, 0.8}});
      }
    }
    return spec;
  }
  if (name == "separated") {
    spec.schema = {"blocks", {"block", "knob"}};
    std::mt19937_64 rng(seed);
    std::vector<int> slots{0, 1, 2, 3, 4, 5, 6, 7, 8};
    const int count = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < count; ++i) {
      const std::size_t pick = i + rng() % (slots.size() - i);
      std::swap(slots[i], slots[pick]);
      const Vec3 center(2.0 * (slots[i] % 3), 2.0 * (slots[i] / 3), 0.0);
      const Kind kind = static_cast<Kind>(rng() % 3);
      Vec3 size(0.5 + 0.5 * unit(rng), 0.5 + 0.5 * unit(rng), 0.5 + 0.5 * unit(rng));
      if (kind == Kind::Sphere) size = Vec3::Constant(size.x());
      if (kind == Kind::Cylinder) size.y() = size.x();
      const CategoryId category = static_cast<CategoryId>(rng() % 2);
      const Vec3 color = category == 0 ? Vec3(0.8, 0.3, 0.25) : Vec3(0.25, 0.35, 0.8);
      spec.parts.push_back({kind, center, size, category, i, color});
    }
    return spec;
  }
  throw Error("unknown scene preset '" + name + "' (expected cube, chair or separated)");
}

std::vector<Detection> scene_detections(const PointCloud& cloud, const std::vector<CategoryId>& semantic,
                                        const std::vector<InstanceId>& instance, const std::vector<View>& views,
                                        double splat_radius, double eps_z, double noise_fraction) {
  const auto rasters = rasterize_all(cloud, views, splat_radius, eps_z);
  std::vector<Detection> out;
  for (std::size_t k = 0; k < rasters.size(); ++k) {
    for (const Detection& d : gt_boxes(instance, semantic, k, rasters[k], noise_fraction)) out.push_back(d);
  }
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& config, const PointCloud& cloud, const std::vector<View>& views,
                            const std::vector<Detection>& detections, const LabelSchema& schema,
                            const SegmentationResult* gt) {
  if (const auto problems = config_problems(config); !problems.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& p : problems) message += "\n  " + p;
    throw Error(message);
  }
  if (const ValidationReport report = validate(cloud, views, detections, schema); !report.ok()) {
    throw Error("invalid input:\n" + report.summary());
  }
  if (gt && gt->semantic.size() != cloud.size()) throw Error("ground truth and cloud differ in point count");

  const double eps_z = config.eps_z.value_or(default_eps_z(cloud));
  const VisibilityMap vis = make_visibility_map(rasterize_all(cloud, views, config.splat_radius, eps_z));

  PipelineResult out;
  const Eigen::MatrixXd features = build_features(cloud, config.color_weight);
  AdjacencyGraph graph;
  if (cloud.size() >= 2) {
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.knn), cloud.size() - 1);
    graph = build_knn_graph(cloud, k);
  } else {
    graph = AdjacencyGraph(cloud.size(), {});
  }
  out.partition = cut_pursuit(features, graph, config.rho, config.max_iters);

  const std::vector<Detection> kept = filter_detections(detections, config.min_score);
  const ScoreMatrix scores = vote_scores(out.partition, kept, vis, schema);
  const std::vector<CategoryId> labels = superpoint_semantics(scores, config.threshold);
  out.segmentation =
      group_instances(out.partition, labels, kept, vis, graph, scores, GroupingOptions{config.tau, config.all_boxes});

  ValidationReport stage;
  validate_partition(out.partition, stage);
  validate_segmentation(out.segmentation, schema, stage);
  if (!stage.ok()) throw Error("pipeline produced invalid output:\n" + stage.summary());

  if (gt) out.report = report({schema}, {ShapeEval{schema.object_name, out.segmentation, *gt}}, config.per_shape_iou);
  return out;
}

}  // namespace partlift
