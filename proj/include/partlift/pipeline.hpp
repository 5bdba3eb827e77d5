#pragma once

#include "partlift/metrics.hpp"
#include "partlift/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace partlift {

struct PipelineConfig {
  int num_views = 10;
  double tau = 0.3;
  int knn = 10;
  double rho = 0.1;
  double color_weight = 1.0;
  double splat_radius = 1.0;
  std::optional<double> eps_z;  // default_eps_z(cloud) when unset
  double noise_fraction = 0.05;
  double min_score = 0.0;
  double threshold = 0.0;
  int width = 800;
  int height = 800;
  int max_iters = 50;
  bool all_boxes = false;
  bool per_shape_iou = false;
};

/// Every field out of range, one message each.
std::vector<std::string> config_problems(const PipelineConfig& config);

/// K cameras on a sphere of radius 2.2 times the cloud's bounding-sphere
/// radius around the centroid. Directions follow a Fibonacci spiral from +z
/// (z_k = 1 - 2k/(K-1)) and every camera looks at the centroid with +z as up
/// (+x when +z is parallel to the view direction). fx = fy = 0.8 * width and
/// the principal point is the image center.
std::vector<View> make_default_views(const PointCloud& cloud, int num_views, int width = 800,
                                     int height = 800);

/// Solid primitive whose surface is sampled. Boxes use `size` as full
/// extents; cylinders stand along z with diameter size.x and height size.z;
/// spheres have diameter size.x.
struct Primitive {
  enum class Kind { Box, Cylinder, Sphere };
  Kind kind = Kind::Box;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  CategoryId category = 0;
  InstanceId instance = 0;
  Vec3 color{0.5, 0.5, 0.5};
};

struct SceneSpec {
  LabelSchema schema;
  std::vector<Primitive> parts;
  double density = 2000.0;  // samples per unit area
  std::uint64_t seed = 0;
};

struct SynthScene {
  LabelSchema schema;
  PointCloud cloud;
  std::vector<CategoryId> semantic;
  std::vector<InstanceId> instance;
};

/// Jittered-grid surface samples of every primitive with analytic normals
/// and the primitive's flat color. Samples inside or on another primitive
/// are dropped. The same SceneSpec always yields the same cloud.
SynthScene synth_scene(const SceneSpec& spec);

/// Named scenes: "cube" (one unit cube labeled seat), "chair" (seat, back
/// and four legs) and "separated" (2 to 6 primitives of two categories on a
/// grid with gaps, laid out from the seed).
SceneSpec preset_scene(const std::string& name, std::uint64_t seed = 0);

/// Ground-truth boxes of every view, concatenated in view order.
std::vector<Detection> scene_detections(const PointCloud& cloud, const std::vector<CategoryId>& semantic,
                                        const std::vector<InstanceId>& instance, const std::vector<View>& views,
                                        double splat_radius, double eps_z, double noise_fraction);

struct PipelineResult {
  Partition partition;
  SegmentationResult segmentation;
  std::optional<EvalReport> report;
};

/// Rasterize, oversegment, vote, assign and group; evaluates against `gt`
/// when given. Inputs are validated first and every stage output is
/// re-validated.
PipelineResult run_pipeline(const PipelineConfig& config, const PointCloud& cloud, const std::vector<View>& views,
                            const std::vector<Detection>& detections, const LabelSchema& schema,
                            const SegmentationResult* gt = nullptr);

}  // namespace partlift
