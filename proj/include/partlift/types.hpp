#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace partlift {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

using PointIndex = std::uint32_t;
using CategoryId = std::int32_t;
using InstanceId = std::int32_t;

/// Instance id carried by points that belong to no instance.
inline constexpr InstanceId kNoInstance = -1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense point cloud. Colors are in [0,1]; normals are unit length once
/// the cloud has gone through renormalize_normals().
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
};

/// Pinhole camera. Pixel (i, j) is centered at continuous coordinate (i, j),
/// so the image rectangle is [-0.5, width - 0.5) x [-0.5, height - 0.5).
struct View {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat4 extrinsic = Mat4::Identity();  // world -> camera
  int width = 1;
  int height = 1;

  Mat3 rotation() const { return extrinsic.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return extrinsic.topRightCorner<3, 1>(); }
  Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }
  /// Camera center in world coordinates.
  Vec3 center() const { return -rotation().transpose() * translation(); }
  /// Unit optical axis in world coordinates.
  Vec3 optical_axis() const { return rotation().row(2).transpose(); }
};

struct BBox2D {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  /// Closed-interval membership.
  bool contains(double x, double y) const {
    return xmin <= x && x <= xmax && ymin <= y && y <= ymax;
  }
  bool operator==(const BBox2D&) const = default;
};

struct Detection {
  std::size_t view = 0;
  CategoryId category = 0;
  BBox2D box;
  double score = 1.0;

  bool operator==(const Detection&) const = default;
};

struct LabelSchema {
  std::string object_name;
  std::vector<std::string> categories;

  CategoryId num_categories() const { return static_cast<CategoryId>(categories.size()); }
  /// Sentinel semantic label: one past the last category.
  CategoryId unlabeled() const { return num_categories(); }
};

/// Disjoint cover of point indices by superpoints 0..S-1.
struct Partition {
  std::vector<std::uint32_t> assignment;  // per point
  Eigen::MatrixXd means;                  // S x D mean feature per superpoint

  std::size_t num_points() const { return assignment.size(); }
  std::size_t num_superpoints() const { return static_cast<std::size_t>(means.rows()); }
  /// Member lists, each sorted ascending.
  std::vector<std::vector<PointIndex>> members() const;
};

/// Builds a partition from raw assignments, relabeling ids densely in order
/// of first appearance and computing per-superpoint mean features.
Partition make_partition(const std::vector<std::uint32_t>& raw_assignment,
                         const Eigen::MatrixXd& features);

/// Projection of every point into one view.
struct ViewVisibility {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> visible;
  std::vector<Vec2> pixel;  // continuous projected coordinates
  std::vector<double> depth;  // camera-frame z; meaningless when behind

  std::size_t size() const { return visible.size(); }
};

struct VisibilityMap {
  std::vector<ViewVisibility> views;

  std::size_t num_views() const { return views.size(); }
  bool visible(std::size_t view, PointIndex p) const { return views[view].visible[p] != 0; }
  const Vec2& pixel(std::size_t view, PointIndex p) const { return views[view].pixel[p]; }
};

struct InstanceInfo {
  CategoryId category = 0;
  double confidence = 0.0;
  std::size_t num_points = 0;

  bool operator==(const InstanceInfo&) const = default;
};

struct SegmentationResult {
  std::vector<CategoryId> semantic;
  std::vector<InstanceId> instance;
  std::vector<InstanceInfo> instances;

  bool operator==(const SegmentationResult&) const = default;
};

struct Violation {
  std::string kind;  // "cloud", "view", "detection", "schema", "segmentation"
  std::size_t index = 0;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  /// Points whose normal length is off by more than the renormalization
  /// tolerance; renormalize_normals() would rescale these.
  std::vector<PointIndex> renormalized;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
  bool operator==(const ValidationReport&) const = default;
};

inline constexpr double kNormalTolerance = 1e-4;
inline constexpr double kRotationTolerance = 1e-6;

ValidationReport validate(const PointCloud& cloud, const std::vector<View>& views,
                          const std::vector<Detection>& detections, const LabelSchema& schema);

/// Per-type checks, appended to `report`.
void validate_cloud(const PointCloud& cloud, ValidationReport& report);
void validate_views(const std::vector<View>& views, ValidationReport& report);
void validate_detections(const std::vector<Detection>& detections, const std::vector<View>& views,
                         const LabelSchema& schema, ValidationReport& report);
void validate_schema(const LabelSchema& schema, ValidationReport& report);
void validate_segmentation(const SegmentationResult& result, const LabelSchema& schema,
                           ValidationReport& report);
void validate_partition(const Partition& partition, ValidationReport& report);

/// Returns a copy where every normal whose length is off by more than
/// kNormalTolerance is divided by its length. Normals already within
/// tolerance keep their exact bits. Throws Error naming the first zero
/// (or non-finite) normal.
PointCloud renormalize_normals(PointCloud cloud);

}  // namespace partlift
