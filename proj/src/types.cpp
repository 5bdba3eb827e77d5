#include "partlift/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace partlift {

std::vector<std::vector<PointIndex>> Partition::members() const {
  std::vector<std::vector<PointIndex>> out(num_superpoints());
  for (std::size_t p = 0; p < assignment.size(); ++p) {
    out[assignment[p]].push_back(static_cast<PointIndex>(p));
  }
  return out;
}

Partition make_partition(const std::vector<std::uint32_t>& raw_assignment,
                         const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.rows()) != raw_assignment.size()) {
    throw Error("make_partition: feature rows do not match point count");
  }
  Partition out;
  out.assignment.resize(raw_assignment.size());
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  for (std::size_t p = 0; p < raw_assignment.size(); ++p) {
    auto [it, inserted] =
        remap.try_emplace(raw_assignment[p], static_cast<std::uint32_t>(remap.size()));
    out.assignment[p] = it->second;
  }
  const auto num = static_cast<Eigen::Index>(remap.size());
  out.means = Eigen::MatrixXd::Zero(num, features.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num);
  for (std::size_t p = 0; p < out.assignment.size(); ++p) {
    out.means.row(out.assignment[p]) += features.row(static_cast<Eigen::Index>(p));
    counts[out.assignment[p]] += 1.0;
  }
  for (Eigen::Index s = 0; s < num; ++s) out.means.row(s) /= counts[s];
  return out;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.kind << "[" << v.index << "]: " << v.message << "\n";
  return os.str();
}

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

void add(ValidationReport& report, const char* kind, std::size_t index, std::string message) {
  report.violations.push_back({kind, index, std::move(message)});
}

}  // namespace

void validate_cloud(const PointCloud& cloud, ValidationReport& report) {
  if (cloud.empty()) {
    add(report, "cloud", 0, "cloud has no points");
    return;
  }
  if (cloud.colors.size() != cloud.size() || cloud.normals.size() != cloud.size()) {
    add(report, "cloud", 0, "positions, colors and normals differ in length");
    return;
  }
  for (std::size_t p = 0; p < cloud.size(); ++p) {
    if (!finite(cloud.positions[p])) {
      add(report, "cloud", p, "non-finite position at point " + std::to_string(p));
    }
    const Vec3& c = cloud.colors[p];
    if (!finite(c) || c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) {
      add(report, "cloud", p, "color outside [0,1] at point " + std::to_string(p));
    }
    const Vec3& n = cloud.normals[p];
    if (!finite(n)) {
      add(report, "cloud", p, "non-finite normal at point " + std::to_string(p));
      continue;
    }
    const double len = n.norm();
    if (len == 0.0) {
      add(report, "cloud", p, "zero normal at point " + std::to_string(p));
    } else if (std::abs(len - 1.0) > kNormalTolerance) {
      report.renormalized.push_back(static_cast<PointIndex>(p));
    }
  }
}

void validate_views(const std::vector<View>& views, ValidationReport& report) {
  for (std::size_t k = 0; k < views.size(); ++k) {
    const View& v = views[k];
    if (!(v.fx > 0.0) || !(v.fy > 0.0)) add(report, "view", k, "non-positive focal length");
    if (!std::isfinite(v.cx) || !std::isfinite(v.cy)) {
      add(report, "view", k, "non-finite principal point");
    }
    if (v.width < 1 || v.height < 1) add(report, "view", k, "image size must be at least 1x1");
    if (!v.extrinsic.allFinite()) {
      add(report, "view", k, "non-finite extrinsic");
      continue;
    }
    const Mat3 r = v.rotation();
    if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > kRotationTolerance) {
      add(report, "view", k, "rotation block is not orthonormal");
    } else if (r.determinant() < 0.0) {
      add(report, "view", k, "rotation block is a reflection");
    }
    const Eigen::RowVector4d last = v.extrinsic.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kRotationTolerance) {
      add(report, "view", k, "extrinsic last row must be (0,0,0,1)");
    }
  }
}

void validate_detections(const std::vector<Detection>& detections, const std::vector<View>& views,
                         const LabelSchema& schema, ValidationReport& report) {
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    const BBox2D& b = d.box;
    if (d.view >= views.size()) {
      add(report, "detection", i, "view index out of range at detection index " + std::to_string(i));
    }
    if (d.category < 0 || d.category >= schema.num_categories()) {
      add(report, "detection", i,
          "category out of range at detection index " + std::to_string(i));
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      add(report, "detection", i, "score outside [0,1] at detection index " + std::to_string(i));
    }
    if (!std::isfinite(b.xmin) || !std::isfinite(b.ymin) || !std::isfinite(b.xmax) ||
        !std::isfinite(b.ymax)) {
      add(report, "detection", i, "non-finite box at detection index " + std::to_string(i));
      continue;
    }
    if (!(b.xmin < b.xmax) || !(b.ymin < b.ymax)) {
      add(report, "detection", i, "degenerate box at detection index " + std::to_string(i));
      continue;
    }
    if (d.view < views.size()) {
      const View& v = views[d.view];
      const double left = std::max(b.xmin, -0.5);
      const double right = std::min(b.xmax, v.width - 0.5);
      const double top = std::max(b.ymin, -0.5);
      const double bottom = std::min(b.ymax, v.height - 0.5);
      if (!(left < right) || !(top < bottom)) {
        add(report, "detection", i,
            "box outside the image at detection index " + std::to_string(i));
      }
    }
  }
}

void validate_schema(const LabelSchema& schema, ValidationReport& report) {
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < schema.categories.size(); ++c) {
    const auto& name = schema.categories[c];
    if (name.empty()) add(report, "schema", c, "empty category name");
    if (!seen.insert(name).second) add(report, "schema", c, "duplicate category name '" + name + "'");
  }
}

void validate_segmentation(const SegmentationResult& result, const LabelSchema& schema,
                           ValidationReport& report) {
  const CategoryId unlabeled = schema.unlabeled();
  if (result.semantic.size() != result.instance.size()) {
    add(report, "segmentation", 0, "semantic and instance arrays differ in length");
    return;
  }
  std::vector<std::size_t> counts(result.instances.size(), 0);
  for (std::size_t p = 0; p < result.semantic.size(); ++p) {
    const CategoryId c = result.semantic[p];
    if (c < 0 || c > unlabeled) {
      add(report, "segmentation", p, "semantic id out of range at point " + std::to_string(p));
    }
    const InstanceId id = result.instance[p];
    if (id == kNoInstance) continue;
    if (id < 0 || static_cast<std::size_t>(id) >= result.instances.size()) {
      add(report, "segmentation", p, "instance id out of range at point " + std::to_string(p));
      continue;
    }
    ++counts[id];
    if (result.instances[id].category != c) {
      add(report, "segmentation", p,
          "semantic id disagrees with instance category at point " + std::to_string(p));
    }
  }
  for (std::size_t m = 0; m < result.instances.size(); ++m) {
    const auto& info = result.instances[m];
    if (counts[m] == 0) add(report, "segmentation", m, "instance " + std::to_string(m) + " is empty");
    if (counts[m] != info.num_points) {
      add(report, "segmentation", m, "instance " + std::to_string(m) + " point count mismatch");
    }
    if (!(info.confidence >= 0.0 && info.confidence <= 1.0)) {
      add(report, "segmentation", m, "instance " + std::to_string(m) + " confidence outside [0,1]");
    }
    if (info.category < 0 || info.category >= unlabeled) {
      add(report, "segmentation", m, "instance " + std::to_string(m) + " has no valid category");
    }
  }
}

void validate_partition(const Partition& partition, ValidationReport& report) {
  std::vector<std::size_t> counts(partition.num_superpoints(), 0);
  for (std::size_t p = 0; p < partition.assignment.size(); ++p) {
    const auto s = partition.assignment[p];
    if (s >= counts.size()) {
      add(report, "partition", p, "superpoint id out of range at point " + std::to_string(p));
      continue;
    }
    ++counts[s];
  }
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s] == 0) add(report, "partition", s, "superpoint " + std::to_string(s) + " is empty");
  }
}

ValidationReport validate(const PointCloud& cloud, const std::vector<View>& views,
                          const std::vector<Detection>& detections, const LabelSchema& schema) {
  ValidationReport report;
  validate_cloud(cloud, report);
  validate_views(views, report);
  validate_schema(schema, report);
  validate_detections(detections, views, schema, report);
  return report;
}

PointCloud renormalize_normals(PointCloud cloud) {
  for (std::size_t p = 0; p < cloud.normals.size(); ++p) {
    Vec3& n = cloud.normals[p];
    const double len = n.norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw Error("zero normal at point " + std::to_string(p));
    }
    if (std::abs(len - 1.0) > kNormalTolerance) n /= len;
  }
  return cloud;
}

}  // namespace partlift
