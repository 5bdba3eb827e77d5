#pragma once

#include "partlift/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace partlift {

/// Point cloud plus optional per-point ground truth.
struct LabeledCloud {
  PointCloud cloud;
  std::optional<std::vector<CategoryId>> semantic;
  std::optional<std::vector<InstanceId>> instance;
};

/// PLY reader for ascii and binary_little_endian files. The vertex element
/// needs x, y, z, nx, ny, nz and red, green, blue; colors stored as 8-bit
/// integers are divided by 255. Integer `semantic` and `instance`
/// properties are picked up when present. Normals are renormalized.
LabeledCloud read_ply(std::istream& in);
LabeledCloud read_ply(const std::string& path);
PointCloud load_cloud(const std::string& path);

/// Binary little-endian PLY with double-precision fields, so a read of the
/// written file reproduces every bit. Labels are written when given.
void write_ply(std::ostream& out, const PointCloud& cloud,
               const std::vector<CategoryId>* semantic = nullptr,
               const std::vector<InstanceId>* instance = nullptr);
void write_ply(const std::string& path, const PointCloud& cloud,
               const std::vector<CategoryId>* semantic = nullptr,
               const std::vector<InstanceId>* instance = nullptr);

/// JSON list of {fx, fy, cx, cy, width, height, extrinsic: [16 reals, row-major]}.
/// Readers throw one Error listing every schema and invariant violation.
std::vector<View> read_views(std::istream& in);
std::vector<View> load_views(const std::string& path);
void write_views(std::ostream& out, const std::vector<View>& views);
void save_views(const std::string& path, const std::vector<View>& views);

/// JSON list of {view, category, box: [xmin, ymin, xmax, ymax], score}.
/// Only per-detection checks run here; view and category ranges are checked
/// against views and schema by validate().
std::vector<Detection> read_detections(std::istream& in);
std::vector<Detection> load_detections(const std::string& path);
void write_detections(std::ostream& out, const std::vector<Detection>& detections);
void save_detections(const std::string& path, const std::vector<Detection>& detections);

/// JSON {"object": name, "categories": [names]}.
LabelSchema read_schema(std::istream& in);
LabelSchema load_schema(const std::string& path);
void write_schema(std::ostream& out, const LabelSchema& schema);
void save_schema(const std::string& path, const LabelSchema& schema);

/// Per-point labels as text: a header "points N instances M categories C",
/// then one "semantic instance" line per point. Unlabeled points carry
/// semantic C and instance -1.
struct LabelFile {
  CategoryId num_categories = 0;
  std::vector<CategoryId> semantic;
  std::vector<InstanceId> instance;
  std::size_t num_instances = 0;

  bool operator==(const LabelFile&) const = default;
};

LabelFile label_file(const SegmentationResult& result, CategoryId num_categories);
void write_labels(std::ostream& out, const LabelFile& labels);
void save_labels(const std::string& path, const LabelFile& labels);
LabelFile read_labels(std::istream& in);
LabelFile load_labels(const std::string& path);

/// Instance table as CSV "id,category,confidence,num_points". Confidence is
/// printed with 17 significant digits so it reads back exactly.
void write_instances_csv(std::ostream& out, const SegmentationResult& result);
void save_instances_csv(const std::string& path, const SegmentationResult& result);
std::vector<InstanceInfo> read_instances_csv(std::istream& in);
std::vector<InstanceInfo> load_instances_csv(const std::string& path);

}  // namespace partlift
