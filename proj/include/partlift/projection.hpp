#pragma once

#include "partlift/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace partlift {

struct Projection {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
};

/// Pinhole projection. Returns nullopt (behind the camera) iff the
/// camera-frame depth is <= eps_z.
std::optional<Projection> project(const View& view, const Vec3& position, double eps_z = 1e-9);

/// Pixel whose center is nearest to continuous coordinate (x, y).
inline int containing_pixel(double coord) {
  return static_cast<int>(std::floor(coord + 0.5));
}

inline constexpr PointIndex kEmptyPixel = std::numeric_limits<PointIndex>::max();

/// Z-buffered point-splat rendering of one view.
///
/// A point is rasterized only when it is in front of the camera and its
/// containing pixel lies inside the image. It covers its containing pixel
/// plus every pixel whose center is within `splat_radius` of the projection.
/// Each pixel keeps the minimum depth; equal depths go to the lower point
/// index. A rasterized point is visible iff at least one pixel it covers has
/// buffer depth >= point depth - eps_z.
struct RasterResult {
  int width = 0;
  int height = 0;
  std::vector<double> depth;      // row-major, +inf where empty
  std::vector<PointIndex> owner;  // row-major, kEmptyPixel where empty
  ViewVisibility visibility;

  double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
  PointIndex owner_at(int x, int y) const { return owner[static_cast<std::size_t>(y) * width + x]; }
};

RasterResult rasterize(const PointCloud& cloud, const View& view, double splat_radius,
                       double eps_z);

/// Rasterizes every view (in parallel across views).
std::vector<RasterResult> rasterize_all(const PointCloud& cloud, const std::vector<View>& views,
                                        double splat_radius, double eps_z);

VisibilityMap make_visibility_map(const std::vector<RasterResult>& rasters);

/// Calls fn(x, y) for every in-image pixel covered by a splat at (px, py).
template <typename Fn>
void for_each_covered_pixel(double px, double py, double radius, int width, int height, Fn&& fn) {
  const int cx = containing_pixel(px);
  const int cy = containing_pixel(py);
  const int x0 = std::max(0, static_cast<int>(std::ceil(px - radius)));
  const int x1 = std::min(width - 1, static_cast<int>(std::floor(px + radius)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(py - radius)));
  const int y1 = std::min(height - 1, static_cast<int>(std::floor(py + radius)));
  const double r2 = radius * radius;
  bool center_seen = false;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - py;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - px;
      if (dx * dx + dy * dy <= r2) {
        if (x == cx && y == cy) center_seen = true;
        fn(x, y);
      }
    }
  }
  if (!center_seen && cx >= 0 && cx < width && cy >= 0 && cy < height) fn(cx, cy);
}

/// INS_b(p): closed-box test on p's projection in `view`. Visibility is not checked.
bool point_in_box(const VisibilityMap& vis, std::size_t view, PointIndex p, const BBox2D& box);

/// Ground-truth boxes for one view from per-point instance labels.
///
/// An instance's pixels are the pixels its points own in the depth buffer.
/// These are grouped into 8-connected components; components smaller than
/// noise_fraction times the instance's pixel count are dropped and the
/// bounding box of the remaining pixel centers is emitted with score 1.
/// Instances with kNoInstance are ignored; output is ordered by instance id.
std::vector<Detection> gt_boxes(const std::vector<InstanceId>& instance_labels,
                                const std::vector<CategoryId>& semantic_labels,
                                std::size_t view_index, const RasterResult& raster,
                                double noise_fraction);

/// Default visibility tolerance: 1e-3 times the bounding-box diagonal.
double default_eps_z(const PointCloud& cloud);

}  // namespace partlift
