#include "partlift/projection.hpp"

#include "partlift/parallel.hpp"

#include <map>

namespace partlift {

std::optional<Projection> project(const View& view, const Vec3& position, double eps_z) {
  const Vec3 c = view.to_camera(position);
  if (c.z() <= eps_z) return std::nullopt;
  return Projection{view.fx * c.x() / c.z() + view.cx, view.fy * c.y() / c.z() + view.cy, c.z()};
}

RasterResult rasterize(const PointCloud& cloud, const View& view, double splat_radius,
                       double eps_z) {
  if (splat_radius < 0.0) throw Error("rasterize: splat radius must be >= 0");
  if (!(eps_z > 0.0)) throw Error("rasterize: eps_z must be > 0");

  RasterResult out;
  out.width = view.width;
  out.height = view.height;
  const auto pixels = static_cast<std::size_t>(view.width) * view.height;
  out.depth.assign(pixels, std::numeric_limits<double>::infinity());
  out.owner.assign(pixels, kEmptyPixel);

  const std::size_t n = cloud.size();
  ViewVisibility& vis = out.visibility;
  vis.width = view.width;
  vis.height = view.height;
  vis.visible.assign(n, 0);
  vis.pixel.assign(n, Vec2::Constant(std::numeric_limits<double>::quiet_NaN()));
  vis.depth.assign(n, -std::numeric_limits<double>::infinity());

  std::vector<std::uint8_t> drawn(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto proj = project(view, cloud.positions[p], eps_z);
    if (!proj) continue;
    vis.pixel[p] = Vec2(proj->x, proj->y);
    vis.depth[p] = proj->depth;
    const int cx = containing_pixel(proj->x);
    const int cy = containing_pixel(proj->y);
    if (cx < 0 || cx >= view.width || cy < 0 || cy >= view.height) continue;
    drawn[p] = 1;
    const auto index = static_cast<PointIndex>(p);
    for_each_covered_pixel(proj->x, proj->y, splat_radius, view.width, view.height,
                           [&](int x, int y) {
                             const std::size_t i = static_cast<std::size_t>(y) * view.width + x;
                             if (proj->depth < out.depth[i]) {
                               out.depth[i] = proj->depth;
                               out.owner[i] = index;
                             }
                           });
  }

  for (std::size_t p = 0; p < n; ++p) {
    if (!drawn[p]) continue;
    const double z = vis.depth[p];
    bool seen = false;
    for_each_covered_pixel(vis.pixel[p].x(), vis.pixel[p].y(), splat_radius, view.width,
                           view.height, [&](int x, int y) {
                             if (out.depth_at(x, y) >= z - eps_z) seen = true;
                           });
    vis.visible[p] = seen ? 1 : 0;
  }
  return out;
}

std::vector<RasterResult> rasterize_all(const PointCloud& cloud, const std::vector<View>& views,
                                        double splat_radius, double eps_z) {
  std::vector<RasterResult> out(views.size());
  parallel_for(views.size(),
               [&](std::size_t k) { out[k] = rasterize(cloud, views[k], splat_radius, eps_z); });
  return out;
}

VisibilityMap make_visibility_map(const std::vector<RasterResult>& rasters) {
  VisibilityMap vis;
  vis.views.reserve(rasters.size());
  for (const auto& r : rasters) vis.views.push_back(r.visibility);
  return vis;
}

bool point_in_box(const VisibilityMap& vis, std::size_t view, PointIndex p, const BBox2D& box) {
  const Vec2& px = vis.pixel(view, p);
  return box.contains(px.x(), px.y());
}

std::vector<Detection> gt_boxes(const std::vector<InstanceId>& instance_labels,
                                const std::vector<CategoryId>& semantic_labels,
                                std::size_t view_index, const RasterResult& raster,
                                double noise_fraction) {
  if (instance_labels.size() != semantic_labels.size()) {
    throw Error("gt_boxes: instance and semantic label counts differ");
  }
  const int w = raster.width;
  const int h = raster.height;

  // Owned pixels per instance, in row-major order.
  std::map<InstanceId, std::vector<std::size_t>> pixels_of;
  for (std::size_t i = 0; i < raster.owner.size(); ++i) {
    const PointIndex owner = raster.owner[i];
    if (owner == kEmptyPixel) continue;
    const InstanceId id = instance_labels.at(owner);
    if (id == kNoInstance) continue;
    pixels_of[id].push_back(i);
  }

  std::vector<Detection> out;
  std::vector<std::int32_t> label(raster.owner.size(), -1);
  for (const auto& [id, pixels] : pixels_of) {
    // Category of the instance: taken from its lowest-index owning point.
    PointIndex first = kEmptyPixel;
    for (std::size_t i : pixels) first = std::min(first, raster.owner[i]);
    const CategoryId category = semantic_labels[first];

    std::vector<std::vector<std::size_t>> components;
    for (std::size_t seed : pixels) label[seed] = -2;  // member, unvisited
    for (std::size_t seed : pixels) {
      if (label[seed] != -2) continue;
      const auto comp_id = static_cast<std::int32_t>(components.size());
      components.emplace_back();
      auto& comp = components.back();
      std::vector<std::size_t> stack{seed};
      label[seed] = comp_id;
      while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        comp.push_back(cur);
        const int x = static_cast<int>(cur % w);
        const int y = static_cast<int>(cur / w);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
            if (label[ni] == -2) {
              label[ni] = comp_id;
              stack.push_back(ni);
            }
          }
        }
      }
    }

    const double min_size = noise_fraction * static_cast<double>(pixels.size());
    bool any = false;
    BBox2D box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& comp : components) {
      if (static_cast<double>(comp.size()) < min_size) continue;
      any = true;
      for (std::size_t i : comp) {
        const double x = static_cast<double>(i % w);
        const double y = static_cast<double>(i / w);
        box.xmin = std::min(box.xmin, x);
        box.ymin = std::min(box.ymin, y);
        box.xmax = std::max(box.xmax, x);
        box.ymax = std::max(box.ymax, y);
      }
    }
    for (std::size_t i : pixels) label[i] = -1;
    // A single pixel row or column would give a zero-area box; use the pixel extent.
    if (any && box.xmin == box.xmax) {
      box.xmin -= 0.5;
      box.xmax += 0.5;
    }
    if (any && box.ymin == box.ymax) {
      box.ymin -= 0.5;
      box.ymax += 0.5;
    }
    if (any) out.push_back(Detection{view_index, category, box, 1.0});
  }
  return out;
}

double default_eps_z(const PointCloud& cloud) {
  if (cloud.empty()) return 1e-3;
  Vec3 lo = cloud.positions.front();
  Vec3 hi = lo;
  for (const auto& p : cloud.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  return diag > 0.0 ? 1e-3 * diag : 1e-3;
}

}  // namespace partlift
