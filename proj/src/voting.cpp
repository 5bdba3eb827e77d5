#include "partlift/voting.hpp"

#include "partlift/parallel.hpp"

#include <string>

namespace partlift {

std::vector<Detection> filter_detections(const std::vector<Detection>& detections,
                                         double min_score) {
  std::vector<Detection> out;
  for (const Detection& d : detections) {
    if (d.score >= min_score) out.push_back(d);
  }
  return out;
}

ScoreMatrix vote_scores(const Partition& partition, const std::vector<Detection>& detections,
                        const VisibilityMap& vis, const LabelSchema& schema, double min_score) {
  const std::size_t views = vis.num_views();
  const CategoryId categories = schema.num_categories();
  const std::size_t s = partition.num_superpoints();
  const std::size_t n = partition.num_points();

  // Boxes grouped by view, then by category.
  std::vector<std::vector<std::vector<BBox2D>>> boxes(views, std::vector<std::vector<BBox2D>>(categories));
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    if (d.view >= views) throw Error("detection " + std::to_string(i) + ": view index out of range");
    if (d.category < 0 || d.category >= categories) {
      throw Error("detection " + std::to_string(i) + ": category out of range");
    }
    if (d.score >= min_score) boxes[d.view][d.category].push_back(d.box);
  }
  for (std::size_t k = 0; k < views; ++k) {
    if (vis.views[k].size() != n) throw Error("vote_scores: visibility size does not match partition");
  }

  const auto width = static_cast<std::size_t>(categories);
  std::vector<std::vector<std::uint64_t>> view_hits(views);
  std::vector<std::vector<std::uint64_t>> view_visible(views);
  parallel_for(views, [&](std::size_t k) {
    std::vector<std::uint64_t> hits(s * width, 0);
    std::vector<std::uint64_t> visible(s, 0);
    for (PointIndex p = 0; p < n; ++p) {
      if (!vis.visible(k, p)) continue;
      const std::size_t sp = partition.assignment[p];
      ++visible[sp];
      const Vec2& px = vis.pixel(k, p);
      for (CategoryId c = 0; c < categories; ++c) {
        for (const BBox2D& b : boxes[k][c]) {
          if (b.contains(px.x(), px.y())) {
            ++hits[sp * width + static_cast<std::size_t>(c)];
            break;
          }
        }
      }
    }
    view_hits[k] = std::move(hits);
    view_visible[k] = std::move(visible);
  });

  ScoreMatrix out;
  out.num_superpoints = s;
  out.num_categories = categories;
  out.hits.assign(s * width, 0);
  out.visible.assign(s, 0);
  for (std::size_t k = 0; k < views; ++k) {
    for (std::size_t i = 0; i < out.hits.size(); ++i) out.hits[i] += view_hits[k][i];
    for (std::size_t i = 0; i < s; ++i) out.visible[i] += view_visible[k][i];
  }
  return out;
}

CategoryId pick_category(std::span<const double> row, double threshold) {
  const auto none = static_cast<CategoryId>(row.size());
  CategoryId best = none;
  double best_score = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] > best_score) {
      best_score = row[c];
      best = static_cast<CategoryId>(c);
    }
  }
  return best != none && best_score >= threshold ? best : none;
}

std::vector<CategoryId> superpoint_semantics(const ScoreMatrix& scores, double threshold) {
  std::vector<CategoryId> labels(scores.num_superpoints, scores.num_categories);
  std::vector<double> row(static_cast<std::size_t>(scores.num_categories));
  for (std::size_t i = 0; i < scores.num_superpoints; ++i) {
    if (!scores.defined(i)) continue;
    for (CategoryId c = 0; c < scores.num_categories; ++c) row[static_cast<std::size_t>(c)] = scores.score(i, c);
    labels[i] = pick_category(row, threshold);
  }
  return labels;
}

std::vector<CategoryId> assign_semantics(const ScoreMatrix& scores, const Partition& partition,
                                         double threshold) {
  const std::vector<CategoryId> per_sp = superpoint_semantics(scores, threshold);
  std::vector<CategoryId> out(partition.num_points());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = per_sp[partition.assignment[p]];
  return out;
}

}  // namespace partlift
