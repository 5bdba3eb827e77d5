#pragma once

#include "partlift/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace partlift {

/// Per-(superpoint, category) box coverage, kept as integer tallies so the
/// ratio is exact and independent of accumulation order.
struct ScoreMatrix {
  std::size_t num_superpoints = 0;
  CategoryId num_categories = 0;
  /// Visible (point, view) incidences inside some box of the category; S x C row-major.
  std::vector<std::uint64_t> hits;
  /// Visible (point, view) incidences per superpoint.
  std::vector<std::uint64_t> visible;

  bool defined(std::size_t sp) const { return visible[sp] != 0; }
  std::uint64_t hit(std::size_t sp, CategoryId c) const {
    return hits[sp * static_cast<std::size_t>(num_categories) + static_cast<std::size_t>(c)];
  }
  /// 0 for an undefined row.
  double score(std::size_t sp, CategoryId c) const {
    return defined(sp) ? static_cast<double>(hit(sp, c)) / static_cast<double>(visible[sp]) : 0.0;
  }
};

/// Detections with score >= min_score, in their original order.
std::vector<Detection> filter_detections(const std::vector<Detection>& detections,
                                         double min_score);

/// For superpoint i and category j: the fraction of i's visible
/// (point, view) incidences whose projection falls inside at least one
/// category-j box of that view. Detections below min_score are ignored.
/// Throws if a detection names a view or category that does not exist.
ScoreMatrix vote_scores(const Partition& partition, const std::vector<Detection>& detections,
                        const VisibilityMap& vis, const LabelSchema& schema, double min_score = 0.0);

/// Index of the largest entry (lowest on ties), or row.size() when the
/// maximum is zero or below threshold.
CategoryId pick_category(std::span<const double> row, double threshold);

/// Label per superpoint: the highest-scoring category, lowest id on ties.
/// Undefined rows, rows whose best score is below `threshold`, and rows
/// with no coverage at all get the unlabeled sentinel (num_categories).
std::vector<CategoryId> superpoint_semantics(const ScoreMatrix& scores, double threshold = 0.0);

/// superpoint_semantics broadcast to every point.
std::vector<CategoryId> assign_semantics(const ScoreMatrix& scores, const Partition& partition,
                                         double threshold = 0.0);

}  // namespace partlift
