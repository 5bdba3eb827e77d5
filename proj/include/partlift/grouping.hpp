#pragma once

#include "partlift/superpoints.hpp"
#include "partlift/types.hpp"
#include "partlift/voting.hpp"

#include <optional>
#include <span>
#include <vector>

namespace partlift {

/// Indices into the detection list of the boxes two superpoints are
/// compared on: every box from a view where both have at least one visible
/// point, optionally restricted to one category. Ordered by (view, index).
std::vector<std::size_t> shared_boxes(std::span<const PointIndex> u, std::span<const PointIndex> v,
                                      const std::vector<Detection>& detections,
                                      const VisibilityMap& vis,
                                      std::optional<CategoryId> category = std::nullopt);

/// Per box: fraction of u's points visible in the box's view that fall
/// inside the box. 0 when none of u is visible in that view.
std::vector<double> coverage(std::span<const PointIndex> u, const std::vector<std::size_t>& boxes,
                             const std::vector<Detection>& detections, const VisibilityMap& vis);

/// |a - b|_1 / max(|a|_1, |b|_1), with 0/0 taken as 0.
double coverage_distance(std::span<const double> a, std::span<const double> b);

inline bool merge_test(std::span<const double> a, std::span<const double> b, double tau) {
  return coverage_distance(a, b) < tau;
}

struct GroupingOptions {
  double tau = 0.3;
  /// Compare on boxes of every category instead of the pair's own.
  bool all_boxes = false;
};

/// Instances from labeled superpoints. Two superpoints are linked when they
/// carry the same category, share at least one graph edge and pass
/// merge_test; instances are the connected components of the links.
/// Instance ids follow the lowest member point. Confidence is the mean of
/// the members' scores for the instance category, weighted by their visible
/// incidence counts. Points of unlabeled superpoints get kNoInstance.
SegmentationResult group_instances(const Partition& partition,
                                   const std::vector<CategoryId>& superpoint_labels,
                                   const std::vector<Detection>& detections,
                                   const VisibilityMap& vis, const AdjacencyGraph& graph,
                                   const ScoreMatrix& scores, const GroupingOptions& options = {});

}  // namespace partlift
