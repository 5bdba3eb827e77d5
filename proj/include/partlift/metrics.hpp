#pragma once

#include "partlift/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace partlift {

/// Instance table from per-point labels. Every point of an instance must
/// carry the same semantic id; confidence is set to 1. Instance ids must be
/// dense 0..M-1 (or kNoInstance).
SegmentationResult make_segmentation(const std::vector<CategoryId>& semantic,
                                     const std::vector<InstanceId>& instance);

/// |pred = c and gt = c| / |pred = c or gt = c|, with counts pooled over all
/// shapes before dividing. nullopt when the pooled union is empty. With
/// per_shape_mean the per-shape IoUs are averaged over shapes whose union
/// is non-empty instead.
std::optional<double> semantic_iou(const std::vector<std::vector<CategoryId>>& preds,
                                   const std::vector<std::vector<CategoryId>>& gts, CategoryId category,
                                   bool per_shape_mean = false);
std::optional<double> semantic_iou(const std::vector<CategoryId>& pred, const std::vector<CategoryId>& gt,
                                   CategoryId category);

/// Average precision at point-set IoU >= 0.5 over all shapes.
///
/// Predictions of the category are ranked by confidence, highest first;
/// equal confidences go to the shape first, then the instance whose lowest
/// member point is lower. Each takes the unmatched ground-truth instance of
/// the same shape with the highest IoU (lowest member point on ties) when
/// that IoU is at least 0.5. The precision envelope is integrated over
/// recall. nullopt when the category has no ground-truth instance.
std::optional<double> instance_ap50(const std::vector<SegmentationResult>& preds,
                                    const std::vector<SegmentationResult>& gts, CategoryId category);

/// One evaluated shape. Category ids are local to its object's schema.
struct ShapeEval {
  std::string object;
  SegmentationResult pred;
  SegmentationResult gt;
};

struct EvalRow {
  std::string name;
  std::optional<double> miou;
  std::optional<double> map50;

  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> parts;    // "object/part"
  std::vector<EvalRow> objects;  // object name
  EvalRow overall{"overall", std::nullopt, std::nullopt};

  bool operator==(const EvalReport&) const = default;
};

/// Part values pooled over each object's shapes; object values are the
/// unweighted mean of their present parts; overall is the unweighted mean of
/// present objects. Throws if a shape names an object not in `objects`.
EvalReport report(const std::vector<LabelSchema>& objects, const std::vector<ShapeEval>& shapes,
                  bool per_shape_mean = false);

/// CSV with header "name,mIoU,mAP50"; part rows, object rows, then overall.
/// Missing values are empty cells.
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace partlift
