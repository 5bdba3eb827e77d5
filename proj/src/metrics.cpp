#include "partlift/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

namespace partlift {

SegmentationResult make_segmentation(const std::vector<CategoryId>& semantic,
                                     const std::vector<InstanceId>& instance) {
  if (semantic.size() != instance.size()) throw Error("semantic and instance label counts differ");
  SegmentationResult out{semantic, instance, {}};
  for (std::size_t p = 0; p < instance.size(); ++p) {
    const InstanceId id = instance[p];
    if (id == kNoInstance) continue;
    if (id < 0) throw Error("negative instance id at point " + std::to_string(p));
    if (static_cast<std::size_t>(id) >= out.instances.size()) {
      out.instances.resize(static_cast<std::size_t>(id) + 1, InstanceInfo{-1, 1.0, 0});
    }
    InstanceInfo& info = out.instances[id];
    if (info.num_points == 0) info.category = semantic[p];
    if (info.category != semantic[p]) {
      throw Error("instance " + std::to_string(id) + " mixes semantic labels at point " + std::to_string(p));
    }
    ++info.num_points;
  }
  for (std::size_t m = 0; m < out.instances.size(); ++m) {
    if (out.instances[m].num_points == 0) throw Error("instance ids are not dense: " + std::to_string(m) + " unused");
  }
  return out;
}

namespace {

struct Tally {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

Tally tally(const std::vector<CategoryId>& pred, const std::vector<CategoryId>& gt, CategoryId c) {
  if (pred.size() != gt.size()) throw Error("prediction and ground truth differ in point count");
  Tally t;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    const bool a = pred[p] == c;
    const bool b = gt[p] == c;
    t.intersection += a && b;
    t.union_ += a || b;
  }
  return t;
}

// Instances of one category within one shape.
struct Candidate {
  std::size_t shape = 0;
  InstanceId id = 0;
  PointIndex lowest = 0;
  std::size_t size = 0;
  double confidence = 0.0;
};

std::vector<Candidate> candidates(const SegmentationResult& seg, std::size_t shape, CategoryId c) {
  std::map<InstanceId, Candidate> found;
  for (std::size_t p = 0; p < seg.instance.size(); ++p) {
    const InstanceId id = seg.instance[p];
    if (id == kNoInstance || seg.instances.at(id).category != c) continue;
    auto [it, fresh] = found.try_emplace(id, Candidate{shape, id, static_cast<PointIndex>(p), 0,
                                                       seg.instances[id].confidence});
    ++it->second.size;
  }
  std::vector<Candidate> out;
  for (auto& [id, cand] : found) out.push_back(cand);
  return out;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

std::optional<double> semantic_iou(const std::vector<std::vector<CategoryId>>& preds,
                                   const std::vector<std::vector<CategoryId>>& gts, CategoryId category,
                                   bool per_shape_mean) {
  if (preds.size() != gts.size()) throw Error("prediction and ground truth differ in shape count");
  Tally pooled;
  std::vector<std::optional<double>> per_shape;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const Tally t = tally(preds[s], gts[s], category);
    pooled.intersection += t.intersection;
    pooled.union_ += t.union_;
    if (t.union_ > 0) per_shape.push_back(static_cast<double>(t.intersection) / static_cast<double>(t.union_));
  }
  if (per_shape_mean) return mean_of(per_shape);
  if (pooled.union_ == 0) return std::nullopt;
  return static_cast<double>(pooled.intersection) / static_cast<double>(pooled.union_);
}

std::optional<double> semantic_iou(const std::vector<CategoryId>& pred, const std::vector<CategoryId>& gt,
                                   CategoryId category) {
  const std::vector<std::vector<CategoryId>> preds{pred}, gts{gt};
  return semantic_iou(preds, gts, category);
}

std::optional<double> instance_ap50(const std::vector<SegmentationResult>& preds,
                                    const std::vector<SegmentationResult>& gts, CategoryId category) {
  if (preds.size() != gts.size()) throw Error("prediction and ground truth differ in shape count");

  std::vector<Candidate> ranked;
  std::vector<std::vector<Candidate>> truth(gts.size());
  std::vector<std::map<std::pair<InstanceId, InstanceId>, std::size_t>> overlap(gts.size());
  std::size_t num_truth = 0;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    if (preds[s].instance.size() != gts[s].instance.size()) {
      throw Error("prediction and ground truth differ in point count");
    }
    truth[s] = candidates(gts[s], s, category);
    num_truth += truth[s].size();
    for (const Candidate& c : candidates(preds[s], s, category)) ranked.push_back(c);
    for (std::size_t p = 0; p < gts[s].instance.size(); ++p) {
      const InstanceId a = preds[s].instance[p];
      const InstanceId b = gts[s].instance[p];
      if (a != kNoInstance && b != kNoInstance) ++overlap[s][{a, b}];
    }
  }
  if (num_truth == 0) return std::nullopt;

  std::sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.shape != b.shape) return a.shape < b.shape;
    return a.lowest < b.lowest;
  });

  std::vector<std::vector<bool>> matched(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s) matched[s].assign(truth[s].size(), false);
  std::vector<bool> hit(ranked.size(), false);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const Candidate& pred = ranked[r];
    const auto& options = truth[pred.shape];
    double best_iou = -1.0;
    std::size_t best = options.size();
    for (std::size_t g = 0; g < options.size(); ++g) {
      if (matched[pred.shape][g]) continue;
      const auto it = overlap[pred.shape].find({pred.id, options[g].id});
      const double inter = it == overlap[pred.shape].end() ? 0.0 : static_cast<double>(it->second);
      const double iou = inter / (static_cast<double>(pred.size + options[g].size) - inter);
      if (iou > best_iou || (iou == best_iou && options[g].lowest < options[best].lowest)) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < options.size() && best_iou >= 0.5) {
      matched[pred.shape][best] = true;
      hit[r] = true;
    }
  }

  // All-point interpolation: each true positive adds 1/num_truth recall at
  // the best precision reachable from its rank onward.
  std::vector<double> precision(ranked.size());
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    tp += hit[r];
    precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
  }
  for (std::size_t r = ranked.size(); r-- > 1;) precision[r - 1] = std::max(precision[r - 1], precision[r]);
  double ap = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (hit[r]) ap += precision[r];
  }
  return ap / static_cast<double>(num_truth);
}

EvalReport report(const std::vector<LabelSchema>& objects, const std::vector<ShapeEval>& shapes,
                  bool per_shape_mean) {
  for (const ShapeEval& s : shapes) {
    const bool known = std::any_of(objects.begin(), objects.end(),
                                   [&](const LabelSchema& o) { return o.object_name == s.object; });
    if (!known) throw Error("shape names unknown object category '" + s.object + "'");
  }
  EvalReport out;
  std::vector<std::optional<double>> object_miou, object_map;
  for (const LabelSchema& object : objects) {
    std::vector<std::vector<CategoryId>> pred_sem, gt_sem;
    std::vector<SegmentationResult> preds, gts;
    for (const ShapeEval& s : shapes) {
      if (s.object != object.object_name) continue;
      pred_sem.push_back(s.pred.semantic);
      gt_sem.push_back(s.gt.semantic);
      preds.push_back(s.pred);
      gts.push_back(s.gt);
    }
    std::vector<std::optional<double>> ious, aps;
    for (CategoryId c = 0; c < object.num_categories(); ++c) {
      ious.push_back(semantic_iou(pred_sem, gt_sem, c, per_shape_mean));
      aps.push_back(instance_ap50(preds, gts, c));
      out.parts.push_back({object.object_name + "/" + object.categories[c], ious.back(), aps.back()});
    }
    out.objects.push_back({object.object_name, mean_of(ious), mean_of(aps)});
    object_miou.push_back(out.objects.back().miou);
    object_map.push_back(out.objects.back().map50);
  }
  out.overall = {"overall", mean_of(object_miou), mean_of(object_map)};
  return out;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  auto row = [&](const EvalRow& r) {
    // Names containing separators or quotes are quoted.
    std::string name = r.name;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = quoted + "\"";
    }
    out << name << ',' << cell(r.miou) << ',' << cell(r.map50) << '\n';
  };
  out << "name,mIoU,mAP50\n";
  for (const auto& r : report.parts) row(r);
  for (const auto& r : report.objects) row(r);
  row(report.overall);
}

}  // namespace partlift
