// Command-line front end: synth, gtboxes, segment, eval, fuse-features.

#include "CLI11.hpp"

#include "partlift/features.hpp"
#include "partlift/io.hpp"
#include "partlift/metrics.hpp"
#include "partlift/pipeline.hpp"
#include "partlift/projection.hpp"

#include <fstream>
#include <iostream>

using namespace partlift;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Ground truth from a labeled PLY or a label file.
SegmentationResult load_ground_truth(const std::string& path, const LabelSchema& schema) {
  if (ends_with(path, ".ply")) {
    const LabeledCloud lc = read_ply(path);
    if (!lc.semantic || !lc.instance) throw Error(path + " lacks semantic and instance properties");
    return make_segmentation(*lc.semantic, *lc.instance);
  }
  const LabelFile labels = load_labels(path);
  if (labels.num_categories != schema.num_categories()) {
    throw Error(path + " has " + std::to_string(labels.num_categories) + " categories, schema has " +
                std::to_string(schema.num_categories()));
  }
  return make_segmentation(labels.semantic, labels.instance);
}

SegmentationResult load_prediction(const std::string& labels_path, const std::string& instances_path,
                                   const LabelSchema& schema) {
  SegmentationResult pred = load_ground_truth(labels_path, schema);
  if (!instances_path.empty()) {
    const auto table = load_instances_csv(instances_path);
    if (table.size() != pred.instances.size()) throw Error(instances_path + " disagrees with " + labels_path);
    for (std::size_t m = 0; m < table.size(); ++m) {
      if (table[m].category != pred.instances[m].category || table[m].num_points != pred.instances[m].num_points) {
        throw Error(instances_path + " row " + std::to_string(m) + " disagrees with " + labels_path);
      }
      pred.instances[m].confidence = table[m].confidence;
    }
  }
  return pred;
}

void write_report(const std::string& path, const EvalReport& report) {
  if (path.empty() || path == "-") {
    write_report_csv(std::cout, report);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_report_csv(out, report);
  if (!out.flush()) throw Error("failed writing " + path);
}

void add_camera_options(CLI::App& cmd, PipelineConfig& config) {
  cmd.add_option("--num-views", config.num_views, "Default cameras when no views file is given")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--width", config.width, "Default camera image width")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--height", config.height, "Default camera image height")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--splat-radius", config.splat_radius, "Point splat radius in pixels")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd.add_option_function<double>("--eps-z", [&](double v) { config.eps_z = v; },
                                  "Depth-test tolerance (default: 1e-3 of the bounding-box diagonal)")
      ->check(CLI::PositiveNumber);
}

std::vector<View> views_for(const std::string& views_path, const PointCloud& cloud, const PipelineConfig& config) {
  if (!views_path.empty()) return load_views(views_path);
  return make_default_views(cloud, config.num_views, config.width, config.height);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lift per-view 2D part boxes on point-cloud renderings to 3D part segmentation.\n"
               "Set PARTLIFT_THREADS to cap worker threads."};
  app.require_subcommand(1);

  // synth
  std::string preset = "chair";
  std::uint64_t seed = 0;
  double density = 2000.0;
  std::string synth_out, synth_schema;
  auto* synth = app.add_subcommand("synth", "Write a labeled synthetic scene as PLY plus its schema");
  synth->add_option("--preset", preset, "cube, chair or separated")->capture_default_str();
  synth->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  synth->add_option("--density", density, "Surface samples per unit area")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--out", synth_out, "Output PLY with semantic and instance properties")->required();
  synth->add_option("--schema", synth_schema, "Output schema JSON")->required();

  // gtboxes
  PipelineConfig gt_config;
  std::string gt_cloud, gt_views, gt_views_out, gt_out;
  auto* gtboxes = app.add_subcommand("gtboxes", "Emit ground-truth detection JSON from a labeled cloud");
  gtboxes->add_option("--cloud", gt_cloud, "Labeled PLY")->required()->check(CLI::ExistingFile);
  gtboxes->add_option("--views", gt_views, "Views JSON (default: generated cameras)")->check(CLI::ExistingFile);
  gtboxes->add_option("--write-views", gt_views_out, "Write the views used to this JSON file");
  gtboxes->add_option("--out", gt_out, "Output detections JSON")->required();
  gtboxes->add_option("--noise-fraction", gt_config.noise_fraction, "Drop mask components below this share")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  add_camera_options(*gtboxes, gt_config);

  // segment
  PipelineConfig config;
  std::string cloud_path, views_path, detections_path, schema_path, labels_out, instances_out, gt_path, report_out,
      views_out;
  auto* segment = app.add_subcommand("segment", "Run the pipeline on a cloud, views and detections");
  segment->add_option("--cloud", cloud_path, "Input PLY")->required()->check(CLI::ExistingFile);
  segment->add_option("--views", views_path, "Views JSON (default: generated cameras)")->check(CLI::ExistingFile);
  segment->add_option("--detections", detections_path, "Detections JSON")->required()->check(CLI::ExistingFile);
  segment->add_option("--schema", schema_path, "Schema JSON")->required()->check(CLI::ExistingFile);
  segment->add_option("--out", labels_out, "Output label file")->required();
  segment->add_option("--instances", instances_out, "Output instance table CSV");
  segment->add_option("--write-views", views_out, "Write the views used to this JSON file");
  segment->add_option("--gt", gt_path, "Ground truth (labeled PLY or label file) to evaluate against")
      ->check(CLI::ExistingFile);
  segment->add_option("--report", report_out, "Evaluation CSV (needs --gt; default stdout)");
  add_camera_options(*segment, config);
  segment->add_option("--tau", config.tau, "Instance merge threshold")->check(CLI::PositiveNumber)->capture_default_str();
  segment->add_option("--knn", config.knn, "Neighbors per point in the superpoint graph")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  segment->add_option("--rho", config.rho, "Superpoint boundary penalty")->check(CLI::PositiveNumber)->capture_default_str();
  segment->add_option("--color-weight", config.color_weight, "Color weight in superpoint features")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  segment->add_option("--max-iters", config.max_iters, "Cut pursuit iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  segment->add_option("--noise-fraction", config.noise_fraction, "Accepted for symmetry with gtboxes; unused here")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  segment->add_option("--min-score", config.min_score, "Ignore detections scoring below this")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  segment->add_option("--threshold", config.threshold, "Minimum vote share to label a superpoint")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  segment->add_flag("--all-boxes", config.all_boxes, "Compare coverage over every category's boxes");
  segment->add_flag("--per-shape-iou", config.per_shape_iou, "Average IoU per shape instead of pooling");

  // eval
  std::vector<std::string> eval_preds, eval_gts, eval_schemas, eval_instances;
  std::string eval_out;
  bool eval_per_shape = false;
  auto* eval = app.add_subcommand("eval", "Compare predicted and ground-truth labels, write CSV");
  eval->add_option("--pred", eval_preds, "Predicted label files, one per shape")->required();
  eval->add_option("--gt", eval_gts, "Ground truth per shape (labeled PLY or label file)")->required();
  eval->add_option("--schema", eval_schemas, "Schema JSON, once for all shapes or once per shape")->required();
  eval->add_option("--instances", eval_instances, "Instance tables with confidences, one per shape");
  eval->add_option("--out", eval_out, "Output CSV (default stdout)");
  eval->add_flag("--per-shape-iou", eval_per_shape, "Average IoU per shape instead of pooling");

  // fuse-features
  PipelineConfig fuse_config;
  std::string fuse_in, fuse_out, fuse_cloud, fuse_views;
  auto* fuse = app.add_subcommand("fuse-features", "Fuse per-view feature maps across views");
  fuse->add_option("--in", fuse_in, "Input PLFM file, one map per view")->required()->check(CLI::ExistingFile);
  fuse->add_option("--out", fuse_out, "Output PLFM file")->required();
  fuse->add_option("--cloud", fuse_cloud, "PLY whose projections define correspondences")
      ->required()
      ->check(CLI::ExistingFile);
  fuse->add_option("--views", fuse_views, "Views JSON (default: generated cameras)")->check(CLI::ExistingFile);
  add_camera_options(*fuse, fuse_config);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SceneSpec spec = preset_scene(preset, seed);
      spec.density = density;
      const SynthScene scene = synth_scene(spec);
      write_ply(synth_out, scene.cloud, &scene.semantic, &scene.instance);
      save_schema(synth_schema, scene.schema);
    } else if (*gtboxes) {
      const LabeledCloud lc = read_ply(gt_cloud);
      if (!lc.semantic || !lc.instance) throw Error(gt_cloud + " lacks semantic and instance properties");
      const auto views = views_for(gt_views, lc.cloud, gt_config);
      if (!gt_views_out.empty()) save_views(gt_views_out, views);
      const double eps_z = gt_config.eps_z.value_or(default_eps_z(lc.cloud));
      save_detections(gt_out, scene_detections(lc.cloud, *lc.semantic, *lc.instance, views, gt_config.splat_radius,
                                               eps_z, gt_config.noise_fraction));
    } else if (*segment) {
      const PointCloud cloud = load_cloud(cloud_path);
      const auto views = views_for(views_path, cloud, config);
      if (!views_out.empty()) save_views(views_out, views);
      const auto detections = load_detections(detections_path);
      const LabelSchema schema = load_schema(schema_path);
      std::optional<SegmentationResult> gt;
      if (!gt_path.empty()) gt = load_ground_truth(gt_path, schema);
      if (!report_out.empty() && !gt) throw Error("--report needs --gt");
      const PipelineResult result = run_pipeline(config, cloud, views, detections, schema, gt ? &*gt : nullptr);
      save_labels(labels_out, label_file(result.segmentation, schema.num_categories()));
      if (!instances_out.empty()) save_instances_csv(instances_out, result.segmentation);
      if (result.report) write_report(report_out, *result.report);
    } else if (*eval) {
      if (eval_preds.size() != eval_gts.size()) throw Error("--pred and --gt must be given the same number of times");
      if (eval_schemas.size() != 1 && eval_schemas.size() != eval_preds.size()) {
        throw Error("--schema must be given once or once per shape");
      }
      if (!eval_instances.empty() && eval_instances.size() != eval_preds.size()) {
        throw Error("--instances must be given once per shape when used");
      }
      std::vector<LabelSchema> objects;
      std::vector<ShapeEval> shapes;
      for (std::size_t s = 0; s < eval_preds.size(); ++s) {
        const LabelSchema schema = load_schema(eval_schemas[eval_schemas.size() == 1 ? 0 : s]);
        const auto known = std::find_if(objects.begin(), objects.end(), [&](const LabelSchema& o) {
          return o.object_name == schema.object_name;
        });
        if (known == objects.end()) {
          objects.push_back(schema);
        } else if (known->categories != schema.categories) {
          throw Error("object '" + schema.object_name + "' appears with two different category lists");
        }
        shapes.push_back({schema.object_name,
                          load_prediction(eval_preds[s], eval_instances.empty() ? "" : eval_instances[s], schema),
                          load_ground_truth(eval_gts[s], schema)});
      }
      write_report(eval_out, report(objects, shapes, eval_per_shape));
    } else if (*fuse) {
      const PointCloud cloud = load_cloud(fuse_cloud);
      const auto maps = read_plfm(fuse_in);
      const auto views = views_for(fuse_views, cloud, fuse_config);
      if (maps.size() != views.size()) {
        throw Error(fuse_in + " holds " + std::to_string(maps.size()) + " maps for " + std::to_string(views.size()) +
                    " views");
      }
      const double eps_z = fuse_config.eps_z.value_or(default_eps_z(cloud));
      const VisibilityMap vis = make_visibility_map(rasterize_all(cloud, views, fuse_config.splat_radius, eps_z));
      const int m = maps.empty() ? 1 : maps.front().m;
      write_plfm(fuse_out, aggregate(maps, build_cell_index(vis, m)));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
