#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "partlift/io.hpp"
#include "partlift/pipeline.hpp"
#include "partlift/projection.hpp"

#include <bit>
#include <set>
#include <sstream>

using namespace partlift;

namespace {

bool same_bits(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("one-point ascii PLY") {
  std::istringstream in(
      "ply\nformat ascii 1.0\ncomment tiny\nelement vertex 1\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property float nx\nproperty float ny\nproperty float nz\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "0.5 -1 2 0 0 2 255 0 51\n3 0 0 0\n");
  const LabeledCloud lc = read_ply(in);
  REQUIRE(lc.cloud.size() == 1);
  CHECK(lc.cloud.positions[0] == Vec3(0.5, -1, 2));
  CHECK(lc.cloud.normals[0] == Vec3(0, 0, 1));
  CHECK(lc.cloud.colors[0] == Vec3(1.0, 0.0, 51.0 / 255.0));
  CHECK_FALSE(lc.semantic);
  CHECK_FALSE(lc.instance);
}

TEST_CASE("PLY schema errors name the problem") {
  const std::string header_start = "ply\nformat ascii 1.0\nelement vertex 1\n";
  const std::string xyz = "property float x\nproperty float y\nproperty float z\n";
  const std::string normals = "property float nx\nproperty float ny\nproperty float nz\n";
  const std::string colors = "property uchar red\nproperty uchar green\nproperty uchar blue\n";

  std::istringstream no_nx(header_start + xyz + "property float ny\nproperty float nz\n" + colors +
                           "end_header\n0 0 0 0 1 9 9 9\n");
  CHECK(error_of([&] { read_ply(no_nx); }).find("'nx'") != std::string::npos);

  std::istringstream no_colors(header_start + xyz + normals + "end_header\n0 0 0 0 0 1\n");
  const std::string msg = error_of([&] { read_ply(no_colors); });
  for (const char* p : {"'red'", "'green'", "'blue'"}) CHECK(msg.find(p) != std::string::npos);

  std::istringstream zero_normal(header_start + xyz + normals + colors + "end_header\n0 0 0 0 0 0 1 1 1\n");
  CHECK(error_of([&] { read_ply(zero_normal); }) != "");

  std::istringstream truncated(header_start + xyz + normals + colors + "end_header\n0 0 0 0 0 1 1 1\n");
  CHECK(error_of([&] { read_ply(truncated); }).find("end of data") != std::string::npos);

  std::istringstream big_endian("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK(error_of([&] { read_ply(big_endian); }).find("binary_big_endian") != std::string::npos);

  std::istringstream no_magic("plx\n");
  CHECK(error_of([&] { read_ply(no_magic); }) != "");
}

TEST_CASE("binary PLY round trip is bit-identical") {
  std::mt19937_64 rng(11);
  const PointCloud cloud = fixtures::random_cloud(rng, 1000, 3.0);
  std::vector<CategoryId> semantic(cloud.size());
  std::vector<InstanceId> instance(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    semantic[i] = static_cast<CategoryId>(rng() % 4);
    instance[i] = static_cast<InstanceId>(rng() % 9) - 1;
  }
  std::stringstream buf;
  write_ply(buf, cloud, &semantic, &instance);
  const LabeledCloud back = read_ply(buf);
  REQUIRE(back.cloud.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(same_bits(back.cloud.positions[i], cloud.positions[i]));
    CHECK(same_bits(back.cloud.normals[i], cloud.normals[i]));
    CHECK(same_bits(back.cloud.colors[i], cloud.colors[i]));
  }
  CHECK(*back.semantic == semantic);
  CHECK(*back.instance == instance);
}

TEST_CASE("float binary PLY with skipped leading element") {
  std::ostringstream out;
  out << "ply\nformat binary_little_endian 1.0\nelement camera 1\nproperty double f\n"
      << "element vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "property float red\nproperty float green\nproperty float blue\nproperty int semantic\nend_header\n";
  auto put = [&](std::uint64_t bits, int n) {
    for (int b = 0; b < n; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
  };
  put(std::bit_cast<std::uint64_t>(7.0), 8);
  for (float v : {1.0f, 2.0f, 3.0f, 3.0f, 0.0f, 4.0f, 0.25f, 0.5f, 0.75f}) put(std::bit_cast<std::uint32_t>(v), 4);
  put(static_cast<std::uint32_t>(2), 4);
  std::istringstream in(out.str());
  const LabeledCloud lc = read_ply(in);
  REQUIRE(lc.cloud.size() == 1);
  CHECK(lc.cloud.positions[0] == Vec3(1, 2, 3));
  CHECK(lc.cloud.normals[0].isApprox(Vec3(0.6, 0, 0.8), 1e-15));
  CHECK(lc.cloud.colors[0] == Vec3(0.25, 0.5, 0.75));
  CHECK(*lc.semantic == std::vector<CategoryId>{2});
}

TEST_CASE("views JSON round trip and validation") {
  const PointCloud cube = synth_scene(preset_scene("cube")).cloud;
  const auto views = make_default_views(cube, 7, 640, 480);
  std::stringstream buf;
  write_views(buf, views);
  const auto back = read_views(buf);
  REQUIRE(back.size() == views.size());
  for (std::size_t k = 0; k < views.size(); ++k) {
    CHECK(back[k].fx == views[k].fx);
    CHECK(back[k].fy == views[k].fy);
    CHECK(back[k].cx == views[k].cx);
    CHECK(back[k].cy == views[k].cy);
    CHECK(back[k].width == views[k].width);
    CHECK(back[k].height == views[k].height);
    CHECK(back[k].extrinsic == views[k].extrinsic);
  }

  std::istringstream skewed(
      R"([{"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"height":4,"extrinsic":[1,0.5,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}])");
  CHECK(error_of([&] { read_views(skewed); }).find("not orthonormal") != std::string::npos);

  // Every violation is listed, not only the first.
  std::istringstream several(
      R"([{"fy":1,"cx":0,"cy":0,"width":4,"height":4,"extrinsic":[1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]},
          {"fx":-1,"fy":1,"cx":0,"cy":0,"width":4,"height":4,"extrinsic":[1,0,0]},
          {"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"height":"4","extrinsic":[1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}])");
  const std::string msg = error_of([&] { read_views(several); });
  CHECK(msg.find("view[0]: missing field 'fx'") != std::string::npos);
  CHECK(msg.find("view[1]: field 'extrinsic'") != std::string::npos);
  CHECK(msg.find("view[2]: field 'height' must be an integer") != std::string::npos);

  std::istringstream not_json("{");
  CHECK(error_of([&] { read_views(not_json); }) != "");
}

TEST_CASE("detections JSON round trip and validation") {
  std::mt19937_64 rng(3);
  std::vector<Detection> dets;
  for (int i = 0; i < 50; ++i) {
    const double x = fixtures::uniform(rng, -5, 5);
    const double y = fixtures::uniform(rng, -5, 5);
    dets.push_back({rng() % 10, static_cast<CategoryId>(rng() % 4),
                    {x, y, x + fixtures::uniform(rng, 0.1, 9), y + fixtures::uniform(rng, 0.1, 9)},
                    fixtures::uniform(rng, 0, 1)});
  }
  std::stringstream buf;
  write_detections(buf, dets);
  CHECK(read_detections(buf) == dets);

  std::istringstream empty("[]");
  CHECK(read_detections(empty).empty());

  std::istringstream bad(R"([{"view":-1,"category":0,"box":[0,0,1,1],"score":0.5},
                            {"view":0,"category":0,"box":[2,0,1,1],"score":1.5},
                            {"view":0,"box":[0,0,1,1],"score":1}])");
  const std::string msg = error_of([&] { read_detections(bad); });
  CHECK(msg.find("detection[0]: negative view") != std::string::npos);
  CHECK(msg.find("detection[1]: box needs") != std::string::npos);
  CHECK(msg.find("detection[1]: score outside") != std::string::npos);
  CHECK(msg.find("detection[2]: missing field 'category'") != std::string::npos);
}

TEST_CASE("schema JSON round trip") {
  const LabelSchema schema{"chair", {"seat", "back", "leg"}};
  std::stringstream buf;
  write_schema(buf, schema);
  const LabelSchema back = read_schema(buf);
  CHECK(back.object_name == schema.object_name);
  CHECK(back.categories == schema.categories);
  std::istringstream bad(R"({"object": 3, "categories": ["a", 1]})");
  const std::string msg = error_of([&] { read_schema(bad); });
  CHECK(msg.find("'object'") != std::string::npos);
  CHECK(msg.find("'categories'") != std::string::npos);
}

TEST_CASE("label file round trip") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    LabelFile labels;
    labels.num_categories = 1 + static_cast<CategoryId>(rng() % 5);
    labels.num_instances = rng() % 6;
    const std::size_t n = rng() % 200;
    for (std::size_t p = 0; p < n; ++p) {
      const bool unlabeled = labels.num_instances == 0 || rng() % 4 == 0;
      labels.semantic.push_back(unlabeled ? labels.num_categories
                                          : static_cast<CategoryId>(rng() % labels.num_categories));
      labels.instance.push_back(unlabeled ? kNoInstance : static_cast<InstanceId>(rng() % labels.num_instances));
    }
    std::stringstream buf;
    write_labels(buf, labels);
    CHECK(read_labels(buf) == labels);
  }
  std::istringstream header_only("points 2 instances 1 categories 2\n0 0\n");
  CHECK(error_of([&] { read_labels(header_only); }).find("point 1") != std::string::npos);
  std::istringstream out_of_range("points 1 instances 1 categories 2\n0 1\n");
  CHECK(error_of([&] { read_labels(out_of_range); }) != "");
  std::istringstream unlabeled_with_instance("points 1 instances 1 categories 2\n2 0\n");
  CHECK(error_of([&] { read_labels(unlabeled_with_instance); }) != "");
  std::istringstream trailing("points 1 instances 0 categories 2\n2 -1\n2 -1\n");
  CHECK(error_of([&] { read_labels(trailing); }).find("trailing") != std::string::npos);
}

TEST_CASE("instances CSV round trip is exact") {
  SegmentationResult seg;
  seg.instances = {{0, 1.0 / 3.0, 10}, {2, 0.1, 1}, {1, 0.9999999999999999, 7}};
  std::stringstream buf;
  write_instances_csv(buf, seg);
  CHECK(read_instances_csv(buf) == seg.instances);
}

TEST_CASE("pipeline defaults") {
  const PipelineConfig c;
  CHECK(c.num_views == 10);
  CHECK(c.tau == 0.3);
  CHECK(c.knn == 10);
  CHECK(c.width == 800);
  CHECK(c.height == 800);
  CHECK(c.splat_radius == 1.0);
  CHECK(c.noise_fraction == 0.05);
  CHECK(c.min_score == 0.0);
  CHECK(c.threshold == 0.0);
  CHECK_FALSE(c.eps_z);
  CHECK_FALSE(c.all_boxes);
  CHECK_FALSE(c.per_shape_iou);
  CHECK(config_problems(c).empty());

  PipelineConfig bad;
  bad.num_views = 0;
  bad.tau = -1;
  bad.eps_z = 0.0;
  CHECK(config_problems(bad).size() == 3);
}

TEST_CASE("one default view sits on +z and looks at the centroid") {
  const PointCloud cloud = synth_scene(preset_scene("chair")).cloud;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : cloud.positions) centroid += p;
  centroid /= static_cast<double>(cloud.size());
  const View v = make_default_views(cloud, 1).front();
  const Vec3 offset = v.center() - centroid;
  CHECK(offset.head<2>().norm() < 1e-12);
  CHECK(offset.z() > 0.0);
  CHECK(v.optical_axis().isApprox(Vec3(0, 0, -1), 1e-15));
  CHECK(v.fx == 640.0);
  CHECK(v.fy == 640.0);
}

TEST_CASE("every default camera's optical axis passes through the centroid") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud cloud = fixtures::random_cloud(rng, 50, fixtures::uniform(rng, 0.1, 10));
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cloud.positions) centroid += p;
    centroid /= static_cast<double>(cloud.size());
    double radius = 0.0;
    for (const Vec3& p : cloud.positions) radius = std::max(radius, (p - centroid).norm());
    const int k = 1 + trial;
    const auto views = make_default_views(cloud, k);
    REQUIRE(views.size() == static_cast<std::size_t>(k));
    ValidationReport report;
    validate_views(views, report);
    CHECK(report.ok());
    for (const View& v : views) {
      const Vec3 to_centroid = centroid - v.center();
      const Vec3 off_axis = to_centroid - to_centroid.dot(v.optical_axis()) * v.optical_axis();
      CHECK(off_axis.norm() < 1e-9 * std::max(1.0, radius));
      CHECK(to_centroid.norm() == doctest::Approx(2.2 * radius).epsilon(1e-12));
    }
  }
}

TEST_CASE("ten default views see every point of a cube") {
  const SynthScene cube = synth_scene(preset_scene("cube"));
  const auto views = make_default_views(cube.cloud, 10);
  const VisibilityMap vis = make_visibility_map(rasterize_all(cube.cloud, views, 1.0, default_eps_z(cube.cloud)));
  std::size_t unseen = 0;
  for (PointIndex p = 0; p < cube.cloud.size(); ++p) {
    bool seen = false;
    for (std::size_t k = 0; k < vis.num_views(); ++k) seen = seen || vis.visible(k, p);
    unseen += !seen;
  }
  CHECK(unseen == 0);
}

TEST_CASE("synthetic scenes") {
  SUBCASE("unit cube is one seat instance on the cube surface") {
    const SynthScene s = synth_scene(preset_scene("cube"));
    REQUIRE(s.cloud.size() > 0);
    CHECK(s.schema.categories == std::vector<std::string>{"seat"});
    for (std::size_t p = 0; p < s.cloud.size(); ++p) {
      CHECK(s.semantic[p] == 0);
      CHECK(s.instance[p] == 0);
      const Vec3& x = s.cloud.positions[p];
      CHECK(x.cwiseAbs().maxCoeff() == doctest::Approx(0.5));
      // The normal points along the axis of the face the sample lies on.
      Eigen::Index axis;
      s.cloud.normals[p].cwiseAbs().maxCoeff(&axis);
      CHECK(std::abs(x[axis]) == 0.5);
      CHECK(s.cloud.normals[p][axis] * x[axis] > 0.0);
    }
  }
  SUBCASE("seat plus four legs gives five instances of two categories") {
    SceneSpec spec;
    spec.schema = {"stool", {"seat", "leg"}};
    spec.parts.push_back({Primitive::Kind::Box, {0, 0, 0.5}, {1, 1, 0.1}, 0, 0, {1, 0, 0}});
    InstanceId id = 1;
    for (double x : {-0.4, 0.4}) {
      for (double y : {-0.4, 0.4}) {
        spec.parts.push_back({Primitive::Kind::Cylinder, {x, y, 0.225}, {0.1, 0.1, 0.45}, 1, id++, {0, 0, 1}});
      }
    }
    const SynthScene s = synth_scene(spec);
    const SegmentationResult gt = make_segmentation(s.semantic, s.instance);
    CHECK(gt.instances.size() == 5);
    std::set<CategoryId> categories(s.semantic.begin(), s.semantic.end());
    CHECK(categories.size() == 2);
    // Leg tops touch the seat and are dropped, as are seat samples on them.
    for (std::size_t p = 0; p < s.cloud.size(); ++p) {
      if (s.semantic[p] == 1) CHECK(s.cloud.positions[p].z() < 0.45);
    }
  }
  SUBCASE("fixed seed reproduces the cloud, another seed does not") {
    const SynthScene a = synth_scene(preset_scene("chair", 4));
    const SynthScene b = synth_scene(preset_scene("chair", 4));
    const SynthScene c = synth_scene(preset_scene("chair", 5));
    CHECK(a.cloud.positions == b.cloud.positions);
    CHECK(a.cloud.normals == b.cloud.normals);
    CHECK(a.cloud.colors == b.cloud.colors);
    CHECK(a.semantic == b.semantic);
    CHECK(a.instance == b.instance);
    CHECK(a.cloud.positions != c.cloud.positions);
  }
  SUBCASE("chair preset") {
    const SynthScene s = synth_scene(preset_scene("chair"));
    CHECK(make_segmentation(s.semantic, s.instance).instances.size() == 6);
    ValidationReport report;
    validate_cloud(s.cloud, report);
    CHECK(report.ok());
  }
  CHECK_THROWS_AS(preset_scene("table"), Error);
}

TEST_CASE("empty detections leave every point unlabeled") {
  SceneSpec spec = preset_scene("chair");
  spec.density = 300;
  const SynthScene s = synth_scene(spec);
  const auto views = make_default_views(s.cloud, 4, 200, 200);
  const PipelineResult r = run_pipeline(PipelineConfig{}, s.cloud, views, {}, s.schema);
  CHECK(r.segmentation.instances.empty());
  for (std::size_t p = 0; p < s.cloud.size(); ++p) {
    CHECK(r.segmentation.semantic[p] == s.schema.unlabeled());
    CHECK(r.segmentation.instance[p] == kNoInstance);
  }
}

TEST_CASE("pipeline rejects invalid input with every violation") {
  const SynthScene s = synth_scene(preset_scene("cube"));
  const auto views = make_default_views(s.cloud, 2, 100, 100);
  const std::vector<Detection> dets{{5, 0, {0, 0, 1, 1}, 1.0}, {0, 3, {0, 0, 1, 1}, 1.0}};
  const std::string msg = error_of([&] { run_pipeline(PipelineConfig{}, s.cloud, views, dets, s.schema); });
  CHECK(msg.find("view index out of range") != std::string::npos);
  CHECK(msg.find("category out of range") != std::string::npos);
}

TEST_CASE("perfect boxes recover the instances of separated parts") {
  for (std::uint64_t seed : {0, 1, 2}) {
    SceneSpec spec = preset_scene("separated", seed);
    spec.density = 250;
    const SynthScene s = synth_scene(spec);
    PipelineConfig config;
    config.splat_radius = 2.0;
    const auto views = make_default_views(s.cloud, config.num_views, 400, 400);
    const auto dets = scene_detections(s.cloud, s.semantic, s.instance, views, config.splat_radius,
                                       default_eps_z(s.cloud), config.noise_fraction);
    const SegmentationResult gt = make_segmentation(s.semantic, s.instance);
    const PipelineResult a = run_pipeline(config, s.cloud, views, dets, s.schema, &gt);
    CHECK(a.segmentation.instances.size() == gt.instances.size());
    CHECK(a.report->overall.miou.value() >= 0.99);
    // Same inputs, same output.
    const PipelineResult b = run_pipeline(config, s.cloud, views, dets, s.schema, &gt);
    CHECK(a.segmentation == b.segmentation);
  }
}
