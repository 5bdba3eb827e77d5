#include "partlift/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace partlift {

namespace {

using nlohmann::json;

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

void finish(std::ostream& out, const std::string& what) {
  out.flush();
  if (!out) throw Error("failed writing " + what);
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

// ---- PLY ----

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<Scalar> scalar_type(const std::string& name) {
  static const std::map<std::string, Scalar> names = {
      {"char", Scalar::I8},    {"int8", Scalar::I8},     {"uchar", Scalar::U8},  {"uint8", Scalar::U8},
      {"short", Scalar::I16},  {"int16", Scalar::I16},   {"ushort", Scalar::U16}, {"uint16", Scalar::U16},
      {"int", Scalar::I32},    {"int32", Scalar::I32},   {"uint", Scalar::U32},  {"uint32", Scalar::U32},
      {"float", Scalar::F32},  {"float32", Scalar::F32}, {"double", Scalar::F64}, {"float64", Scalar::F64}};
  const auto it = names.find(name);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

int scalar_size(Scalar t) {
  switch (t) {
    case Scalar::I8:
    case Scalar::U8: return 1;
    case Scalar::I16:
    case Scalar::U16: return 2;
    case Scalar::I32:
    case Scalar::U32:
    case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

bool is_float(Scalar t) { return t == Scalar::F32 || t == Scalar::F64; }

struct Property {
  std::string name;
  Scalar type = Scalar::F32;
  bool list = false;
  Scalar count_type = Scalar::U8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

class ValueReader {
 public:
  ValueReader(std::istream& in, bool ascii) : in_(in), ascii_(ascii) {}

  double read(Scalar t) {
    if (ascii_) return read_ascii(t);
    std::uint64_t bits = 0;
    const int n = scalar_size(t);
    for (int b = 0; b < n; ++b) {
      const int ch = in_.get();
      if (ch == std::char_traits<char>::eof()) throw Error("PLY: unexpected end of data");
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * b);
    }
    switch (t) {
      case Scalar::I8: return static_cast<std::int8_t>(bits);
      case Scalar::U8: return static_cast<std::uint8_t>(bits);
      case Scalar::I16: return static_cast<std::int16_t>(bits);
      case Scalar::U16: return static_cast<std::uint16_t>(bits);
      case Scalar::I32: return static_cast<std::int32_t>(bits);
      case Scalar::U32: return static_cast<std::uint32_t>(bits);
      case Scalar::F32: return std::bit_cast<float>(static_cast<std::uint32_t>(bits));
      case Scalar::F64: return std::bit_cast<double>(bits);
    }
    return 0.0;
  }

 private:
  double read_ascii(Scalar t) {
    std::string token;
    if (!(in_ >> token)) throw Error("PLY: unexpected end of data");
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) throw Error("PLY: malformed number '" + token + "'");
    if (!is_float(t) && value != std::floor(value)) {
      throw Error("PLY: non-integer value '" + token + "' for an integer property");
    }
    return value;
  }

  std::istream& in_;
  bool ascii_;
};

}  // namespace

LabeledCloud read_ply(std::istream& in) {
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw Error("PLY: header ends before end_header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "ply") throw Error("PLY: missing 'ply' magic line");

  std::optional<bool> ascii;
  std::vector<Element> elements;
  while (next_line() != "end_header") {
    std::istringstream words(line);
    std::string keyword;
    words >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "format") {
      std::string kind, version;
      words >> kind >> version;
      if (kind == "ascii") {
        ascii = true;
      } else if (kind == "binary_little_endian") {
        ascii = false;
      } else {
        throw Error("PLY: unsupported format '" + kind + "'");
      }
    } else if (keyword == "element") {
      Element e;
      long long count = -1;
      if (!(words >> e.name >> count) || count < 0) throw Error("PLY: malformed element line '" + line + "'");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (elements.empty()) throw Error("PLY: property before any element");
      Property p;
      std::string type;
      words >> type;
      if (type == "list") {
        std::string count_type, item_type;
        words >> count_type >> item_type >> p.name;
        const auto ct = scalar_type(count_type);
        const auto it = scalar_type(item_type);
        if (!ct || !it || is_float(*ct)) throw Error("PLY: malformed list property '" + line + "'");
        p.list = true;
        p.count_type = *ct;
        p.type = *it;
      } else {
        const auto t = scalar_type(type);
        if (!t) throw Error("PLY: unknown property type '" + type + "'");
        p.type = *t;
        words >> p.name;
      }
      if (p.name.empty()) throw Error("PLY: property without a name");
      elements.back().properties.push_back(p);
    } else {
      throw Error("PLY: unexpected header line '" + line + "'");
    }
  }
  if (!ascii) throw Error("PLY: missing format line");

  const auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                      [](const Element& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) throw Error("PLY: no vertex element");
  const Element& vertex = *vertex_it;

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
    if (!vertex.properties[i].list) column.emplace(vertex.properties[i].name, i);
  }
  std::vector<std::string> missing;
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "red", "green", "blue"}) {
    if (!column.count(name)) missing.push_back(std::string("'") + name + "'");
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw Error("PLY: vertex element lacks propert" + std::string(missing.size() == 1 ? "y " : "ies ") + names);
  }
  std::array<double, 3> color_scale{};  // divisors
  for (int i = 0; i < 3; ++i) {
    const char* name = std::array{"red", "green", "blue"}[i];
    const Scalar t = vertex.properties[column[name]].type;
    if (t == Scalar::U8) {
      color_scale[i] = 255.0;
    } else if (is_float(t)) {
      color_scale[i] = 1.0;
    } else {
      throw Error(std::string("PLY: property '") + name + "' must be uchar, float or double");
    }
  }
  for (const char* name : {"semantic", "instance"}) {
    if (column.count(name) && is_float(vertex.properties[column[name]].type)) {
      throw Error(std::string("PLY: property '") + name + "' must have an integer type");
    }
  }

  ValueReader reader(in, *ascii);
  auto skip_item = [&](const Element& e) {
    for (const Property& p : e.properties) {
      if (!p.list) {
        reader.read(p.type);
        continue;
      }
      const double n = reader.read(p.count_type);
      for (double j = 0; j < n; ++j) reader.read(p.type);
    }
  };
  for (auto e = elements.begin(); e != vertex_it; ++e) {
    for (std::size_t i = 0; i < e->count; ++i) skip_item(*e);
  }

  LabeledCloud out;
  PointCloud& cloud = out.cloud;
  cloud.positions.resize(vertex.count);
  cloud.normals.resize(vertex.count);
  cloud.colors.resize(vertex.count);
  if (column.count("semantic")) out.semantic.emplace(vertex.count);
  if (column.count("instance")) out.instance.emplace(vertex.count);
  std::vector<double> row(vertex.properties.size());
  for (std::size_t i = 0; i < vertex.count; ++i) {
    for (std::size_t j = 0; j < vertex.properties.size(); ++j) {
      const Property& p = vertex.properties[j];
      if (!p.list) {
        row[j] = reader.read(p.type);
        continue;
      }
      const double n = reader.read(p.count_type);
      for (double r = 0; r < n; ++r) reader.read(p.type);
    }
    auto get = [&](const char* name) { return row[column.at(name)]; };
    cloud.positions[i] = Vec3(get("x"), get("y"), get("z"));
    cloud.normals[i] = Vec3(get("nx"), get("ny"), get("nz"));
    cloud.colors[i] = Vec3(get("red") / color_scale[0], get("green") / color_scale[1],
                           get("blue") / color_scale[2]);
    if (out.semantic) (*out.semantic)[i] = static_cast<CategoryId>(get("semantic"));
    if (out.instance) (*out.instance)[i] = static_cast<InstanceId>(get("instance"));
  }
  cloud = renormalize_normals(std::move(cloud));
  ValidationReport report;
  validate_cloud(cloud, report);
  if (!report.ok()) throw Error("PLY: invalid cloud:\n" + report.summary());
  return out;
}

LabeledCloud read_ply(const std::string& path) {
  auto in = open_in(path, true);
  return read_ply(in);
}

PointCloud load_cloud(const std::string& path) { return read_ply(path).cloud; }

void write_ply(std::ostream& out, const PointCloud& cloud, const std::vector<CategoryId>* semantic,
               const std::vector<InstanceId>* instance) {
  const std::size_t n = cloud.size();
  if (cloud.normals.size() != n || cloud.colors.size() != n) {
    throw Error("write_ply: positions, colors and normals differ in length");
  }
  if ((semantic && semantic->size() != n) || (instance && instance->size() != n)) {
    throw Error("write_ply: label count differs from point count");
  }
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << n << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "red", "green", "blue"}) {
    out << "property double " << name << "\n";
  }
  if (semantic) out << "property int semantic\n";
  if (instance) out << "property int instance\n";
  out << "end_header\n";
  auto put = [&](std::uint64_t bits, int bytes) {
    for (int b = 0; b < bytes; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (const Vec3* v : {&cloud.positions[i], &cloud.normals[i], &cloud.colors[i]}) {
      for (int a = 0; a < 3; ++a) put(std::bit_cast<std::uint64_t>((*v)[a]), 8);
    }
    if (semantic) put(static_cast<std::uint32_t>((*semantic)[i]), 4);
    if (instance) put(static_cast<std::uint32_t>((*instance)[i]), 4);
  }
  finish(out, "PLY");
}

void write_ply(const std::string& path, const PointCloud& cloud, const std::vector<CategoryId>* semantic,
               const std::vector<InstanceId>* instance) {
  auto out = open_out(path, true);
  write_ply(out, cloud, semantic, instance);
}

// ---- JSON ----

namespace {

json parse_json(std::istream& in, const std::string& what) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(what + ": " + e.what());
  }
}

// Field checkers append a message and return false on failure.
struct FieldChecker {
  const json& object;
  std::string where;
  std::vector<std::string>& problems;

  const json* field(const char* name) {
    const auto it = object.find(name);
    if (it == object.end()) {
      problems.push_back(where + ": missing field '" + name + "'");
      return nullptr;
    }
    return &*it;
  }
  std::optional<double> number(const char* name) {
    const json* f = field(name);
    if (!f) return std::nullopt;
    if (!f->is_number()) {
      problems.push_back(where + ": field '" + name + "' must be a number");
      return std::nullopt;
    }
    return f->get<double>();
  }
  std::optional<long long> integer(const char* name) {
    const json* f = field(name);
    if (!f) return std::nullopt;
    if (!f->is_number_integer()) {
      problems.push_back(where + ": field '" + name + "' must be an integer");
      return std::nullopt;
    }
    return f->get<long long>();
  }
  std::optional<std::vector<double>> numbers(const char* name, std::size_t length) {
    const json* f = field(name);
    if (!f) return std::nullopt;
    if (!f->is_array() || f->size() != length) {
      problems.push_back(where + ": field '" + name + "' must be a list of " + std::to_string(length) +
                         " numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const json& x : *f) {
      if (!x.is_number()) {
        problems.push_back(where + ": field '" + name + "' must contain only numbers");
        return std::nullopt;
      }
      out.push_back(x.get<double>());
    }
    return out;
  }
};

const json& top_level_list(const json& doc, const std::string& what) {
  if (!doc.is_array()) throw Error(what + ": top level must be a list");
  return doc;
}

}  // namespace

std::vector<View> read_views(std::istream& in) {
  const json doc = parse_json(in, "views JSON");
  std::vector<std::string> problems;
  std::vector<View> views;
  for (const json& entry : top_level_list(doc, "views JSON")) {
    const std::string where = "view[" + std::to_string(views.size()) + "]";
    View v;
    views.push_back(v);
    if (!entry.is_object()) {
      problems.push_back(where + ": must be an object");
      continue;
    }
    FieldChecker check{entry, where, problems};
    const auto fx = check.number("fx");
    const auto fy = check.number("fy");
    const auto cx = check.number("cx");
    const auto cy = check.number("cy");
    const auto width = check.integer("width");
    const auto height = check.integer("height");
    const auto extrinsic = check.numbers("extrinsic", 16);
    if (!fx || !fy || !cx || !cy || !width || !height || !extrinsic) continue;
    if (*width < 1 || *height < 1 || *width > (1 << 20) || *height > (1 << 20)) {
      problems.push_back(where + ": width and height must lie in [1, 2^20]");
      continue;
    }
    v.fx = *fx;
    v.fy = *fy;
    v.cx = *cx;
    v.cy = *cy;
    v.width = static_cast<int>(*width);
    v.height = static_cast<int>(*height);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) v.extrinsic(r, c) = (*extrinsic)[4 * r + c];
    }
    views.back() = v;
    ValidationReport report;
    validate_views({v}, report);
    for (const Violation& viol : report.violations) problems.push_back(where + ": " + viol.message);
  }
  if (!problems.empty()) throw Error("views JSON is invalid:" + join(problems));
  return views;
}

std::vector<View> load_views(const std::string& path) {
  auto in = open_in(path);
  return read_views(in);
}

void write_views(std::ostream& out, const std::vector<View>& views) {
  json doc = json::array();
  for (const View& v : views) {
    json extrinsic = json::array();
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) extrinsic.push_back(v.extrinsic(r, c));
    }
    doc.push_back({{"fx", v.fx}, {"fy", v.fy}, {"cx", v.cx}, {"cy", v.cy}, {"width", v.width},
                   {"height", v.height}, {"extrinsic", extrinsic}});
  }
  out << doc.dump(1) << "\n";
  finish(out, "views JSON");
}

void save_views(const std::string& path, const std::vector<View>& views) {
  auto out = open_out(path);
  write_views(out, views);
}

std::vector<Detection> read_detections(std::istream& in) {
  const json doc = parse_json(in, "detections JSON");
  std::vector<std::string> problems;
  std::vector<Detection> detections;
  for (const json& entry : top_level_list(doc, "detections JSON")) {
    const std::string where = "detection[" + std::to_string(detections.size()) + "]";
    detections.emplace_back();
    if (!entry.is_object()) {
      problems.push_back(where + ": must be an object");
      continue;
    }
    FieldChecker check{entry, where, problems};
    const auto view = check.integer("view");
    const auto category = check.integer("category");
    const auto box = check.numbers("box", 4);
    const auto score = check.number("score");
    if (!view || !category || !box || !score) continue;
    if (*view < 0) problems.push_back(where + ": negative view index");
    if (*category < 0 || *category > std::numeric_limits<CategoryId>::max()) {
      problems.push_back(where + ": category out of range");
    }
    const BBox2D b{(*box)[0], (*box)[1], (*box)[2], (*box)[3]};
    if (!(b.xmin < b.xmax) || !(b.ymin < b.ymax)) problems.push_back(where + ": box needs xmin < xmax and ymin < ymax");
    if (!(*score >= 0.0 && *score <= 1.0)) problems.push_back(where + ": score outside [0,1]");
    detections.back() = Detection{static_cast<std::size_t>(std::max<long long>(*view, 0)),
                                  static_cast<CategoryId>(*category), b, *score};
  }
  if (!problems.empty()) throw Error("detections JSON is invalid:" + join(problems));
  return detections;
}

std::vector<Detection> load_detections(const std::string& path) {
  auto in = open_in(path);
  return read_detections(in);
}

void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  json doc = json::array();
  for (const Detection& d : detections) {
    doc.push_back({{"view", d.view},
                   {"category", d.category},
                   {"box", {d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax}},
                   {"score", d.score}});
  }
  out << doc.dump(1) << "\n";
  finish(out, "detections JSON");
}

void save_detections(const std::string& path, const std::vector<Detection>& detections) {
  auto out = open_out(path);
  write_detections(out, detections);
}

LabelSchema read_schema(std::istream& in) {
  const json doc = parse_json(in, "schema JSON");
  std::vector<std::string> problems;
  LabelSchema schema;
  if (!doc.is_object()) throw Error("schema JSON: top level must be an object");
  if (!doc.contains("object") || !doc["object"].is_string()) {
    problems.push_back("field 'object' must be a string");
  } else {
    schema.object_name = doc["object"].get<std::string>();
  }
  if (!doc.contains("categories") || !doc["categories"].is_array()) {
    problems.push_back("field 'categories' must be a list of strings");
  } else {
    for (const json& c : doc["categories"]) {
      if (!c.is_string()) {
        problems.push_back("field 'categories' must be a list of strings");
        break;
      }
      schema.categories.push_back(c.get<std::string>());
    }
  }
  if (problems.empty()) {
    ValidationReport report;
    validate_schema(schema, report);
    for (const Violation& v : report.violations) problems.push_back(v.message);
  }
  if (!problems.empty()) throw Error("schema JSON is invalid:" + join(problems));
  return schema;
}

LabelSchema load_schema(const std::string& path) {
  auto in = open_in(path);
  return read_schema(in);
}

void write_schema(std::ostream& out, const LabelSchema& schema) {
  out << json{{"object", schema.object_name}, {"categories", schema.categories}}.dump(1) << "\n";
  finish(out, "schema JSON");
}

void save_schema(const std::string& path, const LabelSchema& schema) {
  auto out = open_out(path);
  write_schema(out, schema);
}

// ---- labels ----

LabelFile label_file(const SegmentationResult& result, CategoryId num_categories) {
  return LabelFile{num_categories, result.semantic, result.instance, result.instances.size()};
}

void write_labels(std::ostream& out, const LabelFile& labels) {
  if (labels.semantic.size() != labels.instance.size()) {
    throw Error("write_labels: semantic and instance label counts differ");
  }
  out << "points " << labels.semantic.size() << " instances " << labels.num_instances << " categories "
      << labels.num_categories << "\n";
  for (std::size_t p = 0; p < labels.semantic.size(); ++p) {
    out << labels.semantic[p] << ' ' << labels.instance[p] << '\n';
  }
  finish(out, "labels");
}

void save_labels(const std::string& path, const LabelFile& labels) {
  auto out = open_out(path);
  write_labels(out, labels);
}

LabelFile read_labels(std::istream& in) {
  std::string w1, w2, w3;
  long long n = -1, m = -1, c = -1;
  if (!(in >> w1 >> n >> w2 >> m >> w3 >> c) || w1 != "points" || w2 != "instances" || w3 != "categories" ||
      n < 0 || m < 0 || c < 0) {
    throw Error("labels: malformed header, expected 'points N instances M categories C'");
  }
  LabelFile out;
  out.num_categories = static_cast<CategoryId>(c);
  out.num_instances = static_cast<std::size_t>(m);
  out.semantic.resize(static_cast<std::size_t>(n));
  out.instance.resize(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < out.semantic.size(); ++p) {
    long long s = 0, i = 0;
    if (!(in >> s >> i)) throw Error("labels: missing or malformed line for point " + std::to_string(p));
    if (s < 0 || s > c) throw Error("labels: semantic id out of range at point " + std::to_string(p));
    if (i < -1 || i >= m) throw Error("labels: instance id out of range at point " + std::to_string(p));
    if (s == c && i != kNoInstance) throw Error("labels: unlabeled point with an instance at point " + std::to_string(p));
    out.semantic[p] = static_cast<CategoryId>(s);
    out.instance[p] = static_cast<InstanceId>(i);
  }
  std::string rest;
  if (in >> rest) throw Error("labels: trailing content after " + std::to_string(n) + " points");
  return out;
}

LabelFile load_labels(const std::string& path) {
  auto in = open_in(path);
  return read_labels(in);
}

void write_instances_csv(std::ostream& out, const SegmentationResult& result) {
  out << "id,category,confidence,num_points\n";
  char buf[40];
  for (std::size_t m = 0; m < result.instances.size(); ++m) {
    const InstanceInfo& info = result.instances[m];
    std::snprintf(buf, sizeof buf, "%.17g", info.confidence);
    out << m << ',' << info.category << ',' << buf << ',' << info.num_points << '\n';
  }
  finish(out, "instances CSV");
}

void save_instances_csv(const std::string& path, const SegmentationResult& result) {
  auto out = open_out(path);
  write_instances_csv(out, result);
}

std::vector<InstanceInfo> read_instances_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "id,category,confidence,num_points") {
    throw Error("instances CSV: expected header 'id,category,confidence,num_points'");
  }
  std::vector<InstanceInfo> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    long long id = -1, category = -1;
    double confidence = 0.0;
    unsigned long long points = 0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf,%llu%c", &id, &category, &confidence, &points, &extra) != 4 ||
        id != static_cast<long long>(out.size()) || category < 0) {
      throw Error("instances CSV: malformed row " + std::to_string(out.size()) + ": '" + line + "'");
    }
    out.push_back({static_cast<CategoryId>(category), confidence, static_cast<std::size_t>(points)});
  }
  return out;
}

std::vector<InstanceInfo> load_instances_csv(const std::string& path) {
  auto in = open_in(path);
  return read_instances_csv(in);
}

}  // namespace partlift
