#include "objslam/dataio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace objslam {

namespace {

using json = nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open file for writing");
  return out;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Line {
  int number;
  std::vector<std::string> fields;
};

/// Non-empty lines with `#` comments stripped, split on whitespace.
std::vector<Line> data_lines(const std::string& text) {
  std::vector<Line> out;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream fields(raw);
    Line line{number, {}};
    std::string f;
    while (fields >> f) line.fields.push_back(f);
    if (!line.fields.empty()) out.push_back(std::move(line));
  }
  return out;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& s, const std::string& source, int line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(source, line, "expected a number, got '" + s + "'");
  }
  return v;
}

int to_int(const std::string& s, const std::string& source, int line) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(source, line, "expected an integer, got '" + s + "'");
  }
  return v;
}

void expect_fields(const Line& l, std::size_t n, const std::string& source) {
  if (l.fields.size() != n) {
    fail(source, l.number, "expected " + std::to_string(n) + " fields, got " + std::to_string(l.fields.size()));
  }
}

}  // namespace

std::vector<TrajectoryRecord> parse_trajectory(const std::string& text, const std::string& source) {
  std::vector<TrajectoryRecord> out;
  for (const Line& l : data_lines(text)) {
    expect_fields(l, 8, source);
    double v[8];
    for (int i = 0; i < 8; ++i) v[i] = to_double(l.fields[i], source, l.number);
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (std::abs(norm - 1.0) > 1e-3) fail(source, l.number, "quaternion norm " + shortest(norm) + " is not 1");
    q.normalize();
    TrajectoryRecord rec{v[0], Pose(q.toRotationMatrix(), Vec3(v[1], v[2], v[3]))};
    if (!out.empty() && !(rec.timestamp > out.back().timestamp)) {
      fail(source, l.number, "timestamps must be strictly increasing");
    }
    out.push_back(rec);
  }
  return out;
}

std::vector<TrajectoryRecord> load_trajectory(const std::string& path) {
  return parse_trajectory(read_file(path), path);
}

std::string format_tum_line(const TrajectoryRecord& r) {
  const Eigen::Quaterniond q(r.pose.rotation);
  const Vec3& t = r.pose.translation;
  std::string s = shortest(r.timestamp);
  for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) s += " " + shortest(v);
  return s;
}

void save_trajectory(const std::string& path, const std::vector<TrajectoryRecord>& records) {
  auto out = open_out(path);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& r : records) out << format_tum_line(r) << '\n';
}

std::vector<DetectionRecord> load_detections(const std::string& path, const DetectionFilter& filter,
                                             Warnings* warnings) {
  std::vector<DetectionRecord> out;
  const bool can_filter = filter.image_width > 0 && filter.image_height > 0;
  if (filter.drop_partial && !can_filter && warnings) {
    warnings->push_back(path + ": image size unknown, partial-bbox filter skipped");
  }
  int dropped = 0;
  for (const Line& l : data_lines(read_file(path))) {
    expect_fields(l, 8, path);
    DetectionRecord d;
    d.frame_id = to_int(l.fields[0], path, l.number);
    d.object_id = to_int(l.fields[1], path, l.number);
    d.label = l.fields[2];
    d.bbox = {to_double(l.fields[3], path, l.number), to_double(l.fields[4], path, l.number),
              to_double(l.fields[5], path, l.number), to_double(l.fields[6], path, l.number)};
    d.score = to_double(l.fields[7], path, l.number);
    if (!d.bbox.valid()) fail(path, l.number, "bbox needs x_min < x_max and y_min < y_max");
    if (d.score < 0.0 || d.score > 1.0) fail(path, l.number, "score must lie in [0, 1]");
    if (filter.drop_partial && can_filter) {
      const double m = filter.margin;
      if (d.bbox.x_min < m || d.bbox.y_min < m || d.bbox.x_max > filter.image_width - 1 - m ||
          d.bbox.y_max > filter.image_height - 1 - m) {
        ++dropped;
        continue;
      }
    }
    out.push_back(d);
  }
  if (dropped > 0 && warnings) {
    warnings->push_back(path + ": dropped " + std::to_string(dropped) + " partial detections near the border");
  }
  return out;
}

void save_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
  auto out = open_out(path);
  out << "# frame_id object_id label x_min y_min x_max y_max score\n";
  for (const auto& d : records) {
    out << d.frame_id << ' ' << d.object_id << ' ' << d.label << ' ' << shortest(d.bbox.x_min) << ' '
        << shortest(d.bbox.y_min) << ' ' << shortest(d.bbox.x_max) << ' ' << shortest(d.bbox.y_max) << ' '
        << shortest(d.score) << '\n';
  }
}

std::map<int, double> load_frame_index(const std::string& path) {
  std::map<int, double> out;
  for (const Line& l : data_lines(read_file(path))) {
    expect_fields(l, 2, path);
    const int id = to_int(l.fields[0], path, l.number);
    if (!out.emplace(id, to_double(l.fields[1], path, l.number)).second) {
      fail(path, l.number, "duplicate frame id " + std::to_string(id));
    }
  }
  return out;
}

void save_frame_index(const std::string& path, const std::map<int, double>& index) {
  auto out = open_out(path);
  out << "# frame_id timestamp\n";
  for (const auto& [id, ts] : index) out << id << ' ' << shortest(ts) << '\n';
}

ScaleRatioTable load_scale_table(const std::string& path, Warnings* warnings) {
  ScaleRatioTable table;
  for (const Line& l : data_lines(read_file(path))) {
    expect_fields(l, 3, path);
    const ScaleRatio r{to_double(l.fields[1], path, l.number), to_double(l.fields[2], path, l.number)};
    if (!r.valid()) fail(path, l.number, "scale ratios must be positive");
    if (table.contains(l.fields[0]) && warnings) {
      warnings->push_back(path + ":" + std::to_string(l.number) + ": duplicate label '" + l.fields[0] +
                          "', last entry wins");
    }
    table.set(l.fields[0], r);
  }
  return table;
}

void save_scale_table(const std::string& path, const ScaleRatioTable& table) {
  auto out = open_out(path);
  out << "# label sigma beta\n";
  for (const auto& [label, r] : table.entries()) {
    out << label << ' ' << shortest(r.sigma) << ' ' << shortest(r.beta) << '\n';
  }
}

PlanesIntrinsics load_planes_intrinsics(const std::string& path) {
  PlanesIntrinsics out;
  const auto lines = data_lines(read_file(path));
  if (lines.empty()) throw DataError(path + ": missing intrinsics line");
  const Line& k = lines.front();
  if (k.fields.size() != 4 && k.fields.size() != 6) {
    fail(path, k.number, "intrinsics line needs `fx fy cx cy [width height]`");
  }
  out.intrinsics = {to_double(k.fields[0], path, k.number), to_double(k.fields[1], path, k.number),
                    to_double(k.fields[2], path, k.number), to_double(k.fields[3], path, k.number)};
  if (!out.intrinsics.valid()) fail(path, k.number, "focal lengths must be positive");
  if (k.fields.size() == 6) {
    out.image_width = to_int(k.fields[4], path, k.number);
    out.image_height = to_int(k.fields[5], path, k.number);
    if (out.image_width <= 0 || out.image_height <= 0) fail(path, k.number, "image size must be positive");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& l = lines[i];
    expect_fields(l, 4, path);
    const Plane p(Vec3(to_double(l.fields[0], path, l.number), to_double(l.fields[1], path, l.number),
                       to_double(l.fields[2], path, l.number)),
                  to_double(l.fields[3], path, l.number));
    if (!(p.normal.norm() > 0.0)) fail(path, l.number, "plane has a zero normal");
    out.planes.push_back(p.normalized());
  }
  return out;
}

void save_planes_intrinsics(const std::string& path, const PlanesIntrinsics& data) {
  auto out = open_out(path);
  const auto& k = data.intrinsics;
  out << "# fx fy cx cy [width height]\n"
      << shortest(k.fx) << ' ' << shortest(k.fy) << ' ' << shortest(k.cx) << ' ' << shortest(k.cy);
  if (data.image_width > 0) out << ' ' << data.image_width << ' ' << data.image_height;
  out << "\n# nx ny nz d (world frame)\n";
  for (const auto& p : data.planes) {
    out << shortest(p.normal.x()) << ' ' << shortest(p.normal.y()) << ' ' << shortest(p.normal.z()) << ' '
        << shortest(p.offset) << '\n';
  }
}

Plane transform_plane_to_frame(const Plane& world_plane, const Pose& world_from_camera) {
  return Plane::from_homogeneous(world_from_camera.matrix().transpose() * world_plane.homogeneous());
}

std::string map_to_json(const MapDocument& doc) {
  json j;
  j["objects"] = json::array();
  for (const auto& o : doc.objects) {
    const Ellipsoid& e = o.ellipsoid;
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot.push_back(e.rotation(r, c));
    }
    json obj = {{"id", o.id},
                {"label", e.label},
                {"center", {e.center.x(), e.center.y(), e.center.z()}},
                {"rotation", rot},
                {"half_axes", {e.half_axes.x(), e.half_axes.y(), e.half_axes.z()}},
                {"symmetry_axis_fixed", e.symmetry_axis_fixed}};
    if (o.observations >= 0) obj["observations"] = o.observations;
    j["objects"].push_back(obj);
  }
  j["trajectory"] = json::array();
  for (const auto& r : doc.trajectory) j["trajectory"].push_back(format_tum_line(r));
  j["metadata"] = doc.metadata;
  return j.dump(2) + "\n";
}

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  return j.at(key);
}

Vec3 vec3_field(const json& j, const char* key, const std::string& where) {
  const json& a = require(j, key, where);
  if (!a.is_array() || a.size() != 3) throw DataError(where + ": '" + key + "' must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!a[i].is_number()) throw DataError(where + ": '" + key + "' must be an array of 3 numbers");
    v(i) = a[i].get<double>();
  }
  return v;
}

}  // namespace

MapDocument map_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(source + ": invalid JSON: " + e.what());
  }
  MapDocument doc;
  const json& objects = require(j, "objects", source);
  if (!objects.is_array()) throw DataError(source + ": 'objects' must be an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const json& o = objects[i];
    const std::string where = source + ": objects[" + std::to_string(i) + "]";
    MapObject m;
    const json& id = require(o, "id", where);
    if (!id.is_number_integer()) throw DataError(where + ": 'id' must be an integer");
    m.id = id.get<int>();
    const json& label = require(o, "label", where);
    if (!label.is_string()) throw DataError(where + ": 'label' must be a string");
    m.ellipsoid.label = label.get<std::string>();
    m.ellipsoid.center = vec3_field(o, "center", where);
    m.ellipsoid.half_axes = vec3_field(o, "half_axes", where);
    if (!(m.ellipsoid.half_axes.array() > 0.0).all()) throw DataError(where + ": 'half_axes' must be positive");
    const json& rot = require(o, "rotation", where);
    if (!rot.is_array() || rot.size() != 9) throw DataError(where + ": 'rotation' must be 9 numbers (row-major)");
    for (int k = 0; k < 9; ++k) {
      if (!rot[k].is_number()) throw DataError(where + ": 'rotation' must be 9 numbers (row-major)");
      m.ellipsoid.rotation(k / 3, k % 3) = rot[k].get<double>();
    }
    if (!is_rotation(m.ellipsoid.rotation, 1e-6)) throw DataError(where + ": 'rotation' is not orthonormal");
    if (o.contains("symmetry_axis_fixed")) m.ellipsoid.symmetry_axis_fixed = o["symmetry_axis_fixed"].get<bool>();
    if (o.contains("observations")) {
      if (!o["observations"].is_number_integer()) throw DataError(where + ": 'observations' must be an integer");
      m.observations = o["observations"].get<int>();
    }
    doc.objects.push_back(std::move(m));
  }
  if (j.contains("trajectory")) {
    const json& t = j["trajectory"];
    if (!t.is_array()) throw DataError(source + ": 'trajectory' must be an array of TUM lines");
    std::string lines;
    for (const auto& s : t) {
      if (!s.is_string()) throw DataError(source + ": 'trajectory' must be an array of TUM lines");
      lines += s.get<std::string>() + "\n";
    }
    doc.trajectory = parse_trajectory(lines, source + ": trajectory");
  }
  if (j.contains("metadata")) {
    if (!j["metadata"].is_object()) throw DataError(source + ": 'metadata' must be an object");
    for (const auto& [k, v] : j["metadata"].items()) {
      if (!v.is_string()) throw DataError(source + ": metadata values must be strings");
      doc.metadata[k] = v.get<std::string>();
    }
  }
  return doc;
}

void save_map(const MapDocument& doc, const std::string& path) { open_out(path) << map_to_json(doc); }

MapDocument load_map(const std::string& path) { return map_from_json(read_file(path), path); }

void export_ply(const MapDocument& doc, const std::string& path, int subdivisions,
                const std::vector<std::string>& comments) {
  if (subdivisions < 2) throw PreconditionError("subdivisions must be at least 2");
  const int s = subdivisions;
  const std::size_t verts_per_object = static_cast<std::size_t>(s + 1) * (s + 1);
  const std::size_t n_vertices = doc.objects.size() * verts_per_object + doc.trajectory.size() * 4;
  const std::size_t n_faces = doc.objects.size() * static_cast<std::size_t>(s) * s;
  const std::size_t n_edges = doc.trajectory.size() * 3;

  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  for (const auto& c : comments) out << "comment " << c << '\n';
  out << "element vertex " << n_vertices << "\nproperty float64 x\nproperty float64 y\nproperty float64 z\n"
      << "element face " << n_faces << "\nproperty list uchar int vertex_indices\n"
      << "element edge " << n_edges << "\nproperty int vertex1\nproperty int vertex2\n"
      << "end_header\n";
  for (const auto& o : doc.objects) {
    const Ellipsoid& e = o.ellipsoid;
    const Mat3 m = e.rotation * e.half_axes.asDiagonal();
    for (int i = 0; i <= s; ++i) {
      const double theta = std::numbers::pi * i / s;
      for (int k = 0; k <= s; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / s;
        const Vec3 unit(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
        const Vec3 v = e.center + m * unit;
        out << shortest(v.x()) << ' ' << shortest(v.y()) << ' ' << shortest(v.z()) << '\n';
      }
    }
  }
  constexpr double kTripod = 0.1;
  for (const auto& r : doc.trajectory) {
    const Vec3& c = r.pose.translation;
    out << shortest(c.x()) << ' ' << shortest(c.y()) << ' ' << shortest(c.z()) << '\n';
    for (int a = 0; a < 3; ++a) {
      const Vec3 v = c + kTripod * r.pose.rotation.col(a);
      out << shortest(v.x()) << ' ' << shortest(v.y()) << ' ' << shortest(v.z()) << '\n';
    }
  }
  for (std::size_t o = 0; o < doc.objects.size(); ++o) {
    const std::size_t base = o * verts_per_object;
    for (int i = 0; i < s; ++i) {
      for (int k = 0; k < s; ++k) {
        const std::size_t v00 = base + static_cast<std::size_t>(i) * (s + 1) + k;
        const std::size_t v10 = v00 + (s + 1);
        out << "4 " << v00 << ' ' << v10 << ' ' << v10 + 1 << ' ' << v00 + 1 << '\n';
      }
    }
  }
  const std::size_t cam_base = doc.objects.size() * verts_per_object;
  for (std::size_t t = 0; t < doc.trajectory.size(); ++t) {
    const std::size_t c = cam_base + 4 * t;
    for (int a = 1; a <= 3; ++a) out << c << ' ' << c + a << '\n';
  }
}

GrayImage read_pgm(const std::string& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (token() != "P5") throw DataError(path + ": not a binary PGM (P5)");
  const int w = to_int(token(), path, 1);
  const int h = to_int(token(), path, 1);
  const int maxval = to_int(token(), path, 1);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw DataError(path + ": unsupported PGM header");
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (data.size() < pos + n) throw DataError(path + ": truncated PGM raster");
  GrayImage img(w, h);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<unsigned char>(data[pos + i]);
  return img;
}

void write_pgm(const std::string& path, const GrayImage& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::string raster(image.pixels.size(), '\0');
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    raster[i] = static_cast<char>(static_cast<unsigned char>(std::clamp(std::lround(image.pixels[i]), 0L, 255L)));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

}  // namespace objslam
