#include "objslam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>

#include "objslam/solver.hpp"

namespace objslam {

std::vector<SynthClass> default_synth_classes() {
  return {{"monitor", {1.5, 0.35}}, {"sofa", {2.0, 0.9}}, {"table", {1.8, 1.2}},
          {"cabinet", {0.8, 0.5}},  {"bench", {2.2, 0.7}}};
}

bool SceneConfig::valid() const {
  return num_objects >= 0 && height_min > 0.0 && height_max >= height_min && ratio_jitter >= 0.0 &&
         ratio_jitter < 1.0 && !classes.empty() && placement_radius > 0.0 && min_gap >= 0.0 &&
         plane.normal.norm() > 0.0 && orbit_radius > 0.0 && forward_length > 0.0 && camera_height > 0.0 &&
         frames >= 3 && frame_rate > 0.0 && intrinsics.valid() && image_width > 0 && image_height > 0 &&
         bbox_noise >= 0.0 && stride >= 1 && render.curves >= 0 && render.max_step_px > 0.0 &&
         std::all_of(classes.begin(), classes.end(), [](const SynthClass& c) { return c.ratio.valid(); });
}

ProjectionMatrix Scene::projection(int frame_id) const {
  const auto it = std::find(frame_ids.begin(), frame_ids.end(), frame_id);
  if (it == frame_ids.end()) throw PreconditionError("unknown frame id " + std::to_string(frame_id));
  return compose_projection(trajectory[static_cast<std::size_t>(it - frame_ids.begin())].pose, config.intrinsics);
}

std::map<int, int> Scene::observation_counts() const {
  std::map<int, int> counts;
  for (const auto& [id, e] : objects) counts[id] = 0;
  for (const auto& d : detections) ++counts[d.object_id];
  return counts;
}

Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return r;
}

namespace {

Mat3 plane_basis(const Vec3& n) {
  const Vec3 hint = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return frame_on_plane(n, hint);
}

GrayImage to_full_frame(const EdgeMap& em, int width, int height) {
  GrayImage img(width, height);
  for (int y = em.y0; y < em.y0 + em.height; ++y) {
    for (int x = em.x0; x < em.x0 + em.width; ++x) {
      if (x >= 0 && y >= 0 && x < width && y < height && em.is_edge(x, y)) img.at(x, y) = 255.0;
    }
  }
  return img;
}

/// One rejection-sampling pass over all objects; nullopt when some object
/// finds no free spot.
std::optional<std::map<int, Ellipsoid>> try_layout(const SceneConfig& cfg, std::mt19937_64& rng, const Vec3& origin,
                                                   const Mat3& basis) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::map<int, Ellipsoid> objects;
  std::vector<Vec2> centres;
  std::vector<double> radii;
  for (int i = 0; i < cfg.num_objects; ++i) {
    const SynthClass& cls = cfg.classes[static_cast<std::size_t>(unit(rng) * cfg.classes.size()) % cfg.classes.size()];
    const double c = cfg.height_min + (cfg.height_max - cfg.height_min) * unit(rng);
    const double js = 1.0 + cfg.ratio_jitter * (2.0 * unit(rng) - 1.0);
    const double jb = 1.0 + cfg.ratio_jitter * (2.0 * unit(rng) - 1.0);
    const Vec3 axes(cls.ratio.sigma * js * c, cls.ratio.beta * jb * c, c);
    const double yaw = std::numbers::pi * (2.0 * unit(rng) - 1.0);
    const double rho = std::max(axes.x(), axes.y());

    bool placed = false;
    Vec2 xy;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const double r = cfg.placement_radius * std::sqrt(unit(rng));
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      xy = Vec2(r * std::cos(phi), r * std::sin(phi));
      placed = true;
      for (std::size_t k = 0; k < centres.size() && placed; ++k) {
        placed = (xy - centres[k]).norm() >= rho + radii[k] + cfg.min_gap;
      }
    }
    if (!placed) return std::nullopt;
    centres.push_back(xy);
    radii.push_back(rho);

    Ellipsoid e;
    e.center = origin + basis * Vec3(xy.x(), xy.y(), c);
    e.rotation = basis * rot_z(yaw);
    e.half_axes = axes;
    e.label = cls.label;
    e.symmetry_axis_fixed = true;
    objects[i] = e;
  }
  return objects;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  if (!cfg.valid()) throw PreconditionError("invalid scene configuration");
  Scene scene;
  scene.config = cfg;
  scene.config.plane = cfg.plane.normalized();
  const Vec3 n = scene.config.plane.normal;
  const Vec3 origin = -scene.config.plane.offset * n;
  const Mat3 basis = plane_basis(n);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (const auto& c : cfg.classes) scene.scale_table.set(c.label, c.ratio);

  std::optional<std::map<int, Ellipsoid>> layout;
  for (int attempt = 0; attempt < 50 && !layout; ++attempt) layout = try_layout(cfg, rng, origin, basis);
  if (!layout) throw SynthError("placement failed");
  scene.objects = std::move(*layout);

  const double look_height = 0.5 * (cfg.height_min + cfg.height_max);
  for (int k = 0; k < cfg.frames; ++k) {
    Vec3 eye;
    Vec3 target;
    if (cfg.trajectory == TrajectoryType::Orbit) {
      const bool closed = cfg.orbit_arc_deg >= 360.0;
      const double frac = static_cast<double>(k) / (closed ? cfg.frames : cfg.frames - 1);
      const double phi = cfg.orbit_arc_deg * std::numbers::pi / 180.0 * frac;
      eye = origin + basis * Vec3(cfg.orbit_radius * std::cos(phi), cfg.orbit_radius * std::sin(phi),
                                  cfg.camera_height);
      target = origin + basis * Vec3(0.0, 0.0, look_height);
    } else {
      const double start = -(cfg.placement_radius + 1.5 + cfg.forward_length);
      const double x = start + cfg.forward_length * k / (cfg.frames - 1);
      eye = origin + basis * Vec3(x, 0.0, cfg.camera_height);
      const double mid = start + 0.5 * cfg.forward_length;
      target = eye + basis * Vec3(-mid, 0.0, look_height - cfg.camera_height);
    }
    scene.frame_ids.push_back(k);
    scene.trajectory.push_back({k / cfg.frame_rate, Pose(look_at_rotation(eye, target, n), eye)});
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const double w_max = cfg.image_width - 1.0;
  const double h_max = cfg.image_height - 1.0;
  for (std::size_t k = 0; k < scene.frame_ids.size(); k += static_cast<std::size_t>(cfg.stride)) {
    const ProjectionMatrix p = compose_projection(scene.trajectory[k].pose, cfg.intrinsics);
    for (const auto& [id, e] : scene.objects) {
      const auto bb = project_dual_conic_bbox(e, p);
      if (!bb || bb->x_min < 0.0 || bb->y_min < 0.0 || bb->x_max > w_max || bb->y_max > h_max) continue;
      BBox noisy = *bb;
      if (cfg.bbox_noise > 0.0) {
        noisy.x_min += cfg.bbox_noise * noise(rng);
        noisy.y_min += cfg.bbox_noise * noise(rng);
        noisy.x_max += cfg.bbox_noise * noise(rng);
        noisy.y_max += cfg.bbox_noise * noise(rng);
      }
      if (!noisy.valid()) continue;
      scene.detections.push_back({scene.frame_ids[k], id, e.label, noisy, 1.0});
      scene.true_bboxes.push_back(*bb);
    }
  }

  if (cfg.render_edges) {
    std::map<int, std::size_t> first;
    for (std::size_t i = 0; i < scene.detections.size(); ++i) first.emplace(scene.detections[i].object_id, i);
    for (const auto& [id, i] : first) {
      const DetectionRecord& d = scene.detections[i];
      const BBox& t = scene.true_bboxes[i];
      const BBox window{std::max(0.0, t.x_min - 2.0), std::max(0.0, t.y_min - 2.0), std::min(w_max, t.x_max + 2.0),
                        std::min(h_max, t.y_max + 2.0)};
      const EdgeMap em = render_symmetric_edges(scene.objects.at(id), scene.projection(d.frame_id), window,
                                                cfg.seed * 1000003ULL + static_cast<std::uint64_t>(id), cfg.render);
      scene.edge_images[{d.frame_id, id}] = to_full_frame(em, cfg.image_width, cfg.image_height);
    }
  }
  return scene;
}

EdgeMap render_symmetric_edges(const Ellipsoid& e, const ProjectionMatrix& p, const BBox& window,
                               std::uint64_t pattern_seed, const RenderOptions& opts) {
  if (!window.valid()) throw PreconditionError("render window is empty");
  const int x0 = static_cast<int>(std::floor(window.x_min));
  const int y0 = static_cast<int>(std::floor(window.y_min));
  const int x1 = static_cast<int>(std::ceil(window.x_max));
  const int y1 = static_cast<int>(std::ceil(window.y_max));
  EdgeMap em(x0, y0, x1 - x0 + 1, y1 - y0 + 1);

  auto hits = [&](int x, int y) { return raycast_ellipsoid(Vec2(x, y), p, e).has_value(); };
  std::vector<std::uint8_t> hit(em.mask.size(), 0);
  bool any = false;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const bool h = hits(x, y);
      hit[em.index(x, y)] = h ? 1 : 0;
      any = any || h;
    }
  }
  if (!any) throw SynthError("not visible");
  auto hit_at = [&](int x, int y) { return em.in_window(x, y) ? hit[em.index(x, y)] != 0 : hits(x, y); };

  auto surface = [&](double theta, double phi) {
    const Vec3 unit(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
    return Vec3(e.center + e.rotation * unit.cwiseProduct(e.half_axes));
  };
  auto mark_pair = [&](const Vec3& v) {
    const Vec3 vs = reflect_point(v, e);
    if (!(p.depth(v) > 0.0) || !(p.depth(vs) > 0.0)) return;
    if (!is_front_facing(v, p, e) || !is_front_facing(vs, p, e)) return;
    const Vec2 a = p.project(v);
    const Vec2 b = p.project(vs);
    const int ax = static_cast<int>(std::lround(a.x()));
    const int ay = static_cast<int>(std::lround(a.y()));
    const int bx = static_cast<int>(std::lround(b.x()));
    const int by = static_cast<int>(std::lround(b.y()));
    if (!em.in_window(ax, ay) || !em.in_window(bx, by)) return;
    if (!hit_at(ax, ay) || !hit_at(bx, by)) return;
    em.set_edge(ax, ay);
    em.set_edge(bx, by);
  };

  std::mt19937_64 rng(pattern_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < opts.curves; ++c) {
    const double theta0 = std::numbers::pi * (0.15 + 0.7 * unit(rng));
    const double phi0 = std::numbers::pi * (0.05 + 0.9 * unit(rng));
    const double dtheta = 1.2 * (unit(rng) - 0.5);
    const double dphi = 1.2 * (unit(rng) - 0.5);
    auto point = [&](double t) {
      const double phi = std::clamp(phi0 + t * dphi, 0.0, std::numbers::pi);
      return surface(theta0 + t * dtheta, phi);
    };
    // Densify so consecutive projections are closer than max_step_px.
    double length = 0.0;
    constexpr int kCoarse = 256;
    for (int i = 0; i < kCoarse; ++i) {
      const Vec3 va = point(double(i) / kCoarse);
      const Vec3 vb = point(double(i + 1) / kCoarse);
      if (p.depth(va) > 0.0 && p.depth(vb) > 0.0) length += (p.project(va) - p.project(vb)).norm();
    }
    const int n = std::clamp(static_cast<int>(std::ceil(length / opts.max_step_px)), kCoarse, 200000);
    for (int i = 0; i <= n; ++i) mark_pair(point(double(i) / n));
  }

  if (opts.silhouette) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!hit[em.index(x, y)]) continue;
        if (!hit_at(x - 1, y) || !hit_at(x + 1, y) || !hit_at(x, y - 1) || !hit_at(x, y + 1)) em.set_edge(x, y);
      }
    }
  }
  em.gray.resize(em.mask.size());
  for (std::size_t i = 0; i < em.mask.size(); ++i) em.gray[i] = em.mask[i] ? 255.0 : 0.0;
  return em;
}

Ellipsoid perturb_ellipsoid(const Ellipsoid& e, double yaw_err_deg, double center_err, double scale_err,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Ellipsoid out = rotate_about_center(e, e.rotation.col(2), yaw_err_deg * std::numbers::pi / 180.0);
  Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
  if (dir.norm() < 1e-12) dir = Vec3::UnitX();
  out.center += center_err * dir.normalized();
  for (int i = 0; i < 3; ++i) out.half_axes(i) *= 1.0 + scale_err * unit(rng);
  return out;
}

void export_dataset(const Scene& scene, const std::string& dir, const std::map<std::string, std::string>& metadata) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "edges");
  const SceneConfig& cfg = scene.config;

  save_trajectory((root / "trajectory.txt").string(), scene.trajectory);
  std::map<int, double> index;
  for (std::size_t k = 0; k < scene.frame_ids.size(); ++k) index[scene.frame_ids[k]] = scene.trajectory[k].timestamp;
  save_frame_index((root / "frames.txt").string(), index);
  save_detections((root / "detections.txt").string(), scene.detections);
  save_planes_intrinsics((root / "planes.txt").string(),
                         {{cfg.plane}, cfg.intrinsics, cfg.image_width, cfg.image_height});
  save_scale_table((root / "scale_table.txt").string(), scene.scale_table);

  MapDocument gt;
  const auto counts = scene.observation_counts();
  for (const auto& [id, e] : scene.objects) gt.objects.push_back({id, e, counts.at(id)});
  gt.trajectory = scene.trajectory;
  gt.metadata = metadata;
  save_map(gt, (root / "gt.json").string());

  for (const auto& [key, img] : scene.edge_images) {
    write_pgm((root / "edges" / (std::to_string(key.first) + "_" + std::to_string(key.second) + ".pgm")).string(),
              img);
  }
}

}  // namespace objslam
