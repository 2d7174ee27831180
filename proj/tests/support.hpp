// Scene builders shared by the unit tests, the acceptance binary and the
// benchmark.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "objslam/geometry.hpp"
#include "objslam/symmetry.hpp"
#include "objslam/synth.hpp"

namespace objslam::testing {

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline CameraIntrinsics default_intrinsics() { return {525.0, 525.0, 319.5, 239.5}; }

/// Camera at `eye` looking at `target` with world z up in the image.
inline ProjectionMatrix look_at_camera(const Vec3& eye, const Vec3& target,
                                       const CameraIntrinsics& k = default_intrinsics()) {
  return compose_projection(Pose(look_at_rotation(eye, target, Vec3::UnitZ()), eye), k);
}

/// One object resting on z = 0 seen by a single camera with a symmetric edge
/// map over its bbox.
struct SymmetricView {
  Ellipsoid truth;
  ProjectionMatrix camera;
  BBox bbox;
  EdgeMap edges;
  DistanceField field;
  SampleSet samples;
};

struct SymmetricViewOptions {
  /// Largest angle between the viewing direction and the symmetry plane.
  double max_view_deg = 25.0;
  double distance = 2.5;
  int curves = 20;
  int n_uniform = 25;
  int max_corners = 32;
};

/// Deterministic in seed. The object class cycles through the default synth
/// classes with c = 0.3 m, yaw is uniform and the camera looks at the object
/// from the front or back at 15-30 degrees elevation.
inline SymmetricView make_symmetric_view(std::uint64_t seed, const SymmetricViewOptions& opts = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto classes = default_synth_classes();
  const SynthClass& cls = classes[seed % classes.size()];
  const double c = 0.3;

  SymmetricView v;
  const double yaw = 2.0 * std::numbers::pi * unit(rng);
  v.truth.center = Vec3(0, 0, c);
  v.truth.half_axes = Vec3(cls.ratio.sigma * c, cls.ratio.beta * c, c);
  v.truth.rotation = rot_z(yaw);
  v.truth.label = cls.label;
  v.truth.symmetry_axis_fixed = true;

  const double az = yaw + (2.0 * unit(rng) - 1.0) * opts.max_view_deg * kDeg + (unit(rng) < 0.5 ? 0.0 : std::numbers::pi);
  const double el = (15.0 + 15.0 * unit(rng)) * kDeg;
  const Vec3 eye = v.truth.center + opts.distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                                         std::sin(el));
  v.camera = look_at_camera(eye, v.truth.center);
  v.bbox = *project_dual_conic_bbox(v.truth, v.camera);
  const BBox window{v.bbox.x_min - 2, v.bbox.y_min - 2, v.bbox.x_max + 2, v.bbox.y_max + 2};
  RenderOptions ro;
  ro.curves = opts.curves;
  ro.silhouette = false;
  const EdgeMap full = render_symmetric_edges(v.truth, v.camera, window, seed * 7 + 1, ro);

  // Crop to the bbox window the way a detection would see it.
  const int x0 = static_cast<int>(std::floor(v.bbox.x_min));
  const int y0 = static_cast<int>(std::floor(v.bbox.y_min));
  const int x1 = static_cast<int>(std::ceil(v.bbox.x_max));
  const int y1 = static_cast<int>(std::ceil(v.bbox.y_max));
  v.edges = EdgeMap(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) v.edges.set_edge(x, y, full.is_edge(x, y));
  }
  v.edges.gray.resize(v.edges.mask.size());
  for (std::size_t i = 0; i < v.edges.mask.size(); ++i) v.edges.gray[i] = v.edges.mask[i] ? 255.0 : 0.0;
  v.field = distance_transform_argmin(v.edges);
  v.samples = sample_points(v.bbox, v.edges, opts.n_uniform, 0.01, opts.max_corners);
  return v;
}

/// Random rotation from a seeded generator.
template <class Rng>
Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace objslam::testing
