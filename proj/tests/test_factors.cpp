#include <doctest.h>

#include <cmath>
#include <random>

#include "objslam/factors.hpp"
#include "objslam/synth.hpp"
#include "support.hpp"

using namespace objslam;
using namespace objslam::testing;

namespace {

Ellipsoid axes(double a, double b, double c) {
  Ellipsoid e;
  e.half_axes = Vec3(a, b, c);
  return e;
}

FactorGraph noiseless_graph(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.bbox_noise = 0.0;
  cfg.render_edges = false;
  cfg.frames = 12;
  const Scene s = generate_scene(cfg);
  FactorGraph g;
  g.intrinsics = cfg.intrinsics;
  for (std::size_t i = 0; i < s.frame_ids.size(); ++i) g.poses[s.frame_ids[i]] = s.trajectory[i].pose;
  for (const auto& [id, e] : s.objects) {
    g.objects[id] = e;
    g.supports.push_back({id, cfg.plane});
    g.scales.push_back({id, *s.scale_table.find(e.label)});
  }
  for (const auto& d : s.detections) g.observations.push_back({d.frame_id, d.object_id, d.bbox});
  for (std::size_t i = 1; i < s.frame_ids.size(); ++i) {
    const Pose& a = g.poses[s.frame_ids[i - 1]];
    const Pose& b = g.poses[s.frame_ids[i]];
    g.odometry.push_back({s.frame_ids[i - 1], s.frame_ids[i], a.inverse() * b});
  }
  return g;
}

}  // namespace

TEST_CASE("bbox residual") {
  std::mt19937_64 rng(10);
  Ellipsoid e = axes(0.4, 0.3, 0.5);
  e.rotation = random_rotation(rng);
  const ProjectionMatrix p = look_at_camera(Vec3(3, -2, 2), Vec3::Zero());
  const BBox b = *project_dual_conic_bbox(e, p);
  CHECK(bbox_residual(e, b, p).cwiseAbs().maxCoeff() < 1e-6);

  // Inflating the box moves every edge plane off the surface the same way.
  const ProjectionMatrix q = look_at_camera(Vec3(0, 0, -5), Vec3::Zero(), CameraIntrinsics{1, 1, 0, 0});
  const BBox t = *project_dual_conic_bbox(axes(1, 1, 1), q);
  const Vec2 c = t.center();
  const BBox big{c.x() - 0.55 * t.width(), c.y() - 0.55 * t.height(), c.x() + 0.55 * t.width(), c.y() + 0.55 * t.height()};
  const Eigen::Vector4d r = bbox_residual(axes(1, 1, 1), big, q);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(r(i)) > 1e-6);
    CHECK(std::signbit(r(i)) == std::signbit(r(0)));
  }
}

TEST_CASE("support residual") {
  const double c = 0.5;
  Ellipsoid e = axes(0.3, 0.4, c);
  e.center = Vec3(0, 0, c);
  const Plane ground(Vec3::UnitZ(), 0.0);
  NoiseModel unit;
  unit.sigma_theta = unit.sigma_pi = 1.0;
  CHECK(support_residual(e, ground, unit).norm() < 1e-12);

  Ellipsoid hover = e;
  hover.center.z() = 2 * c;
  const Vec3 h = support_residual(hover, ground, unit);
  CHECK(std::abs(h(0)) < 1e-12);
  CHECK(std::abs(h(1)) < 1e-12);
  CHECK(h(2) == doctest::Approx(c * c - 4 * c * c));

  Ellipsoid tilt = e;
  tilt.rotation = rot_x(10 * kDeg);
  const Vec3 t = support_residual(tilt, ground, unit);
  CHECK(std::abs(t(0)) < 1e-12);
  CHECK(std::abs(t(1)) == doctest::Approx(std::sin(10 * kDeg)));

  NoiseModel scaled;
  CHECK(support_residual(hover, ground, scaled)(2) == doctest::Approx(h(2) / scaled.sigma_pi));
}

TEST_CASE("scale ratio and ssc residual") {
  CHECK(scale_ratio(axes(1, 1, 1)).sigma == doctest::Approx(1.0));
  const ScaleRatio r = scale_ratio(axes(2, 1, 4));
  CHECK(r.sigma == doctest::Approx(0.5));
  CHECK(r.beta == doctest::Approx(0.25));
  const ScaleRatio k = scale_ratio(axes(6, 3, 12));
  CHECK(k.sigma == doctest::Approx(r.sigma));
  CHECK(k.beta == doctest::Approx(r.beta));

  Ellipsoid e = axes(2, 1, 4);
  e.label = "thing";
  CHECK(ssc_residual(e, ScaleRatio{0.5, 0.25}).norm() < 1e-12);
  const Eigen::Vector2d d = ssc_residual(e, ScaleRatio{1, 1});
  CHECK(d(0) == doctest::Approx(-0.5));
  CHECK(d(1) == doctest::Approx(-0.75));

  ScaleRatioTable table;
  table.set("other", {1, 1});
  CHECK_FALSE(ssc_residual(e, table));
  const auto unit = ssc_residual(e, table, NoiseModel{}, UnknownLabelPolicy::UnitRatio);
  REQUIRE(unit);
  CHECK(unit->isApprox(d));
  CHECK_THROWS_AS(table.set("bad", {0, 1}), PreconditionError);
}

TEST_CASE("odometry residual") {
  NoiseModel n;
  std::mt19937_64 rng(11);
  const Pose a(random_rotation(rng), Vec3(1, 2, 3));
  const Pose m(rot_z(0.2), Vec3(0.5, 0, 0));
  CHECK(odometry_residual(a, a * m, m, n).norm() < 1e-9);

  const Pose shifted = a * m * Pose(Mat3::Identity(), Vec3(0.1, 0, 0));
  const Vec6 t = odometry_residual(a, shifted, m, n);
  CHECK(t.head<3>().norm() < 1e-12);
  CHECK(t(3) == doctest::Approx(0.1 / n.sigma_odom_trans));
  CHECK(std::abs(t(4)) < 1e-9);

  const double theta = 0.07;
  const Pose yawed = a * m * Pose(rot_z(theta), Vec3::Zero());
  CHECK(odometry_residual(a, yawed, m, n).head<3>().norm() == doctest::Approx(theta / n.sigma_odom_rot));
}

TEST_CASE("huber") {
  CHECK(huber(0.5, 1.0) == doctest::Approx(0.125));
  CHECK(huber(2.0, 1.0) == doctest::Approx(1.5));
  CHECK(huber(-2.0, 1.0) == doctest::Approx(1.5));
  CHECK(huber(1.0, 1.0) == doctest::Approx(0.5));
  CHECK(huber(std::nextafter(1.0, 2.0), 1.0) == doctest::Approx(0.5));
  for (double r = -5; r <= 5; r += 0.25) {
    CHECK(huber(r, 1.3) <= 0.5 * r * r + 1e-15);
    if (std::abs(r) <= 1.3) CHECK(huber(r, 1.3) == 0.5 * r * r);
  }
}

TEST_CASE("graph total cost") {
  CHECK(graph_total_cost(FactorGraph{}, NoiseModel{}) == 0.0);

  const FactorGraph g = noiseless_graph(3);
  g.validate();
  const double c0 = graph_total_cost(g, NoiseModel{});
  CHECK(c0 < 1e-6);
  CHECK(c0 == graph_total_cost_serial(g, NoiseModel{}));

  // Any perturbed node raises the cost.
  for (const auto& [id, e] : g.objects) {
    FactorGraph h = g;
    h.objects[id].center.x() += 0.05;
    CHECK(graph_total_cost(h, NoiseModel{}) > c0);
  }
  FactorGraph h = g;
  h.poses.rbegin()->second.translation.y() += 0.02;
  CHECK(graph_total_cost(h, NoiseModel{}) > c0);

  // Insertion order.
  FactorGraph noisy = g;
  for (auto& [id, e] : noisy.objects) e.half_axes *= 1.1;
  FactorGraph shuffled = noisy;
  std::mt19937_64 rng(12);
  std::shuffle(shuffled.observations.begin(), shuffled.observations.end(), rng);
  std::shuffle(shuffled.odometry.begin(), shuffled.odometry.end(), rng);
  const double a = graph_total_cost(noisy, NoiseModel{});
  CHECK(std::abs(a - graph_total_cost(shuffled, NoiseModel{})) <= 1e-12 * std::max(1.0, a));
  CHECK(a == graph_total_cost(noisy, NoiseModel{}));

  FactorGraph broken = g;
  broken.observations.push_back({999, g.objects.begin()->first, BBox{0, 0, 1, 1}});
  CHECK_THROWS_AS(broken.validate(), PreconditionError);
}

TEST_CASE("residuals are smooth in ellipsoid parameters") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ProjectionMatrix p = look_at_camera(Vec3(3, -2, 2), Vec3(0, 0, 0.4));
  const Plane ground(Vec3::UnitZ(), 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    Ellipsoid e = axes(0.4 + 0.1 * u(rng), 0.3 + 0.1 * u(rng), 0.4 + 0.1 * u(rng));
    e.center = Vec3(0.1 * u(rng), 0.1 * u(rng), 0.45);
    e.rotation = rot_z(u(rng)) * rot_x(0.1 * u(rng));
    const BBox b{200 + 10 * u(rng), 150 + 10 * u(rng), 420 + 10 * u(rng), 330 + 10 * u(rng)};
    auto f = [&](double dx) {
      Ellipsoid m = e;
      m.center.x() += dx;
      return bbox_residual(m, b, p).squaredNorm() + support_residual(m, ground).squaredNorm();
    };
    auto slope = [&](double h) { return (f(h) - f(-h)) / (2 * h); };
    const double g6 = slope(1e-6);
    const double g4 = slope(1e-4);
    const double g5 = slope(1e-5);
    CHECK(std::abs(g6 - g4) <= 0.01 * std::max(std::abs(g4), 1e-12));
    CHECK(std::abs(g6 - g5) <= 0.01 * std::max(std::abs(g5), 1e-12));
  }
}
