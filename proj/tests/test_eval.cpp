#include <doctest.h>

#include <cmath>
#include <random>

#include "objslam/eval.hpp"
#include "support.hpp"

using namespace objslam;
using namespace objslam::testing;

namespace {

double mc_iou(const Cuboid& a, const Cuboid& b, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 lo = Vec3::Constant(INFINITY), hi = Vec3::Constant(-INFINITY);
  for (const Cuboid* c : {&a, &b}) {
    for (const Vec3& v : c->corners()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  long both = 0, either = 0;
  for (int i = 0; i < n; ++i) {
    const Vec3 q = lo + (hi - lo).cwiseProduct(Vec3(unit(rng), unit(rng), unit(rng)));
    const bool ia = a.contains(q), ib = b.contains(q);
    both += ia && ib;
    either += ia || ib;
  }
  return double(both) / double(either);
}

MapDocument doc_of(const std::vector<std::pair<int, Ellipsoid>>& objs, int observations) {
  MapDocument d;
  for (const auto& [id, e] : objs) d.objects.push_back({id, e, observations});
  return d;
}

}  // namespace

TEST_CASE("cuboid iou") {
  const Cuboid unit{Vec3::Zero(), Mat3::Identity(), Vec3::Constant(0.5)};
  CHECK(cuboid_iou(unit, unit) == 1.0);
  const Cuboid shifted{Vec3(0.5, 0, 0), Mat3::Identity(), Vec3::Constant(0.5)};
  CHECK(std::abs(cuboid_iou(unit, shifted) - 1.0 / 3.0) <= 0.02);
  CHECK(cuboid_iou(unit, shifted) == cuboid_iou(shifted, unit));

  const Cuboid turned{Vec3::Zero(), rot_z(std::numbers::pi / 4), Vec3::Constant(0.5)};
  std::mt19937_64 rng(50);
  CHECK(std::abs(cuboid_iou(unit, turned) - mc_iou(unit, turned, 1000000, rng)) <= 0.02);

  const Cuboid inner{Vec3(0.1, 0, 0), Mat3::Identity(), Vec3(0.2, 0.3, 0.25)};
  CHECK(std::abs(cuboid_iou(unit, inner) - inner.volume() / unit.volume()) <= 0.02);

  const Cuboid far{Vec3(5, 0, 0), Mat3::Identity(), Vec3::Constant(0.5)};
  CHECK(cuboid_iou(unit, far) == 0.0);

  for (int i = 0; i < 10; ++i) {
    const Cuboid a{Vec3::Zero(), random_rotation(rng), Vec3(0.4, 0.7, 0.5)};
    const Cuboid b{Vec3(0.2, 0.1, 0), random_rotation(rng), Vec3(0.6, 0.3, 0.5)};
    CHECK(cuboid_iou(a, b) == cuboid_iou_serial(a, b));
    CHECK(cuboid_iou(a, b) == cuboid_iou(b, a));
  }
  CHECK_THROWS_AS(cuboid_iou(unit, unit, 0), PreconditionError);
}

TEST_CASE("rotation error") {
  std::mt19937_64 rng(51);
  const Mat3 r = random_rotation(rng);
  CHECK(rotation_error_deg(r, r) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(rotation_error_deg(r, r * rot_z(std::numbers::pi / 2)) < 1e-6);
  CHECK(rotation_error_deg(Mat3::Identity(), rot_z(std::numbers::pi / 4)) == doctest::Approx(45.0));
  CHECK(cube_rotation_group().size() == 24);
  for (const Mat3& g : cube_rotation_group()) {
    CHECK(is_rotation(g));
    CHECK(rotation_error_deg(r, r * g) < 1e-6);
  }
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Mat3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    const double ab = rotation_error_deg(a, b);
    CHECK(ab == doctest::Approx(rotation_error_deg(b, a)));
    CHECK(rotation_error_deg(a, c) <= ab + rotation_error_deg(b, c) + 1e-9);
    worst = std::max(worst, ab);
  }
  CHECK(worst <= 62.81);
  CHECK(rotation_angle_deg(rot_x(0.5)) == doctest::Approx(0.5 * 180.0 / std::numbers::pi));
}

TEST_CASE("evaluate_map") {
  Ellipsoid a;
  a.half_axes = Vec3(0.3, 0.2, 0.4);
  a.label = "a";
  Ellipsoid b = a;
  b.center = Vec3(2, 0, 0);
  b.rotation = rot_z(0.4);
  const MapDocument gt = doc_of({{1, a}, {2, b}}, 5);

  const EvalReport same = evaluate_map(gt, gt);
  REQUIRE(same.count() == 2);
  for (const auto& o : same.objects) {
    CHECK(o.iou == 1.0);
    CHECK(o.rot_deg < 1e-6);
  }

  const MapDocument est = doc_of({{1, rotate_about_center(a, Vec3::UnitZ(), 0.2)}}, 5);
  const EvalReport partial = evaluate_map(est, gt);
  CHECK(partial.count() == 1);
  REQUIRE(partial.skipped.size() == 1);
  CHECK(partial.skipped[0].id == 2);
  CHECK(partial.mean_rot_deg == doctest::Approx(0.2 * 180.0 / std::numbers::pi));
  CHECK(partial.mean_iou == partial.objects[0].iou);

  MapDocument sparse = gt;
  sparse.objects[1].observations = 2;
  const EvalReport filtered = evaluate_map(gt, sparse);
  CHECK(filtered.count() == 1);
  CHECK(filtered.skipped.size() == 1);

  CHECK_THROWS_AS(evaluate_map(doc_of({{7, a}}, 5), gt), EvalError);

  const std::string csv = report_to_csv(same, {"config_hash=abc"});
  CHECK(csv.rfind("# config_hash=abc\n", 0) == 0);
  CHECK(csv.find("\n1,") != std::string::npos);
}
