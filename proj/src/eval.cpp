#include "objslam/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>

namespace objslam {

namespace {

struct Grid {
  Vec3 lo;
  Vec3 step;
};

Grid union_grid(const Cuboid& a, const Cuboid& b, int resolution) {
  Vec3 lo = Vec3::Constant(INFINITY);
  Vec3 hi = Vec3::Constant(-INFINITY);
  for (const Cuboid* c : {&a, &b}) {
    for (const Vec3& v : c->corners()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  return {lo, (hi - lo) / resolution};
}

Vec3 cell_centre(const Grid& g, int i, int j, int k) {
  return g.lo + g.step.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
}

void check_resolution(int resolution) {
  if (resolution < 1) throw PreconditionError("IoU resolution must be positive");
}

}  // namespace

double cuboid_iou_serial(const Cuboid& a, const Cuboid& b, int resolution) {
  check_resolution(resolution);
  const Grid g = union_grid(a, b, resolution);
  long long both = 0;
  long long either = 0;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      for (int k = 0; k < resolution; ++k) {
        const Vec3 v = cell_centre(g, i, j, k);
        const bool in_a = a.contains(v);
        const bool in_b = b.contains(v);
        both += in_a && in_b;
        either += in_a || in_b;
      }
    }
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

double cuboid_iou(const Cuboid& a, const Cuboid& b, int resolution) {
  check_resolution(resolution);
  const Grid g = union_grid(a, b, resolution);
  long long both = 0;
  long long either = 0;
#pragma omp parallel for collapse(2) reduction(+ : both, either) schedule(static)
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      for (int k = 0; k < resolution; ++k) {
        const Vec3 v = cell_centre(g, i, j, k);
        const bool in_a = a.contains(v);
        const bool in_b = b.contains(v);
        both += in_a && in_b;
        either += in_a || in_b;
      }
    }
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

const std::array<Mat3, 24>& cube_rotation_group() {
  static const std::array<Mat3, 24> group = [] {
    std::array<Mat3, 24> out;
    std::array<int, 3> perm{0, 1, 2};
    std::size_t n = 0;
    do {
      for (int s = 0; s < 8; ++s) {
        Mat3 m = Mat3::Zero();
        for (int r = 0; r < 3; ++r) m(r, perm[r]) = (s >> r) & 1 ? -1.0 : 1.0;
        if (m.determinant() > 0.0) out[n++] = m;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }();
  return group;
}

double rotation_angle_deg(const Mat3& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double rotation_error_deg(const Mat3& r_est, const Mat3& r_gt) {
  const Mat3 rel = r_est.transpose() * r_gt;
  double best = INFINITY;
  for (const Mat3& g : cube_rotation_group()) best = std::min(best, rotation_angle_deg(rel * g));
  return best;
}

EvalReport evaluate_map(const MapDocument& est, const MapDocument& gt, const EvalOptions& opts) {
  std::map<int, const MapObject*> est_by_id;
  for (const auto& o : est.objects) est_by_id[o.id] = &o;

  EvalReport report;
  std::vector<std::pair<const MapObject*, const MapObject*>> matched;
  for (const auto& g : gt.objects) {
    const auto it = est_by_id.find(g.id);
    if (it == est_by_id.end()) {
      report.skipped.push_back({g.id, "missing from estimate"});
      continue;
    }
    const int obs = g.observations >= 0 ? g.observations : it->second->observations;
    if (obs >= 0 && obs < opts.min_observations) {
      report.skipped.push_back({g.id, "only " + std::to_string(obs) + " observations"});
      continue;
    }
    matched.emplace_back(it->second, &g);
  }
  if (matched.empty()) throw EvalError("no matched objects");

  report.objects.resize(matched.size());
  for (std::size_t i = 0; i < matched.size(); ++i) {
    const Ellipsoid& e = matched[i].first->ellipsoid;
    const Ellipsoid& t = matched[i].second->ellipsoid;
    report.objects[i] = {matched[i].second->id, t.label,
                         cuboid_iou(circumscribed_cuboid(e), circumscribed_cuboid(t), opts.resolution),
                         rotation_error_deg(e.rotation, t.rotation)};
  }
  double iou = 0.0;
  double rot = 0.0;
  for (const auto& m : report.objects) {
    iou += m.iou;
    rot += m.rot_deg;
  }
  report.mean_iou = iou / static_cast<double>(report.objects.size());
  report.mean_rot_deg = rot / static_cast<double>(report.objects.size());
  return report;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string report_to_csv(const EvalReport& report, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  for (const auto& s : report.skipped) out += "# skipped " + std::to_string(s.id) + ": " + s.reason + "\n";
  out += "object_id,label,iou,rot_deg\n";
  for (const auto& m : report.objects) {
    out += std::to_string(m.id) + "," + m.label + "," + num(m.iou) + "," + num(m.rot_deg) + "\n";
  }
  out += "mean,," + num(report.mean_iou) + "," + num(report.mean_rot_deg) + "\n";
  return out;
}

}  // namespace objslam
