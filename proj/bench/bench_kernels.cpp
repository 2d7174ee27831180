// Parallel kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include <omp.h>

#include "CLI11.hpp"
#include "objslam/eval.hpp"
#include "objslam/factors.hpp"
#include "objslam/symmetry.hpp"
#include "objslam/synth.hpp"

using namespace objslam;

namespace {

/// Best of `reps` wall-clock runs in milliseconds.
double best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-26s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel, same ? "equal" : "DIFFERENT");
}

FactorGraph scene_graph(int frames) {
  SceneConfig cfg;
  cfg.frames = frames;
  cfg.num_objects = 8;
  cfg.placement_radius = 2.5;
  cfg.render_edges = false;
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
    g.odometry.push_back({s.frame_ids[i - 1], s.frame_ids[i], g.poses[s.frame_ids[i - 1]].inverse() * g.poses[s.frame_ids[i]]});
  }
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark of the parallel kernels against serial references"};
  int reps = 5;
  int size = 512;
  int resolution = 128;
  int frames = 200;
  app.add_option("--reps", reps, "Repetitions per kernel (best is reported)")->check(CLI::PositiveNumber);
  app.add_option("--size", size, "Edge map side in pixels")->check(CLI::Range(16, 8192));
  app.add_option("--resolution", resolution, "IoU grid resolution")->check(CLI::Range(32, 1024));
  app.add_option("--frames", frames, "Frames in the factor graph")->check(CLI::Range(3, 100000));
  CLI11_PARSE(app, argc, argv);

  const int threads = omp_get_max_threads();
  std::printf("threads %d, best of %d\n", threads, reps);
  std::printf("%-26s %10s %10s %9s\n", "kernel", "serial ms", "parallel ms", "speedup");

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EdgeMap em(0, 0, size, size);
  for (auto& m : em.mask) m = unit(rng) < 0.01 ? 1 : 0;
  em.set_edge(0, 0);
  DistanceField serial_dt, parallel_dt;
  omp_set_num_threads(1);
  const double dt1 = best_ms(reps, [&] { serial_dt = distance_transform_argmin(em); });
  omp_set_num_threads(threads);
  const double dtn = best_ms(reps, [&] { parallel_dt = distance_transform_argmin(em); });
  row("distance transform", dt1, dtn, serial_dt.distance == parallel_dt.distance && serial_dt.nearest == parallel_dt.nearest);

  const Cuboid a{Vec3::Zero(), rot_z(0.3), Vec3(0.5, 0.4, 0.6)};
  const Cuboid b{Vec3(0.2, 0.1, 0.0), rot_z(-0.2) * rot_x(0.1), Vec3(0.6, 0.3, 0.5)};
  double iou_s = 0.0, iou_p = 0.0;
  const double is = best_ms(reps, [&] { iou_s = cuboid_iou_serial(a, b, resolution); });
  const double ip = best_ms(reps, [&] { iou_p = cuboid_iou(a, b, resolution); });
  row("cuboid iou", is, ip, iou_s == iou_p);

  FactorGraph g = scene_graph(frames);
  for (auto& [id, e] : g.objects) e.half_axes *= 1.05;
  const NoiseModel noise;
  double cs = 0.0, cp = 0.0;
  const double gs = best_ms(reps, [&] { cs = graph_total_cost_serial(g, noise); });
  const double gp = best_ms(reps, [&] { cp = graph_total_cost(g, noise); });
  row("graph total cost", gs, gp, cs == cp);
  std::printf("graph: %zu factors\n", g.factor_count());
  return 0;
}
