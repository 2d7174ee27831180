#include "objslam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <set>

namespace objslam {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& dir, const RunConfig& cfg, Warnings* warnings) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw DataError(dir + ": not a directory");
  Dataset ds;
  ds.root = dir;
  ds.planes = load_planes_intrinsics((root / "planes.txt").string());
  if (ds.planes.planes.empty()) throw DataError((root / "planes.txt").string() + ": no support plane");
  const auto trajectory = load_trajectory((root / "trajectory.txt").string());
  const auto index = load_frame_index((root / "frames.txt").string());
  ds.scale_table = load_scale_table((root / "scale_table.txt").string(), warnings);

  DetectionFilter filter;
  filter.drop_partial = cfg.data.partial_filter;
  filter.margin = cfg.data.partial_margin;
  filter.image_width = ds.planes.image_width;
  filter.image_height = ds.planes.image_height;
  const auto detections = load_detections((root / "detections.txt").string(), filter, warnings);

  // frame id -> timestamp -> nearest trajectory record.
  for (const auto& [frame, ts] : index) {
    const auto it = std::lower_bound(trajectory.begin(), trajectory.end(), ts,
                                     [](const TrajectoryRecord& r, double t) { return r.timestamp < t; });
    const TrajectoryRecord* best = nullptr;
    double gap = std::numeric_limits<double>::infinity();
    for (auto c = (it == trajectory.begin() ? it : it - 1); c != trajectory.end() && c <= it; ++c) {
      if (std::abs(c->timestamp - ts) < gap) {
        gap = std::abs(c->timestamp - ts);
        best = &*c;
      }
    }
    if (best && gap <= cfg.data.timestamp_tolerance) {
      ds.frame_poses[frame] = best->pose;
      ds.frame_times[frame] = ts;
    }
  }
  int unmatched = 0;
  for (const auto& d : detections) {
    if (ds.frame_poses.count(d.frame_id)) {
      ds.detections.push_back(d);
    } else {
      ++unmatched;
    }
  }
  if (unmatched > 0 && warnings) {
    warnings->push_back(dir + ": dropped " + std::to_string(unmatched) + " detections without a matching pose");
  }
  std::stable_sort(ds.detections.begin(), ds.detections.end(), [](const auto& a, const auto& b) {
    return std::tie(a.object_id, a.frame_id) < std::tie(b.object_id, b.frame_id);
  });

  const fs::path edges = root / "edges";
  if (fs::is_directory(edges)) {
    for (const auto& d : ds.detections) {
      const fs::path f = edges / (std::to_string(d.frame_id) + "_" + std::to_string(d.object_id) + ".pgm");
      if (fs::exists(f)) ds.edge_files[{d.frame_id, d.object_id}] = f.string();
    }
  }
  return ds;
}

std::optional<Plane> select_support_plane(const std::vector<Plane>& planes, const Pose& world_from_camera,
                                          const CameraIntrinsics& intr, const BBox& bbox) {
  const Vec3& c = world_from_camera.translation;
  const Vec3 ray = world_from_camera.rotation * intr.matrix().inverse() * Vec3(bbox.center().x(), bbox.y_max, 1.0);
  std::optional<Plane> best;
  double best_s = std::numeric_limits<double>::infinity();
  for (const Plane& raw : planes) {
    const Plane p = raw.normalized();
    const double h = p.signed_distance(c);
    if (!(h > 0.0)) continue;
    const double denom = p.normal.dot(ray);
    if (!(denom < 0.0)) continue;
    const double s = -h / denom;
    if (s < best_s) {
      best_s = s;
      best = p;
    }
  }
  return best;
}

std::optional<SymmetryObservation> make_symmetry_observation(const GrayImage& raster, const BBox& bbox,
                                                             const SamplingConfig& sampling) {
  const bool binary = std::all_of(raster.pixels.begin(), raster.pixels.end(),
                                  [](double v) { return v == 0.0 || v == 255.0; });
  auto edges = std::make_shared<EdgeMap>();
  try {
    *edges = binary ? edge_map_from_raster(raster, bbox) : build_edge_map(raster, bbox, sampling.edge_threshold);
  } catch (const PreconditionError&) {
    return std::nullopt;
  }
  if (edges->edge_count() == 0) return std::nullopt;
  SymmetryObservation obs;
  obs.field = std::make_shared<DistanceField>(distance_transform_argmin(*edges));
  obs.samples = sample_points(bbox, *edges, sampling.n_uniform, sampling.corner_quality, sampling.max_corners);
  obs.edges = edges;
  if (obs.samples.empty()) return std::nullopt;
  return obs;
}

namespace {

struct Priors {
  ScaleRatioTable table;
  UnknownLabelPolicy policy = UnknownLabelPolicy::Skip;
};

Priors make_priors(const Dataset& ds, const RunConfig& cfg) {
  Priors pr;
  if (!cfg.features.ssc) return pr;
  if (cfg.features.unit_ratio) {
    pr.policy = UnknownLabelPolicy::UnitRatio;
    return pr;
  }
  pr.table = ds.scale_table;
  pr.policy = cfg.features.unknown_label;
  return pr;
}

std::optional<ScaleRatio> prior_for(const Priors& pr, const std::string& label) {
  if (auto r = pr.table.find(label)) return r;
  if (pr.policy == UnknownLabelPolicy::UnitRatio) return ScaleRatio{1.0, 1.0};
  return std::nullopt;
}

/// First observation of the object with an edge raster and a usable
/// symmetry observation.
struct SymmetrySource {
  int frame_id;
  std::shared_ptr<const SymmetryObservation> data;
};

std::optional<SymmetrySource> symmetry_source(const Dataset& ds, const RunConfig& cfg, int object_id) {
  for (const auto& d : ds.detections) {
    if (d.object_id != object_id) continue;
    const auto it = ds.edge_files.find({d.frame_id, object_id});
    if (it == ds.edge_files.end()) continue;
    auto obs = make_symmetry_observation(read_pgm(it->second), d.bbox, cfg.sampling);
    if (!obs) return std::nullopt;
    return SymmetrySource{d.frame_id, std::make_shared<const SymmetryObservation>(std::move(*obs))};
  }
  return std::nullopt;
}

MapDocument to_document(const Dataset& ds, const std::vector<ObjectEstimate>& objects,
                        const std::map<int, Pose>& poses, const RunConfig& cfg) {
  MapDocument doc;
  for (const auto& o : objects) doc.objects.push_back({o.id, o.ellipsoid, o.observations});
  for (const auto& [frame, pose] : poses) doc.trajectory.push_back({ds.frame_times.at(frame), pose});
  doc.metadata["config_hash"] = config_hash(cfg);
  doc.metadata["seed"] = std::to_string(cfg.seed);
  return doc;
}

}  // namespace

PipelineResult run_init(const Dataset& ds, const RunConfig& cfg) {
  PipelineResult out;
  const Priors priors = make_priors(ds, cfg);
  InitOptions init_opts;
  init_opts.unknown_label = priors.policy;
  init_opts.yaw_seeds = cfg.features.init_yaw_seeds;
  init_opts.use_support = cfg.features.support;
  const auto intr = ds.planes.intrinsics;

  std::map<int, int> counts;
  for (const auto& d : ds.detections) ++counts[d.object_id];

  std::set<int> done;
  std::map<int, std::vector<InitCandidate>> candidates;
  for (const auto& d : ds.detections) {
    if (done.count(d.object_id)) continue;
    const Pose& pose = ds.frame_poses.at(d.frame_id);
    const auto plane = select_support_plane(ds.planes.planes, pose, intr, d.bbox);
    if (!plane) continue;
    try {
      const InitResult r = init_single_frame(d.bbox, *plane, d.label, priors.table, compose_projection(pose, intr),
                                             cfg.noise, cfg.lm, init_opts);
      ObjectEstimate est;
      est.id = d.object_id;
      est.ellipsoid = r.ellipsoid;
      est.init_frame = d.frame_id;
      est.observations = counts[d.object_id];
      est.plane = *plane;
      est.init_cost = r.report.final_cost;
      out.objects.push_back(est);
      for (const auto& c : r.candidates) {
        if (c.cost <= cfg.features.candidate_cost_ratio * r.report.final_cost + 1e-12) candidates[est.id].push_back(c);
      }
      done.insert(d.object_id);
    } catch (const PreconditionError&) {
    } catch (const SolverError&) {
    }
  }
  for (const auto& [id, n] : counts) {
    if (!done.count(id)) out.failed.push_back(id);
  }

  if (cfg.features.symmetry && cfg.features.refine) {
    RefineOptions ropts;
    ropts.symmetry = cfg.symmetry;
    ropts.scan_range_deg = cfg.features.refine_scan_deg;
    ropts.scan_step_deg = cfg.features.refine_scan_step_deg;
    ropts.full_dof = cfg.features.full_dof_refine;
    for (auto& est : out.objects) {
      const auto src = symmetry_source(ds, cfg, est.id);
      if (!src) continue;
      const auto p = compose_projection(ds.frame_poses.at(src->frame_id), intr);
      // Near-equal init solutions are told apart by the symmetry cost.
      // Only solutions seen close to their symmetry plane are refined; from
      // the side one half is hidden and the cost has spurious minima.
      std::vector<Ellipsoid> starts;
      auto consider = [&](const Ellipsoid& e) {
        if (symmetry_view_angle_deg(e, p) <= cfg.features.symmetry_max_view_deg) starts.push_back(e);
      };
      consider(est.ellipsoid);
      for (const auto& c : candidates[est.id]) {
        if (c.ellipsoid.rotation != est.ellipsoid.rotation) consider(c.ellipsoid);
      }
      double best = std::numeric_limits<double>::infinity();
      for (const auto& start : starts) {
        const RefineResult r =
            refine_orientation(start, src->data->samples, *src->data->field, p, est.plane, cfg.noise, cfg.lm, ropts);
        if (r.refined && r.final_cost < best) {
          best = r.final_cost;
          est.ellipsoid = r.ellipsoid;
          est.refined = true;
        }
      }
    }
  }

  std::map<int, Pose> poses;
  for (const auto& d : ds.detections) poses[d.frame_id] = ds.frame_poses.at(d.frame_id);
  out.map = to_document(ds, out.objects, poses, cfg);
  return out;
}

FactorGraph build_factor_graph(const Dataset& ds, const RunConfig& cfg, const std::vector<ObjectEstimate>& objects) {
  FactorGraph g;
  g.intrinsics = ds.planes.intrinsics;
  g.symmetry_options = cfg.symmetry;
  for (const auto& o : objects) g.objects[o.id] = o.ellipsoid;
  for (const auto& d : ds.detections) {
    if (!g.objects.count(d.object_id)) continue;
    g.poses[d.frame_id] = ds.frame_poses.at(d.frame_id);
    g.observations.push_back({d.frame_id, d.object_id, d.bbox});
  }
  for (auto it = g.poses.begin(); it != g.poses.end() && std::next(it) != g.poses.end(); ++it) {
    const auto next = std::next(it);
    g.odometry.push_back({it->first, next->first, it->second.inverse() * next->second});
  }
  const Priors priors = make_priors(ds, cfg);
  for (const auto& o : objects) {
    if (cfg.features.support) g.supports.push_back({o.id, o.plane});
    if (const auto r = prior_for(priors, o.ellipsoid.label)) g.scales.push_back({o.id, *r});
  }
  if (cfg.features.symmetry) {
    for (const auto& o : objects) {
      const auto src = symmetry_source(ds, cfg, o.id);
      if (!src) continue;
      const auto p = compose_projection(ds.frame_poses.at(src->frame_id), ds.planes.intrinsics);
      if (symmetry_view_angle_deg(o.ellipsoid, p) <= cfg.features.symmetry_max_view_deg) {
        g.symmetries.push_back({o.id, src->frame_id, src->data});
      }
    }
  }
  return g;
}

PipelineResult run_slam(const Dataset& ds, const RunConfig& cfg) {
  PipelineResult out = run_init(ds, cfg);
  if (!cfg.features.optimize || out.objects.empty()) return out;
  const FactorGraph g = build_factor_graph(ds, cfg, out.objects);
  LMConfig lm = cfg.lm;
  lm.max_iterations = cfg.map_max_iterations;
  const MapSolveResult solved = optimize_map(g, cfg.noise, lm);
  for (auto& o : out.objects) {
    const Ellipsoid& e = solved.graph.objects.at(o.id);
    o.ellipsoid.center = e.center;
    o.ellipsoid.rotation = e.rotation;
    o.ellipsoid.half_axes = e.half_axes;
  }
  out.map = to_document(ds, out.objects, solved.graph.poses, cfg);
  out.map_report = solved.report;
  return out;
}

std::vector<SweepRow> sweep_yaw(const Dataset& ds, const RunConfig& cfg, int object_id, const Ellipsoid& reference,
                                double range_deg, double step_deg) {
  if (!(step_deg > 0.0) || range_deg < 0.0) throw PreconditionError("invalid sweep range");
  const auto src = symmetry_source(ds, cfg, object_id);
  if (!src) throw DataError("object " + std::to_string(object_id) + " has no usable edge raster");
  const auto p = compose_projection(ds.frame_poses.at(src->frame_id), ds.planes.intrinsics);
  SymmetryOptions opts = cfg.symmetry;
  opts.sigma_sym = cfg.noise.sigma_sym;
  const Vec3 axis = reference.rotation.col(2);
  const int n = static_cast<int>(std::floor(2.0 * range_deg / step_deg + 1e-9));
  std::vector<SweepRow> rows(static_cast<std::size_t>(n) + 1);
  const auto nan = std::numeric_limits<double>::quiet_NaN();
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i <= n; ++i) {
    const double yaw = -range_deg + step_deg * i;
    const Ellipsoid e = rotate_about_center(reference, axis, yaw * std::numbers::pi / 180.0);
    const auto& obs = *src->data;
    auto cost = [&](Descriptor d) {
      return descriptor_cost(d, e, obs.samples, *obs.edges, *obs.field, p, opts).value_or(nan);
    };
    rows[static_cast<std::size_t>(i)] = {yaw, cost(Descriptor::Gray), cost(Descriptor::DistanceTransform2D),
                                         cost(Descriptor::ImprovedDT)};
  }
  return rows;
}

}  // namespace objslam
