// objslam command-line driver: synth, init, slam, eval, sweep-yaw, export.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "objslam/config.hpp"
#include "objslam/dataio.hpp"
#include "objslam/eval.hpp"
#include "objslam/pipeline.hpp"
#include "objslam/synth.hpp"
#include "objslam/version.hpp"

namespace fs = std::filesystem;
using namespace objslam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void print_warnings(const Warnings& w) {
  for (const auto& msg : w) std::cerr << "warning: " << msg << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open file for writing");
  out << text;
}

void write_manifest(const std::string& path, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j = {{"command", command},     {"config_hash", config_hash(cfg)}, {"seed", cfg.seed},
                      {"version", kVersion},    {"outputs", outputs}};
  write_text(path, j.dump(2) + "\n");
}

/// Prepends `# config_hash=...` to every text file of a synthetic dataset.
void stamp_text_files(const std::string& dir, const std::string& hash) {
  for (const char* name : {"trajectory.txt", "frames.txt", "detections.txt", "planes.txt", "scale_table.txt"}) {
    const fs::path p = fs::path(dir) / name;
    std::ifstream in(p, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    in.close();
    write_text(p.string(), "# config_hash=" + hash + "\n" + body.str());
  }
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = config_from(config_path);
  const Scene scene = generate_scene(cfg.synth);
  const std::string hash = config_hash(cfg);
  export_dataset(scene, out_dir, {{"config_hash", hash}, {"seed", std::to_string(cfg.seed)}});
  stamp_text_files(out_dir, hash);
  write_manifest((fs::path(out_dir) / "manifest.json").string(), "synth", cfg,
                 {"trajectory.txt", "frames.txt", "detections.txt", "planes.txt", "scale_table.txt", "gt.json",
                  "edges/"});
  std::cerr << "synth: " << scene.objects.size() << " objects, " << scene.frame_ids.size() << " frames, "
            << scene.detections.size() << " detections -> " << out_dir << '\n';
  return kExitOk;
}

int cmd_map(const std::string& command, const std::string& data, const std::string& config_path,
            const std::string& out) {
  const RunConfig cfg = config_from(config_path);
  Warnings warnings;
  const Dataset ds = load_dataset(data, cfg, &warnings);
  print_warnings(warnings);
  const PipelineResult res = command == "init" ? run_init(ds, cfg) : run_slam(ds, cfg);
  for (int id : res.failed) std::cerr << "warning: object " << id << " could not be initialized\n";
  if (res.objects.empty() && !ds.detections.empty()) throw SolverFailure("no object could be initialized");
  save_map(res.map, out);
  write_manifest(out + ".manifest.json", command, cfg, {out});
  std::cerr << command << ": " << res.objects.size() << " objects";
  if (res.map_report) {
    std::cerr << ", map cost " << res.map_report->initial_cost << " -> " << res.map_report->final_cost << " ("
              << res.map_report->status << ")";
  }
  std::cerr << " -> " << out << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& config_path,
             const std::string& out) {
  const RunConfig cfg = config_from(config_path);
  const MapDocument est = load_map(est_path);
  const MapDocument gt = load_map(gt_path);
  const EvalReport report = evaluate_map(est, gt, cfg.eval);
  std::vector<std::string> comments{"config_hash=" + config_hash(cfg)};
  if (const auto it = est.metadata.find("config_hash"); it != est.metadata.end()) {
    comments.push_back("estimate_config_hash=" + it->second);
  }
  write_text(out, report_to_csv(report, comments));
  write_manifest(out + ".manifest.json", "eval", cfg, {out});
  std::cerr << "eval: " << report.count() << " objects, mean IoU " << report.mean_iou << ", mean Rot "
            << report.mean_rot_deg << " deg -> " << out << '\n';
  return kExitOk;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

int cmd_sweep(const std::string& data, const std::string& config_path, int object_id, double range, double step,
              const std::string& out) {
  const RunConfig cfg = config_from(config_path);
  Warnings warnings;
  const Dataset ds = load_dataset(data, cfg, &warnings);
  print_warnings(warnings);

  // Ground truth when the dataset has it, else the single-frame estimate.
  std::optional<Ellipsoid> reference;
  const fs::path gt_path = fs::path(data) / "gt.json";
  if (fs::exists(gt_path)) {
    for (const auto& o : load_map(gt_path.string()).objects) {
      if (o.id == object_id) reference = o.ellipsoid;
    }
  }
  if (!reference) {
    RunConfig no_refine = cfg;
    no_refine.features.refine = false;
    for (const auto& o : run_init(ds, no_refine).objects) {
      if (o.id == object_id) reference = o.ellipsoid;
    }
  }
  if (!reference) throw DataError("object " + std::to_string(object_id) + " not found");

  const auto rows = sweep_yaw(ds, cfg, object_id, *reference, range, step);
  std::string text = "# config_hash=" + config_hash(cfg) + "\nyaw_deg,cost_gray,cost_2dt,cost_3dt\n";
  for (const auto& r : rows) {
    text += csv_number(r.yaw_deg) + "," + csv_number(r.cost_gray) + "," + csv_number(r.cost_2dt) + "," +
            csv_number(r.cost_3dt) + "\n";
  }
  write_text(out, text);
  write_manifest(out + ".manifest.json", "sweep-yaw", cfg, {out});
  return kExitOk;
}

int cmd_export(const std::string& map_path, const std::string& config_path, int subdivisions,
               const std::string& out) {
  const RunConfig cfg = config_from(config_path);
  const MapDocument doc = load_map(map_path);
  std::vector<std::string> comments{"config_hash=" + config_hash(cfg)};
  if (const auto it = doc.metadata.find("config_hash"); it != doc.metadata.end()) {
    comments.push_back("map_config_hash=" + it->second);
  }
  export_ply(doc, out, subdivisions, comments);
  write_manifest(out + ".manifest.json", "export", cfg, {out});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-level monocular mapping with ellipsoid landmarks"};
  app.require_subcommand(0, 1);
  std::string print_config_path;
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");
  app.add_option("--config", print_config_path, "Config file used with --print-config");
  app.set_version_flag("--version", std::string(kVersion));

  std::string config, out, data, est, gt, map_path;
  int object_id = 0;
  int subdivisions = 16;
  double range = 90.0;
  double step = 1.0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene and write a dataset directory");
  synth->add_option("--config", config, "Config file");
  synth->add_option("--out", out, "Output directory")->required();

  auto* init = app.add_subcommand("init", "Single-frame initialization of every object");
  auto* slam = app.add_subcommand("slam", "Initialization, refinement and joint map optimization");
  for (auto* sub : {init, slam}) {
    sub->add_option("--data", data, "Dataset directory")->required();
    sub->add_option("--config", config, "Config file");
    sub->add_option("--out", out, "Output map JSON")->required();
  }

  auto* eval = app.add_subcommand("eval", "IoU and Rot(deg) of an estimated map against ground truth");
  eval->add_option("--est", est, "Estimated map JSON")->required();
  eval->add_option("--gt", gt, "Ground-truth map JSON")->required();
  eval->add_option("--config", config, "Config file");
  eval->add_option("--out", out, "Output CSV")->required();

  auto* sweep = app.add_subcommand("sweep-yaw", "Symmetry cost against yaw for each descriptor");
  sweep->add_option("--data", data, "Dataset directory")->required();
  sweep->add_option("--object", object_id, "Object id")->required();
  sweep->add_option("--config", config, "Config file");
  sweep->add_option("--range", range, "Half range in degrees")->check(CLI::PositiveNumber);
  sweep->add_option("--step", step, "Step in degrees")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "Output CSV")->required();

  auto* exp = app.add_subcommand("export", "Write a PLY visualization of a map");
  exp->add_option("--map", map_path, "Map JSON")->required();
  exp->add_option("--config", config, "Config file");
  exp->add_option("--subdivisions", subdivisions, "Sphere subdivisions")->check(CLI::Range(2, 512));
  exp->add_option("--out", out, "Output PLY")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (print_config) {
      std::cout << dump_config(config_from(print_config_path));
      return kExitOk;
    }
    if (*synth) return cmd_synth(config, out);
    if (*init) return cmd_map("init", data, config, out);
    if (*slam) return cmd_map("slam", data, config, out);
    if (*eval) return cmd_eval(est, gt, config, out);
    if (*sweep) return cmd_sweep(data, config, object_id, range, step, out);
    if (*exp) return cmd_export(map_path, config, subdivisions, out);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
