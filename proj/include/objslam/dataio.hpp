#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "objslam/factors.hpp"
#include "objslam/geometry.hpp"
#include "objslam/symmetry.hpp"

namespace objslam {

/// Malformed or inconsistent input file. The message names the file and,
/// where it applies, the offending line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-fatal loader diagnostics (documented repairs such as last-wins
/// duplicates or dropped partial detections) are appended here when given.
using Warnings = std::vector<std::string>;

struct TrajectoryRecord {
  double timestamp = 0.0;
  Pose pose;  // world <- camera
};

/// TUM format `timestamp tx ty tz qx qy qz qw`. Quaternions are normalized;
/// a norm further than 1e-3 from 1 is rejected. Timestamps must increase.
std::vector<TrajectoryRecord> load_trajectory(const std::string& path);
void save_trajectory(const std::string& path, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> parse_trajectory(const std::string& text, const std::string& source = "<string>");
std::string format_tum_line(const TrajectoryRecord& record);

struct DetectionRecord {
  int frame_id = 0;
  int object_id = 0;
  std::string label;
  BBox bbox;
  double score = 1.0;
};

struct DetectionFilter {
  /// Drop boxes closer than `margin` pixels to the image border. Needs the
  /// image size; skipped with a warning when it is unknown.
  bool drop_partial = true;
  double margin = 30.0;
  int image_width = 0;
  int image_height = 0;
};

/// `frame_id object_id label x_min y_min x_max y_max score` per line.
std::vector<DetectionRecord> load_detections(const std::string& path, const DetectionFilter& filter = {},
                                             Warnings* warnings = nullptr);
void save_detections(const std::string& path, const std::vector<DetectionRecord>& records);

/// `frame_id timestamp` per line.
std::map<int, double> load_frame_index(const std::string& path);
void save_frame_index(const std::string& path, const std::map<int, double>& index);

/// `label sigma beta` per line; duplicate labels keep the last entry.
ScaleRatioTable load_scale_table(const std::string& path, Warnings* warnings = nullptr);
void save_scale_table(const std::string& path, const ScaleRatioTable& table);

struct PlanesIntrinsics {
  std::vector<Plane> planes;  // world frame, |n| = 1
  CameraIntrinsics intrinsics;
  int image_width = 0;  // 0 when not given
  int image_height = 0;
};

/// First data line `fx fy cx cy [width height]`, then one `nx ny nz d` plane
/// per line.
PlanesIntrinsics load_planes_intrinsics(const std::string& path);
void save_planes_intrinsics(const std::string& path, const PlanesIntrinsics& data);

/// World plane expressed in the camera frame: pi_cam = T^T pi_world with
/// T the world <- camera matrix.
Plane transform_plane_to_frame(const Plane& world_plane, const Pose& world_from_camera);

struct MapObject {
  int id = 0;
  Ellipsoid ellipsoid;
  /// Number of detections behind the estimate; -1 when unknown.
  int observations = -1;
};

struct MapDocument {
  std::vector<MapObject> objects;
  std::vector<TrajectoryRecord> trajectory;
  std::map<std::string, std::string> metadata;
};

void save_map(const MapDocument& doc, const std::string& path);
MapDocument load_map(const std::string& path);
std::string map_to_json(const MapDocument& doc);
MapDocument map_from_json(const std::string& text, const std::string& source = "<string>");

/// ASCII PLY with one UV sphere per object (subdivisions x subdivisions quads)
/// and one axis tripod per trajectory pose. `comment` lines go in the header.
void export_ply(const MapDocument& doc, const std::string& path, int subdivisions,
                const std::vector<std::string>& comments = {});

/// Binary 8-bit PGM (P5).
GrayImage read_pgm(const std::string& path);
/// Values are rounded and clamped to [0, 255].
void write_pgm(const std::string& path, const GrayImage& image);

}  // namespace objslam
