#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace objslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Raised when an input violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool is_rotation(const Mat3& r, double tol = 1e-9);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// R = Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 rotation_from_ypr(const Vec3& ypr);
Vec3 ypr_from_rotation(const Mat3& r);

Mat3 so3_exp(const Vec3& omega);
Vec3 so3_log(const Mat3& r);

/// Rigid transform. Which frames it maps between is stated at each use site.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Vec3 operator*(const Vec3& point) const;
  Mat4 matrix() const;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
  bool valid() const { return fx > 0.0 && fy > 0.0; }
};

/// 3x4 camera matrix mapping homogeneous world points to homogeneous pixels.
/// Caches the camera centre and the inverse of the left 3x3 block.
class ProjectionMatrix {
 public:
  ProjectionMatrix() : ProjectionMatrix(Mat34::Identity()) {}
  explicit ProjectionMatrix(const Mat34& p);

  const Mat34& matrix() const { return p_; }
  const Vec3& center() const { return center_; }

  /// Pixel of a world point. Undefined for points on the principal plane.
  Vec2 project(const Vec3& v) const;
  /// Signed depth, positive in front of the camera.
  double depth(const Vec3& v) const;
  /// Direction of the viewing ray through pixel u; points C + s*d with s > 0
  /// lie in front of the camera and project onto u.
  Vec3 ray_direction(const Vec2& u) const;

 private:
  Mat34 p_;
  Mat3 m_inv_;
  Vec3 center_;
  double sign_ = 1.0;
};

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool contains(const Vec2& u) const {
    return u.x() >= x_min && u.x() <= x_max && u.y() >= y_min && u.y() <= y_max;
  }
};

/// Homogeneous plane n.x + d = 0.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  Plane() = default;
  Plane(const Vec3& n, double d) : normal(n), offset(d) {}
  static Plane from_homogeneous(const Vec4& pi) { return {pi.head<3>(), pi(3)}; }

  Vec4 homogeneous() const { return {normal.x(), normal.y(), normal.z(), offset}; }
  /// Scaled so that |n| = 1. Throws PreconditionError for a zero normal.
  Plane normalized() const;
  double signed_distance(const Vec3& v) const { return normal.dot(v) + offset; }
};

enum class Axis { X = 0, Y = 1, Z = 2 };

/// Object landmark. `rotation` maps object-frame directions into the world.
struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 half_axes = Vec3::Ones();
  std::string label;
  bool symmetry_axis_fixed = false;

  bool valid() const;
  /// World point -> object frame scaled so the surface is the unit sphere.
  Vec3 to_unit(const Vec3& v) const;
};

enum class QuadricKind { Primal, Dual };

struct QuadricMatrix {
  Mat4 matrix = Mat4::Identity();
  QuadricKind kind = QuadricKind::Dual;

  /// v^T Q v for the primal form (v homogeneous with w = 1).
  double evaluate(const Vec3& v) const;
};

struct Cuboid {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 half_extents = Vec3::Ones();

  std::array<Vec3, 8> corners() const;
  bool contains(const Vec3& p) const;
  double volume() const { return 8.0 * half_extents.prod(); }
};

/// P = K [R^T | -R^T t] for a world<-camera pose.
ProjectionMatrix compose_projection(const Pose& world_from_camera, const CameraIntrinsics& intr);

/// Q* = Z diag(a^2, b^2, c^2, -1) Z^T with Z = [R t; 0 1]. Q*(3,3) == -1.
QuadricMatrix ellipsoid_to_dual(const Ellipsoid& e);
/// Q = Z^-T diag(1/a^2, 1/b^2, 1/c^2, -1) Z^-1, the exact inverse of the dual.
QuadricMatrix ellipsoid_to_primal(const Ellipsoid& e);

/// Planes through the camera centre and each bbox edge, in the fixed order
/// x_min, x_max, y_min, y_max, each normalized to |n| = 1.
std::array<Plane, 4> backproject_bbox_planes(const ProjectionMatrix& p, const BBox& b);

/// pi^T Q* pi; zero iff the plane is tangent to the ellipsoid.
double plane_tangency_residual(const Plane& plane, const QuadricMatrix& dual);

Vec3 object_axis(const Ellipsoid& e, Axis axis);

/// Mirror of v across the object's XZ plane.
Vec3 reflect_point(const Vec3& v, const Ellipsoid& e);

/// First visible intersection of the viewing ray through u with the surface.
std::optional<Vec3> raycast_ellipsoid(const Vec2& u, const ProjectionMatrix& p, const Ellipsoid& e);

/// Intersection of the viewing ray through u with the tangent plane Q v0.
/// nullopt when the ray is parallel to that plane.
std::optional<Vec3> raycast_tangent_plane(const Vec2& u, const ProjectionMatrix& p,
                                          const Ellipsoid& e, const Vec3& v0);

/// Angle in degrees between the object's x axis and the direction to the
/// camera, both projected onto the object's xy plane and folded into
/// [0, 90]. 0 means the camera lies in the symmetry plane.
double symmetry_view_angle_deg(const Ellipsoid& e, const ProjectionMatrix& p);

/// project(reflect(raycast(u))).
std::optional<Vec2> symmetric_pixel(const Vec2& u, const ProjectionMatrix& p, const Ellipsoid& e);

Cuboid circumscribed_cuboid(const Ellipsoid& e);

/// Axis-aligned bbox of the projected outline (dual conic C* = P Q* P^T).
/// nullopt when any circumscribed-cuboid corner is not in front of the camera.
std::optional<BBox> project_dual_conic_bbox(const Ellipsoid& e, const ProjectionMatrix& p);

/// Rotates the ellipsoid about its own centre by `angle` around unit `axis`.
Ellipsoid rotate_about_center(const Ellipsoid& e, const Vec3& axis, double angle);

/// True when v lies on the camera-facing side of the surface.
bool is_front_facing(const Vec3& v, const ProjectionMatrix& p, const Ellipsoid& e);

}  // namespace objslam
