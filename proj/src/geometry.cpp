#include "objslam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace objslam {

bool is_rotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 rot_x(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}
Mat3 rot_y(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
}
Mat3 rot_z(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rotation_from_ypr(const Vec3& ypr) {
  return rot_z(ypr(0)) * rot_y(ypr(1)) * rot_x(ypr(2));
}

Vec3 ypr_from_rotation(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {yaw, pitch, roll};
}

Mat3 so3_exp(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-14) {
    Mat3 w;
    w << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    return Mat3::Identity() + w;
  }
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -rt * translation};
}

Pose Pose::operator*(const Pose& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

Vec3 Pose::operator*(const Vec3& point) const { return rotation * point + translation; }

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

ProjectionMatrix::ProjectionMatrix(const Mat34& p) : p_(p) {
  const Mat3 m = p_.leftCols<3>();
  const double det = m.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) {
    throw PreconditionError("projection matrix: left 3x3 block is singular");
  }
  m_inv_ = m.inverse();
  center_ = -m_inv_ * p_.col(3);
  sign_ = det > 0.0 ? 1.0 : -1.0;
}

Vec2 ProjectionMatrix::project(const Vec3& v) const {
  const Vec3 h = p_ * v.homogeneous();
  return h.hnormalized();
}

double ProjectionMatrix::depth(const Vec3& v) const {
  return sign_ * (p_.row(2) * v.homogeneous())(0);
}

Vec3 ProjectionMatrix::ray_direction(const Vec2& u) const {
  return sign_ * (m_inv_ * u.homogeneous());
}

Plane Plane::normalized() const {
  const double n = normal.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw PreconditionError("plane has a zero normal");
  }
  return {normal / n, offset / n};
}

bool Ellipsoid::valid() const {
  return (half_axes.array() > 0.0).all() && half_axes.allFinite() && center.allFinite() &&
         is_rotation(rotation);
}

Vec3 Ellipsoid::to_unit(const Vec3& v) const {
  return (rotation.transpose() * (v - center)).cwiseQuotient(half_axes);
}

double QuadricMatrix::evaluate(const Vec3& v) const {
  const Vec4 h = v.homogeneous();
  return h.dot(matrix * h);
}

std::array<Vec3, 8> Cuboid::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 sign((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = center + rotation * sign.cwiseProduct(half_extents);
  }
  return out;
}

bool Cuboid::contains(const Vec3& p) const {
  const Vec3 local = rotation.transpose() * (p - center);
  return (local.cwiseAbs().array() <= half_extents.array()).all();
}

ProjectionMatrix compose_projection(const Pose& world_from_camera, const CameraIntrinsics& intr) {
  const Pose camera_from_world = world_from_camera.inverse();
  Mat34 rt;
  rt.leftCols<3>() = camera_from_world.rotation;
  rt.col(3) = camera_from_world.translation;
  return ProjectionMatrix(intr.matrix() * rt);
}

namespace {

Mat4 homogeneous_frame(const Ellipsoid& e) {
  Mat4 z = Mat4::Identity();
  z.topLeftCorner<3, 3>() = e.rotation;
  z.topRightCorner<3, 1>() = e.center;
  return z;
}

}  // namespace

QuadricMatrix ellipsoid_to_dual(const Ellipsoid& e) {
  const Mat4 z = homogeneous_frame(e);
  Vec4 diag;
  diag << e.half_axes.cwiseAbs2(), -1.0;
  Mat4 q = z * diag.asDiagonal() * z.transpose();
  q = 0.5 * (q + q.transpose());
  return {q, QuadricKind::Dual};
}

QuadricMatrix ellipsoid_to_primal(const Ellipsoid& e) {
  Mat4 z_inv = Mat4::Identity();
  z_inv.topLeftCorner<3, 3>() = e.rotation.transpose();
  z_inv.topRightCorner<3, 1>() = -e.rotation.transpose() * e.center;
  Vec4 diag;
  diag << e.half_axes.cwiseAbs2().cwiseInverse(), -1.0;
  Mat4 q = z_inv.transpose() * diag.asDiagonal() * z_inv;
  q = 0.5 * (q + q.transpose());
  return {q, QuadricKind::Primal};
}

std::array<Plane, 4> backproject_bbox_planes(const ProjectionMatrix& p, const BBox& b) {
  const std::array<Eigen::Vector3d, 4> lines = {
      Eigen::Vector3d(1.0, 0.0, -b.x_min), Eigen::Vector3d(1.0, 0.0, -b.x_max),
      Eigen::Vector3d(0.0, 1.0, -b.y_min), Eigen::Vector3d(0.0, 1.0, -b.y_max)};
  std::array<Plane, 4> planes;
  for (std::size_t i = 0; i < 4; ++i) {
    planes[i] = Plane::from_homogeneous(p.matrix().transpose() * lines[i]).normalized();
  }
  return planes;
}

double plane_tangency_residual(const Plane& plane, const QuadricMatrix& dual) {
  const Vec4 pi = plane.homogeneous();
  return pi.dot(dual.matrix * pi);
}

Vec3 object_axis(const Ellipsoid& e, Axis axis) {
  return e.rotation.col(static_cast<int>(axis));
}

Vec3 reflect_point(const Vec3& v, const Ellipsoid& e) {
  Vec3 local = e.rotation.transpose() * (v - e.center);
  local.y() = -local.y();
  return e.center + e.rotation * local;
}

std::optional<Vec3> raycast_ellipsoid(const Vec2& u, const ProjectionMatrix& p, const Ellipsoid& e) {
  const Vec3 origin = p.center();
  const Vec3 dir = p.ray_direction(u);
  // In the unit-sphere frame the ray is o + s*q.
  const Vec3 o = e.to_unit(origin);
  const Vec3 q = (e.rotation.transpose() * dir).cwiseQuotient(e.half_axes);
  const double q_norm = q.norm();
  if (!(q_norm > 0.0)) return std::nullopt;
  const Vec3 qh = q / q_norm;
  const double half_b = o.dot(qh);
  double disc = half_b * half_b - (o.squaredNorm() - 1.0);
  if (disc < 0.0) {
    if (disc < -1e-12) return std::nullopt;
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  double mu = -half_b - root;
  if (mu <= 0.0) mu = -half_b + root;
  if (mu <= 0.0) return std::nullopt;
  return origin + (mu / q_norm) * dir;
}

std::optional<Vec3> raycast_tangent_plane(const Vec2& u, const ProjectionMatrix& p,
                                          const Ellipsoid& e, const Vec3& v0) {
  const Vec4 pi = ellipsoid_to_primal(e).matrix * v0.homogeneous();
  const Vec3 n = pi.head<3>();
  const Vec3 origin = p.center();
  const Vec3 dir = p.ray_direction(u);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-12 * n.norm() * dir.norm()) return std::nullopt;
  const double s = -(n.dot(origin) + pi(3)) / denom;
  return origin + s * dir;
}

std::optional<Vec2> symmetric_pixel(const Vec2& u, const ProjectionMatrix& p, const Ellipsoid& e) {
  const auto v = raycast_ellipsoid(u, p, e);
  if (!v) return std::nullopt;
  return p.project(reflect_point(*v, e));
}

Cuboid circumscribed_cuboid(const Ellipsoid& e) {
  return {e.center, e.rotation, e.half_axes};
}

std::optional<BBox> project_dual_conic_bbox(const Ellipsoid& e, const ProjectionMatrix& p) {
  for (const Vec3& corner : circumscribed_cuboid(e).corners()) {
    if (!(p.depth(corner) > 0.0)) return std::nullopt;
  }
  const Mat4 q = ellipsoid_to_dual(e).matrix;
  const Mat3 c = p.matrix() * q * p.matrix().transpose();
  const double c22 = c(2, 2);
  const double dx = std::sqrt(std::max(0.0, c(0, 2) * c(0, 2) - c22 * c(0, 0)));
  const double dy = std::sqrt(std::max(0.0, c(1, 2) * c(1, 2) - c22 * c(1, 1)));
  const double x1 = (c(0, 2) + dx) / c22;
  const double x2 = (c(0, 2) - dx) / c22;
  const double y1 = (c(1, 2) + dy) / c22;
  const double y2 = (c(1, 2) - dy) / c22;
  return BBox{std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2)};
}

Ellipsoid rotate_about_center(const Ellipsoid& e, const Vec3& axis, double angle) {
  Ellipsoid out = e;
  out.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * e.rotation;
  return out;
}

double symmetry_view_angle_deg(const Ellipsoid& e, const ProjectionMatrix& p) {
  const Vec3 local = e.rotation.transpose() * (p.center() - e.center);
  return std::atan2(std::abs(local.y()), std::abs(local.x())) * 180.0 / std::numbers::pi;
}

bool is_front_facing(const Vec3& v, const ProjectionMatrix& p, const Ellipsoid& e) {
  const Vec3 local = e.rotation.transpose() * (v - e.center);
  const Vec3 normal = e.rotation * local.cwiseQuotient(e.half_axes.cwiseAbs2());
  return normal.dot(p.center() - v) > 0.0;
}

}  // namespace objslam
