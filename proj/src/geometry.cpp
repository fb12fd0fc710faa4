#include "brickstack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace brickstack {

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  const double n2 = q_.squaredNorm();
  if (!(n2 > 0.0) || !std::isfinite(n2)) {
    throw std::invalid_argument("rotation quaternion must be finite and non-zero");
  }
  if (std::abs(n2 - 1.0) > 1e-14) q_.normalize();
  if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
}

Rotation Rotation::from_wxyz(double w, double x, double y, double z) {
  return Rotation(Eigen::Quaterniond(w, x, y, z));
}

Rotation Rotation::about_axis(const Vec3& axis, double radians) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(radians, axis.normalized())));
}

Rotation Rotation::from_yaw(double radians) { return about_axis(Vec3::UnitZ(), radians); }

Rotation Rotation::from_matrix(const Eigen::Matrix3d& m) { return Rotation(Eigen::Quaterniond(m)); }

double Rotation::yaw() const {
  const Vec3 x = q_ * Vec3::UnitX();
  return std::atan2(x.y(), x.x());
}

Pose Pose::inverse() const {
  const Rotation inv = rotation.inverse();
  return {-(inv * translation), inv};
}

Pose Pose::operator*(const Pose& rhs) const {
  return {rotation * rhs.translation + translation, rotation * rhs.rotation};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }

std::array<Vec3, 8> Obb::corners() const {
  std::array<Vec3, 8> out;
  const Eigen::Matrix3d r = rotation.matrix();
  int k = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        out[k++] = center + r * Vec3(sx * half_extents.x(), sy * half_extents.y(), sz * half_extents.z());
  return out;
}

std::array<Vec3, 3> Obb::axes() const {
  const Eigen::Matrix3d r = rotation.matrix();
  return {r.col(0), r.col(1), r.col(2)};
}

bool Obb::contains(const Vec3& p) const {
  const Vec3 local = rotation.inverse() * (p - center);
  return std::abs(local.x()) <= half_extents.x() && std::abs(local.y()) <= half_extents.y() &&
         std::abs(local.z()) <= half_extents.z();
}

Vec3 Obb::support(const Vec3& direction) const {
  Vec3 out = center;
  const auto ax = axes();
  for (int i = 0; i < 3; ++i) {
    out += (direction.dot(ax[i]) >= 0.0 ? half_extents[i] : -half_extents[i]) * ax[i];
  }
  return out;
}

Vec3 Obb::closest_point(const Vec3& p) const {
  Vec3 local = rotation.inverse() * (p - center);
  for (int i = 0; i < 3; ++i) local[i] = std::clamp(local[i], -half_extents[i], half_extents[i]);
  return center + rotation * local;
}

double Obb::min_z() const {
  const auto ax = axes();
  double r = 0.0;
  for (int i = 0; i < 3; ++i) r += half_extents[i] * std::abs(ax[i].z());
  return center.z() - r;
}

double Obb::max_z() const { return 2.0 * center.z() - min_z(); }

double rotation_error_deg(const Rotation& r, const Rotation& r_star) {
  const Eigen::Matrix3d rel = r_star.matrix().transpose() * r.matrix();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double center_offset(const Vec3& c, const Vec3& c_star) { return (c - c_star).norm(); }

Pose interpolate_pose(const Pose& from, const Pose& to, double s) {
  if (s <= 0.0) return from;
  if (s >= 1.0) return to;
  const Vec3 t = (1.0 - s) * from.translation + s * to.translation;
  return {t, Rotation(from.rotation.quaternion().slerp(s, to.rotation.quaternion()))};
}

double folded_yaw_difference_deg(double yaw_a_rad, double yaw_b_rad) {
  double d = std::remainder((yaw_a_rad - yaw_b_rad) * 180.0 / std::numbers::pi, 360.0);
  if (d > 90.0) d -= 180.0;
  if (d <= -90.0) d += 180.0;
  return d;
}

}  // namespace brickstack
