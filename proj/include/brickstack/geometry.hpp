#pragma once

#include <array>
#include <vector>

#include <Eigen/Geometry>

namespace brickstack {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Unit quaternion rotation, stored with w >= 0.
///
/// Construction normalizes only when the input norm is off by more than a few
/// ulps, so re-wrapping an already stored quaternion is bit-exact.  Scene
/// replay relies on that.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation from_wxyz(double w, double x, double y, double z);
  static Rotation about_axis(const Vec3& axis, double radians);
  static Rotation from_yaw(double radians);
  static Rotation from_matrix(const Eigen::Matrix3d& m);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  std::array<double, 4> wxyz() const { return {q_.w(), q_.x(), q_.y(), q_.z()}; }
  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& rhs) const { return Rotation(q_ * rhs.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  /// Heading of the rotated x axis, radians in (-pi, pi].
  double yaw() const;

  bool operator==(const Rotation& rhs) const { return q_.coeffs() == rhs.q_.coeffs(); }

 private:
  Eigen::Quaterniond q_;
};

struct Pose {
  Vec3 translation = Vec3::Zero();
  Rotation rotation;

  Pose() = default;
  Pose(const Vec3& t, const Rotation& r) : translation(t), rotation(r) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {t, Rotation()}; }
  static Pose from_xyz_yaw(double x, double y, double z, double yaw) {
    return {Vec3(x, y, z), Rotation::from_yaw(yaw)};
  }

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;

  bool operator==(const Pose& rhs) const {
    return translation == rhs.translation && rotation == rhs.rotation;
  }
};

/// a ∘ b: applies b first, then a.
Pose compose(const Pose& a, const Pose& b);

struct Obb {
  Vec3 center = Vec3::Zero();
  Rotation rotation;
  Vec3 half_extents = Vec3::Ones();

  Obb() = default;
  Obb(const Vec3& c, const Rotation& r, const Vec3& h) : center(c), rotation(r), half_extents(h) {}
  Obb(const Pose& pose, const Vec3& h) : center(pose.translation), rotation(pose.rotation), half_extents(h) {}

  double volume() const { return 8.0 * half_extents.prod(); }
  std::array<Vec3, 8> corners() const;
  std::array<Vec3, 3> axes() const;
  bool contains(const Vec3& p) const;
  Vec3 support(const Vec3& direction) const;
  /// Closest point of the (solid) box to p.
  Vec3 closest_point(const Vec3& p) const;
  double distance_to(const Vec3& p) const { return (closest_point(p) - p).norm(); }
  double min_z() const;
  double max_z() const;
};

/// Geodesic angle between two orientations in degrees, via the trace of the
/// relative rotation matrix.  Result lies in [0, 180].
double rotation_error_deg(const Rotation& r, const Rotation& r_star);

double center_offset(const Vec3& c, const Vec3& c_star);

/// Linear translation blend plus shortest-arc slerp.  s is clamped to [0, 1];
/// s == 0 and s == 1 return the endpoints exactly.
Pose interpolate_pose(const Pose& from, const Pose& to, double s);

/// Signed yaw difference a - b folded into (-90, 90] degrees using the 180°
/// in-plane symmetry of a rectangular brick.
double folded_yaw_difference_deg(double yaw_a_rad, double yaw_b_rad);

// Convex box queries (convex.cpp).

/// Separating-axis result for a box pair.  depth > 0 means the boxes overlap
/// and is the minimum translation distance along `axis` (pointing from a to
/// b); depth <= 0 is the negated separation along the best axis.
struct SatResult {
  double depth = 0.0;
  Vec3 axis = Vec3::UnitZ();
};

SatResult obb_sat(const Obb& a, const Obb& b);
bool obb_overlap(const Obb& a, const Obb& b);

/// Minimum Euclidean distance between two solid boxes (0 when they overlap),
/// computed with a support-function (GJK) iteration.
double obb_distance(const Obb& a, const Obb& b);

double obb_intersection_volume(const Obb& a, const Obb& b);
double obb_iou(const Obb& a, const Obb& b);

/// 2D convex polygon helpers used by footprint and support-polygon logic.
using Polygon2 = std::vector<Vec2>;
Polygon2 convex_hull(std::vector<Vec2> points);
Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clip);
double polygon_area(const Polygon2& poly);
/// Signed distance from p to the boundary of a CCW convex polygon, positive
/// inside.  Also reports the index of the edge that limits it.
double signed_distance_inside(const Polygon2& poly, const Vec2& p, int* edge_index = nullptr);
Polygon2 footprint(const Obb& box);

}  // namespace brickstack
