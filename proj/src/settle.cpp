#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "brickstack/world.hpp"
#include "world_internal.hpp"

namespace brickstack {

namespace {

constexpr double kTouch = 1e-6;
constexpr double kMinPatchArea = 1e-10;

struct Support {
  double rest_z = 0.0;  // height of the brick's lowest point once resting
  std::vector<int> bodies;
};

// Highest support surface under `box`, considering only bodies whose top is
// not above the box's current bottom.
Support find_support(const SceneState& s, int id, const Obb& box, double tolerance) {
  const Polygon2 fp = footprint(box);
  const double bottom = box.min_z();
  Support out;
  out.rest_z = 0.0;
  out.bodies = {kGroundBody};
  for (const Brick& other : s.bricks) {
    if (other.id == id || other.status == BrickStatus::Grasped) continue;
    const Obb ob = other.obb();
    const double top = ob.max_z();
    if (top > bottom + tolerance) continue;
    if (polygon_area(clip_convex(fp, footprint(ob))) <= kMinPatchArea) continue;
    if (top > out.rest_z + kTouch) {
      out.rest_z = top;
      out.bodies = {other.id};
    } else if (std::abs(top - out.rest_z) <= kTouch) {
      if (out.bodies.size() == 1 && out.bodies[0] == kGroundBody) out.bodies.clear();
      out.bodies.push_back(other.id);
    }
  }
  return out;
}

}  // namespace

namespace detail {

void drop_to_rest(SceneState& s, int id, std::vector<int>* supporters) {
  Brick& b = s.brick(id);
  const Obb box = b.obb();
  const Support sup = find_support(s, id, box, 1e-4);
  b.pose.translation.z() += sup.rest_z - box.min_z();
  if (supporters) *supporters = sup.bodies;
}

}  // namespace detail

std::pair<SceneState, std::vector<Event>> settle_release(const SceneState& scene, const WorldConfig& cfg) {
  const Brick* held = scene.held_brick();
  if (!held) throw std::logic_error("settle_release requires an attached brick");
  if (!(scene.gripper.width > brick_width_in_gripper(*held, scene.gripper.pose))) {
    throw std::logic_error("settle_release requires the gripper to be open wider than the brick");
  }

  SceneState s = scene;
  const int id = held->id;
  s.gripper.attached_brick.reset();
  s.gripper.grip_normal_force = 0.0;
  s.brick(id).status = BrickStatus::Free;

  std::vector<int> supporters;
  detail::drop_to_rest(s, id, &supporters);
  Brick& b = s.brick(id);
  std::vector<Event> events;

  const bool on_ground = supporters.size() == 1 && supporters[0] == kGroundBody;
  bool stable = true;
  Polygon2 hull;
  if (!on_ground) {
    const Polygon2 fp = footprint(b.obb());
    std::vector<Vec2> patch_points;
    for (int body : supporters) {
      for (const Vec2& p : clip_convex(fp, footprint(s.brick(body).obb()))) patch_points.push_back(p);
    }
    hull = convex_hull(std::move(patch_points));
    const Vec2 com = b.pose.translation.head<2>();
    stable = hull.size() >= 3 && signed_distance_inside(hull, com) >= cfg.support_margin;
  }

  if (stable) {
    b.status = BrickStatus::Placed;
    events.push_back({EventKind::ReleaseSettled, s.tick, id, supporters.front(), ""});
    return {std::move(s), std::move(events)};
  }

  // Topple over the support edge the center of mass has crossed: rotate a
  // quarter turn about that edge, then let the brick fall to rest again.
  const Vec2 com = b.pose.translation.head<2>();
  int edge = -1;
  if (hull.size() >= 3) {
    signed_distance_inside(hull, com, &edge);
  }
  Vec3 axis = Vec3::UnitX();
  Vec3 pivot = b.pose.translation;
  pivot.z() = b.obb().min_z();
  if (edge >= 0) {
    const Vec2 a = hull[edge];
    const Vec2 c = hull[(edge + 1) % hull.size()];
    const Vec2 e = (c - a).normalized();
    const Vec3 outward(e.y(), -e.x(), 0.0);
    axis = Vec3::UnitZ().cross(outward);
    pivot = Vec3(a.x(), a.y(), pivot.z());
  } else if (hull.size() == 2) {
    const Vec2 e = (hull[1] - hull[0]).normalized();
    Vec3 outward(e.y(), -e.x(), 0.0);
    if (outward.head<2>().dot(com - hull[0]) < 0.0) outward = -outward;
    axis = Vec3::UnitZ().cross(outward);
    pivot = Vec3(hull[0].x(), hull[0].y(), pivot.z());
  }
  const Rotation tip = Rotation::about_axis(axis, std::numbers::pi / 2.0);
  b.pose = Pose(pivot + tip * (b.pose.translation - pivot), tip * b.pose.rotation);
  // Lift clear of everything, then drop.
  double highest = 0.0;
  for (const Brick& other : s.bricks)
    if (other.id != id) highest = std::max(highest, other.obb().max_z());
  b.pose.translation.z() += highest + 1.0 - b.obb().min_z();
  detail::drop_to_rest(s, id, &supporters);
  s.brick(id).status = BrickStatus::Placed;
  events.push_back({EventKind::ReleaseSettled, s.tick, id, supporters.front(), "toppled"});
  events.push_back({EventKind::Toppled, s.tick, id, supporters.front(), ""});
  return {std::move(s), std::move(events)};
}

double support_gap(const SceneState& scene, int brick_id) {
  const Obb box = scene.brick(brick_id).obb();
  const Support sup = find_support(scene, brick_id, box, 1e-4);
  return std::max(0.0, box.min_z() - sup.rest_z);
}

}  // namespace brickstack
