#include "brickstack/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace brickstack {

namespace {

std::string fmt(const char* label, double v) {
  std::ostringstream os;
  os << label << '=' << v;
  return os.str();
}

Pose held_offset(const SceneState& scene, const Pose& from, int held) {
  if (scene.gripper.attached_brick && *scene.gripper.attached_brick == held) return scene.gripper.attach_offset;
  return from.inverse() * scene.brick(held).pose;
}

std::vector<Obb> boxes_with_offset(const SceneState& scene, const Pose& pose, std::optional<int> held,
                                   const Pose& offset, double width, const WorldConfig& cfg) {
  const GripperBoxes g = gripper_boxes(cfg, pose, width);
  std::vector<Obb> out = {g.palm, g.finger_left, g.finger_right};
  if (held) out.emplace_back(pose * offset, scene.brick(*held).half_extents);
  return out;
}

std::vector<int> ignored(std::optional<int> held) {
  if (held) return {*held};
  return {};
}

double min_distance(const std::vector<Obb>& movers, const std::vector<Obstacle>& obs) {
  double best = std::numeric_limits<double>::infinity();
  for (const Obb& m : movers) {
    const double rm = m.half_extents.norm();
    for (const Obstacle& o : obs) {
      if (o.body == kGroundBody) {
        // The ground slab's top face is z = 0 and spans the whole workspace.
        best = std::min(best, std::max(0.0, m.min_z()));
        continue;
      }
      const double lower = (m.center - o.box.center).norm() - rm - o.box.half_extents.norm();
      if (lower >= best) continue;
      best = std::min(best, obb_distance(m, o.box));
    }
  }
  return best;
}

}  // namespace

std::vector<Obb> moving_boxes(const SceneState& scene, const Pose& pose, std::optional<int> held_brick,
                              double width, const WorldConfig& cfg) {
  const Pose offset = held_brick ? held_offset(scene, scene.gripper.pose, *held_brick) : Pose::identity();
  return boxes_with_offset(scene, pose, held_brick, offset, width, cfg);
}

ToolResult collision_free_path(const SceneState& scene, const Pose& from, const Pose& to,
                               std::optional<int> held_brick, const WorldConfig& cfg, std::optional<double> width) {
  const double w = width.value_or(scene.gripper.width);
  const Pose offset = held_brick ? held_offset(scene, from, *held_brick) : Pose::identity();
  const auto obs = obstacles(scene, ignored(held_brick));
  const int ticks = plan_ticks(from, to, cfg);

  bool free = true;
  double min_clear = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= ticks; ++k) {
    const double s = (k == ticks) ? 1.0 : static_cast<double>(k) / ticks;
    const auto movers = boxes_with_offset(scene, interpolate_pose(from, to, s), held_brick, offset, w, cfg);
    for (const Obb& m : movers) {
      for (const Obstacle& o : obs) {
        if (obb_sat(m, o.box).depth > cfg.contact_tolerance) free = false;
      }
    }
    min_clear = std::min(min_clear, min_distance(movers, obs));
  }
  return {"collision_free_path", free, min_clear, free ? "path clear" : "path penetrates an obstacle"};
}

ToolResult clearance(const SceneState& scene, const Pose& pose, std::optional<int> held_brick,
                     const WorldConfig& cfg, const Tolerances& tol, std::optional<double> width) {
  const double w = width.value_or(scene.gripper.width);
  const auto movers = moving_boxes(scene, pose, held_brick, w, cfg);
  const double c = min_distance(movers, obstacles(scene, ignored(held_brick)));
  return {"clearance", c >= tol.c_min, c, fmt("c_min", tol.c_min)};
}

ToolResult reachable(const Pose& pose, const Workspace& workspace, double cone_deg) {
  const Vec3 approach = pose.rotation * Vec3(0.0, 0.0, -1.0);
  const double tilt_deg = std::acos(std::clamp(-approach.z(), -1.0, 1.0)) * 180.0 / std::numbers::pi;
  const double box_violation = workspace.violation(pose.translation);
  const double cone_violation = std::max(0.0, tilt_deg - cone_deg) * std::numbers::pi / 180.0;
  const bool ok = box_violation == 0.0 && tilt_deg <= cone_deg;
  return {"reachable", ok, std::max(box_violation, cone_violation), fmt("tilt_deg", tilt_deg)};
}

ToolResult grasp_stable(const std::array<ContactReport, 2>& contacts, double pose_err, const Tolerances& tol) {
  if (contacts[0].body_b != contacts[1].body_b || contacts[0].body_a != contacts[1].body_a) {
    throw std::invalid_argument("grasp contacts are on different bodies");
  }
  const double f = std::min(contacts[0].normal_force, contacts[1].normal_force);
  const bool ok = f >= tol.f_min && pose_err <= tol.grasp_pose_eps;
  return {"grasp_stable", ok, f, fmt("pose_err", pose_err)};
}

ToolResult slip_check(double brick_mass, double f_n_total, double v_rel, const Tolerances& tol, double gravity,
                      double acceleration) {
  if (f_n_total < 0.0) throw std::invalid_argument("normal force must be non-negative");
  const double f_t = brick_mass * (gravity + acceleration);
  const bool ok = f_t <= tol.mu * f_n_total && v_rel <= tol.v_th;
  std::ostringstream note;
  note << "f_t=" << f_t << " mu*f_n=" << tol.mu * f_n_total << " v_rel=" << v_rel;
  return {"slip_check", ok, f_t, note.str()};
}

AlignmentError alignment_error(const Pose& brick_pose, const Pose& slot_pose) {
  AlignmentError e;
  e.xy = (brick_pose.translation - slot_pose.translation).head<2>();
  e.yaw_deg = folded_yaw_difference_deg(brick_pose.rotation.yaw(), slot_pose.rotation.yaw());
  return e;
}

ToolResult placement_aligned(const Pose& brick_pose, const Pose& slot_pose, double d_perp, const Tolerances& tol) {
  const AlignmentError e = alignment_error(brick_pose, slot_pose);
  const double e_xy = e.xy.norm();
  const double e_theta = std::abs(e.yaw_deg);
  const bool ok = d_perp <= tol.eps_perp && e_xy <= tol.eps_xy && e_theta <= tol.eps_theta_deg;
  std::ostringstream note;
  note << "d_perp=" << d_perp << " e_xy=" << e_xy << " e_theta_deg=" << e_theta;
  return {"placement_aligned", ok, e_xy, note.str()};
}

ToolResult goal_progress(const SceneState& scene, const Waypoint& action, const Goal& goal, int slot_index,
                         int brick_id, const Tolerances& tol) {
  if (slot_index < 0 || slot_index >= static_cast<int>(goal.slots.size())) {
    throw std::out_of_range("unknown slot " + std::to_string(slot_index));
  }
  const Brick& brick = scene.brick(brick_id);
  double residual = 0.0;
  if (action.phase <= 3) {
    residual = (action.target.translation - brick.pose.translation).head<2>().norm();
  } else {
    Vec3 predicted = brick.pose.translation;
    if (scene.gripper.attached_brick && *scene.gripper.attached_brick == brick_id) {
      predicted = (action.target * scene.gripper.attach_offset).translation;
    }
    residual = (predicted - goal.slots[slot_index].pose.translation).head<2>().norm();
  }
  return {"goal_progress", residual <= tol.eps_goal, residual, fmt("eps", tol.eps_goal)};
}

void Tolerances::validate() const {
  const double vals[] = {c_min, grip_clearance, f_min, grasp_pose_eps, h_safe, v_th, mu,
                         raise_dh, eps_perp, eps_xy, eps_theta_deg, eps_goal};
  for (double v : vals) {
    if (!(v > 0.0)) throw std::invalid_argument("tolerances must be strictly positive");
  }
  if (max_retries < 1) throw std::invalid_argument("max_retries must be at least 1");
}

}  // namespace brickstack
