#pragma once

#include <array>
#include <optional>
#include <string>

#include "brickstack/config.hpp"
#include "brickstack/world.hpp"

namespace brickstack {

struct ToolResult {
  std::string tool;
  bool verdict = false;
  double payload = 0.0;
  std::string note;
};

/// Boxes that move with the gripper for a query at `pose`: palm, both
/// fingers, and optionally the held brick.
std::vector<Obb> moving_boxes(const SceneState& scene, const Pose& pose, std::optional<int> held_brick,
                              double width, const WorldConfig& cfg);

/// Samples the interpolated path at servo-tick granularity (both endpoints
/// included).  Verdict: no sample penetrates an obstacle by more than the
/// contact tolerance.  Payload: minimum clearance seen along the path.
ToolResult collision_free_path(const SceneState& scene, const Pose& from, const Pose& to,
                               std::optional<int> held_brick, const WorldConfig& cfg,
                               std::optional<double> width = std::nullopt);

/// Payload: minimum box distance from the gripper (and held brick) to every
/// obstacle.  Verdict: payload >= c_min.
ToolResult clearance(const SceneState& scene, const Pose& pose, std::optional<int> held_brick,
                     const WorldConfig& cfg, const Tolerances& tol, std::optional<double> width = std::nullopt);

/// Payload: largest violation, workspace distance in m or cone excess in rad.
ToolResult reachable(const Pose& pose, const Workspace& workspace, double cone_deg = 30.0);

/// Both finger contacts must touch the same brick; min(f_n) >= f_min and
/// pose_err <= ε_g.  Throws std::invalid_argument for contacts on different bodies.
ToolResult grasp_stable(const std::array<ContactReport, 2>& contacts, double pose_err, const Tolerances& tol);

/// Friction-cone test with f_t = mass (g + a) against μ times the summed
/// finger normal force, plus the relative-speed clause.
ToolResult slip_check(double brick_mass, double f_n_total, double v_rel, const Tolerances& tol,
                      double gravity = 9.81, double acceleration = 0.0);

struct AlignmentError {
  Vec2 xy = Vec2::Zero();  // brick minus slot, m
  double yaw_deg = 0.0;    // folded into (-90, 90]
};
AlignmentError alignment_error(const Pose& brick_pose, const Pose& slot_pose);

ToolResult placement_aligned(const Pose& brick_pose, const Pose& slot_pose, double d_perp, const Tolerances& tol);

/// Residual planar offset after `action`.  Pick-side phases (1-3) measure the
/// tool point against the manipulated brick; later phases measure the
/// predicted brick centre against its slot.  Throws std::out_of_range for an
/// unknown slot.
ToolResult goal_progress(const SceneState& scene, const Waypoint& action, const Goal& goal, int slot_index,
                         int brick_id, const Tolerances& tol);

}  // namespace brickstack
