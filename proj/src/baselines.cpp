#include "brickstack/baselines.hpp"

#include <algorithm>
#include <limits>

namespace brickstack {

std::vector<Waypoint> scripted_plan(const Brick& b, const Slot& slot, const Config& cfg) {
  const Tolerances& tol = cfg.tolerances;
  const double yaw = grasp_yaw(b);
  const Vec3 c = b.pose.translation;
  const Pose grasp = Pose::from_xyz_yaw(c.x(), c.y(), c.z(), yaw);
  const Pose approach = Pose::from_xyz_yaw(c.x(), c.y(), b.obb().max_z() + cfg.pipeline.approach_height, yaw);
  const double open = std::min(brick_width_in_gripper(b, grasp) + tol.grip_clearance, cfg.world.gripper_max_width);

  const Pose rel = grasp.inverse() * b.pose;  // nominal brick pose in the gripper frame
  Pose release_brick = slot.pose;
  release_brick.translation.z() += kScriptedReleaseDrop;
  const Pose release = release_brick * rel.inverse();
  Pose lift = grasp;
  lift.translation.z() = tol.h_safe;
  Pose transit = release;
  transit.translation.z() = tol.h_safe;
  Pose retract = release;
  retract.translation.z() = tol.h_safe;

  return {{approach, GripperCommand::hold(), 1},      {grasp, GripperCommand::open_to(open), 2},
          {grasp, GripperCommand::close(), 3},        {lift, GripperCommand::hold(), 4},
          {transit, GripperCommand::hold(), 5},       {release, GripperCommand::hold(), 5},
          {release, GripperCommand::open_to(open), 6}, {retract, GripperCommand::hold(), 6}};
}

TrialLog classical_controller(const SceneState& initial, const Goal& goal, const Config& cfg) {
  TrialLog log;
  log.header.policy = "classical";
  log.header.proposer = "script";
  log.header.goal = goal;
  log.header.config = cfg;

  const SceneState perceived = perceive(initial);
  SceneState scene = initial;
  Memory memory;
  std::vector<int> used;

  for (const Slot& slot : goal.slots) {
    int brick = -1;
    double best = std::numeric_limits<double>::infinity();
    for (const Brick& b : perceived.bricks) {
      if (std::find(used.begin(), used.end(), b.id) != used.end()) continue;
      const double d = (b.pose.translation - slot.pose.translation).head<2>().norm();
      if (d < best) {
        best = d;
        brick = b.id;
      }
    }
    if (brick < 0) break;
    used.push_back(brick);
    ++memory.cycle;
    memory.current_brick = brick;
    memory.assignments.push_back({slot.index, brick});

    for (const Waypoint& wp : scripted_plan(perceived.brick(brick), slot, cfg)) {
      LogRecord rec;
      rec.kind = RecordKind::Scripted;
      rec.tick = scene.tick;
      rec.cycle = memory.cycle;
      rec.waypoints = {wp};
      rec.rationale = "scripted";
      rec.scene_before = scene;
      rec.memory_before = memory;
      if (!scene.workspace.contains(wp.target.translation)) {
        rec.reason = "target outside the workspace; skipped";
        log.records.push_back(std::move(rec));
        continue;
      }
      StepResult r = step(scene, wp, cfg.world);
      scene = std::move(r.scene);
      rec.executed = {wp};
      rec.events = std::move(r.events);
      log.records.push_back(std::move(rec));
    }
    if (scene.brick(brick).status == BrickStatus::Placed) memory.completed.push_back(brick);
    ++memory.slot_index;
    memory.current_brick = -1;
  }
  memory.done = true;
  log.summary = summarize(scene, goal, memory, log.records);
  return log;
}

PolicyResponse single_agent_policy(const SceneState& scene, const Goal& goal, const Memory& memory,
                                   const Config& cfg) {
  const Proposal p = rule_proposal(memory.current_step, perceive(scene), goal, memory, cfg);
  PolicyResponse r;
  r.rationale = p.rationale;
  r.output = p.waypoints;
  r.sigma = true;
  return r;
}

TrialLog single_agent_trial(const SceneState& scene, const Goal& goal, Proposer& proposer, const Config& cfg) {
  return run_pipeline(scene, goal, proposer, cfg, PipelineMode::Ungated);
}

}  // namespace brickstack
