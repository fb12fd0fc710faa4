#include "brickstack/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace brickstack {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Execution {
  SceneState scene;
  std::vector<Waypoint> executed;
  std::vector<Event> events;
  std::vector<ContactReport> contacts;
  double max_relative_speed = 0.0;
  bool collided = false;
  bool last_contact = false;  // final step ended in a resting contact
};

Execution run_waypoints(const SceneState& scene, const std::vector<Waypoint>& waypoints, const WorldConfig& cfg) {
  Execution ex;
  ex.scene = scene;
  for (const Waypoint& wp : waypoints) {
    StepResult r = step(ex.scene, wp, cfg);
    ex.scene = std::move(r.scene);
    ex.executed.push_back(wp);
    ex.max_relative_speed = std::max(ex.max_relative_speed, r.max_relative_speed);
    ex.last_contact = false;
    for (const Event& e : r.events) {
      if (e.kind == EventKind::CollisionDetected) ex.collided = true;
      if (e.kind == EventKind::ContactMade && r.halted) ex.last_contact = true;
    }
    ex.events.insert(ex.events.end(), r.events.begin(), r.events.end());
    ex.contacts = std::move(r.contacts);
    if (ex.collided) break;
  }
  return ex;
}

std::optional<int> held_id(const SceneState& s) { return s.gripper.attached_brick; }

double command_width(const SceneState& s, const Waypoint& wp) {
  return wp.command.kind == GripperCommand::Kind::OpenTo ? std::min(wp.command.width, s.gripper.max_width)
                                                         : s.gripper.width;
}

Pose with_z(Pose p, double z) {
  p.translation.z() = z;
  return p;
}

CostTerms cost_terms(const SceneState& s, const Waypoint& wp, const Brick& brick, const Config& cfg) {
  CostTerms c;
  c.path_length = (wp.target.translation - s.gripper.pose.translation).norm();
  c.clearance = clearance(s, wp.target, held_id(s), cfg.world, cfg.tolerances, command_width(s, wp)).payload;
  const double yaw_err =
      std::abs(folded_yaw_difference_deg(wp.target.rotation.yaw(), grasp_yaw(brick)));
  c.alignment = (wp.target.translation - brick.pose.translation).head<2>().norm() +
                cfg.pipeline.alignment_yaw_weight * yaw_err;
  return c;
}

AgentOutcome base_outcome(int agent, const SceneState& scene, const Memory& memory, const Proposal& p) {
  AgentOutcome out;
  out.message.agent = agent;
  out.message.rationale = p.rationale;
  if (!p.waypoints.empty()) out.message.proposal = p.waypoints.front().target;
  out.scene = scene;
  out.memory = memory;
  return out;
}

void apply(AgentOutcome& out, Execution&& ex) {
  out.scene = std::move(ex.scene);
  out.executed = std::move(ex.executed);
  out.events = std::move(ex.events);
  out.contacts = std::move(ex.contacts);
}

ToolResult in_workspace(const SceneState& s, const std::vector<Waypoint>& wps) {
  double worst = 0.0;
  for (const Waypoint& wp : wps) worst = std::max(worst, s.workspace.violation(wp.target.translation));
  return {"workspace", worst == 0.0, worst, ""};
}

// Path checks for a waypoint chain starting at the current gripper pose.
std::vector<ToolResult> path_checks(const SceneState& perceived, const std::vector<Waypoint>& wps,
                                    const WorldConfig& cfg) {
  std::vector<ToolResult> out;
  Pose from = perceived.gripper.pose;
  for (const Waypoint& wp : wps) {
    out.push_back(
        collision_free_path(perceived, from, wp.target, held_id(perceived), cfg, command_width(perceived, wp)));
    from = wp.target;
  }
  return out;
}

bool all_true(const std::vector<ToolResult>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const ToolResult& r) { return r.verdict; });
}

}  // namespace

double grasp_yaw(const Brick& brick) {
  double yaw = brick.pose.rotation.yaw();
  while (yaw > std::numbers::pi / 2.0) yaw -= std::numbers::pi;
  while (yaw <= -std::numbers::pi / 2.0) yaw += std::numbers::pi;
  return yaw;
}

std::vector<CandidateAction> feasible_set(const SceneState& scene, const Goal& goal,
                                          const std::vector<CandidateAction>& candidates, const Memory& memory,
                                          const Config& cfg) {
  std::vector<CandidateAction> out;
  for (const CandidateAction& c : candidates) {
    const Waypoint& wp = c.waypoint;
    if (!scene.workspace.contains(wp.target.translation)) continue;
    const double w = command_width(scene, wp);
    if (!collision_free_path(scene, scene.gripper.pose, wp.target, held_id(scene), cfg.world, w).verdict) continue;
    if (!clearance(scene, wp.target, held_id(scene), cfg.world, cfg.tolerances, w).verdict) continue;
    if (!reachable(wp.target, scene.workspace, cfg.pipeline.reach_cone_deg).verdict) continue;
    if (!goal_progress(scene, wp, goal, memory.slot_index, memory.current_brick, cfg.tolerances).verdict) continue;
    out.push_back(c);
  }
  return out;
}

double selection_cost(const CostTerms& c, const SelectionWeights& w) {
  return w.path_length * c.path_length - w.clearance * std::min(c.clearance, w.clearance_cap) +
         w.alignment * c.alignment;
}

std::size_t select_action(const std::vector<CandidateAction>& feasible, const SelectionWeights& w) {
  if (feasible.empty()) throw std::invalid_argument("no feasible candidate");
  std::size_t best = 0;
  double best_cost = selection_cost(feasible[0].cost, w);
  for (std::size_t i = 1; i < feasible.size(); ++i) {
    const double c = selection_cost(feasible[i].cost, w);
    if (c < best_cost) {
      best = i;
      best_cost = c;
    }
  }
  return best;
}

Proposal rule_proposal(int agent, const SceneState& s, const Goal& goal, const Memory& memory, const Config& cfg) {
  const Tolerances& tol = cfg.tolerances;
  Proposal p;
  switch (agent) {
    case 1: {
      const Brick& b = s.brick(memory.current_brick);
      if (b.status != BrickStatus::Free) throw InfeasibleAction("brick is not free");
      const double yaw = grasp_yaw(b);
      const Vec3 c = b.pose.translation;
      const Pose nominal = Pose::from_xyz_yaw(c.x(), c.y(), b.obb().max_z() + cfg.pipeline.approach_height, yaw);
      auto make = [&](const Pose& pose) {
        Waypoint wp{pose, GripperCommand::hold(), 1};
        return CandidateAction{wp, cost_terms(s, wp, b, cfg)};
      };
      std::vector<CandidateAction> cands = {make(nominal)};
      auto feas = feasible_set(s, goal, cands, memory, cfg);
      if (feas.empty()) {
        const double d = cfg.pipeline.perturb_offset;
        const double r = cfg.pipeline.perturb_yaw_deg * kDeg;
        const Vec3 t = nominal.translation;
        const double offsets[8][3] = {{d, 0, 0}, {-d, 0, 0}, {0, d, 0}, {0, -d, 0},
                                      {0, 0, r}, {0, 0, -r}, {d, d, 0}, {-d, -d, 0}};
        cands.clear();
        for (const auto& o : offsets) {
          cands.push_back(make(Pose::from_xyz_yaw(t.x() + o[0], t.y() + o[1], t.z(), yaw + o[2])));
        }
        feas = feasible_set(s, goal, cands, memory, cfg);
      }
      if (feas.empty()) {
        p.rationale = "no feasible approach pose; proposing nominal";
        p.waypoints = {{nominal, GripperCommand::hold(), 1}};
        p.claimed_sigma = false;
      } else {
        const std::size_t i = select_action(feas, cfg.selection);
        p.rationale = "approach above brick " + std::to_string(b.id);
        p.waypoints = {feas[i].waypoint};
      }
      break;
    }
    case 2: {
      const Brick& b = s.brick(memory.current_brick);
      const Vec3 c = b.pose.translation;
      const Pose target = Pose::from_xyz_yaw(c.x(), c.y(), c.z(), grasp_yaw(b));
      const double w = brick_width_in_gripper(b, target) + tol.grip_clearance;
      if (w > s.gripper.max_width) {
        throw InfeasibleAction("brick width plus clearance exceeds the gripper opening");
      }
      p.rationale = "open and descend around brick " + std::to_string(b.id);
      p.waypoints = {{target, GripperCommand::open_to(w), 2}};
      break;
    }
    case 3:
      p.rationale = "close on brick " + std::to_string(memory.current_brick);
      p.waypoints = {{s.gripper.pose, GripperCommand::close(), 3}};
      break;
    case 4:
      p.rationale = "lift to safe height";
      p.waypoints = {{with_z(s.gripper.pose, tol.h_safe), GripperCommand::hold(), 4}};
      break;
    case 5: {
      if (!s.held_brick()) throw InfeasibleAction("no brick held");
      if (memory.slot_index >= static_cast<int>(goal.slots.size())) throw InfeasibleAction("no slot left");
      const Pose& slot = goal.slots[memory.slot_index].pose;
      Pose desired = slot;
      desired.translation.head<2>() -= memory.place_correction_xy;
      desired.rotation = Rotation::from_yaw(-memory.place_correction_yaw_deg * kDeg) * slot.rotation;
      const Pose grip = desired * s.gripper.attach_offset.inverse();
      const double transit_z = memory.retry_counters[5] == 0 ? tol.h_safe : s.gripper.pose.translation.z();
      Pose descend = grip;
      descend.translation.z() -= cfg.pipeline.place_overshoot;
      p.rationale = "carry to slot " + std::to_string(memory.slot_index) + " and lower until contact";
      p.waypoints = {{with_z(grip, transit_z), GripperCommand::hold(), 5}, {descend, GripperCommand::hold(), 5}};
      break;
    }
    case 6: {
      const Brick* held = s.held_brick();
      const double w = held ? brick_width_in_gripper(*held, s.gripper.pose) + tol.grip_clearance
                            : s.gripper.width;
      const double up = std::max(s.gripper.pose.translation.z(), tol.h_safe);
      p.rationale = "release, rise vertically, return to ready pose";
      p.waypoints = {{s.gripper.pose, GripperCommand::open_to(std::min(w, s.gripper.max_width)), 6},
                     {with_z(s.gripper.pose, up), GripperCommand::hold(), 6},
                     {cfg.world.ready_pose, GripperCommand::hold(), 6}};
      break;
    }
    default:
      throw std::invalid_argument("agent index must be 1..6");
  }
  return p;
}

AgentOutcome verify_and_execute(int agent, const SceneState& scene, const Goal& goal, const Memory& memory,
                                const Proposal& proposal, const Config& cfg) {
  const Tolerances& tol = cfg.tolerances;
  const WorldConfig& wc = cfg.world;
  AgentOutcome out = base_outcome(agent, scene, memory, proposal);
  std::vector<ToolResult>& cons = out.message.constraints;
  const SceneState perceived = perceive(scene);
  const auto& wps = proposal.waypoints;

  const ToolResult ws = in_workspace(scene, wps);
  if (wps.empty() || !ws.verdict) {
    cons.push_back(wps.empty() ? ToolResult{"workspace", false, 0.0, "empty proposal"} : ws);
    out.sigma = false;
    out.memory.step_flags[agent] = false;
    return out;
  }

  switch (agent) {
    case 1:
    case 2: {
      cons = path_checks(perceived, wps, wc);
      const Pose& target = wps.back().target;
      const double w = command_width(perceived, wps.back());
      if (agent == 1) {
        cons.push_back(clearance(perceived, target, held_id(perceived), wc, tol, w));
      } else {
        const Brick& b = perceived.brick(memory.current_brick);
        const double need = brick_width_in_gripper(b, target) + tol.grip_clearance;
        cons.push_back({"grip_width", w >= need, w, "required " + std::to_string(need)});
      }
      cons.push_back(reachable(target, perceived.workspace, cfg.pipeline.reach_cone_deg));
      out.sigma = all_true(cons);
      if (out.sigma) {
        Execution ex = run_waypoints(scene, wps, wc);
        if (ex.collided) {
          out.sigma = false;
          cons.push_back({"execution", false, 0.0, "collision during execution"});
        }
        apply(out, std::move(ex));
      }
      break;
    }
    case 3: {
      const Vec3 tcp = scene.gripper.pose.translation;
      Execution ex = run_waypoints(scene, wps, wc);
      std::vector<ContactReport> fingers;
      for (const ContactReport& c : ex.contacts)
        if (c.body_a == kGripperBody && c.body_b == memory.current_brick) fingers.push_back(c);
      if (fingers.size() < 2) {
        cons.push_back({"grasp_stable", false, 0.0, "fewer than two finger contacts"});
        out.sigma = false;
      } else {
        const Brick* held = ex.scene.held_brick();
        const double err = held ? (held->pose.translation - tcp).norm() : std::numeric_limits<double>::infinity();
        cons.push_back(grasp_stable({fingers[0], fingers[1]}, err, tol));
        out.sigma = cons.back().verdict;
      }
      if (ex.collided) out.sigma = false;
      apply(out, std::move(ex));
      break;
    }
    case 4: {
      const Brick* held = scene.held_brick();
      const double mass = held ? held->mass : scene.brick(memory.current_brick).mass;
      const double f_total = held ? 2.0 * scene.gripper.grip_normal_force : 0.0;
      Execution ex = run_waypoints(scene, wps, wc);
      cons.push_back(slip_check(mass, f_total, ex.max_relative_speed, tol, wc.gravity, wc.lift_acceleration));
      out.sigma = cons.back().verdict && !ex.collided;
      if (ex.collided) cons.push_back({"execution", false, 0.0, "collision during lift"});
      apply(out, std::move(ex));
      break;
    }
    case 5: {
      if (!scene.held_brick()) {
        cons.push_back({"placement_aligned", false, 0.0, "no brick held"});
        out.sigma = false;
        break;
      }
      const int id = scene.held_brick()->id;
      cons = path_checks(perceived, {wps.front()}, wc);
      if (!cons.front().verdict) {
        out.sigma = false;
        break;
      }
      Execution ex = run_waypoints(scene, wps, wc);
      const Pose& slot = goal.slots.at(memory.slot_index).pose;
      const Pose brick_pose = ex.scene.brick(id).pose;
      const double d_perp = support_gap(ex.scene, id);
      cons.push_back(placement_aligned(brick_pose, slot, d_perp, tol));
      const bool contact = ex.last_contact && !ex.collided;
      if (contact) out.alignment = alignment_error(brick_pose, slot);
      if (!contact) cons.push_back({"contact", false, 0.0, ex.collided ? "collision" : "no resting contact"});
      out.sigma = contact && cons.back().verdict;
      apply(out, std::move(ex));
      break;
    }
    case 6: {
      Execution release = run_waypoints(scene, {wps.front()}, wc);
      const SceneState after = release.scene;
      std::vector<Waypoint> rest(wps.begin() + 1, wps.end());
      cons = path_checks(after, rest, wc);
      for (const Waypoint& wp : rest) cons.push_back(reachable(wp.target, after.workspace, cfg.pipeline.reach_cone_deg));
      out.sigma = !release.collided && !after.gripper.attached_brick && all_true(cons);
      if (after.gripper.attached_brick) cons.push_back({"release", false, 0.0, "brick still attached"});
      if (out.sigma && !rest.empty()) {
        Execution ex = run_waypoints(after, rest, wc);
        if (ex.collided) {
          out.sigma = false;
          cons.push_back({"execution", false, 0.0, "collision during retract"});
        }
        release.executed.insert(release.executed.end(), ex.executed.begin(), ex.executed.end());
        release.events.insert(release.events.end(), ex.events.begin(), ex.events.end());
        release.scene = std::move(ex.scene);
      }
      apply(out, std::move(release));
      break;
    }
    default:
      throw std::invalid_argument("agent index must be 1..6");
  }
  out.memory.step_flags[agent] = out.sigma;
  return out;
}

AgentOutcome execute_unchecked(int agent, const SceneState& scene, const Memory& memory,
                               const std::vector<Waypoint>& waypoints, const Config& cfg) {
  Proposal p;
  p.waypoints = waypoints;
  AgentOutcome out = base_outcome(agent, scene, memory, p);
  std::vector<Waypoint> inside;
  for (const Waypoint& wp : waypoints)
    if (scene.workspace.contains(wp.target.translation)) inside.push_back(wp);
  Execution ex = run_waypoints(scene, inside, cfg.world);
  out.sigma = !ex.collided;
  apply(out, std::move(ex));
  return out;
}

namespace {
AgentOutcome run_rule(int agent, const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg) {
  return verify_and_execute(agent, scene, goal, memory, rule_proposal(agent, perceive(scene), goal, memory, cfg), cfg);
}
}  // namespace

AgentOutcome agent1_pregrasp(const SceneState& s, const Goal& g, const Memory& m, const Config& c) {
  return run_rule(1, s, g, m, c);
}
AgentOutcome agent2_descend(const SceneState& s, const Goal& g, const Memory& m, const Config& c) {
  return run_rule(2, s, g, m, c);
}
AgentOutcome agent3_grasp(const SceneState& s, const Goal& g, const Memory& m, const Config& c) {
  return run_rule(3, s, g, m, c);
}
AgentOutcome agent4_lift(const SceneState& s, const Goal& g, const Memory& m, const Config& c) {
  return run_rule(4, s, g, m, c);
}
AgentOutcome agent5_place(const SceneState& s, const Goal& g, const Memory& m, const Config& c) {
  return run_rule(5, s, g, m, c);
}
AgentOutcome agent6_release(const SceneState& s, const Goal& g, const Memory& m, const Config& c) {
  return run_rule(6, s, g, m, c);
}

Proposal RuleProposer::propose(int agent, const SceneState& perceived, const Goal& goal, const Memory& memory,
                               const Config& cfg, std::vector<PolicyEvent>&) {
  return rule_proposal(agent, perceived, goal, memory, cfg);
}

}  // namespace brickstack
