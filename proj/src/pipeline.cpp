#include <algorithm>
#include <limits>
#include <numbers>

#include "brickstack/agents.hpp"

namespace brickstack {

const char* to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::Agent: return "agent";
    case RecordKind::Raise: return "raise";
    case RecordKind::RetractFallback: return "retract_fallback";
    case RecordKind::Failure: return "failure";
    case RecordKind::SingleAgent: return "single_agent";
    case RecordKind::Scripted: return "scripted";
  }
  return "?";
}

RecordKind record_kind_from_string(const std::string& s) {
  for (RecordKind k : {RecordKind::Agent, RecordKind::Raise, RecordKind::RetractFallback, RecordKind::Failure,
                       RecordKind::SingleAgent, RecordKind::Scripted}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown record kind: " + s);
}

namespace {

int nearest_free_brick(const SceneState& perceived, const Slot& slot) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Brick& b : perceived.bricks) {
    if (b.status != BrickStatus::Free) continue;
    const double d = (b.pose.translation - slot.pose.translation).head<2>().norm();
    if (d < best_d) {
      best_d = d;
      best = b.id;
    }
  }
  return best;
}

void start_cycle(Memory& m, int brick) {
  ++m.cycle;
  m.current_brick = brick;
  m.current_step = 1;
  m.retry_counters.fill(0);
  m.step_flags.fill(false);
  m.place_correction_xy = Vec2::Zero();
  m.place_correction_yaw_deg = 0.0;
  m.assignments.push_back({m.slot_index, brick});
}

void finish_cycle(Memory& m) {
  m.completed.push_back(m.current_brick);
  ++m.slot_index;
  m.current_brick = -1;
  m.current_step = 1;
}

LogRecord failure(const SceneState& s, const Memory& m, int agent, std::string reason) {
  LogRecord r;
  r.kind = RecordKind::Failure;
  r.tick = s.tick;
  r.cycle = m.cycle;
  r.agent = agent;
  r.reason = std::move(reason);
  return r;
}

void append(std::vector<Event>& to, const std::vector<Event>& from) { to.insert(to.end(), from.begin(), from.end()); }

}  // namespace

TrialLog run_pipeline(const SceneState& scene, const Goal& goal, Proposer& proposer, const Config& cfg,
                      PipelineMode mode) {
  TrialLog log;
  log.header.policy = mode == PipelineMode::Gated ? "multi_agent" : "single_agent";
  log.header.proposer = proposer.name();
  log.header.goal = goal;
  log.header.config = cfg;
  continue_pipeline(scene, Memory{}, goal, proposer, cfg, mode, log);
  return log;
}

void continue_pipeline(SceneState scene, Memory memory, const Goal& goal, Proposer& proposer, const Config& cfg,
                       PipelineMode mode, TrialLog& log) {
  const Tolerances& tol = cfg.tolerances;
  const bool gated = mode == PipelineMode::Gated;
  auto fail = [&](int agent, std::string reason) {
    log.records.push_back(failure(scene, memory, agent, std::move(reason)));
    memory.failed = true;
  };

  while (!memory.done && !memory.failed) {
    if (memory.current_brick < 0) {
      if (memory.slot_index >= static_cast<int>(goal.slots.size())) {
        memory.done = true;
        break;
      }
      const int brick = nearest_free_brick(perceive(scene), goal.slots[memory.slot_index]);
      if (brick < 0) {
        fail(0, "no free brick left");
        break;
      }
      start_cycle(memory, brick);
    }

    const int i = memory.current_step;
    LogRecord rec;
    rec.kind = gated ? RecordKind::Agent : RecordKind::SingleAgent;
    rec.tick = scene.tick;
    rec.cycle = memory.cycle;
    rec.agent = gated ? i : 0;
    rec.scene_before = scene;
    rec.memory_before = memory;

    Proposal prop;
    try {
      prop = proposer.propose(i, perceive(scene), goal, memory, cfg, rec.policy_events);
    } catch (const InfeasibleAction& e) {
      LogRecord f = failure(scene, memory, gated ? i : 0, e.what());
      f.policy_events = std::move(rec.policy_events);
      log.records.push_back(std::move(f));
      memory.failed = true;
      break;
    }
    rec.rationale = prop.rationale;
    rec.waypoints = prop.waypoints;
    rec.tool_results = prop.tool_results;

    if (!gated) {
      AgentOutcome out = execute_unchecked(i, scene, memory, prop.waypoints, cfg);
      rec.executed = out.executed;
      rec.events = out.events;
      scene = std::move(out.scene);
      log.records.push_back(std::move(rec));
      if (i == kAgentCount) {
        finish_cycle(memory);
      } else {
        ++memory.current_step;
      }
      continue;
    }

    rec.claimed_sigma = prop.claimed_sigma;
    AgentOutcome out = verify_and_execute(i, scene, goal, memory, prop, cfg);
    rec.sigma = out.sigma;
    rec.executed = out.executed;
    rec.events = out.events;
    rec.tool_results.insert(rec.tool_results.end(), out.message.constraints.begin(),
                            out.message.constraints.end());
    scene = std::move(out.scene);
    memory = std::move(out.memory);

    if (out.sigma) {
      log.records.push_back(std::move(rec));
      if (i == kAgentCount) {
        finish_cycle(memory);
      } else {
        memory.current_step = i + 1;
      }
      continue;
    }

    switch (i) {
      case 4: {
        if (memory.retry_counters[4] >= tol.max_retries) {
          log.records.push_back(std::move(rec));
          fail(4, "lift retries exhausted");
          break;
        }
        ++memory.retry_counters[4];
        rec.retry_edge = "regrasp";
        const Waypoint reopen{scene.gripper.pose, GripperCommand::open_to(scene.gripper.max_width), 4};
        StepResult r = step(scene, reopen, cfg.world);
        scene = std::move(r.scene);
        rec.executed.push_back(reopen);
        append(rec.events, r.events);
        log.records.push_back(std::move(rec));
        memory.current_step = 1;
        break;
      }
      case 5: {
        if (memory.retry_counters[5] >= tol.max_retries) {
          log.records.push_back(std::move(rec));
          fail(5, "placement retries exhausted");
          break;
        }
        ++memory.retry_counters[5];
        rec.retry_edge = "raise";
        if (out.alignment) {
          memory.place_correction_xy += out.alignment->xy;
          memory.place_correction_yaw_deg += out.alignment->yaw_deg;
        }
        log.records.push_back(std::move(rec));

        LogRecord raise;
        raise.kind = RecordKind::Raise;
        raise.tick = scene.tick;
        raise.cycle = memory.cycle;
        raise.agent = 5;
        raise.z_before = scene.gripper.pose.translation.z();
        Pose up = scene.gripper.pose;
        up.translation.z() += tol.raise_dh;
        const Waypoint wp{up, GripperCommand::hold(), 5};
        raise.waypoints = {wp};
        StepResult r = step(scene, wp, cfg.world);
        scene = std::move(r.scene);
        raise.executed = {wp};
        raise.events = r.events;
        raise.z_after = scene.gripper.pose.translation.z();
        log.records.push_back(std::move(raise));
        break;
      }
      case 6: {
        if (memory.retry_counters[6] >= 1) {
          log.records.push_back(std::move(rec));
          fail(6, "retract fallback exhausted");
          break;
        }
        ++memory.retry_counters[6];
        rec.retry_edge = "retract_fallback";
        log.records.push_back(std::move(rec));

        LogRecord fb;
        fb.kind = RecordKind::RetractFallback;
        fb.tick = scene.tick;
        fb.cycle = memory.cycle;
        fb.agent = 6;
        Pose up = scene.gripper.pose;
        up.translation.z() = std::max(up.translation.z(), tol.h_safe);
        fb.waypoints = {{up, GripperCommand::hold(), 6}, {cfg.world.ready_pose, GripperCommand::hold(), 6}};
        Proposal p;
        p.rationale = "raise to safe height, then return to ready pose";
        p.waypoints = fb.waypoints;
        fb.rationale = p.rationale;
        const SceneState perceived = perceive(scene);
        Pose from = perceived.gripper.pose;
        bool ok = !scene.gripper.attached_brick;
        for (const Waypoint& w : fb.waypoints) {
          fb.tool_results.push_back(collision_free_path(perceived, from, w.target, std::nullopt, cfg.world));
          ok = ok && fb.tool_results.back().verdict;
          from = w.target;
        }
        if (ok) {
          AgentOutcome ex = execute_unchecked(6, scene, memory, fb.waypoints, cfg);
          ok = ex.sigma;
          fb.executed = ex.executed;
          fb.events = ex.events;
          scene = std::move(ex.scene);
        }
        fb.sigma = ok;
        log.records.push_back(std::move(fb));
        if (ok) {
          finish_cycle(memory);
        } else {
          fail(6, "retract fallback blocked");
        }
        break;
      }
      default:
        log.records.push_back(std::move(rec));
        fail(i, "stage " + std::to_string(i) + " gate rejected the action");
        break;
    }
  }

  log.summary = summarize(scene, goal, memory, log.records);
}

TrialSummary summarize(const SceneState& scene, const Goal& goal, const Memory& memory,
                       const std::vector<LogRecord>& records) {
  TrialSummary s;
  s.ticks = scene.tick;
  for (const LogRecord& r : records) {
    for (const Event& e : r.events)
      if (e.kind == EventKind::Toppled) s.toppled = true;
    if (r.kind == RecordKind::Failure) s.failure_reason = r.reason;
  }
  bool all_placed = true;
  for (const Assignment& a : memory.assignments) {
    const Brick& b = scene.brick(a.brick);
    s.final_poses.push_back({a.slot, a.brick, b.pose, b.half_extents, b.status});
    if (b.status != BrickStatus::Placed) all_placed = false;
  }
  s.bricks_placed = static_cast<int>(memory.completed.size());
  s.success = memory.done && !memory.failed && s.bricks_placed == static_cast<int>(goal.slots.size()) &&
              all_placed && !s.toppled;
  if (!s.success && s.failure_reason.empty()) s.failure_reason = s.toppled ? "brick toppled" : "incomplete";
  return s;
}

}  // namespace brickstack
