#include <doctest.h>

#include "brickstack/baselines.hpp"

using namespace brickstack;

namespace {

Goal goal_for(Pattern p) {
  const Config cfg;
  return generate_goal(p, cfg.world.brick_half_extents, default_gap(p), cfg.world.goal_base);
}

SceneState scene_for(std::uint64_t seed, const Goal& goal, double noise = 0.0) {
  const Config cfg;
  SceneState s = randomize_initial(initial_scene(cfg.world), goal, seed, cfg.world);
  if (noise > 0.0) apply_perception_noise(s, noise, seed * 7919 + 1);
  return s;
}

double mean_xy_error(const TrialLog& log, const Goal& goal) {
  double sum = 0.0;
  for (const FinalBrickPose& f : log.summary.final_poses)
    sum += (f.pose.translation - goal.slots[f.slot].pose.translation).head<2>().norm();
  return log.summary.final_poses.empty() ? 0.0 : sum / static_cast<double>(log.summary.final_poses.size());
}

double mean_center_error(const TrialLog& log, const Goal& goal) {
  double sum = 0.0;
  for (const FinalBrickPose& f : log.summary.final_poses)
    sum += (f.pose.translation - goal.slots[f.slot].pose.translation).norm();
  return sum / static_cast<double>(std::max<std::size_t>(1, log.summary.final_poses.size()));
}

}  // namespace

TEST_CASE("scripted plan shape") {
  const Config cfg;
  const Goal goal = goal_for(Pattern::Pyramid);
  const SceneState s = scene_for(1, goal);
  for (const Slot& slot : goal.slots) {
    const std::vector<Waypoint> plan = scripted_plan(s.bricks[0], slot, cfg);
    REQUIRE(plan.size() == 8);
    const int phases[] = {1, 2, 3, 4, 5, 5, 6, 6};
    for (int i = 0; i < 8; ++i) CHECK(plan[i].phase == phases[i]);
    CHECK(plan[1].command.kind == GripperCommand::Kind::OpenTo);
    CHECK(plan[2].command.kind == GripperCommand::Kind::Close);
    CHECK(plan[6].command.kind == GripperCommand::Kind::OpenTo);
    CHECK(plan[3].target.translation.z() == doctest::Approx(cfg.tolerances.h_safe));
    CHECK(plan[4].target.translation.z() == doctest::Approx(cfg.tolerances.h_safe));
    // The grasp point is the brick centre, so the release pose sits 5 mm above the slot.
    CHECK((plan[5].target.translation - slot.pose.translation - Vec3(0, 0, 0.005)).norm() < 1e-12);
    CHECK(plan[1].command.width == doctest::Approx(0.12));
  }
}

TEST_CASE("classical controller on a noiseless scene") {
  const Config cfg;
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    const Goal goal = goal_for(p);
    const TrialLog log = classical_controller(scene_for(2, goal), goal, cfg);
    CHECK(log.header.policy == "classical");
    CHECK(log.summary.success);
    CHECK(log.records.size() == 48);
    for (const LogRecord& r : log.records) {
      CHECK(r.kind == RecordKind::Scripted);
      CHECK_FALSE(r.sigma);
      CHECK_FALSE(r.retry_edge);
      REQUIRE(r.executed.size() == 1);
      CHECK(r.executed[0].phase >= 1);
      CHECK(r.executed[0].phase <= 6);
    }
    // Dropped from 5 mm the bricks land on their slots.
    CHECK(mean_center_error(log, goal) < 1e-3);
  }
}

TEST_CASE("classical controller drifts more than the gated pipeline under noise") {
  const Config cfg;
  const Goal goal = goal_for(Pattern::Pyramid);
  int gated_better = 0;
  const int n = 10;
  for (int seed = 0; seed < n; ++seed) {
    const SceneState s = scene_for(40 + seed, goal, 0.005);
    const TrialLog classical = classical_controller(s, goal, cfg);
    RuleProposer rules;
    const TrialLog gated = run_pipeline(s, goal, rules, cfg);
    CHECK(gated.summary.success);
    const bool better = !classical.summary.success ||
                        mean_center_error(gated, goal) < mean_center_error(classical, goal);
    gated_better += better;
  }
  CHECK(gated_better >= 9);
}

TEST_CASE("single-agent variant has no gates") {
  const Config cfg;
  const Goal goal = goal_for(Pattern::Pyramid);
  RuleProposer rules;
  const TrialLog log = single_agent_trial(scene_for(3, goal), goal, rules, cfg);
  CHECK(log.header.policy == "single_agent");
  CHECK(log.summary.success);
  CHECK(log.records.size() == 36);
  for (const LogRecord& r : log.records) {
    CHECK(r.kind == RecordKind::SingleAgent);
    CHECK_FALSE(r.sigma);
    CHECK_FALSE(r.retry_edge);
  }
}

TEST_CASE("placement bias: single agent keeps it, gated pipeline removes it") {
  const Config cfg;
  const Goal goal = goal_for(Pattern::Pyramid);
  for (int seed = 0; seed < 3; ++seed) {
    SceneState s = scene_for(60 + seed, goal);
    s.faults.placement_bias = Vec2(0.008, 0.0);
    RuleProposer rules;
    const TrialLog single = single_agent_trial(s, goal, rules, cfg);
    const TrialLog gated = run_pipeline(s, goal, rules, cfg);
    CHECK(gated.summary.success);
    CHECK(mean_xy_error(single, goal) == doctest::Approx(0.008).epsilon(0.125));
    CHECK(mean_xy_error(gated, goal) <= cfg.tolerances.eps_xy);
    CHECK(mean_xy_error(single, goal) - mean_xy_error(gated, goal) >= 0.003);
  }
}

TEST_CASE("single_agent_policy follows the current step") {
  const Config cfg;
  const Goal goal = goal_for(Pattern::Grid);
  const SceneState s = scene_for(4, goal);
  Memory m;
  m.cycle = 1;
  m.current_brick = 0;
  m.current_step = 1;
  const PolicyResponse r = single_agent_policy(s, goal, m, cfg);
  const auto& wps = std::get<std::vector<Waypoint>>(r.output);
  const Proposal p = rule_proposal(1, s, goal, m, cfg);
  REQUIRE(wps.size() == p.waypoints.size());
  CHECK(wps[0].phase == 1);
  CHECK(wps[0].target.translation == p.waypoints[0].target.translation);
  CHECK(r.sigma);
}
