#include <doctest.h>

#include <random>

#include "brickstack/reasoner.hpp"
#include "brickstack/serialize.hpp"
#include "brickstack/tools.hpp"

using namespace brickstack;
using nlohmann::json;

namespace {

Goal pyramid() {
  const Config cfg;
  return generate_goal(Pattern::Pyramid, cfg.world.brick_half_extents, default_gap(Pattern::Pyramid),
                       cfg.world.goal_base);
}

SceneState scene_for(std::uint64_t seed, const Goal& goal, const Config& cfg = {}) {
  return randomize_initial(initial_scene(cfg.world), goal, seed, cfg.world);
}

Memory first_cycle() {
  Memory m;
  m.cycle = 1;
  m.current_brick = 0;
  return m;
}

json waypoint_reply(const Pose& p, int sigma = 1) {
  return {{"rationale", "scripted"},
          {"action", {{"type", "waypoint"}, {"waypoints", {{{"pose", to_json(p)}, {"gripper", {{"kind", "hold"}}}}}}}},
          {"sigma", sigma},
          {"memory_update", json::object()}};
}

std::string tool_reply(const std::string& name, const json& args) {
  return json{{"rationale", "checking"},
              {"action", {{"type", "tool_call"}, {"name", name}, {"args", args}}},
              {"sigma", 0},
              {"memory_update", json::object()}}
      .dump();
}

TrialLog llm_trial(const json& script, const SceneState& s, const Goal& goal, const Config& cfg = {}) {
  LlmProposer llm(std::make_unique<MockTransport>(script, cfg), cfg.llm);
  return run_pipeline(s, goal, llm, cfg);
}

bool has_event(const LogRecord& r, const std::string& kind) {
  for (const PolicyEvent& e : r.policy_events)
    if (e.kind == kind) return true;
  return false;
}

int count_events(const TrialLog& log, const std::string& kind) {
  int n = 0;
  for (const LogRecord& r : log.records)
    for (const PolicyEvent& e : r.policy_events) n += e.kind == kind;
  return n;
}

}  // namespace

TEST_CASE("prompt has six sections in order") {
  const Goal goal = pyramid();
  const SceneState s = scene_for(1, goal);
  for (int agent = 1; agent <= 6; ++agent) {
    const PromptBundle b = build_prompt(agent, s, goal, first_cycle(), Tolerances{});
    const auto sec = b.sections();
    REQUIRE(sec.size() == 6);
    const char* titles[] = {"ENVIRONMENT", "MEMORY", "ROLE", "KNOWLEDGE", "THINKING CHAIN", "OUTPUT FORMAT"};
    for (int i = 0; i < 6; ++i) CHECK(sec[i].first == titles[i]);
    CHECK_FALSE(b.thinking_chain.empty());
    CHECK(b.knowledge.size() == agent_tools(agent).size());
    const auto back = split_rendered_prompt(b.render());
    REQUIRE(back.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(back[i].first == sec[i].first);
    CHECK(json::parse(back[0].second).is_object());
    CHECK(json::parse(back[1].second).is_object());
  }
}

TEST_CASE("placement prompt carries the placement role and alignment tool") {
  const Goal goal = pyramid();
  const PromptBundle b = build_prompt(5, scene_for(2, goal), goal, first_cycle(), Tolerances{});
  CHECK(b.role.find("placement") != std::string::npos);
  bool aligned = false;
  for (const json& k : b.knowledge) aligned = aligned || k.at("name") == "placement_aligned";
  CHECK(aligned);
  const json env = json::parse(b.environment);
  for (const char* key : {"scene", "surface_normals", "occupancy", "free_space", "tolerances"}) CHECK(env.contains(key));
  const json mem = json::parse(b.memory);
  CHECK(mem.at("agent") == 5);
  CHECK(mem.contains("target_slot"));
}

TEST_CASE("environment section reproduces the scene") {
  const Goal goal = pyramid();
  SceneState s = scene_for(3, goal);
  apply_perception_noise(s, 0.004, 17);
  const PromptBundle b = build_prompt(1, s, goal, first_cycle(), Tolerances{});
  const auto sec = split_rendered_prompt(b.render());
  const SceneState back = scene_from_json(json::parse(sec[0].second).at("scene"));
  CHECK(to_json(back) == to_json(s));
  REQUIRE(back.bricks.size() == s.bricks.size());
  for (std::size_t i = 0; i < s.bricks.size(); ++i) {
    CHECK(back.bricks[i].pose.translation == s.bricks[i].pose.translation);
    CHECK(back.bricks[i].pose.rotation.wxyz() == s.bricks[i].pose.rotation.wxyz());
  }
  const Memory m = memory_from_json(json::parse(sec[1].second).at("memory"));
  CHECK(to_json(m) == to_json(first_cycle()));
}

TEST_CASE("prompts are deterministic") {
  const Goal goal = pyramid();
  const SceneState s = scene_for(4, goal);
  for (int agent = 1; agent <= 6; ++agent) {
    CHECK(build_prompt(agent, s, goal, first_cycle(), Tolerances{}).render() ==
          build_prompt(agent, s, goal, first_cycle(), Tolerances{}).render());
  }
  const PromptBundle merged = build_single_agent_prompt(s, goal, first_cycle(), Tolerances{});
  CHECK(merged.render() == build_single_agent_prompt(s, goal, first_cycle(), Tolerances{}).render());
  CHECK(merged.agent == 0);
  CHECK(merged.knowledge.size() == tool_registry().size());
  for (int i = 1; i <= 6; ++i) CHECK(merged.role.find("Phase " + std::to_string(i)) != std::string::npos);
  CHECK_THROWS_AS(build_prompt(7, s, goal, first_cycle(), Tolerances{}), std::invalid_argument);
}

TEST_CASE("parse_response accepts valid replies") {
  const Workspace ws;
  const Pose p = Pose::from_xyz_yaw(0.1, -0.2, 0.3, 0.4);
  const PolicyResponse r = parse_response(waypoint_reply(p).dump(), 2, ws);
  CHECK(r.sigma);
  const auto& wps = std::get<std::vector<Waypoint>>(r.output);
  REQUIRE(wps.size() == 1);
  CHECK(wps[0].phase == 2);
  CHECK((wps[0].target.translation - p.translation).norm() < 1e-15);

  CHECK(parse_response("```json\n" + waypoint_reply(p, 0).dump() + "\n```", 2, ws).sigma == false);

  const json args = {{"pose", to_json(p)}};
  const PolicyResponse t = parse_response(tool_reply("clearance", args), 1, ws);
  const auto& call = std::get<ToolCall>(t.output);
  CHECK(call.name == "clearance");
  CHECK(call.args == args);
}

TEST_CASE("parse_response error kinds") {
  const Workspace ws;
  const Pose p = Pose::from_xyz_yaw(0.1, -0.2, 0.3, 0.4);
  auto kind_of = [&](const std::string& raw) {
    try {
      parse_response(raw, 1, ws);
    } catch (const ResponseError& e) {
      return std::string(to_string(e.kind()));
    }
    return std::string("ok");
  };
  CHECK(kind_of("{not json") == "malformed_json");
  CHECK(kind_of("") == "malformed_json");
  json missing = waypoint_reply(p);
  missing.erase("sigma");
  CHECK(kind_of(missing.dump()) == "schema_violation");
  json extra = waypoint_reply(p);
  extra["confidence"] = 0.9;
  CHECK(kind_of(extra.dump()) == "schema_violation");
  json bad_sigma = waypoint_reply(p);
  bad_sigma["sigma"] = 2;
  CHECK(kind_of(bad_sigma.dump()) == "schema_violation");
  CHECK(kind_of(tool_reply("teleport", json::object())) == "unknown_tool");
  CHECK(kind_of(tool_reply("clearance", {{"pose", 3}})) == "schema_violation");
  CHECK(kind_of(tool_reply("clearance", json::object())) == "schema_violation");
  CHECK(kind_of(waypoint_reply(Pose::from_translation({2.0, 0.0, 0.3})).dump()) == "out_of_bounds");
  json not_unit = waypoint_reply(p);
  not_unit["action"]["waypoints"][0]["pose"]["q"] = {1.0, 0.1, 0.0, 0.0};
  CHECK(kind_of(not_unit.dump()) == "out_of_bounds");
  json both = waypoint_reply(p);
  both["action"]["name"] = "clearance";
  CHECK(kind_of(both.dump()) == "schema_violation");
}

TEST_CASE("parse_response inverts serialize_response") {
  const Workspace ws;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5), w(0.0, 0.15), yaw(-3.1, 3.1);
  for (int i = 0; i < 100; ++i) {
    PolicyResponse r;
    r.rationale = "step " + std::to_string(i);
    r.sigma = i % 2;
    r.memory_update = {{"note", i}};
    if (i % 3 == 0) {
      r.output = ToolCall{"reachable", {{"pose", to_json(Pose::from_xyz_yaw(u(rng), u(rng), 0.3, yaw(rng)))}}};
    } else {
      std::vector<Waypoint> wps;
      for (int k = 0; k < 1 + i % 4; ++k) {
        const GripperCommand cmd = k % 3 == 0   ? GripperCommand::hold()
                                   : k % 3 == 1 ? GripperCommand::open_to(w(rng))
                                                : GripperCommand::close();
        wps.push_back({Pose::from_xyz_yaw(u(rng), u(rng), 0.1 + w(rng), yaw(rng)), cmd, 3});
      }
      r.output = wps;
    }
    const std::string text = serialize_response(r);
    const PolicyResponse back = parse_response(text, 3, ws);
    CHECK(serialize_response(back) == text);
    CHECK(back.rationale == r.rationale);
    CHECK(back.sigma == r.sigma);
    CHECK(back.memory_update == r.memory_update);
  }
}

TEST_CASE("rule_policy matches the stage functions") {
  Config cfg;
  const Goal goal = pyramid();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneState s = scene_for(100 + seed, goal);
    if (seed % 4 == 1) {
      s.faults.weak_grasp_skip = 1;
      s.faults.weak_grasp_count = 1;
    }
    if (seed % 4 == 2) apply_perception_noise(s, 0.003, seed);
    RuleProposer rules;
    const TrialLog log = run_pipeline(s, goal, rules, cfg);
    CHECK(log.summary.success);
    using Stage = AgentOutcome (*)(const SceneState&, const Goal&, const Memory&, const Config&);
    const Stage stages[] = {nullptr,        agent1_pregrasp, agent2_descend, agent3_grasp,
                            agent4_lift,    agent5_place,    agent6_release};
    for (const LogRecord& r : log.records) {
      if (r.kind != RecordKind::Agent) continue;
      const AgentOutcome direct = stages[r.agent](*r.scene_before, goal, *r.memory_before, cfg);
      CHECK(direct.sigma == *r.sigma);
      const PolicyResponse pr = rule_policy(r.agent, *r.scene_before, goal, *r.memory_before, cfg);
      CHECK(pr.sigma == *r.sigma);
      const auto& wps = std::get<std::vector<Waypoint>>(pr.output);
      REQUIRE(wps.size() == r.waypoints.size());
      for (std::size_t k = 0; k < wps.size(); ++k) CHECK(to_json(wps[k]) == to_json(r.waypoints[k]));
      CHECK(pr.memory_update.contains("retry_edge") == r.retry_edge.has_value());
    }
  }
}

TEST_CASE("default mock replies reproduce the rule trial") {
  Config cfg;
  const Goal goal = pyramid();
  const SceneState s = scene_for(6, goal);
  RuleProposer rules;
  const TrialLog a = run_pipeline(s, goal, rules, cfg);
  const TrialLog b = llm_trial(json::object(), s, goal, cfg);
  CHECK(b.summary.success);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].sigma == b.records[i].sigma);
    CHECK(a.records[i].tick == b.records[i].tick);
    CHECK(b.records[i].claimed_sigma == true);
  }
  CHECK(count_events(b, "fallback") == 0);
}

TEST_CASE("malformed reply is re-prompted once") {
  Config cfg;
  const Goal goal = pyramid();
  const SceneState s = scene_for(7, goal);
  const json script = {{"responses", {{{"cycle", 1}, {"agent", 2}, {"attempt", 0}, {"content", "{\"rationale\": "}}}}};
  const TrialLog log = llm_trial(script, s, goal, cfg);
  CHECK(log.summary.success);
  CHECK(count_events(log, "reprompt") == 1);
  CHECK(count_events(log, "fallback") == 0);
  CHECK(has_event(log.records[1], "reprompt"));
}

TEST_CASE("two malformed replies fall back to the rules") {
  Config cfg;
  const Goal goal = pyramid();
  const SceneState s = scene_for(8, goal);
  const json script = {{"responses",
                        {{{"cycle", 1}, {"agent", 3}, {"attempt", 0}, {"content", "sure, closing now"}},
                         {{"cycle", 1}, {"agent", 3}, {"attempt", 1}, {"content", "{\"sigma\": 1}"}}}}};
  const TrialLog log = llm_trial(script, s, goal, cfg);
  CHECK(log.summary.success);
  CHECK(count_events(log, "reprompt") == 1);
  CHECK(count_events(log, "fallback") == 1);
  const LogRecord& r = log.records[2];
  CHECK(r.agent == 3);
  CHECK(has_event(r, "fallback"));
  CHECK(r.rationale.rfind("rule fallback", 0) == 0);
}

TEST_CASE("transport failure falls back") {
  Config cfg;
  const Goal goal = pyramid();
  const json script = {{"responses", {{{"cycle", 2}, {"agent", 1}, {"attempt", 0}, {"transport_error", true}}}}};
  const TrialLog log = llm_trial(script, scene_for(9, goal), goal, cfg);
  CHECK(log.summary.success);
  CHECK(count_events(log, "fallback") == 1);
  CHECK(has_event(log.records[6], "fallback"));
}

TEST_CASE("tool calls are executed locally and budgeted") {
  Config cfg;
  const Goal goal = pyramid();
  const SceneState s = scene_for(10, goal);
  const Pose probe = Pose::from_translation({0.0, 0.0, 0.4});
  json responses = json::array();
  for (int k = 0; k < 3; ++k)
    responses.push_back({{"cycle", 1}, {"agent", 1}, {"attempt", k}, {"content", tool_reply("reachable", {{"pose", to_json(probe)}})}});
  for (int k = 0; k <= cfg.llm.max_tool_rounds; ++k)
    responses.push_back({{"cycle", 1}, {"agent", 2}, {"attempt", k}, {"content", tool_reply("reachable", {{"pose", to_json(probe)}})}});
  const TrialLog log = llm_trial({{"responses", responses}}, s, goal, cfg);
  CHECK(log.summary.success);

  const LogRecord& r1 = log.records[0];
  int calls = 0;
  for (const PolicyEvent& e : r1.policy_events) calls += e.kind == "tool_call";
  CHECK(calls == 3);
  CHECK_FALSE(has_event(r1, "fallback"));
  int reach = 0;
  for (const ToolResult& t : r1.tool_results) reach += t.tool == "reachable";
  CHECK(reach >= 3);

  const LogRecord& r2 = log.records[1];
  calls = 0;
  for (const PolicyEvent& e : r2.policy_events) calls += e.kind == "tool_call";
  CHECK(calls == cfg.llm.max_tool_rounds);
  CHECK(has_event(r2, "fallback"));
}

TEST_CASE("local verification overrides a claimed gate") {
  Config cfg;
  const Goal goal = pyramid();
  const SceneState s = scene_for(11, goal);
  // Approach pose buried inside another brick.
  const Pose inside = s.bricks[1].pose;
  const json script = {
      {"responses", {{{"cycle", 1}, {"agent", 1}, {"attempt", 0}, {"content", waypoint_reply(inside).dump()}}}}};
  const TrialLog log = llm_trial(script, s, goal, cfg);
  CHECK_FALSE(log.summary.success);
  REQUIRE(log.records.size() >= 1);
  CHECK(log.records[0].claimed_sigma == true);
  CHECK(log.records[0].sigma == false);
  CHECK(log.records.back().kind == RecordKind::Failure);
}

TEST_CASE("logged gates equal local recomputation") {
  Config cfg;
  const Goal goal = pyramid();
  SceneState s = scene_for(12, goal);
  s.faults.weak_grasp_skip = 2;
  s.faults.weak_grasp_count = 1;
  s.faults.placement_bias = Vec2(0.006, 0.0);
  const json script = {{"responses",
                        {{{"cycle", 1}, {"agent", 4}, {"attempt", 0}, {"content", "nope"}},
                         {{"cycle", 2}, {"agent", 5}, {"attempt", 0}, {"content", waypoint_reply(s.bricks[0].pose).dump()}}}}};
  const TrialLog log = llm_trial(script, s, goal, cfg);
  int checked = 0;
  for (const LogRecord& r : log.records) {
    if (r.kind != RecordKind::Agent) continue;
    Proposal p;
    p.waypoints = r.waypoints;
    const AgentOutcome out = verify_and_execute(r.agent, *r.scene_before, goal, *r.memory_before, p, cfg);
    CHECK(out.sigma == *r.sigma);
    ++checked;
  }
  CHECK(checked > 10);
}
