#include <algorithm>
#include <cmath>
#include <sstream>

#include "brickstack/reasoner.hpp"
#include "brickstack/serialize.hpp"
#include "brickstack/tools.hpp"

namespace brickstack {

namespace {

struct Template {
  const char* role;
  std::vector<const char*> chain;
};

const Template& stage_template(int agent) {
  static const Template templates[kAgentCount] = {
      {"You are the pre-grasp agent. Move the open gripper to an approach pose above the assigned brick, "
       "aligned with its short side, with clearance from every other object.",
       {"Locate the assigned brick and its top face.",
        "Choose a tool pose straight above the brick centre at the approach height, yawed across the short side.",
        "Check the path from the current pose and the clearance at the target.",
        "Check the pose is reachable and makes progress towards the brick.",
        "Emit the approach waypoint."}},
      {"You are the descent agent. Open the fingers wider than the brick and lower the gripper around it "
       "without touching neighbouring objects.",
       {"Measure the brick width across the finger axis.",
        "Set the opening to that width plus the grip clearance.",
        "Lower the tool point to the brick centre height.",
        "Check the descent path with the commanded opening.",
        "Emit the open-and-descend waypoint."}},
      {"You are the grasp agent. Close the fingers on the brick and confirm a firm, centred grasp.",
       {"Keep the current pose.", "Close the fingers.", "Confirm both fingers touch the brick with enough force.",
        "Confirm the brick centre stays near the tool point.", "Emit the close waypoint."}},
      {"You are the lift agent. Raise the grasped brick vertically to the safe transit height without slip.",
       {"Keep the current orientation and planar position.", "Set the target height to h_safe.",
        "Check the friction cone for the held brick.", "Emit the lift waypoint."}},
      {"You are the placement agent. Carry the brick to its goal slot and lower it until it rests on its "
       "supports, avoiding collisions for a stable placement.",
       {"Read the goal slot pose and any placement correction in memory.",
        "Compute the gripper pose that puts the brick on the slot.",
        "Transit at a safe height, then descend until contact.",
        "Check alignment in position, yaw and support gap.", "Emit the transit and descent waypoints."}},
      {"You are the release agent. Open the fingers, let the brick settle, and retreat to the ready pose.",
       {"Open the fingers beyond the brick width.", "Rise vertically clear of the stack.",
        "Check the retreat path to the ready pose.", "Emit the release and retreat waypoints."}},
  };
  if (agent < 1 || agent > kAgentCount) throw std::invalid_argument("agent index must be 1..6");
  return templates[agent - 1];
}

nlohmann::json aabb_json(const Obb& box) {
  Vec3 lo = Vec3::Constant(1e300);
  Vec3 hi = Vec3::Constant(-1e300);
  for (const Vec3& c : box.corners()) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  return {{"min", to_json(lo)}, {"max", to_json(hi)}};
}

nlohmann::json tolerances_json(const Tolerances& t) {
  Config c;
  c.tolerances = t;
  return to_json(c).at("tolerances");
}

std::string environment_text(const SceneState& scene, const Tolerances& tol) {
  nlohmann::json normals = nlohmann::json::array();
  nlohmann::json occupancy = nlohmann::json::array();
  for (const Brick& b : scene.bricks) {
    // Face whose outward normal points most nearly up.
    const Eigen::Matrix3d r = b.pose.rotation.matrix();
    int axis = 0;
    for (int k = 1; k < 3; ++k)
      if (std::abs(r(2, k)) > std::abs(r(2, axis))) axis = k;
    const Vec3 n = r.col(axis) * (r(2, axis) >= 0.0 ? 1.0 : -1.0);
    normals.push_back({{"body", b.id}, {"normal", to_json(n)}, {"height", b.obb().max_z()}});
    occupancy.push_back({{"body", b.id}, {"status", to_string(b.status)}, {"aabb", aabb_json(b.obb())}});
  }
  normals.push_back({{"body", kGroundBody}, {"normal", to_json(Vec3(Vec3::UnitZ()))}, {"height", 0.0}});
  const nlohmann::json env = {{"scene", to_json(scene)},
                              {"surface_normals", normals},
                              {"occupancy", occupancy},
                              {"free_space", {{"min", to_json(scene.workspace.min)}, {"max", to_json(scene.workspace.max)}}},
                              {"tolerances", tolerances_json(tol)}};
  return env.dump(1);
}

std::string memory_text(int agent, const Goal& goal, const Memory& memory) {
  nlohmann::json slot = nullptr;
  if (memory.slot_index >= 0 && memory.slot_index < static_cast<int>(goal.slots.size())) {
    slot = {{"index", memory.slot_index}, {"pose", to_json(goal.slots[memory.slot_index].pose)}};
  }
  const nlohmann::json m = {
      {"agent", agent}, {"memory", to_json(memory)}, {"goal", to_json(goal)}, {"target_slot", slot}};
  return m.dump(1);
}

nlohmann::json pose_schema() {
  return {{"type", "object"},
          {"required", {"t", "q"}},
          {"additionalProperties", false},
          {"properties",
           {{"t", {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 3}, {"maxItems", 3}}},
            {"q", {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 4}, {"maxItems", 4}}}}}};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ResponseError(ResponseErrorKind::SchemaViolation, what);
}

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional, const std::string& where) {
  require(j.is_object(), where + " must be an object");
  for (const char* k : required) require(j.contains(k), where + " is missing \"" + k + "\"");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(required.begin(), required.end(), [&](const char* k) { return key == k; }) ||
                       std::any_of(optional.begin(), optional.end(), [&](const char* k) { return key == k; });
    require(known, where + " has unexpected field \"" + key + "\"");
  }
}

Pose parse_pose(const nlohmann::json& j, const Workspace& ws) {
  require_keys(j, {"t", "q"}, {}, "pose");
  const auto& t = j.at("t");
  const auto& q = j.at("q");
  require(t.is_array() && t.size() == 3, "pose.t must hold 3 numbers");
  require(q.is_array() && q.size() == 4, "pose.q must hold 4 numbers");
  for (const auto& x : t) require(x.is_number(), "pose.t must hold numbers");
  for (const auto& x : q) require(x.is_number(), "pose.q must hold numbers");
  const Vec3 p(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  const Eigen::Vector4d qv(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  if (!p.allFinite() || !qv.allFinite()) throw ResponseError(ResponseErrorKind::OutOfBounds, "non-finite pose");
  if (std::abs(qv.norm() - 1.0) > 1e-6) {
    throw ResponseError(ResponseErrorKind::OutOfBounds, "quaternion is not unit length");
  }
  if (!ws.contains(p)) throw ResponseError(ResponseErrorKind::OutOfBounds, "pose outside the workspace");
  return Pose(p, Rotation::from_wxyz(qv[0], qv[1], qv[2], qv[3]));
}

std::string strip_fence(const std::string& raw) {
  std::string s = raw;
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return s;
  s = s.substr(first);
  if (s.rfind("```", 0) != 0) return raw;
  const auto nl = s.find('\n');
  const auto close = s.rfind("```");
  if (nl == std::string::npos || close <= nl) return raw;
  return s.substr(nl + 1, close - nl - 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> PromptBundle::sections() const {
  nlohmann::json tools = nlohmann::json::array();
  for (const auto& k : knowledge) tools.push_back(k);
  std::ostringstream chain;
  for (std::size_t i = 0; i < thinking_chain.size(); ++i) chain << (i + 1) << ". " << thinking_chain[i] << '\n';
  return {{"ENVIRONMENT", environment}, {"MEMORY", memory},         {"ROLE", role},
          {"KNOWLEDGE", tools.dump(1)}, {"THINKING CHAIN", chain.str()}, {"OUTPUT FORMAT", output_schema}};
}

std::string PromptBundle::render() const {
  std::string out;
  for (const auto& [title, body] : sections()) {
    out += "### " + title + "\n" + body;
    if (body.empty() || body.back() != '\n') out += '\n';
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> split_rendered_prompt(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("### ", 0) == 0) {
      out.emplace_back(line.substr(4), std::string());
    } else if (!out.empty()) {
      out.back().second += line + '\n';
    }
  }
  for (auto& [title, body] : out) {
    while (!body.empty() && body.back() == '\n') body.pop_back();
  }
  return out;
}

std::string output_schema_text() {
  const nlohmann::json waypoint = {
      {"type", "object"},
      {"required", {"pose", "gripper"}},
      {"additionalProperties", false},
      {"properties",
       {{"pose", pose_schema()},
        {"gripper",
         {{"type", "object"},
          {"required", {"kind"}},
          {"additionalProperties", false},
          {"properties",
           {{"kind", {{"enum", {"hold", "open_to", "close"}}}},
            {"width", {{"type", "number"}, {"minimum", 0}, {"description", "m, open_to only"}}}}}}}}}};
  const nlohmann::json schema = {
      {"type", "object"},
      {"required", {"rationale", "action", "sigma", "memory_update"}},
      {"additionalProperties", false},
      {"properties",
       {{"rationale", {{"type", "string"}}},
        {"action",
         {{"oneOf",
           {{{"type", "object"},
             {"required", {"type", "waypoints"}},
             {"additionalProperties", false},
             {"properties",
              {{"type", {{"const", "waypoint"}}},
               {"waypoints", {{"type", "array"}, {"items", waypoint}, {"minItems", 1}, {"maxItems", 4}}}}}},
            {{"type", "object"},
             {"required", {"type", "name", "args"}},
             {"additionalProperties", false},
             {"properties",
              {{"type", {{"const", "tool_call"}}}, {"name", {{"type", "string"}}}, {"args", {{"type", "object"}}}}}}}}}},
        {"sigma", {{"enum", {0, 1}}}},
        {"memory_update", {{"type", "object"}}}}}};
  return schema.dump(1);
}

PromptBundle build_prompt(int agent, const SceneState& scene, const Goal& goal, const Memory& memory,
                          const Tolerances& tol) {
  const Template& t = stage_template(agent);
  PromptBundle b;
  b.agent = agent;
  b.environment = environment_text(scene, tol);
  b.memory = memory_text(agent, goal, memory);
  b.role = t.role;
  for (const std::string& name : agent_tools(agent)) b.knowledge.push_back(descriptor_json(*find_tool(name)));
  b.thinking_chain.assign(t.chain.begin(), t.chain.end());
  b.output_schema = output_schema_text();
  return b;
}

PromptBundle build_single_agent_prompt(const SceneState& scene, const Goal& goal, const Memory& memory,
                                       const Tolerances& tol) {
  PromptBundle b;
  b.agent = 0;
  b.environment = environment_text(scene, tol);
  b.memory = memory_text(memory.current_step, goal, memory);
  std::ostringstream role;
  role << "You control the whole pick-and-place sequence alone. The memory field current_step names the phase "
          "to act on now.";
  for (int i = 1; i <= kAgentCount; ++i) role << "\nPhase " << i << ": " << stage_template(i).role;
  b.role = role.str();
  for (const ToolDescriptor& d : tool_registry()) b.knowledge.push_back(descriptor_json(d));
  for (int i = 1; i <= kAgentCount; ++i) {
    for (const char* step : stage_template(i).chain) b.thinking_chain.push_back("Phase " + std::to_string(i) + ": " + step);
  }
  b.output_schema = output_schema_text();
  return b;
}

const char* to_string(ResponseErrorKind kind) {
  switch (kind) {
    case ResponseErrorKind::MalformedJson: return "malformed_json";
    case ResponseErrorKind::SchemaViolation: return "schema_violation";
    case ResponseErrorKind::UnknownTool: return "unknown_tool";
    case ResponseErrorKind::OutOfBounds: return "out_of_bounds";
  }
  return "?";
}

PolicyResponse parse_response(const std::string& raw, int agent, const Workspace& workspace) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(strip_fence(raw));
  } catch (const nlohmann::json::exception& e) {
    throw ResponseError(ResponseErrorKind::MalformedJson, e.what());
  }
  require_keys(j, {"rationale", "action", "sigma", "memory_update"}, {}, "response");
  require(j.at("rationale").is_string(), "rationale must be a string");
  const auto& sig = j.at("sigma");
  require(sig.is_boolean() || (sig.is_number_integer() && (sig.get<int>() == 0 || sig.get<int>() == 1)),
          "sigma must be 0 or 1");
  require(j.at("memory_update").is_object(), "memory_update must be an object");

  PolicyResponse r;
  r.rationale = j.at("rationale").get<std::string>();
  r.sigma = sig.is_boolean() ? sig.get<bool>() : sig.get<int>() == 1;
  r.memory_update = j.at("memory_update");

  const auto& action = j.at("action");
  require(action.is_object() && action.contains("type") && action.at("type").is_string(),
          "action.type must be a string");
  const std::string type = action.at("type").get<std::string>();
  if (type == "waypoint") {
    require_keys(action, {"type", "waypoints"}, {}, "action");
    const auto& wps = action.at("waypoints");
    require(wps.is_array() && !wps.empty() && wps.size() <= 4, "action.waypoints must hold 1 to 4 entries");
    std::vector<Waypoint> out;
    for (const auto& w : wps) {
      require_keys(w, {"pose", "gripper"}, {}, "waypoint");
      const auto& g = w.at("gripper");
      require_keys(g, {"kind"}, {"width"}, "gripper");
      require(g.at("kind").is_string(), "gripper.kind must be a string");
      const std::string kind = g.at("kind").get<std::string>();
      GripperCommand cmd;
      if (kind == "hold") {
        cmd = GripperCommand::hold();
      } else if (kind == "close") {
        cmd = GripperCommand::close();
      } else if (kind == "open_to") {
        require(g.contains("width") && g.at("width").is_number() && g.at("width").get<double>() >= 0.0,
                "open_to needs a non-negative width");
        cmd = GripperCommand::open_to(g.at("width").get<double>());
      } else {
        require(false, "unknown gripper kind " + kind);
      }
      out.push_back({parse_pose(w.at("pose"), workspace), cmd, agent});
    }
    r.output = std::move(out);
  } else if (type == "tool_call") {
    require_keys(action, {"type", "name", "args"}, {}, "action");
    require(action.at("name").is_string(), "tool name must be a string");
    const std::string name = action.at("name").get<std::string>();
    const ToolDescriptor* d = find_tool(name);
    if (!d) throw ResponseError(ResponseErrorKind::UnknownTool, "unknown tool " + name);
    try {
      validate_tool_args(*d, action.at("args"));
    } catch (const std::invalid_argument& e) {
      throw ResponseError(ResponseErrorKind::SchemaViolation, e.what());
    }
    r.output = ToolCall{name, action.at("args")};
  } else {
    require(false, "action.type must be waypoint or tool_call");
  }
  return r;
}

std::string serialize_response(const PolicyResponse& r) {
  nlohmann::json action;
  if (const auto* wps = std::get_if<std::vector<Waypoint>>(&r.output)) {
    nlohmann::json list = nlohmann::json::array();
    for (const Waypoint& w : *wps) {
      nlohmann::json g;
      switch (w.command.kind) {
        case GripperCommand::Kind::Hold: g = {{"kind", "hold"}}; break;
        case GripperCommand::Kind::Close: g = {{"kind", "close"}}; break;
        case GripperCommand::Kind::OpenTo: g = {{"kind", "open_to"}, {"width", w.command.width}}; break;
      }
      list.push_back({{"pose", to_json(w.target)}, {"gripper", g}});
    }
    action = {{"type", "waypoint"}, {"waypoints", list}};
  } else {
    const ToolCall& c = std::get<ToolCall>(r.output);
    action = {{"type", "tool_call"}, {"name", c.name}, {"args", c.args}};
  }
  const nlohmann::json j = {
      {"rationale", r.rationale}, {"action", action}, {"sigma", r.sigma ? 1 : 0}, {"memory_update", r.memory_update}};
  return j.dump();
}

PolicyResponse rule_policy(int agent, const SceneState& scene, const Goal& goal, const Memory& memory,
                           const Config& cfg) {
  const Proposal p = rule_proposal(agent, perceive(scene), goal, memory, cfg);
  const AgentOutcome out = verify_and_execute(agent, scene, goal, memory, p, cfg);
  PolicyResponse r;
  r.rationale = p.rationale;
  r.output = p.waypoints;
  r.sigma = out.sigma;
  r.memory_update = {{"step_flag", out.sigma}};
  if (!out.sigma) {
    static const char* edges[kAgentCount + 1] = {"", "", "", "", "regrasp", "raise", "retract_fallback"};
    if (*edges[agent]) r.memory_update["retry_edge"] = edges[agent];
  }
  return r;
}

}  // namespace brickstack
