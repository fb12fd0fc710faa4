#include "brickstack/tools.hpp"

#include <algorithm>
#include <stdexcept>

#include "brickstack/serialize.hpp"

namespace brickstack {

namespace {

std::vector<ToolDescriptor> make_registry() {
  const ToolParam pose{"pose", "pose", "m, quaternion wxyz", "tool-point pose {t: [x, y, z], q: [w, x, y, z]}"};
  const ToolParam width{"width", "number", "m", "finger opening; defaults to the current opening", false};
  return {
      {"collision_free_path",
       "Sweeps the gripper (and the held brick) along the interpolated path at servo-tick resolution.",
       {{"from", "pose", "m, quaternion wxyz", "start pose; defaults to the current gripper pose", false},
        {"to", "pose", "m, quaternion wxyz", "end pose"},
        width},
       "verdict: no penetration beyond the contact tolerance; payload: minimum clearance along the path (m)"},
      {"clearance",
       "Minimum distance from the gripper (and the held brick) at a pose to every obstacle.",
       {pose, width},
       "verdict: payload >= c_min; payload: distance (m)"},
      {"reachable",
       "Workspace bounds and approach cone test for a tool-point pose.",
       {pose},
       "verdict: inside the workspace and within the approach cone; payload: largest violation (m or rad)"},
      {"grasp_stable",
       "Finger force and grasp pose test for the current grasp.",
       {{"pose_err", "number", "m", "distance between commanded grasp point and brick centre"}},
       "verdict: min finger force >= f_min and pose_err <= grasp_pose_eps; payload: min finger force (N)"},
      {"slip_check",
       "Friction cone test for the held brick.",
       {{"f_n_total", "number", "N", "summed finger normal force; defaults to the current grip", false},
        {"v_rel", "number", "m/s", "brick speed relative to the gripper", false}},
       "verdict: m (g + a) <= mu f_n_total and v_rel <= v_th; payload: tangential load (N)"},
      {"placement_aligned",
       "Compares the manipulated brick with its goal slot.",
       {{"brick_pose", "pose", "m, quaternion wxyz", "brick pose; defaults to the current brick pose", false}},
       "verdict: d_perp <= eps_perp, e_xy <= eps_xy, e_theta <= eps_theta; payload: e_xy (m)"},
      {"goal_progress",
       "Residual planar offset left after an action.",
       {pose, {"phase", "integer", "", "stage 1..6 the action belongs to"}},
       "verdict: residual <= eps; payload: residual (m)"},
  };
}

Pose pose_arg(const nlohmann::json& args, const char* key, const Pose& fallback) {
  return args.contains(key) ? pose_from_json(args.at(key)) : fallback;
}

double num_arg(const nlohmann::json& args, const char* key, double fallback) {
  return args.contains(key) ? args.at(key).get<double>() : fallback;
}

bool type_ok(const std::string& type, const nlohmann::json& v) {
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  if (type == "boolean") return v.is_boolean();
  if (type == "pose") {
    if (!v.is_object() || !v.contains("t") || !v.contains("q")) return false;
    const auto& t = v.at("t");
    const auto& q = v.at("q");
    auto numbers = [](const nlohmann::json& a, std::size_t n) {
      return a.is_array() && a.size() == n && std::all_of(a.begin(), a.end(), [](const auto& x) { return x.is_number(); });
    };
    return numbers(t, 3) && numbers(q, 4) && v.size() == 2;
  }
  return false;
}

}  // namespace

const std::vector<ToolDescriptor>& tool_registry() {
  static const std::vector<ToolDescriptor> registry = make_registry();
  return registry;
}

const ToolDescriptor* find_tool(std::string_view name) {
  for (const ToolDescriptor& d : tool_registry())
    if (d.name == name) return &d;
  return nullptr;
}

nlohmann::json descriptor_json(const ToolDescriptor& d) {
  nlohmann::json params = nlohmann::json::array();
  for (const ToolParam& p : d.params) {
    params.push_back({{"name", p.name}, {"type", p.type}, {"unit", p.unit}, {"doc", p.doc}, {"required", p.required}});
  }
  return {{"name", d.name}, {"doc", d.doc}, {"params", params}, {"returns", d.returns}};
}

std::vector<std::string> agent_tools(int agent) {
  switch (agent) {
    case 1: return {"collision_free_path", "clearance", "reachable", "goal_progress"};
    case 2: return {"collision_free_path", "reachable"};
    case 3: return {"grasp_stable"};
    case 4: return {"slip_check", "collision_free_path"};
    case 5: return {"collision_free_path", "placement_aligned", "goal_progress"};
    case 6: return {"collision_free_path", "reachable"};
    default: throw std::invalid_argument("agent index must be 1..6");
  }
}

void validate_tool_args(const ToolDescriptor& d, const nlohmann::json& args) {
  if (!args.is_object()) throw std::invalid_argument(d.name + ": args must be an object");
  for (const auto& [key, value] : args.items()) {
    auto it = std::find_if(d.params.begin(), d.params.end(), [&](const ToolParam& p) { return p.name == key; });
    if (it == d.params.end()) throw std::invalid_argument(d.name + ": unknown argument " + key);
    if (!type_ok(it->type, value)) throw std::invalid_argument(d.name + ": argument " + key + " must be " + it->type);
  }
  for (const ToolParam& p : d.params) {
    if (p.required && !args.contains(p.name)) throw std::invalid_argument(d.name + ": missing argument " + p.name);
  }
}

ToolResult invoke_tool(const std::string& name, const nlohmann::json& args, const ToolContext& ctx) {
  const ToolDescriptor* d = find_tool(name);
  if (!d) throw std::out_of_range("unknown tool " + name);
  validate_tool_args(*d, args);

  const SceneState& s = ctx.scene;
  const Config& cfg = ctx.cfg;
  const std::optional<int> held = s.gripper.attached_brick;
  const double width = num_arg(args, "width", s.gripper.width);

  if (name == "collision_free_path") {
    return collision_free_path(s, pose_arg(args, "from", s.gripper.pose), pose_from_json(args.at("to")), held,
                               cfg.world, width);
  }
  if (name == "clearance") {
    return clearance(s, pose_from_json(args.at("pose")), held, cfg.world, cfg.tolerances, width);
  }
  if (name == "reachable") {
    return reachable(pose_from_json(args.at("pose")), s.workspace, cfg.pipeline.reach_cone_deg);
  }
  if (name == "grasp_stable") {
    const Brick* b = s.held_brick();
    if (!b) return {"grasp_stable", false, 0.0, "no brick between the fingers"};
    const double f = s.gripper.grip_normal_force;
    const ContactReport c{kGripperBody, b->id, f / cfg.world.contact_stiffness, Vec3::UnitY(), f, 0.0};
    return grasp_stable({c, c}, args.at("pose_err").get<double>(), cfg.tolerances);
  }
  if (name == "slip_check") {
    const Brick* b = s.held_brick();
    const double mass = b ? b->mass : cfg.world.brick_mass;
    return slip_check(mass, num_arg(args, "f_n_total", 2.0 * s.gripper.grip_normal_force), num_arg(args, "v_rel", 0.0),
                      cfg.tolerances, cfg.world.gravity, cfg.world.lift_acceleration);
  }
  if (name == "placement_aligned") {
    const int id = ctx.memory.current_brick;
    if (id < 0 || ctx.memory.slot_index >= static_cast<int>(ctx.goal.slots.size())) {
      return {"placement_aligned", false, 0.0, "no brick assigned to a slot"};
    }
    SceneState probe = s;
    probe.brick(id).pose = pose_arg(args, "brick_pose", s.brick(id).pose);
    return placement_aligned(probe.brick(id).pose, ctx.goal.slots[ctx.memory.slot_index].pose,
                             support_gap(probe, id), cfg.tolerances);
  }
  if (name == "goal_progress") {
    const Waypoint wp{pose_from_json(args.at("pose")), GripperCommand::hold(), args.at("phase").get<int>()};
    return goal_progress(s, wp, ctx.goal, ctx.memory.slot_index, ctx.memory.current_brick, cfg.tolerances);
  }
  throw std::out_of_range("unknown tool " + name);
}

}  // namespace brickstack
