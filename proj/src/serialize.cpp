#include "brickstack/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace brickstack {

namespace {

// Non-finite numbers have no JSON spelling; keep them as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json rotation_json(const Rotation& r) {
  const auto q = r.wxyz();
  return json::array({q[0], q[1], q[2], q[3]});
}

Rotation rotation_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("rotation must be [w, x, y, z]");
  return Rotation::from_wxyz(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

const char* command_name(GripperCommand::Kind k) {
  switch (k) {
    case GripperCommand::Kind::Hold: return "hold";
    case GripperCommand::Kind::OpenTo: return "open_to";
    case GripperCommand::Kind::Close: return "close";
  }
  return "?";
}

GripperCommand::Kind command_from(const std::string& s) {
  if (s == "hold") return GripperCommand::Kind::Hold;
  if (s == "open_to") return GripperCommand::Kind::OpenTo;
  if (s == "close") return GripperCommand::Kind::Close;
  throw ParseError("unknown gripper command: " + s);
}

EventKind event_kind_from(const std::string& s) {
  for (EventKind k : {EventKind::ContactMade, EventKind::GraspSecured, EventKind::SlipDetected,
                      EventKind::CollisionDetected, EventKind::ReleaseSettled, EventKind::Toppled}) {
    if (s == to_string(k)) return k;
  }
  throw ParseError("unknown event kind: " + s);
}

BrickStatus status_from(const std::string& s) {
  for (BrickStatus k : {BrickStatus::Free, BrickStatus::Grasped, BrickStatus::Placed}) {
    if (s == to_string(k)) return k;
  }
  throw ParseError("unknown brick status: " + s);
}

template <typename T, typename F>
json list(const std::vector<T>& v, F&& f) {
  json a = json::array();
  for (const T& x : v) a.push_back(f(x));
  return a;
}

template <typename T>
json list(const std::vector<T>& v) {
  return list(v, [](const T& x) { return to_json(x); });
}

template <typename T>
void opt_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void opt_vec3(const json& j, const char* key, Vec3& out) {
  if (j.contains(key)) out = vec3_from_json(j.at(key));
}

}  // namespace

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const Pose& p) { return {{"t", to_json(p.translation)}, {"q", rotation_json(p.rotation)}}; }

Pose pose_from_json(const json& j) { return Pose(vec3_from_json(j.at("t")), rotation_from(j.at("q"))); }

json to_json(const SceneState& s) {
  json bricks = list(s.bricks, [](const Brick& b) {
    return json{{"id", b.id},
                {"half_extents", to_json(b.half_extents)},
                {"mass", b.mass},
                {"pose", to_json(b.pose)},
                {"status", to_string(b.status)},
                {"perception_error", to_json(b.perception_error)}};
  });
  const GripperState& g = s.gripper;
  json gripper = {{"pose", to_json(g.pose)},
                  {"width", g.width},
                  {"max_width", g.max_width},
                  {"finger_depth", g.finger_depth},
                  {"attached_brick", g.attached_brick ? json(*g.attached_brick) : json(nullptr)},
                  {"grip_normal_force", g.grip_normal_force},
                  {"attach_offset", to_json(g.attach_offset)}};
  json faults = {{"placement_bias", to_json(s.faults.placement_bias)},
                 {"weak_grasp_skip", s.faults.weak_grasp_skip},
                 {"weak_grasp_count", s.faults.weak_grasp_count},
                 {"weak_grasp_total_force", s.faults.weak_grasp_total_force}};
  return {{"bricks", bricks},
          {"gripper", gripper},
          {"tick", s.tick},
          {"workspace", {{"min", to_json(s.workspace.min)}, {"max", to_json(s.workspace.max)}}},
          {"faults", faults},
          {"grasp_count", s.grasp_count}};
}

SceneState scene_from_json(const json& j) {
  SceneState s;
  for (const json& b : j.at("bricks")) {
    Brick br;
    br.id = b.at("id").get<int>();
    br.half_extents = vec3_from_json(b.at("half_extents"));
    br.mass = b.at("mass").get<double>();
    br.pose = pose_from_json(b.at("pose"));
    br.status = status_from(b.at("status").get<std::string>());
    br.perception_error = pose_from_json(b.at("perception_error"));
    s.bricks.push_back(br);
  }
  const json& g = j.at("gripper");
  s.gripper.pose = pose_from_json(g.at("pose"));
  s.gripper.width = g.at("width").get<double>();
  s.gripper.max_width = g.at("max_width").get<double>();
  s.gripper.finger_depth = g.at("finger_depth").get<double>();
  if (!g.at("attached_brick").is_null()) s.gripper.attached_brick = g.at("attached_brick").get<int>();
  s.gripper.grip_normal_force = g.at("grip_normal_force").get<double>();
  s.gripper.attach_offset = pose_from_json(g.at("attach_offset"));
  s.tick = j.at("tick").get<std::int64_t>();
  s.workspace.min = vec3_from_json(j.at("workspace").at("min"));
  s.workspace.max = vec3_from_json(j.at("workspace").at("max"));
  const json& f = j.at("faults");
  s.faults.placement_bias = vec2_from_json(f.at("placement_bias"));
  s.faults.weak_grasp_skip = f.at("weak_grasp_skip").get<int>();
  s.faults.weak_grasp_count = f.at("weak_grasp_count").get<int>();
  s.faults.weak_grasp_total_force = f.at("weak_grasp_total_force").get<double>();
  s.grasp_count = j.at("grasp_count").get<int>();
  return s;
}

json to_json(const Goal& g) {
  json slots = list(g.slots, [](const Slot& s) {
    return json{{"index", s.index}, {"layer", s.layer}, {"pose", to_json(s.pose)},
                {"half_extents", to_json(s.half_extents)}};
  });
  return {{"pattern", to_string(g.pattern)}, {"gap", g.gap}, {"slots", slots}};
}

Goal goal_from_json(const json& j) {
  Goal g;
  g.pattern = pattern_from_string(j.at("pattern").get<std::string>());
  g.gap = j.at("gap").get<double>();
  for (const json& s : j.at("slots")) {
    g.slots.push_back({s.at("index").get<int>(), s.at("layer").get<int>(), pose_from_json(s.at("pose")),
                       vec3_from_json(s.at("half_extents"))});
  }
  return g;
}

json to_json(const Waypoint& w) {
  return {{"target", to_json(w.target)},
          {"command", {{"kind", command_name(w.command.kind)}, {"width", w.command.width}}},
          {"phase", w.phase}};
}

Waypoint waypoint_from_json(const json& j) {
  Waypoint w;
  w.target = pose_from_json(j.at("target"));
  const json& c = j.at("command");
  w.command.kind = command_from(c.at("kind").get<std::string>());
  w.command.width = c.value("width", 0.0);
  w.phase = j.at("phase").get<int>();
  return w;
}

json to_json(const Event& e) {
  return {{"kind", to_string(e.kind)}, {"tick", e.tick}, {"body_a", e.body_a}, {"body_b", e.body_b},
          {"detail", e.detail}};
}

Event event_from_json(const json& j) {
  return {event_kind_from(j.at("kind").get<std::string>()), j.at("tick").get<std::int64_t>(),
          j.at("body_a").get<int>(), j.at("body_b").get<int>(), j.at("detail").get<std::string>()};
}

json to_json(const ToolResult& t) {
  return {{"tool", t.tool}, {"verdict", t.verdict}, {"payload", num(t.payload)}, {"note", t.note}};
}

ToolResult tool_result_from_json(const json& j) {
  return {j.at("tool").get<std::string>(), j.at("verdict").get<bool>(), num_from(j.at("payload")),
          j.value("note", std::string())};
}

json to_json(const Memory& m) {
  json assignments = list(m.assignments, [](const Assignment& a) { return json{{"slot", a.slot}, {"brick", a.brick}}; });
  return {{"cycle", m.cycle},
          {"slot_index", m.slot_index},
          {"completed", m.completed},
          {"current_brick", m.current_brick},
          {"current_step", m.current_step},
          {"retry_counters", m.retry_counters},
          {"step_flags", m.step_flags},
          {"place_correction_xy", to_json(m.place_correction_xy)},
          {"place_correction_yaw_deg", m.place_correction_yaw_deg},
          {"assignments", assignments},
          {"failed", m.failed},
          {"done", m.done}};
}

Memory memory_from_json(const json& j) {
  Memory m;
  m.cycle = j.at("cycle").get<int>();
  m.slot_index = j.at("slot_index").get<int>();
  m.completed = j.at("completed").get<std::vector<int>>();
  m.current_brick = j.at("current_brick").get<int>();
  m.current_step = j.at("current_step").get<int>();
  m.retry_counters = j.at("retry_counters").get<std::array<int, kAgentCount + 1>>();
  m.step_flags = j.at("step_flags").get<std::array<bool, kAgentCount + 1>>();
  m.place_correction_xy = vec2_from_json(j.at("place_correction_xy"));
  m.place_correction_yaw_deg = j.at("place_correction_yaw_deg").get<double>();
  for (const json& a : j.at("assignments")) m.assignments.push_back({a.at("slot").get<int>(), a.at("brick").get<int>()});
  m.failed = j.at("failed").get<bool>();
  m.done = j.at("done").get<bool>();
  return m;
}

json to_json(const Config& c) {
  const Tolerances& t = c.tolerances;
  const WorldConfig& w = c.world;
  const SelectionWeights& s = c.selection;
  const PipelineConfig& p = c.pipeline;
  const LlmConfig& l = c.llm;
  return {
      {"tolerances",
       {{"c_min", t.c_min}, {"grip_clearance", t.grip_clearance}, {"f_min", t.f_min},
        {"grasp_pose_eps", t.grasp_pose_eps}, {"h_safe", t.h_safe}, {"v_th", t.v_th}, {"mu", t.mu},
        {"raise_dh", t.raise_dh}, {"eps_perp", t.eps_perp}, {"eps_xy", t.eps_xy},
        {"eps_theta_deg", t.eps_theta_deg}, {"eps_goal", t.eps_goal}, {"max_retries", t.max_retries}}},
      {"world",
       {{"workspace_min", to_json(w.workspace.min)}, {"workspace_max", to_json(w.workspace.max)},
        {"brick_half_extents", to_json(w.brick_half_extents)}, {"brick_mass", w.brick_mass},
        {"brick_count", w.brick_count}, {"gripper_max_width", w.gripper_max_width},
        {"finger_depth", w.finger_depth}, {"finger_thickness", w.finger_thickness},
        {"finger_half_height", w.finger_half_height}, {"palm_half_depth", w.palm_half_depth},
        {"palm_height", w.palm_height}, {"contact_stiffness", w.contact_stiffness},
        {"grip_squeeze", w.grip_squeeze}, {"secure_force", w.secure_force}, {"friction", w.friction},
        {"gravity", w.gravity}, {"lift_acceleration", w.lift_acceleration},
        {"translation_step", w.translation_step}, {"rotation_step_deg", w.rotation_step_deg},
        {"servo_period", w.servo_period}, {"contact_tolerance", w.contact_tolerance},
        {"support_margin", w.support_margin}, {"min_initial_separation", w.min_initial_separation},
        {"goal_clearance", w.goal_clearance}, {"goal_base", to_json(w.goal_base)},
        {"ready_pose", to_json(w.ready_pose)}}},
      {"selection",
       {{"path_length", s.path_length}, {"clearance", s.clearance}, {"alignment", s.alignment},
        {"clearance_cap", s.clearance_cap}}},
      {"pipeline",
       {{"approach_height", p.approach_height}, {"place_overshoot", p.place_overshoot},
        {"reach_cone_deg", p.reach_cone_deg}, {"perturb_offset", p.perturb_offset},
        {"perturb_yaw_deg", p.perturb_yaw_deg}, {"alignment_yaw_weight", p.alignment_yaw_weight}}},
      {"llm",
       {{"endpoint", l.endpoint}, {"model", l.model}, {"api_key_env", l.api_key_env}, {"timeout_s", l.timeout_s},
        {"max_tool_rounds", l.max_tool_rounds}, {"mock_script", l.mock_script}}}};
}

Config config_from_json(const json& j) {
  Config c;
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    Tolerances& o = c.tolerances;
    opt_get(t, "c_min", o.c_min);
    opt_get(t, "grip_clearance", o.grip_clearance);
    opt_get(t, "f_min", o.f_min);
    opt_get(t, "grasp_pose_eps", o.grasp_pose_eps);
    opt_get(t, "h_safe", o.h_safe);
    opt_get(t, "v_th", o.v_th);
    opt_get(t, "mu", o.mu);
    opt_get(t, "raise_dh", o.raise_dh);
    opt_get(t, "eps_perp", o.eps_perp);
    opt_get(t, "eps_xy", o.eps_xy);
    opt_get(t, "eps_theta_deg", o.eps_theta_deg);
    opt_get(t, "eps_goal", o.eps_goal);
    opt_get(t, "max_retries", o.max_retries);
  }
  if (j.contains("world")) {
    const json& w = j.at("world");
    WorldConfig& o = c.world;
    opt_vec3(w, "workspace_min", o.workspace.min);
    opt_vec3(w, "workspace_max", o.workspace.max);
    opt_vec3(w, "brick_half_extents", o.brick_half_extents);
    opt_get(w, "brick_mass", o.brick_mass);
    opt_get(w, "brick_count", o.brick_count);
    opt_get(w, "gripper_max_width", o.gripper_max_width);
    opt_get(w, "finger_depth", o.finger_depth);
    opt_get(w, "finger_thickness", o.finger_thickness);
    opt_get(w, "finger_half_height", o.finger_half_height);
    opt_get(w, "palm_half_depth", o.palm_half_depth);
    opt_get(w, "palm_height", o.palm_height);
    opt_get(w, "contact_stiffness", o.contact_stiffness);
    opt_get(w, "grip_squeeze", o.grip_squeeze);
    opt_get(w, "secure_force", o.secure_force);
    opt_get(w, "friction", o.friction);
    opt_get(w, "gravity", o.gravity);
    opt_get(w, "lift_acceleration", o.lift_acceleration);
    opt_get(w, "translation_step", o.translation_step);
    opt_get(w, "rotation_step_deg", o.rotation_step_deg);
    opt_get(w, "servo_period", o.servo_period);
    opt_get(w, "contact_tolerance", o.contact_tolerance);
    opt_get(w, "support_margin", o.support_margin);
    opt_get(w, "min_initial_separation", o.min_initial_separation);
    opt_get(w, "goal_clearance", o.goal_clearance);
    if (w.contains("goal_base")) o.goal_base = pose_from_json(w.at("goal_base"));
    if (w.contains("ready_pose")) o.ready_pose = pose_from_json(w.at("ready_pose"));
  }
  if (j.contains("selection")) {
    const json& s = j.at("selection");
    opt_get(s, "path_length", c.selection.path_length);
    opt_get(s, "clearance", c.selection.clearance);
    opt_get(s, "alignment", c.selection.alignment);
    opt_get(s, "clearance_cap", c.selection.clearance_cap);
  }
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    PipelineConfig& o = c.pipeline;
    opt_get(p, "approach_height", o.approach_height);
    opt_get(p, "place_overshoot", o.place_overshoot);
    opt_get(p, "reach_cone_deg", o.reach_cone_deg);
    opt_get(p, "perturb_offset", o.perturb_offset);
    opt_get(p, "perturb_yaw_deg", o.perturb_yaw_deg);
    opt_get(p, "alignment_yaw_weight", o.alignment_yaw_weight);
  }
  if (j.contains("llm")) {
    const json& l = j.at("llm");
    opt_get(l, "endpoint", c.llm.endpoint);
    opt_get(l, "model", c.llm.model);
    opt_get(l, "api_key_env", c.llm.api_key_env);
    opt_get(l, "timeout_s", c.llm.timeout_s);
    opt_get(l, "max_tool_rounds", c.llm.max_tool_rounds);
    opt_get(l, "mock_script", c.llm.mock_script);
  }
  c.tolerances.validate();
  return c;
}

json to_json(const LogRecord& r) {
  auto opt_bool = [](const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); };
  auto opt_num = [](const std::optional<double>& d) { return d ? num(*d) : json(nullptr); };
  json policy_events = list(r.policy_events, [](const PolicyEvent& e) {
    return json{{"kind", e.kind}, {"detail", e.detail}};
  });
  return {{"type", "record"},
          {"kind", to_string(r.kind)},
          {"tick", r.tick},
          {"cycle", r.cycle},
          {"agent", r.agent},
          {"sigma", opt_bool(r.sigma)},
          {"claimed_sigma", opt_bool(r.claimed_sigma)},
          {"waypoints", list(r.waypoints)},
          {"executed", list(r.executed)},
          {"tool_results", list(r.tool_results)},
          {"retry_edge", r.retry_edge ? json(*r.retry_edge) : json(nullptr)},
          {"events", list(r.events)},
          {"policy_events", policy_events},
          {"rationale", r.rationale},
          {"reason", r.reason},
          {"z_before", opt_num(r.z_before)},
          {"z_after", opt_num(r.z_after)},
          {"state_before",
           {{"scene", r.scene_before ? to_json(*r.scene_before) : json(nullptr)},
            {"memory", r.memory_before ? to_json(*r.memory_before) : json(nullptr)}}}};
}

LogRecord record_from_json(const json& j) {
  LogRecord r;
  r.kind = record_kind_from_string(j.at("kind").get<std::string>());
  r.tick = j.at("tick").get<std::int64_t>();
  r.cycle = j.at("cycle").get<int>();
  r.agent = j.at("agent").get<int>();
  if (!j.at("sigma").is_null()) r.sigma = j.at("sigma").get<bool>();
  if (!j.at("claimed_sigma").is_null()) r.claimed_sigma = j.at("claimed_sigma").get<bool>();
  for (const json& w : j.at("waypoints")) r.waypoints.push_back(waypoint_from_json(w));
  for (const json& w : j.at("executed")) r.executed.push_back(waypoint_from_json(w));
  for (const json& t : j.at("tool_results")) r.tool_results.push_back(tool_result_from_json(t));
  if (!j.at("retry_edge").is_null()) r.retry_edge = j.at("retry_edge").get<std::string>();
  for (const json& e : j.at("events")) r.events.push_back(event_from_json(e));
  for (const json& e : j.at("policy_events"))
    r.policy_events.push_back({e.at("kind").get<std::string>(), e.at("detail").get<std::string>()});
  r.rationale = j.at("rationale").get<std::string>();
  r.reason = j.at("reason").get<std::string>();
  if (!j.at("z_before").is_null()) r.z_before = j.at("z_before").get<double>();
  if (!j.at("z_after").is_null()) r.z_after = j.at("z_after").get<double>();
  const json& sb = j.at("state_before");
  if (!sb.at("scene").is_null()) r.scene_before = scene_from_json(sb.at("scene"));
  if (!sb.at("memory").is_null()) r.memory_before = memory_from_json(sb.at("memory"));
  return r;
}

json to_json(const TrialHeader& h) {
  return {{"type", "header"}, {"policy", h.policy},         {"proposer", h.proposer}, {"trial", h.trial},
          {"seed", h.seed},   {"noise_sigma", h.noise_sigma}, {"goal", to_json(h.goal)}, {"config", to_json(h.config)}};
}

TrialHeader header_from_json(const json& j) {
  TrialHeader h;
  h.policy = j.at("policy").get<std::string>();
  h.proposer = j.at("proposer").get<std::string>();
  h.trial = j.at("trial").get<int>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.noise_sigma = j.at("noise_sigma").get<double>();
  h.goal = goal_from_json(j.at("goal"));
  h.config = config_from_json(j.at("config"));
  return h;
}

json to_json(const TrialSummary& s) {
  json poses = list(s.final_poses, [](const FinalBrickPose& p) {
    return json{{"slot", p.slot}, {"brick_id", p.brick_id}, {"pose", to_json(p.pose)},
                {"half_extents", to_json(p.half_extents)}, {"status", to_string(p.status)}};
  });
  return {{"type", "summary"},
          {"success", s.success},
          {"bricks_placed", s.bricks_placed},
          {"toppled", s.toppled},
          {"failure_reason", s.failure_reason},
          {"ticks", s.ticks},
          {"per_brick_final_poses", poses}};
}

TrialSummary summary_from_json(const json& j) {
  TrialSummary s;
  s.success = j.at("success").get<bool>();
  s.bricks_placed = j.at("bricks_placed").get<int>();
  s.toppled = j.at("toppled").get<bool>();
  s.failure_reason = j.at("failure_reason").get<std::string>();
  s.ticks = j.at("ticks").get<std::int64_t>();
  for (const json& p : j.at("per_brick_final_poses")) {
    s.final_poses.push_back({p.at("slot").get<int>(), p.at("brick_id").get<int>(), pose_from_json(p.at("pose")),
                             vec3_from_json(p.at("half_extents")), status_from(p.at("status").get<std::string>())});
  }
  return s;
}

std::vector<std::string> jsonl_lines(const TrialLog& log) {
  std::vector<std::string> lines;
  lines.reserve(log.records.size() + 2);
  lines.push_back(to_json(log.header).dump());
  for (const LogRecord& r : log.records) lines.push_back(to_json(r).dump());
  lines.push_back(to_json(log.summary).dump());
  return lines;
}

std::string to_jsonl(const TrialLog& log) {
  std::string out;
  for (const std::string& l : jsonl_lines(log)) {
    out += l;
    out += '\n';
  }
  return out;
}

TrialLog trial_log_from_jsonl(const std::string& text) {
  TrialLog log;
  bool have_header = false;
  bool have_summary = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        log.header = header_from_json(j);
        have_header = true;
      } else if (type == "record") {
        log.records.push_back(record_from_json(j));
      } else if (type == "summary") {
        log.summary = summary_from_json(j);
        have_summary = true;
      } else {
        throw ParseError("unknown line type " + type);
      }
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header || !have_summary) throw ParseError("trial log needs a header and a summary line");
  return log;
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

Config load_config(const std::string& path) {
  const std::string text = load_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace brickstack
