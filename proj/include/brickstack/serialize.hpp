#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "brickstack/agents.hpp"
#include "brickstack/config.hpp"
#include "brickstack/world.hpp"

namespace brickstack {

using json = nlohmann::json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const Vec3& v);
json to_json(const Vec2& v);
json to_json(const Pose& p);
json to_json(const SceneState& s);
json to_json(const Goal& g);
json to_json(const Waypoint& w);
json to_json(const Event& e);
json to_json(const ToolResult& t);
json to_json(const Memory& m);
json to_json(const Config& c);
json to_json(const LogRecord& r);
json to_json(const TrialHeader& h);
json to_json(const TrialSummary& s);

Vec3 vec3_from_json(const json& j);
Vec2 vec2_from_json(const json& j);
Pose pose_from_json(const json& j);
SceneState scene_from_json(const json& j);
Goal goal_from_json(const json& j);
Waypoint waypoint_from_json(const json& j);
Event event_from_json(const json& j);
ToolResult tool_result_from_json(const json& j);
Memory memory_from_json(const json& j);
/// Missing keys keep their defaults; the result is validated.
Config config_from_json(const json& j);
LogRecord record_from_json(const json& j);
TrialHeader header_from_json(const json& j);
TrialSummary summary_from_json(const json& j);

/// One JSON object per line: header, records, summary.  Keys are sorted.
std::string to_jsonl(const TrialLog& log);
std::vector<std::string> jsonl_lines(const TrialLog& log);
TrialLog trial_log_from_jsonl(const std::string& text);

Config load_config(const std::string& path);
void save_text(const std::string& path, const std::string& text);
std::string load_text(const std::string& path);

}  // namespace brickstack
