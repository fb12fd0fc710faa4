#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "brickstack/agents.hpp"
#include "brickstack/checks.hpp"

namespace brickstack {

struct ToolParam {
  std::string name;
  std::string type;  // pose, number, integer, boolean
  std::string unit;
  std::string doc;
  bool required = true;
};

struct ToolDescriptor {
  std::string name;
  std::string doc;
  std::vector<ToolParam> params;
  std::string returns;
};

/// State a tool call is evaluated against.
struct ToolContext {
  const SceneState& scene;
  const Goal& goal;
  const Memory& memory;
  const Config& cfg;
};

const std::vector<ToolDescriptor>& tool_registry();
const ToolDescriptor* find_tool(std::string_view name);
nlohmann::json descriptor_json(const ToolDescriptor& d);

/// Tools listed in the knowledge section for each stage.
std::vector<std::string> agent_tools(int agent);

/// Throws std::invalid_argument for a missing, mistyped or unknown argument.
void validate_tool_args(const ToolDescriptor& d, const nlohmann::json& args);

/// Throws std::out_of_range for an unknown tool.
ToolResult invoke_tool(const std::string& name, const nlohmann::json& args, const ToolContext& ctx);

}  // namespace brickstack
