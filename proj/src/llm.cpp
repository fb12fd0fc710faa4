#include <cstdlib>

#include "brickstack/reasoner.hpp"
#include "brickstack/serialize.hpp"
#include "brickstack/tools.hpp"

#include <httplib.h>

namespace brickstack {

namespace {

constexpr const char* kSystemPrompt =
    "You plan end-effector waypoints for a parallel-jaw gripper stacking bricks. Use the tools in KNOWLEDGE when "
    "unsure, then reply with exactly one JSON object following OUTPUT FORMAT. Poses are metres with unit "
    "quaternions [w, x, y, z].";

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw std::invalid_argument("endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

const nlohmann::json* scripted(const nlohmann::json& script, const ChatRequest& req) {
  if (!script.contains("responses")) return nullptr;
  for (const nlohmann::json& r : script.at("responses")) {
    if (r.value("cycle", -1) == req.cycle && r.value("agent", -1) == req.agent &&
        r.value("attempt", -1) == req.attempt) {
      return &r;
    }
  }
  return nullptr;
}

}  // namespace

HttpTransport::HttpTransport(std::string endpoint, std::string api_key, double timeout_s)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

std::string HttpTransport::complete(const ChatRequest& request) {
  Endpoint ep;
  try {
    ep = split_endpoint(endpoint_);
  } catch (const std::invalid_argument& e) {
    throw TransportError(e.what());
  }
  httplib::Client client(ep.base);
  if (!client.is_valid()) throw TransportError("unsupported endpoint " + endpoint_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  nlohmann::json messages = nlohmann::json::array();
  for (const ChatMessage& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  const nlohmann::json body = {{"model", request.model}, {"messages", messages}, {"temperature", request.temperature}};
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected response body: ") + e.what());
  }
}

MockTransport::MockTransport(nlohmann::json script, Config cfg) : script_(std::move(script)), cfg_(std::move(cfg)) {}

std::unique_ptr<MockTransport> MockTransport::from_file(const std::string& path, const Config& cfg) {
  try {
    return std::make_unique<MockTransport>(nlohmann::json::parse(load_text(path)), cfg);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string MockTransport::complete(const ChatRequest& request) {
  ++requests_;
  if (const nlohmann::json* r = scripted(script_, request)) {
    if (r->value("transport_error", false)) throw TransportError("scripted transport failure");
    const auto& c = r->at("content");
    return c.is_string() ? c.get<std::string>() : c.dump();
  }
  if (script_.value("default", std::string("rules")) != "rules") throw TransportError("no scripted reply");

  // Answer like a competent planner: read the prompt back and apply the rules.
  const ChatMessage* prompt = nullptr;
  for (const ChatMessage& m : request.messages)
    if (m.role == "user" && m.content.rfind("### ENVIRONMENT", 0) == 0) prompt = &m;
  if (!prompt) throw TransportError("mock could not find the prompt");
  nlohmann::json env;
  nlohmann::json mem;
  for (const auto& [title, body] : split_rendered_prompt(prompt->content)) {
    if (title == "ENVIRONMENT") env = nlohmann::json::parse(body);
    if (title == "MEMORY") mem = nlohmann::json::parse(body);
  }
  const SceneState scene = scene_from_json(env.at("scene"));
  const Memory memory = memory_from_json(mem.at("memory"));
  const Goal goal = goal_from_json(mem.at("goal"));
  const int agent = mem.at("agent").get<int>();
  Proposal p;
  try {
    p = rule_proposal(agent, scene, goal, memory, cfg_);
  } catch (const InfeasibleAction& e) {
    return std::string("I cannot find an admissible action: ") + e.what();
  }
  PolicyResponse r;
  r.rationale = p.rationale;
  r.output = p.waypoints;
  r.sigma = p.claimed_sigma;
  return serialize_response(r);
}

std::unique_ptr<Transport> make_transport(const LlmConfig& llm, const Config& full) {
  if (!llm.mock_script.empty()) return MockTransport::from_file(llm.mock_script, full);
  if (llm.endpoint.empty()) throw std::invalid_argument("llm endpoint is not configured");
  const char* key = std::getenv(llm.api_key_env.c_str());
  return std::make_unique<HttpTransport>(llm.endpoint, key ? key : "", llm.timeout_s);
}

LlmProposer::LlmProposer(std::unique_ptr<Transport> transport, LlmConfig cfg, bool single_agent)
    : transport_(std::move(transport)), cfg_(std::move(cfg)), single_agent_(single_agent) {}

Proposal LlmProposer::propose(int agent, const SceneState& perceived, const Goal& goal, const Memory& memory,
                              const Config& cfg, std::vector<PolicyEvent>& events) {
  const PromptBundle bundle = single_agent_ ? build_single_agent_prompt(perceived, goal, memory, cfg.tolerances)
                                            : build_prompt(agent, perceived, goal, memory, cfg.tolerances);
  ChatRequest req;
  req.model = cfg_.model;
  req.messages = {{"system", kSystemPrompt}, {"user", bundle.render()}};
  req.cycle = memory.cycle;
  req.agent = agent;

  const ToolContext ctx{perceived, goal, memory, cfg};
  std::vector<ToolResult> tool_results;
  auto fallback = [&](const std::string& why) {
    events.push_back({"fallback", why});
    Proposal p = rule_proposal(agent, perceived, goal, memory, cfg);
    p.rationale = "rule fallback: " + p.rationale;
    p.tool_results.insert(p.tool_results.begin(), tool_results.begin(), tool_results.end());
    return p;
  };

  int reprompts = 0;
  int rounds = 0;
  for (int attempt = 0;; ++attempt) {
    req.attempt = attempt;
    std::string raw;
    try {
      raw = transport_->complete(req);
    } catch (const TransportError& e) {
      return fallback(std::string("transport: ") + e.what());
    }

    PolicyResponse r;
    try {
      r = parse_response(raw, agent, perceived.workspace);
    } catch (const ResponseError& e) {
      if (reprompts >= 1) return fallback(std::string("unparseable after re-prompt: ") + to_string(e.kind()));
      ++reprompts;
      events.push_back({"reprompt", std::string(to_string(e.kind())) + ": " + e.what()});
      req.messages.push_back({"assistant", raw});
      req.messages.push_back({"user", std::string("Your reply was rejected (") + to_string(e.kind()) + ": " +
                                          e.what() + "). Reply again with one JSON object following OUTPUT FORMAT."});
      continue;
    }

    if (const auto* call = std::get_if<ToolCall>(&r.output)) {
      if (rounds >= cfg_.max_tool_rounds) return fallback("tool-round budget exhausted");
      ++rounds;
      ToolResult tr;
      try {
        tr = invoke_tool(call->name, call->args, ctx);
      } catch (const std::exception& e) {
        tr = {call->name, false, 0.0, e.what()};
      }
      events.push_back({"tool_call", call->name + " -> " + (tr.verdict ? "true" : "false")});
      tool_results.push_back(tr);
      req.messages.push_back({"assistant", raw});
      req.messages.push_back({"user", "TOOL RESULT " + to_json(tr).dump()});
      continue;
    }

    Proposal p;
    p.rationale = r.rationale;
    p.waypoints = std::get<std::vector<Waypoint>>(r.output);
    p.tool_results = std::move(tool_results);
    p.claimed_sigma = r.sigma;
    return p;
  }
}

}  // namespace brickstack
