#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "brickstack/agents.hpp"

namespace brickstack {

// --- prompts ---------------------------------------------------------------

struct PromptBundle {
  int agent = 0;  // 0 for the merged single-agent prompt
  std::string environment;  // JSON text
  std::string memory;       // JSON text
  std::string role;
  std::vector<nlohmann::json> knowledge;  // tool descriptors
  std::vector<std::string> thinking_chain;
  std::string output_schema;  // JSON schema text

  /// Section titles and bodies in prompt order.
  std::vector<std::pair<std::string, std::string>> sections() const;
  std::string render() const;
};

PromptBundle build_prompt(int agent, const SceneState& scene, const Goal& goal, const Memory& memory,
                          const Tolerances& tol);

/// One prompt holding every stage's role and thinking chain; used once per
/// waypoint by the single-agent variant.
PromptBundle build_single_agent_prompt(const SceneState& scene, const Goal& goal, const Memory& memory,
                                       const Tolerances& tol);

/// Splits a rendered prompt back into its sections.
std::vector<std::pair<std::string, std::string>> split_rendered_prompt(const std::string& text);

std::string output_schema_text();

// --- responses -------------------------------------------------------------

struct ToolCall {
  std::string name;
  nlohmann::json args = nlohmann::json::object();
  bool operator==(const ToolCall&) const = default;
};

struct PolicyResponse {
  std::string rationale;
  std::variant<std::vector<Waypoint>, ToolCall> output;
  bool sigma = false;
  nlohmann::json memory_update = nlohmann::json::object();
};

enum class ResponseErrorKind { MalformedJson, SchemaViolation, UnknownTool, OutOfBounds };
const char* to_string(ResponseErrorKind kind);

class ResponseError : public std::runtime_error {
 public:
  ResponseError(ResponseErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ResponseErrorKind kind() const { return kind_; }

 private:
  ResponseErrorKind kind_;
};

/// Strict parse against the output schema.  Waypoints get `agent` as their
/// phase and must carry unit quaternions inside `workspace`.
PolicyResponse parse_response(const std::string& raw, int agent, const Workspace& workspace);
std::string serialize_response(const PolicyResponse& response);

/// Rule proposal for stage `agent` with σ computed by local verification.
PolicyResponse rule_policy(int agent, const SceneState& scene, const Goal& goal, const Memory& memory,
                           const Config& cfg);

// --- transport -------------------------------------------------------------

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int cycle = 0;
  int agent = 0;
  int attempt = 0;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the assistant message content.  Throws TransportError.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Chat-completions style JSON over HTTP(S).
class HttpTransport : public Transport {
 public:
  HttpTransport(std::string endpoint, std::string api_key, double timeout_s);
  std::string complete(const ChatRequest& request) override;

 private:
  std::string endpoint_;
  std::string api_key_;
  double timeout_s_;
};

/// Offline endpoint.  Replies come from a script keyed by (cycle, agent,
/// attempt); unscripted requests are answered by the rule policy applied to
/// the scene and memory embedded in the prompt.
class MockTransport : public Transport {
 public:
  MockTransport(nlohmann::json script, Config cfg);
  static std::unique_ptr<MockTransport> from_file(const std::string& path, const Config& cfg);
  std::string complete(const ChatRequest& request) override;
  int requests() const { return requests_; }

 private:
  nlohmann::json script_;
  Config cfg_;
  int requests_ = 0;
};

std::unique_ptr<Transport> make_transport(const LlmConfig& cfg, const Config& full);

/// Proposer backed by a chat model with a bounded tool-call loop.  Any
/// transport failure, exhausted tool budget or second unparseable reply falls
/// back to the rule proposal for that step.
class LlmProposer : public Proposer {
 public:
  LlmProposer(std::unique_ptr<Transport> transport, LlmConfig cfg, bool single_agent = false);
  std::string name() const override { return "llm"; }
  Proposal propose(int agent, const SceneState& perceived, const Goal& goal, const Memory& memory,
                   const Config& cfg, std::vector<PolicyEvent>& events) override;

 private:
  std::unique_ptr<Transport> transport_;
  LlmConfig cfg_;
  bool single_agent_;
};

}  // namespace brickstack
