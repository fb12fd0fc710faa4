#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "brickstack/checks.hpp"
#include "brickstack/config.hpp"
#include "brickstack/world.hpp"

namespace brickstack {

inline constexpr int kAgentCount = 6;

struct Assignment {
  int slot = 0;
  int brick = 0;
  bool operator==(const Assignment&) const = default;
};

/// Shared memory carried between stages.
struct Memory {
  int cycle = 0;  // 1-based once the first brick is assigned
  int slot_index = 0;
  std::vector<int> completed;
  int current_brick = -1;
  int current_step = 1;
  std::array<int, kAgentCount + 1> retry_counters{};  // index 1..6
  std::array<bool, kAgentCount + 1> step_flags{};
  Vec2 place_correction_xy = Vec2::Zero();
  double place_correction_yaw_deg = 0.0;
  std::vector<Assignment> assignments;
  bool failed = false;
  bool done = false;
};

/// Raised when a stage cannot produce any admissible action (for example a
/// brick wider than the gripper opening).
class InfeasibleAction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Proposal {
  std::string rationale;
  std::vector<Waypoint> waypoints;
  std::vector<ToolResult> tool_results;
  bool claimed_sigma = true;
};

struct PolicyEvent {
  std::string kind;  // tool_call, reprompt, fallback
  std::string detail;
};

/// Source of stage proposals.  Verification and execution stay local.
class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::string name() const = 0;
  virtual Proposal propose(int agent, const SceneState& perceived, const Goal& goal, const Memory& memory,
                           const Config& cfg, std::vector<PolicyEvent>& events) = 0;
};

// --- candidate selection ---------------------------------------------------

struct CostTerms {
  double path_length = 0.0;
  double clearance = 0.0;
  double alignment = 0.0;
};

struct CandidateAction {
  Waypoint waypoint;
  CostTerms cost;
};

/// Candidates passing collision-free path, clearance, reachability and goal
/// progress, in input order.
std::vector<CandidateAction> feasible_set(const SceneState& scene, const Goal& goal,
                                          const std::vector<CandidateAction>& candidates, const Memory& memory,
                                          const Config& cfg);

double selection_cost(const CostTerms& c, const SelectionWeights& w);

/// Index of the minimum-cost candidate; ties go to the lowest index.
/// Throws std::invalid_argument on an empty set.
std::size_t select_action(const std::vector<CandidateAction>& feasible, const SelectionWeights& w);

// --- stages ----------------------------------------------------------------

struct AgentMessage {
  int agent = 0;
  std::string rationale;
  std::optional<Pose> proposal;
  std::vector<ToolResult> constraints;
};

struct AgentOutcome {
  AgentMessage message;
  bool sigma = false;
  std::vector<Waypoint> executed;
  SceneState scene;
  Memory memory;
  std::vector<Event> events;
  std::vector<ContactReport> contacts;
  std::optional<AlignmentError> alignment;  // placement stage, when in contact
};

/// Rule-based proposal for stage `agent` (1..6) from a perceived scene.
Proposal rule_proposal(int agent, const SceneState& perceived, const Goal& goal, const Memory& memory,
                       const Config& cfg);

/// Checks a proposal with the local tools, executes it on the true scene and
/// computes the stage gate.
AgentOutcome verify_and_execute(int agent, const SceneState& scene, const Goal& goal, const Memory& memory,
                                const Proposal& proposal, const Config& cfg);

/// Executes waypoints in order without any gate, stopping at a collision.
AgentOutcome execute_unchecked(int agent, const SceneState& scene, const Memory& memory,
                               const std::vector<Waypoint>& waypoints, const Config& cfg);

AgentOutcome agent1_pregrasp(const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg);
AgentOutcome agent2_descend(const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg);
AgentOutcome agent3_grasp(const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg);
AgentOutcome agent4_lift(const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg);
AgentOutcome agent5_place(const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg);
AgentOutcome agent6_release(const SceneState& scene, const Goal& goal, const Memory& memory, const Config& cfg);

/// Yaw for a top-down grasp across the brick's short side, folded into (-90°, 90°].
double grasp_yaw(const Brick& brick);

// --- trial log -------------------------------------------------------------

enum class RecordKind { Agent, Raise, RetractFallback, Failure, SingleAgent, Scripted };
const char* to_string(RecordKind kind);
RecordKind record_kind_from_string(const std::string& s);

struct LogRecord {
  RecordKind kind = RecordKind::Agent;
  std::int64_t tick = 0;
  int cycle = 0;
  int agent = 0;
  std::optional<bool> sigma;
  std::optional<bool> claimed_sigma;
  std::vector<Waypoint> waypoints;  // proposed
  std::vector<Waypoint> executed;
  std::vector<ToolResult> tool_results;
  std::optional<std::string> retry_edge;
  std::vector<Event> events;
  std::vector<PolicyEvent> policy_events;
  std::string rationale;
  std::string reason;
  std::optional<double> z_before;
  std::optional<double> z_after;
  std::optional<SceneState> scene_before;
  std::optional<Memory> memory_before;
};

struct FinalBrickPose {
  int slot = 0;
  int brick_id = 0;
  Pose pose;
  Vec3 half_extents = Vec3::Zero();
  BrickStatus status = BrickStatus::Free;
};

struct TrialSummary {
  bool success = false;
  int bricks_placed = 0;
  bool toppled = false;
  std::string failure_reason;
  std::int64_t ticks = 0;
  std::vector<FinalBrickPose> final_poses;
};

struct TrialHeader {
  std::string policy;  // multi_agent, single_agent, classical
  std::string proposer = "rules";
  int trial = 0;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  Goal goal;
  Config config;
};

struct TrialLog {
  TrialHeader header;
  std::vector<LogRecord> records;
  TrialSummary summary;
};

enum class PipelineMode { Gated, Ungated };

/// Runs brick cycles until every slot is filled or a stage fails.
TrialLog run_pipeline(const SceneState& scene, const Goal& goal, Proposer& proposer, const Config& cfg,
                      PipelineMode mode = PipelineMode::Gated);

/// Continues a pipeline from a stage boundary, appending to `log`.
void continue_pipeline(SceneState scene, Memory memory, const Goal& goal, Proposer& proposer, const Config& cfg,
                       PipelineMode mode, TrialLog& log);

TrialSummary summarize(const SceneState& final_scene, const Goal& goal, const Memory& memory,
                       const std::vector<LogRecord>& records);

/// Rule proposals wrapped as a Proposer.
class RuleProposer : public Proposer {
 public:
  std::string name() const override { return "rules"; }
  Proposal propose(int agent, const SceneState& perceived, const Goal& goal, const Memory& memory,
                   const Config& cfg, std::vector<PolicyEvent>& events) override;
};

}  // namespace brickstack
