#pragma once

#include <vector>

#include "brickstack/agents.hpp"
#include "brickstack/reasoner.hpp"

namespace brickstack {

inline constexpr double kScriptedReleaseDrop = 0.005;  // m above the slot

/// Approach, open-descend, close, lift, transit, descend, open, retract.
std::vector<Waypoint> scripted_plan(const Brick& perceived_brick, const Slot& slot, const Config& cfg);

/// Open-loop controller: every brick's plan is computed from the initial
/// perceived scene and executed without checks or retries.
TrialLog classical_controller(const SceneState& scene, const Goal& goal, const Config& cfg);

/// Rule proposal for the stage named by memory.current_step, with no gate.
PolicyResponse single_agent_policy(const SceneState& scene, const Goal& goal, const Memory& memory,
                                   const Config& cfg);

/// Runs the ungated pipeline with the given proposer.
TrialLog single_agent_trial(const SceneState& scene, const Goal& goal, Proposer& proposer, const Config& cfg);

}  // namespace brickstack
