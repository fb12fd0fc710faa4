#pragma once

#include <string>

#include "brickstack/geometry.hpp"

namespace brickstack {

/// Gate thresholds.  Every comparison against these is inclusive.
struct Tolerances {
  double c_min = 0.02;            // m, minimum clearance at the approach pose
  double grip_clearance = 0.02;   // m, extra opening beyond the brick width (δ)
  double f_min = 5.0;             // N, per-finger normal force for a stable grasp
  double grasp_pose_eps = 0.003;  // m, ε_g
  double h_safe = 0.25;           // m, lift / transit height of the tool point
  double v_th = 0.01;             // m/s, brick-vs-gripper speed that counts as slip
  double mu = 0.5;                // estimated friction coefficient
  double raise_dh = 0.03;         // m, Δh for placement retries
  double eps_perp = 0.002;        // m, ε_⊥
  double eps_xy = 0.005;          // m
  double eps_theta_deg = 2.0;     // deg
  double eps_goal = 0.01;         // m, goal-progress tolerance ε
  int max_retries = 3;

  void validate() const;
};

struct Workspace {
  Vec3 min = Vec3(-0.6, -0.6, 0.0);
  Vec3 max = Vec3(0.6, 0.6, 0.6);

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  /// Largest distance by which p lies outside the box (0 when inside).
  double violation(const Vec3& p) const;
};

struct WorldConfig {
  Workspace workspace;
  Vec3 brick_half_extents = Vec3(0.10, 0.05, 0.03);
  double brick_mass = 1.0;
  int brick_count = 6;

  double gripper_max_width = 0.15;
  double finger_depth = 0.04;
  double finger_thickness = 0.01;
  double finger_half_height = 0.03;
  double palm_half_depth = 0.03;
  double palm_height = 0.04;

  double contact_stiffness = 1e4;  // N/m, k_c
  double grip_squeeze = 1.5e-3;    // m, per-finger penetration after closing
  double secure_force = 5.0;       // N, GraspSecured event threshold
  double friction = 0.5;           // true friction used by the slip model
  double gravity = 9.81;
  double lift_acceleration = 0.0;  // m/s², optional inertial term of the tangential load

  double translation_step = 0.005;  // m per servo tick
  double rotation_step_deg = 1.0;   // deg per servo tick
  double servo_period = 0.01;       // s
  double contact_tolerance = 1e-4;  // m
  double support_margin = 0.002;    // m

  double min_initial_separation = 0.03;  // m between randomized bricks
  double goal_clearance = 0.10;          // m kept free around the goal footprint
  Pose goal_base = Pose::identity();
  Pose ready_pose = Pose::from_translation(Vec3(0.0, 0.0, 0.45));
};

/// Cost weights for candidate selection.
struct SelectionWeights {
  double path_length = 1.0;
  double clearance = 0.5;
  double alignment = 2.0;
  double clearance_cap = 0.10;
};

struct PipelineConfig {
  double approach_height = 0.15;     // m above the brick top
  double place_overshoot = 0.01;     // m commanded below the slot so descent stops on contact
  double reach_cone_deg = 30.0;      // allowed tilt of the approach axis from -z
  double perturb_offset = 0.02;      // m, lateral candidate perturbation
  double perturb_yaw_deg = 5.0;      // deg, rotational candidate perturbation
  double alignment_yaw_weight = 0.001;  // m per degree in the alignment cost
};

struct LlmConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model = "gpt-4o";
  std::string api_key_env = "BRICKSTACK_LLM_API_KEY";
  double timeout_s = 60.0;
  int max_tool_rounds = 8;
  std::string mock_script;  // fixture file of scripted replies; used instead of HTTP when set
};

struct Config {
  Tolerances tolerances;
  WorldConfig world;
  SelectionWeights selection;
  PipelineConfig pipeline;
  LlmConfig llm;
};

}  // namespace brickstack
