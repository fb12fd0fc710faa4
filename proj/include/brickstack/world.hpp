#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brickstack/config.hpp"
#include "brickstack/geometry.hpp"

namespace brickstack {

inline constexpr int kGripperBody = -1;
inline constexpr int kGroundBody = -2;

enum class BrickStatus { Free, Grasped, Placed };

struct Brick {
  int id = 0;
  Vec3 half_extents = Vec3(0.10, 0.05, 0.03);
  double mass = 1.0;
  Pose pose;
  BrickStatus status = BrickStatus::Free;
  /// Error of the initial perception snapshot for this brick.  Only applied
  /// while the scene has not executed a waypoint yet.
  Pose perception_error;

  Obb obb() const { return {pose, half_extents}; }
};

struct GripperState {
  Pose pose;
  double width = 0.15;
  double max_width = 0.15;
  double finger_depth = 0.04;
  std::optional<int> attached_brick;
  double grip_normal_force = 0.0;  // per finger, N
  Pose attach_offset;              // brick pose in the gripper frame while grasped
};

/// Deterministic fault injectors carried with the scene so replay sees them.
struct Faults {
  Vec2 placement_bias = Vec2::Zero();  // m, added to executed placement-phase targets
  int weak_grasp_skip = 0;             // grasps to let through before weakening
  int weak_grasp_count = 0;            // grasps still to weaken
  double weak_grasp_total_force = 15.0;  // N summed over both fingers
};

struct SceneState {
  std::vector<Brick> bricks;
  GripperState gripper;
  std::int64_t tick = 0;
  Workspace workspace;
  Faults faults;
  int grasp_count = 0;

  const Brick& brick(int id) const;
  Brick& brick(int id);
  const Brick* held_brick() const;
};

enum class Pattern { Pyramid, Grid };

struct Slot {
  int index = 0;
  int layer = 0;
  Pose pose;
  Vec3 half_extents = Vec3(0.10, 0.05, 0.03);

  Obb obb() const { return {pose, half_extents}; }
};

struct Goal {
  Pattern pattern = Pattern::Pyramid;
  double gap = 0.05;
  std::vector<Slot> slots;  // bottom layer first
};

double default_gap(Pattern pattern);

struct GripperCommand {
  enum class Kind { Hold, OpenTo, Close };
  Kind kind = Kind::Hold;
  double width = 0.0;  // OpenTo only

  static GripperCommand hold() { return {}; }
  static GripperCommand open_to(double w) { return {Kind::OpenTo, w}; }
  static GripperCommand close() { return {Kind::Close, 0.0}; }
  bool operator==(const GripperCommand&) const = default;
};

struct Waypoint {
  Pose target;
  GripperCommand command;
  int phase = 1;  // agent stage 1..6 that produced it
};

struct ContactReport {
  int body_a = kGripperBody;
  int body_b = 0;
  double penetration = 0.0;
  Vec3 normal = Vec3::UnitZ();
  double normal_force = 0.0;
  double tangential_load = 0.0;
};

enum class EventKind { ContactMade, GraspSecured, SlipDetected, CollisionDetected, ReleaseSettled, Toppled };

struct Event {
  EventKind kind = EventKind::ContactMade;
  std::int64_t tick = 0;
  int body_a = kGripperBody;
  int body_b = kGroundBody;
  std::string detail;
};

const char* to_string(EventKind kind);
const char* to_string(BrickStatus status);
const char* to_string(Pattern pattern);
Pattern pattern_from_string(const std::string& s);

struct StepResult {
  SceneState scene;
  std::vector<ContactReport> contacts;
  std::vector<Event> events;
  double max_relative_speed = 0.0;  // m/s, held brick vs gripper
  bool halted = false;
};

// --- gripper geometry ------------------------------------------------------

struct GripperBoxes {
  Obb palm;
  Obb finger_left;   // -y side of the gripper frame
  Obb finger_right;  // +y side
};

GripperBoxes gripper_boxes(const WorldConfig& cfg, const Pose& pose, double width);

/// Extent of a brick along the gripper closing axis.
double brick_width_in_gripper(const Brick& brick, const Pose& gripper_pose);

/// Obstacle set for collision queries: every brick not in `ignore` plus the
/// ground slab.  Body ids are kept alongside.
struct Obstacle {
  int body;
  Obb box;
};
std::vector<Obstacle> obstacles(const SceneState& scene, const std::vector<int>& ignore = {});
Obb ground_box();

// --- operations ------------------------------------------------------------

SceneState initial_scene(const WorldConfig& cfg);

Goal generate_goal(Pattern pattern, const Vec3& brick_half_extents, double gap, const Pose& base_pose,
                   int brick_count = 6);

/// Uniform random (x, y, yaw) on the ground for every brick, rejection
/// sampled.  Throws std::runtime_error after 10,000 rejections.
SceneState randomize_initial(const SceneState& scene, const Goal& goal, std::uint64_t seed,
                             const WorldConfig& cfg);

/// Draws a fixed initial-perception error per brick: N(0, sigma) in x and y
/// and N(0, sigma / half_length) in yaw.
void apply_perception_noise(SceneState& scene, double sigma, std::uint64_t seed);

/// What the planner observes.  Before the first executed waypoint the Free
/// bricks carry their initial perception error; afterwards perception is exact.
SceneState perceive(const SceneState& scene);

int plan_ticks(const Pose& from, const Pose& to, const WorldConfig& cfg = {});

double contact_force(double penetration, const WorldConfig& cfg = {});

StepResult step(const SceneState& scene, const Waypoint& waypoint, const WorldConfig& cfg);

std::pair<SceneState, std::vector<Event>> settle_release(const SceneState& scene, const WorldConfig& cfg);

/// Vertical gap between the brick's lowest point and whatever supports it
/// (ground or other bricks overlapping its footprint).  Never negative.
double support_gap(const SceneState& scene, int brick_id);

/// Largest SAT penetration among pairs of non-grasped bricks and the ground.
double max_brick_penetration(const SceneState& scene);

}  // namespace brickstack
