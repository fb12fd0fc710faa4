#include "brickstack/world.hpp"

#include "world_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace brickstack {

const Brick& SceneState::brick(int id) const {
  for (const Brick& b : bricks)
    if (b.id == id) return b;
  throw std::out_of_range("no brick with id " + std::to_string(id));
}

Brick& SceneState::brick(int id) {
  return const_cast<Brick&>(static_cast<const SceneState&>(*this).brick(id));
}

const Brick* SceneState::held_brick() const {
  if (!gripper.attached_brick) return nullptr;
  return &brick(*gripper.attached_brick);
}

double Workspace::violation(const Vec3& p) const {
  double v = 0.0;
  for (int i = 0; i < 3; ++i) v = std::max({v, min[i] - p[i], p[i] - max[i]});
  return v;
}

double default_gap(Pattern pattern) { return pattern == Pattern::Pyramid ? 0.05 : 0.02; }

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ContactMade: return "ContactMade";
    case EventKind::GraspSecured: return "GraspSecured";
    case EventKind::SlipDetected: return "SlipDetected";
    case EventKind::CollisionDetected: return "CollisionDetected";
    case EventKind::ReleaseSettled: return "ReleaseSettled";
    case EventKind::Toppled: return "Toppled";
  }
  return "?";
}

const char* to_string(BrickStatus status) {
  switch (status) {
    case BrickStatus::Free: return "Free";
    case BrickStatus::Grasped: return "Grasped";
    case BrickStatus::Placed: return "Placed";
  }
  return "?";
}

const char* to_string(Pattern pattern) { return pattern == Pattern::Pyramid ? "pyramid" : "grid"; }

Pattern pattern_from_string(const std::string& s) {
  if (s == "pyramid") return Pattern::Pyramid;
  if (s == "grid") return Pattern::Grid;
  throw std::invalid_argument("unsupported pattern: " + s);
}

GripperBoxes gripper_boxes(const WorldConfig& cfg, const Pose& pose, double width) {
  const double t = cfg.finger_thickness;
  const Vec3 finger_half(cfg.finger_depth / 2.0, t / 2.0, cfg.finger_half_height);
  const Vec3 palm_half(cfg.palm_half_depth, width / 2.0 + t, cfg.palm_height / 2.0);
  auto place = [&](const Vec3& local, const Vec3& half) {
    return Obb(pose * local, pose.rotation, half);
  };
  return {place(Vec3(0.0, 0.0, cfg.finger_half_height + cfg.palm_height / 2.0), palm_half),
          place(Vec3(0.0, -(width / 2.0 + t / 2.0), 0.0), finger_half),
          place(Vec3(0.0, width / 2.0 + t / 2.0, 0.0), finger_half)};
}

double brick_width_in_gripper(const Brick& brick, const Pose& gripper_pose) {
  const Vec3 gy = gripper_pose.rotation * Vec3::UnitY();
  const auto ax = brick.obb().axes();
  double extent = 0.0;
  for (int i = 0; i < 3; ++i) extent += 2.0 * brick.half_extents[i] * std::abs(ax[i].dot(gy));
  return extent;
}

Obb ground_box() { return Obb(Vec3(0.0, 0.0, -1.0), Rotation(), Vec3(50.0, 50.0, 1.0)); }

std::vector<Obstacle> obstacles(const SceneState& scene, const std::vector<int>& ignore) {
  std::vector<Obstacle> out;
  out.reserve(scene.bricks.size() + 1);
  for (const Brick& b : scene.bricks) {
    if (std::find(ignore.begin(), ignore.end(), b.id) != ignore.end()) continue;
    out.push_back({b.id, b.obb()});
  }
  out.push_back({kGroundBody, ground_box()});
  return out;
}

SceneState initial_scene(const WorldConfig& cfg) {
  SceneState s;
  s.workspace = cfg.workspace;
  for (int i = 0; i < cfg.brick_count; ++i) {
    Brick b;
    b.id = i;
    b.half_extents = cfg.brick_half_extents;
    b.mass = cfg.brick_mass;
    b.pose = Pose::from_translation(Vec3(0.0, 0.0, cfg.brick_half_extents.z()));
    s.bricks.push_back(b);
  }
  s.gripper.pose = cfg.ready_pose;
  s.gripper.width = cfg.gripper_max_width;
  s.gripper.max_width = cfg.gripper_max_width;
  s.gripper.finger_depth = cfg.finger_depth;
  return s;
}

Goal generate_goal(Pattern pattern, const Vec3& h, double gap, const Pose& base_pose, int brick_count) {
  if (!(gap >= 0.0)) throw std::invalid_argument("goal gap must be non-negative");
  if (brick_count != 6) throw std::invalid_argument("goal patterns are defined for 6 bricks");
  if (!(h.array() > 0.0).all()) throw std::invalid_argument("brick half extents must be positive");

  const std::vector<int> layers =
      pattern == Pattern::Pyramid ? std::vector<int>{3, 2, 1} : std::vector<int>{3, 3};
  const double pitch = 2.0 * h.x() + gap;

  Goal goal;
  goal.pattern = pattern;
  goal.gap = gap;
  int index = 0;
  for (int layer = 0; layer < static_cast<int>(layers.size()); ++layer) {
    const int n = layers[layer];
    for (int i = 0; i < n; ++i) {
      const double x = (i - (n - 1) / 2.0) * pitch;
      const double z = h.z() + layer * 2.0 * h.z();
      Slot slot;
      slot.index = index++;
      slot.layer = layer;
      slot.half_extents = h;
      slot.pose = base_pose * Pose::from_translation(Vec3(x, 0.0, z));
      goal.slots.push_back(slot);
    }
  }
  return goal;
}

SceneState randomize_initial(const SceneState& scene, const Goal& goal, std::uint64_t seed,
                             const WorldConfig& cfg) {
  SceneState out = scene;
  std::mt19937_64 rng(seed);

  // Region kept clear around the goal, as an xy bounding box.
  Vec2 goal_lo(1e9, 1e9);
  Vec2 goal_hi(-1e9, -1e9);
  for (const Slot& slot : goal.slots) {
    for (const Vec2& p : footprint(slot.obb())) {
      goal_lo = goal_lo.cwiseMin(p);
      goal_hi = goal_hi.cwiseMax(p);
    }
  }
  goal_lo.array() -= cfg.goal_clearance;
  goal_hi.array() += cfg.goal_clearance;

  int rejections = 0;
  std::vector<Obb> placed;
  for (Brick& b : out.bricks) {
    const double radius = b.half_extents.head<2>().norm();
    const Vec3& lo = out.workspace.min;
    const Vec3& hi = out.workspace.max;
    if (lo.x() + radius > hi.x() - radius || lo.y() + radius > hi.y() - radius) {
      throw std::runtime_error("workspace too small to place bricks");
    }
    std::uniform_real_distribution<double> ux(lo.x() + radius, hi.x() - radius);
    std::uniform_real_distribution<double> uy(lo.y() + radius, hi.y() - radius);
    std::uniform_real_distribution<double> uyaw(-std::numbers::pi, std::numbers::pi);
    for (;;) {
      const double x = ux(rng);
      const double y = uy(rng);
      const double yaw = uyaw(rng);
      const Obb box(Pose::from_xyz_yaw(x, y, b.half_extents.z(), yaw), b.half_extents);
      bool ok = true;
      Vec2 fp_lo(1e9, 1e9);
      Vec2 fp_hi(-1e9, -1e9);
      for (const Vec2& p : footprint(box)) {
        fp_lo = fp_lo.cwiseMin(p);
        fp_hi = fp_hi.cwiseMax(p);
      }
      if ((fp_lo.array() < goal_hi.array()).all() && (fp_hi.array() > goal_lo.array()).all()) ok = false;
      for (const Obb& other : placed) {
        if (!ok) break;
        if (obb_distance(box, other) < cfg.min_initial_separation) ok = false;
      }
      if (ok) {
        b.pose = Pose(box.center, box.rotation);
        b.status = BrickStatus::Free;
        b.perception_error = Pose::identity();
        placed.push_back(box);
        break;
      }
      if (++rejections >= 10000) throw std::runtime_error("brick placement failed after 10000 rejections");
    }
  }
  out.gripper.attached_brick.reset();
  out.gripper.grip_normal_force = 0.0;
  return out;
}

void apply_perception_noise(SceneState& scene, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) return;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Brick& b : scene.bricks) {
    const double dx = sigma * n(rng);
    const double dy = sigma * n(rng);
    const double dyaw = sigma / b.half_extents.x() * n(rng);
    b.perception_error = Pose(Vec3(dx, dy, 0.0), Rotation::from_yaw(dyaw));
  }
}

SceneState perceive(const SceneState& scene) {
  if (scene.tick != 0) return scene;
  SceneState seen = scene;
  for (Brick& b : seen.bricks) {
    if (b.status != BrickStatus::Free) continue;
    b.pose = Pose(b.pose.translation + b.perception_error.translation,
                  b.perception_error.rotation * b.pose.rotation);
  }
  return seen;
}

int plan_ticks(const Pose& from, const Pose& to, const WorldConfig& cfg) {
  const double by_translation = (to.translation - from.translation).norm() / cfg.translation_step;
  const double by_rotation = rotation_error_deg(to.rotation, from.rotation) / cfg.rotation_step_deg;
  // 1e-9 absorbs representation error, e.g. 0.05 / 0.005 landing a hair above 10.
  const double k = std::ceil(std::max(by_translation, by_rotation) - 1e-9);
  return std::max(1, static_cast<int>(k));
}

double contact_force(double penetration, const WorldConfig& cfg) {
  if (penetration < 0.0) throw std::invalid_argument("penetration must be non-negative");
  return cfg.contact_stiffness * penetration;
}

namespace {

struct DepthProbe {
  double depth = -1.0;
  int moving_body = kGripperBody;
  int obstacle_body = kGroundBody;
  Vec3 axis = Vec3::UnitZ();
};

DepthProbe max_depth(const WorldConfig& cfg, const SceneState& s, const Pose& gripper_pose,
                     const std::vector<int>& ignore) {
  const GripperBoxes g = gripper_boxes(cfg, gripper_pose, s.gripper.width);
  std::vector<std::pair<int, Obb>> moving = {
      {kGripperBody, g.palm}, {kGripperBody, g.finger_left}, {kGripperBody, g.finger_right}};
  if (const Brick* held = s.held_brick()) {
    moving.emplace_back(held->id, Obb(gripper_pose * s.gripper.attach_offset, held->half_extents));
  }
  DepthProbe probe;
  probe.depth = -std::numeric_limits<double>::infinity();
  for (const Obstacle& o : obstacles(s, ignore)) {
    for (const auto& [body, box] : moving) {
      const SatResult r = obb_sat(box, o.box);
      if (r.depth > probe.depth) probe = {r.depth, body, o.body, r.axis};
    }
  }
  return probe;
}

void finger_reports(const SceneState& s, const WorldConfig& cfg, bool loaded, std::vector<ContactReport>& out) {
  const Brick* held = s.held_brick();
  if (!held) return;
  const Vec3 gy = s.gripper.pose.rotation * Vec3::UnitY();
  const double pen = s.gripper.grip_normal_force / cfg.contact_stiffness;
  const double tangential = loaded ? held->mass * (cfg.gravity + cfg.lift_acceleration) / 2.0 : 0.0;
  out.push_back({kGripperBody, held->id, pen, gy, s.gripper.grip_normal_force, tangential});
  out.push_back({kGripperBody, held->id, pen, -gy, s.gripper.grip_normal_force, tangential});
}

void open_gripper(SceneState& s, double width, const WorldConfig& cfg, StepResult& res) {
  const double w = std::clamp(width, 0.0, s.gripper.max_width);
  if (const Brick* held = s.held_brick()) {
    if (w <= brick_width_in_gripper(*held, s.gripper.pose)) return;  // cannot release narrower than the brick
    s.gripper.width = w;
    auto [settled, events] = settle_release(s, cfg);
    s = std::move(settled);
    for (Event& e : events) {
      e.tick = s.tick;
      res.events.push_back(std::move(e));
    }
    return;
  }
  s.gripper.width = w;
}

void close_gripper(SceneState& s, const WorldConfig& cfg, StepResult& res) {
  if (s.gripper.attached_brick) return;
  const Pose inv = s.gripper.pose.inverse();
  const double half_w = s.gripper.width / 2.0;
  const double half_d = cfg.finger_depth / 2.0;
  const double half_h = cfg.finger_half_height;

  int chosen = -1;
  double best = std::numeric_limits<double>::infinity();
  double chosen_ymin = 0.0;
  double chosen_ymax = 0.0;
  for (const Brick& b : s.bricks) {
    if (b.status == BrickStatus::Grasped) continue;
    Vec3 lo = Vec3::Constant(1e9);
    Vec3 hi = Vec3::Constant(-1e9);
    for (const Vec3& c : b.obb().corners()) {
      const Vec3 l = inv * c;
      lo = lo.cwiseMin(l);
      hi = hi.cwiseMax(l);
    }
    const bool x_overlap = std::min(hi.x(), half_d) - std::max(lo.x(), -half_d) > 1e-9;
    const bool z_overlap = std::min(hi.z(), half_h) - std::max(lo.z(), -half_h) > 1e-9;
    const bool between = lo.y() > -half_w - 1e-9 && hi.y() < half_w + 1e-9;
    if (!(x_overlap && z_overlap && between)) continue;
    const double d = (inv * b.pose.translation).norm();
    if (d < best) {
      best = d;
      chosen = b.id;
      chosen_ymin = lo.y();
      chosen_ymax = hi.y();
    }
  }
  if (chosen < 0) {
    s.gripper.width = 0.0;
    return;
  }

  Brick& b = s.brick(chosen);
  // Quasi-static closing: the first finger to touch pushes the brick onto the
  // gripper centerline.
  const double shift = -(chosen_ymin + chosen_ymax) / 2.0;
  b.pose.translation += s.gripper.pose.rotation * Vec3(0.0, shift, 0.0);
  s.gripper.width = chosen_ymax - chosen_ymin;

  double penetration = cfg.grip_squeeze;
  if (s.faults.weak_grasp_count > 0 && s.grasp_count >= s.faults.weak_grasp_skip) {
    penetration = s.faults.weak_grasp_total_force / 2.0 / cfg.contact_stiffness;
    --s.faults.weak_grasp_count;
  }
  ++s.grasp_count;
  s.gripper.grip_normal_force = contact_force(penetration, cfg);
  s.gripper.attached_brick = chosen;
  s.gripper.attach_offset = s.gripper.pose.inverse() * b.pose;
  b.status = BrickStatus::Grasped;

  finger_reports(s, cfg, false, res.contacts);
  res.events.push_back({EventKind::ContactMade, s.tick, kGripperBody, chosen, "left finger"});
  res.events.push_back({EventKind::ContactMade, s.tick, kGripperBody, chosen, "right finger"});
  if (s.gripper.grip_normal_force >= cfg.secure_force) {
    res.events.push_back({EventKind::GraspSecured, s.tick, kGripperBody, chosen, ""});
  }
}

}  // namespace

StepResult step(const SceneState& scene, const Waypoint& waypoint, const WorldConfig& cfg) {
  if (!scene.workspace.contains(waypoint.target.translation)) {
    throw std::invalid_argument("waypoint target outside the workspace");
  }
  StepResult res;
  res.scene = scene;
  SceneState& s = res.scene;

  Pose target = waypoint.target;
  if (waypoint.phase == 5) target.translation.head<2>() += s.faults.placement_bias;
  const Pose from = s.gripper.pose;
  const bool motion = !(target == from);

  switch (waypoint.command.kind) {
    case GripperCommand::Kind::Hold:
      if (!motion) return res;
      break;
    case GripperCommand::Kind::OpenTo:
      open_gripper(s, waypoint.command.width, cfg, res);
      ++s.tick;
      break;
    case GripperCommand::Kind::Close:
      close_gripper(s, cfg, res);
      ++s.tick;
      break;
  }
  if (!motion) return res;

  const int ticks = plan_ticks(from, target, cfg);
  std::vector<int> ignore;
  if (s.gripper.attached_brick) ignore.push_back(*s.gripper.attached_brick);
  std::optional<int> slipped;
  double s_prev = 0.0;
  Pose prev_pose = from;

  for (int k = 1; k <= ticks; ++k) {
    const double sk = (k == ticks) ? 1.0 : static_cast<double>(k) / ticks;
    const Pose pose_k = interpolate_pose(from, target, sk);

    if (const Brick* held = s.held_brick()) {
      const double tangential = held->mass * (cfg.gravity + cfg.lift_acceleration);
      const double normal_total = 2.0 * s.gripper.grip_normal_force;
      if (tangential > cfg.friction * normal_total) {
        // Friction cone violated: the brick stays behind as the gripper moves.
        const int id = held->id;
        s.brick(id).status = BrickStatus::Free;
        s.gripper.attached_brick.reset();
        s.gripper.grip_normal_force = 0.0;
        slipped = id;
        const double v_rel = (pose_k.translation - prev_pose.translation).norm() / cfg.servo_period;
        res.max_relative_speed = std::max(res.max_relative_speed, v_rel);
        res.events.push_back({EventKind::SlipDetected, s.tick, kGripperBody, id, ""});
      }
    }

    const DepthProbe probe = max_depth(cfg, s, pose_k, ignore);
    if (probe.depth > cfg.contact_tolerance) {
      double lo = s_prev;
      double hi = sk;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (max_depth(cfg, s, interpolate_pose(from, target, mid), ignore).depth <= 1e-6) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const Pose frozen = interpolate_pose(from, target, lo);
      s.gripper.pose = frozen;
      if (const Brick* held = s.held_brick()) s.brick(held->id).pose = frozen * s.gripper.attach_offset;
      ++s.tick;
      const bool resting = std::abs(probe.axis.z()) > 0.9 && target.translation.z() < from.translation.z() &&
                           probe.obstacle_body != kGripperBody;
      res.events.push_back({resting ? EventKind::ContactMade : EventKind::CollisionDetected, s.tick,
                            probe.moving_body, probe.obstacle_body, ""});
      res.halted = true;
      break;
    }

    s.gripper.pose = pose_k;
    if (const Brick* held = s.held_brick()) s.brick(held->id).pose = pose_k * s.gripper.attach_offset;
    ++s.tick;
    finger_reports(s, cfg, true, res.contacts);
    s_prev = sk;
    prev_pose = pose_k;
  }

  if (slipped) detail::drop_to_rest(s, *slipped, nullptr);
  return res;
}

double max_brick_penetration(const SceneState& scene) {
  std::vector<Obstacle> bodies;
  for (const Brick& b : scene.bricks)
    if (b.status != BrickStatus::Grasped) bodies.push_back({b.id, b.obb()});
  bodies.push_back({kGroundBody, ground_box()});
  double worst = 0.0;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    for (std::size_t j = i + 1; j < bodies.size(); ++j)
      worst = std::max(worst, obb_sat(bodies[i].box, bodies[j].box).depth);
  return worst;
}

}  // namespace brickstack
