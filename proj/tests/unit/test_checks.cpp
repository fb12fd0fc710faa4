#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "brickstack/checks.hpp"

using namespace brickstack;

namespace {

const WorldConfig kCfg;
const Tolerances kTol;

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Rotation::from_wxyz(n(rng), n(rng), n(rng), n(rng));
}

double point_box(const Obb& b, const Vec3& p) {
  const Vec3 local = b.rotation.matrix().transpose() * (p - b.center);
  Vec3 excess;
  for (int i = 0; i < 3; ++i) excess[i] = std::max(0.0, std::abs(local[i]) - b.half_extents[i]);
  return excess.norm();
}

double segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.dot(d1), e = d2.dot(d2), f = d2.dot(r);
  const double c = d1.dot(r), b = d1.dot(d2);
  const double denom = a * e - b * b;
  double s = denom > 1e-15 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
  double t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  return ((p1 + d1 * s) - (p2 + d2 * t)).norm();
}

std::vector<std::pair<Vec3, Vec3>> edges(const Obb& box) {
  std::vector<std::pair<Vec3, Vec3>> out;
  auto corner = [&](int i, int j, int k) -> Vec3 {
    return box.center + box.rotation * Vec3((2 * i - 1) * box.half_extents.x(), (2 * j - 1) * box.half_extents.y(),
                                            (2 * k - 1) * box.half_extents.z());
  };
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      out.push_back({corner(0, a, b), corner(1, a, b)});
      out.push_back({corner(a, 0, b), corner(a, 1, b)});
      out.push_back({corner(a, b, 0), corner(a, b, 1)});
    }
  return out;
}

// Closest features of two disjoint convex polytopes are vertex-face or edge-edge pairs.
double box_distance_oracle(const Obb& a, const Obb& b) {
  double best = 1e9;
  for (const Vec3& c : a.corners()) best = std::min(best, point_box(b, c));
  for (const Vec3& c : b.corners()) best = std::min(best, point_box(a, c));
  for (const auto& [p, q] : edges(a))
    for (const auto& [r, s] : edges(b)) best = std::min(best, segment_segment(p, q, r, s));
  return best;
}

SceneState scene_with_brick(const Vec3& at, BrickStatus status = BrickStatus::Placed) {
  WorldConfig cfg = kCfg;
  cfg.brick_count = 1;
  SceneState s = initial_scene(cfg);
  s.bricks[0].pose = Pose::from_translation(at);
  s.bricks[0].status = status;
  return s;
}

}  // namespace

TEST_CASE("collision_free_path simple cases") {
  const SceneState s = scene_with_brick({0.4, 0.4, 0.03});
  const ToolResult down = collision_free_path(s, Pose::from_translation({-0.2, 0, 0.4}),
                                              Pose::from_translation({-0.2, 0, 0.1}), std::nullopt, kCfg);
  CHECK(down.tool == "collision_free_path");
  CHECK(down.verdict);
  CHECK(down.payload > 0.0);
  const ToolResult through = collision_free_path(s, Pose::from_xyz_yaw(0.0, 0.4, 0.05, std::numbers::pi / 2),
                                                 Pose::from_xyz_yaw(0.5, 0.4, 0.05, std::numbers::pi / 2),
                                                 std::nullopt, kCfg);
  CHECK_FALSE(through.verdict);
  CHECK(through.payload == 0.0);
}

TEST_CASE("collision_free_path agrees with a ten-times finer sweep") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-0.5, 0.5), uz(0.02, 0.3), uyaw(-3.1, 3.1);
  const Goal goal = generate_goal(Pattern::Pyramid, kCfg.brick_half_extents, 0.05, Pose::identity());
  int blocked = 0;
  for (int i = 0; i < 50; ++i) {
    SceneState s = randomize_initial(initial_scene(kCfg), goal, 1000 + i, kCfg);
    const Pose from = Pose::from_xyz_yaw(ux(rng), ux(rng), uz(rng), uyaw(rng));
    const Pose to = Pose::from_xyz_yaw(ux(rng), ux(rng), uz(rng), uyaw(rng));
    const ToolResult r = collision_free_path(s, from, to, std::nullopt, kCfg);

    const int n = 10 * plan_ticks(from, to, kCfg);
    bool oracle = true;
    for (int k = 0; k <= n && oracle; ++k) {
      const Pose p = interpolate_pose(from, to, static_cast<double>(k) / n);
      for (const Obb& m : moving_boxes(s, p, std::nullopt, s.gripper.width, kCfg))
        for (const Obstacle& o : obstacles(s))
          if (obb_sat(m, o.box).depth > kCfg.contact_tolerance) oracle = false;
    }
    CHECK(r.verdict == oracle);
    blocked += !oracle;
  }
  CHECK(blocked > 5);
}

TEST_CASE("box distance: parallel faces and overlap") {
  const Obb a{Vec3::Zero(), Rotation(), Vec3::Constant(0.5)};
  const Obb b{Vec3(1.3, 0, 0), Rotation(), Vec3::Constant(0.5)};
  CHECK(obb_distance(a, b) == doctest::Approx(0.3).epsilon(1e-9));
  const Obb c{Vec3(0.9, 0, 0), Rotation(), Vec3::Constant(0.5)};
  CHECK(obb_distance(a, c) == 0.0);
}

TEST_CASE("box distance against closest-feature oracle") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> c(-1.0, 1.0), h(0.05, 0.4);
  int disjoint = 0;
  for (int i = 0; i < 100; ++i) {
    const Obb a{Vec3(c(rng), c(rng), c(rng)), random_rotation(rng), Vec3(h(rng), h(rng), h(rng))};
    const Obb b{Vec3(c(rng), c(rng), c(rng)), random_rotation(rng), Vec3(h(rng), h(rng), h(rng))};
    if (obb_sat(a, b).depth > 0.0) continue;
    ++disjoint;
    CHECK(std::abs(obb_distance(a, b) - box_distance_oracle(a, b)) < 1e-4);
  }
  CHECK(disjoint > 30);
}

TEST_CASE("zero distance exactly when SAT reports overlap") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> c(-0.6, 0.6), h(0.05, 0.4);
  for (int i = 0; i < 1000; ++i) {
    const Obb a{Vec3(c(rng), c(rng), c(rng)), random_rotation(rng), Vec3(h(rng), h(rng), h(rng))};
    const Obb b{Vec3(c(rng), c(rng), c(rng)), random_rotation(rng), Vec3(h(rng), h(rng), h(rng))};
    const double depth = obb_sat(a, b).depth;
    if (std::abs(depth) < 1e-9) continue;
    CHECK((obb_distance(a, b) == 0.0) == (depth > 0.0));
  }
}

TEST_CASE("clearance tool") {
  const double hz = kCfg.brick_half_extents.z();
  const SceneState s = scene_with_brick({0.3, 0.3, hz});
  const double tip = 2.0 * hz + kCfg.finger_half_height;
  const Pose above = Pose::from_translation({0.3, 0.3, tip + 0.2});
  const double lateral = s.gripper.width / 2.0 - kCfg.brick_half_extents.y();
  const ToolResult r = clearance(s, above, std::nullopt, kCfg, kTol);
  CHECK(r.payload == doctest::Approx(std::hypot(0.2, lateral)).epsilon(1e-6));
  CHECK(r.verdict);
  // Fingers closed to the brick width: the gap is purely vertical.
  const double closed = 2.0 * kCfg.brick_half_extents.y();
  const ToolResult tight =
      clearance(s, Pose::from_translation({0.3, 0.3, tip + 0.01}), std::nullopt, kCfg, kTol, closed);
  CHECK(tight.payload == doctest::Approx(0.01).epsilon(1e-6));
  CHECK_FALSE(tight.verdict);
  // Identical query pose: path check and clearance agree.
  if (r.verdict) CHECK(collision_free_path(s, above, above, std::nullopt, kCfg).verdict);
}

TEST_CASE("reachable tool") {
  const Workspace ws;
  const Rotation down = Rotation();
  CHECK(reachable({Vec3(0, 0, 0.3), down}, ws).verdict);
  const ToolResult out = reachable({Vec3(1.6, 0, 0.3), down}, ws);
  CHECK_FALSE(out.verdict);
  CHECK(out.payload == doctest::Approx(1.0));
  const Rotation tilt45 = Rotation::about_axis(Vec3::UnitX(), std::numbers::pi / 4);
  const ToolResult tilted = reachable({Vec3(0, 0, 0.3), tilt45}, ws);
  CHECK_FALSE(tilted.verdict);
  CHECK(tilted.payload == doctest::Approx(std::numbers::pi / 12).epsilon(1e-9));
  const Rotation tilt20 = Rotation::about_axis(Vec3::UnitY(), 20.0 * std::numbers::pi / 180);
  CHECK(reachable({Vec3(0, 0, 0.3), tilt20}, ws).verdict);
}

TEST_CASE("grasp_stable thresholds") {
  auto pair = [](double f1, double f2, int b1 = 3, int b2 = 3) {
    std::array<ContactReport, 2> c;
    c[0].body_b = b1;
    c[0].normal_force = f1;
    c[1].body_b = b2;
    c[1].normal_force = f2;
    return c;
  };
  CHECK(grasp_stable(pair(6, 7), 0.001, kTol).verdict);
  CHECK_FALSE(grasp_stable(pair(4, 9), 0.001, kTol).verdict);
  CHECK(grasp_stable(pair(6, 7), kTol.grasp_pose_eps, kTol).verdict);
  CHECK_FALSE(grasp_stable(pair(6, 7), 0.0031, kTol).verdict);
  CHECK(grasp_stable(pair(5, 5), 0.0, kTol).verdict);
  CHECK_THROWS_AS(grasp_stable(pair(6, 7, 1, 2), 0.0, kTol), std::invalid_argument);
}

TEST_CASE("slip_check friction cone and speed") {
  CHECK(slip_check(1.0, 25.0, 0.0, kTol).verdict);
  const ToolResult weak = slip_check(1.0, 15.0, 0.0, kTol);
  CHECK_FALSE(weak.verdict);
  CHECK_FALSE(slip_check(1.0, 100.0, 0.02, kTol).verdict);
  CHECK(slip_check(1.0, 100.0, 0.01, kTol).verdict);
  CHECK(slip_check(1.0, 9.81 / 0.5, 0.0, kTol).verdict);
  CHECK_FALSE(slip_check(1.0, 30.0, 0.0, kTol, 9.81, 6.0).verdict);
  CHECK_THROWS_AS(slip_check(1.0, -1.0, 0.0, kTol), std::invalid_argument);
  bool last = false;
  for (double f = 0.0; f <= 40.0; f += 0.25) {
    const bool v = slip_check(1.0, f, 0.0, kTol).verdict;
    CHECK((v || !last));
    last = v;
  }
}

TEST_CASE("placement_aligned") {
  const Pose slot = Pose::from_xyz_yaw(0.1, 0.2, 0.09, 0.3);
  CHECK(placement_aligned(slot, slot, 0.0, kTol).verdict);
  const Pose flipped = Pose::from_xyz_yaw(0.1, 0.2, 0.09, 0.3 + std::numbers::pi);
  CHECK(placement_aligned(flipped, slot, 0.0, kTol).verdict);
  CHECK(alignment_error(flipped, slot).yaw_deg == doctest::Approx(0.0).epsilon(1e-9));
  const Pose off = Pose::from_xyz_yaw(0.106, 0.2, 0.09, 0.3);
  const ToolResult r = placement_aligned(off, slot, 0.0, kTol);
  CHECK_FALSE(r.verdict);
  CHECK(r.payload == doctest::Approx(0.006));
  CHECK(placement_aligned(Pose::from_xyz_yaw(0.105, 0.2, 0.09, 0.3), slot, 0.0, kTol).verdict);
  CHECK_FALSE(placement_aligned(slot, slot, 0.0021, kTol).verdict);
  CHECK_FALSE(placement_aligned(Pose::from_xyz_yaw(0.1, 0.2, 0.09, 0.3 + 0.04), slot, 0.0, kTol).verdict);

  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-0.01, 0.01), yaw(-0.1, 0.1);
  for (int i = 0; i < 100; ++i) {
    const double dx = u(rng), dy = u(rng), dth = yaw(rng);
    const Pose p = Pose::from_xyz_yaw(0.1 + dx, 0.2 + dy, 0.09, 0.3 + dth);
    const Pose q = Pose::from_xyz_yaw(0.1 + dx, 0.2 + dy, 0.09, 0.3 + dth + std::numbers::pi);
    CHECK(placement_aligned(p, slot, 0.001, kTol).verdict == placement_aligned(q, slot, 0.001, kTol).verdict);
  }
}

TEST_CASE("goal_progress") {
  const Goal goal = generate_goal(Pattern::Pyramid, kCfg.brick_half_extents, 0.05, Pose::identity());
  const Slot& slot = goal.slots[0];
  WorldConfig cfg = kCfg;
  cfg.brick_count = 1;
  SceneState s = initial_scene(cfg);
  // Brick held directly below the gripper.
  s.gripper.pose = Pose::from_translation(slot.pose.translation + Vec3(0.3, 0.0, 0.2));
  s.bricks[0].pose = s.gripper.pose;
  s.bricks[0].status = BrickStatus::Grasped;
  s.gripper.attached_brick = 0;
  s.gripper.attach_offset = Pose::identity();

  const Waypoint place{slot.pose, GripperCommand::hold(), 5};
  const ToolResult exact = goal_progress(s, place, goal, 0, 0, kTol);
  CHECK(exact.payload == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(exact.verdict);

  const Waypoint stay{s.gripper.pose, GripperCommand::hold(), 5};
  const ToolResult noop = goal_progress(s, stay, goal, 0, 0, kTol);
  CHECK(noop.payload == doctest::Approx(0.3));
  CHECK_FALSE(noop.verdict);

  Pose high = slot.pose;
  high.translation.z() = kTol.h_safe;
  const ToolResult lift = goal_progress(s, {high, GripperCommand::hold(), 5}, goal, 0, 0, kTol);
  CHECK(lift.payload == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lift.verdict);

  CHECK_THROWS_AS(goal_progress(s, place, goal, 9, 0, kTol), std::out_of_range);
}

TEST_CASE("tools are pure") {
  const SceneState s = scene_with_brick({0.3, 0.3, 0.03});
  const Pose a = Pose::from_translation({0.0, 0.0, 0.3}), b = Pose::from_translation({0.3, 0.3, 0.2});
  const ToolResult r1 = collision_free_path(s, a, b, std::nullopt, kCfg);
  const ToolResult r2 = collision_free_path(s, a, b, std::nullopt, kCfg);
  CHECK(r1.verdict == r2.verdict);
  CHECK(r1.payload == r2.payload);
  CHECK(clearance(s, b, std::nullopt, kCfg, kTol).payload == clearance(s, b, std::nullopt, kCfg, kTol).payload);
}

TEST_CASE("tolerance validation") {
  Tolerances t;
  CHECK_NOTHROW(t.validate());
  t.f_min = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = Tolerances{};
  t.max_retries = -1;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}
