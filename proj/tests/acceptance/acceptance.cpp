// Acceptance checks.  Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "brickstack/baselines.hpp"
#include "brickstack/checks.hpp"
#include "brickstack/harness.hpp"
#include "brickstack/reasoner.hpp"
#include "brickstack/serialize.hpp"

#include <httplib.h>

using namespace brickstack;
using nlohmann::json;

namespace {

const std::string kFixtures = BRICKSTACK_FIXTURES;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Rotation::from_wxyz(n(rng), n(rng), n(rng), n(rng));
}

// --- 1 ----------------------------------------------------------------------

double monte_carlo_iou(const Obb& a, const Obb& b, int samples, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Matrix3d ra = a.rotation.matrix();
  const Eigen::Matrix3d rb_t = b.rotation.matrix().transpose();
  int inside = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 local(u(rng) * a.half_extents.x(), u(rng) * a.half_extents.y(), u(rng) * a.half_extents.z());
    const Vec3 q = rb_t * (ra * local + a.center - b.center);
    inside += std::abs(q.x()) <= b.half_extents.x() && std::abs(q.y()) <= b.half_extents.y() &&
              std::abs(q.z()) <= b.half_extents.z();
  }
  const double inter = a.volume() * inside / samples;
  return inter / (a.volume() + b.volume() - inter);
}

// Angle of the relative quaternion, computed without matrices.
double quaternion_angle_deg(const Rotation& r1, const Rotation& r2) {
  const auto p = r1.wxyz();
  const auto q = r2.wxyz();
  const double w = p[0] * q[0] + p[1] * q[1] + p[2] * q[2] + p[3] * q[3];
  const double x = p[0] * q[1] - p[1] * q[0] - p[2] * q[3] + p[3] * q[2];
  const double y = p[0] * q[2] + p[1] * q[3] - p[2] * q[0] - p[3] * q[1];
  const double z = p[0] * q[3] - p[1] * q[2] + p[2] * q[1] - p[3] * q[0];
  return 2.0 * std::atan2(std::sqrt(x * x + y * y + z * z), std::abs(w)) * 180.0 / M_PI;
}

Verdict criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> half(0.02, 0.10);
  std::uniform_real_distribution<double> offset(-0.08, 0.08);
  double worst_iou = 0.0;
  int nontrivial = 0;
  for (int i = 0; i < 100; ++i) {
    const Obb a(Vec3::Zero(), random_rotation(rng), Vec3(half(rng), half(rng), half(rng)));
    const Obb b(Vec3(offset(rng), offset(rng), offset(rng)), random_rotation(rng), Vec3(half(rng), half(rng), half(rng)));
    const double exact = obb_iou(a, b);
    nontrivial += exact > 0.01;
    worst_iou = std::max(worst_iou, std::abs(exact - monte_carlo_iou(a, b, 1000000, rng)));
  }
  double worst_rot = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Rotation r1 = random_rotation(rng);
    const Rotation r2 = i % 4 == 0 ? r1 * Rotation::about_axis(Vec3(0.3, -0.2, 1.0), 1e-4 * i) : random_rotation(rng);
    worst_rot = std::max(worst_rot, std::abs(rotation_error_deg(r1, r2) - quaternion_angle_deg(r1, r2)));
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = worst_iou <= 0.01 && worst_rot <= 1e-7 && secs < 30.0;
  v.detail = fmt("IoU max |exact - MC| = %.5f over 100 pairs (%d overlapping), rotation max diff = %.2e deg, %.1f s",
                 worst_iou, nontrivial, worst_rot, secs);
  return v;
}

// --- 2, 3, 6 ----------------------------------------------------------------

struct Nominal {
  std::vector<TrialLog> logs;
  std::vector<MetricsReport> reports;
  double seconds = 0.0;
};

Nominal run_nominal() {
  Nominal n;
  const auto t0 = Clock::now();
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    TrialConfig tc;
    tc.pattern = p;
    tc.trials = 10;
    tc.seed = 0;
    tc.policy = PolicyKind::Rules;
    auto [logs, report] = run_experiment(tc);
    n.logs.insert(n.logs.end(), logs.begin(), logs.end());
    n.reports.push_back(report);
  }
  n.seconds = seconds_since(t0);
  return n;
}

Verdict criterion2(const Nominal& n) {
  int violations = 0;
  std::string first;
  int retry_edges = 0;
  for (const TrialLog& log : n.logs) {
    const std::vector<std::string> v = audit_log(log);
    violations += static_cast<int>(v.size());
    if (!v.empty() && first.empty()) first = v.front();
    for (const LogRecord& r : log.records) retry_edges += r.retry_edge.has_value();
  }
  // Faulted trials exercise both retry edges under the same auditor.
  int faulted = 0;
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    TrialConfig tc;
    tc.pattern = p;
    tc.trials = 3;
    tc.seed = 500;
    tc.faults.weak_grasp_skip = 1;
    tc.faults.weak_grasp_count = 1;
    tc.faults.placement_bias = Vec2(0.008, 0.0);
    for (const TrialLog& log : run_experiment(tc).first) {
      const std::vector<std::string> v = audit_log(log);
      violations += static_cast<int>(v.size());
      if (!v.empty() && first.empty()) first = v.front();
      for (const LogRecord& r : log.records) retry_edges += r.retry_edge.has_value();
      ++faulted;
    }
  }
  Verdict v;
  v.pass = violations == 0 && n.logs.size() == 20;
  v.detail = fmt("%zu nominal + %d faulted logs audited, %d retry edges, %d violations", n.logs.size(), faulted,
                 retry_edges, violations);
  if (!first.empty()) v.detail += " (first: " + first + ")";
  return v;
}

Verdict criterion3(const Nominal& n) {
  int successes = 0;
  double ctr = 0.0, rot = 0.0, iou = 0.0;
  for (const MetricsReport& r : n.reports) {
    for (const TrialMetrics& t : r.per_trial) {
      if (!t.success || !t.mean) continue;
      ++successes;
      ctr += t.mean->center_offset_m;
      rot += t.mean->rotation_error_deg;
      iou += t.mean->iou;
    }
  }
  if (successes > 0) {
    ctr /= successes;
    rot /= successes;
    iou /= successes;
  }
  Verdict v;
  v.pass = successes == 20 && iou >= 0.85 && ctr <= 0.01 && rot <= 1.0 && n.seconds < 120.0;
  v.detail = fmt("|R| = %d/20, IoU = %.4f, center offset = %.4f cm, rotation = %.4f deg, %.1f s", successes, iou,
                 ctr * 100.0, rot, n.seconds);
  return v;
}

Verdict criterion6(const Nominal& n) {
  std::mt19937_64 rng(6);
  int replays = 0, identical = 0;
  std::string first;
  for (const TrialLog& log : n.logs) {
    const std::string text = to_jsonl(log);
    std::int64_t last = 0;
    for (const LogRecord& r : log.records)
      if (r.scene_before) last = std::max(last, r.tick);
    std::uniform_int_distribution<std::int64_t> tick(0, last);
    for (int k = 0; k < 5; ++k) {
      const std::int64_t t = tick(rng);
      const ReplayResult r = replay(text, t);
      ++replays;
      identical += r.identical;
      if (!r.identical && first.empty()) first = fmt("tick %lld: ", static_cast<long long>(t)) + r.mismatch;
    }
  }
  Verdict v;
  v.pass = replays == 100 && identical == replays;
  v.detail = fmt("%d/%d replays byte-identical from the resume point", identical, replays);
  if (!first.empty()) v.detail += " (first mismatch " + first.substr(0, 160) + ")";
  return v;
}

// --- 4 ----------------------------------------------------------------------

Verdict criterion4() {
  Verdict v;
  std::vector<std::string> parts;
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    TrialConfig tc;
    tc.pattern = p;
    tc.trials = 10;
    tc.seed = 1000;
    tc.noise_sigma = 0.005;
    tc.policy = PolicyKind::Rules;
    const MetricsReport gated = run_experiment(tc).second;
    tc.policy = PolicyKind::Classical;
    const MetricsReport classical = run_experiment(tc).second;
    int wins = 0, classical_failures = 0;
    for (int i = 0; i < 10; ++i) {
      const TrialMetrics& g = gated.per_trial[i];
      const TrialMetrics& c = classical.per_trial[i];
      if (!g.success || !g.mean) continue;
      if (!c.success || !c.mean) {
        ++classical_failures;
        ++wins;
        continue;
      }
      wins += g.mean->center_offset_m < c.mean->center_offset_m &&
              g.mean->rotation_error_deg < c.mean->rotation_error_deg && g.mean->iou > c.mean->iou;
    }
    v.pass = v.pass && wins >= 9;
    parts.push_back(fmt("%s %d/10 (classical failed %d)", to_string(p), wins, classical_failures));
  }
  v.detail = "gated wins on all three metrics: " + parts[0] + ", " + parts[1];
  return v;
}

// --- 5 ----------------------------------------------------------------------

double mean_final_xy_error(const std::vector<TrialLog>& logs) {
  double sum = 0.0;
  int n = 0;
  for (const TrialLog& log : logs) {
    for (const FinalBrickPose& f : log.summary.final_poses) {
      sum += (f.pose.translation - log.header.goal.slots[f.slot].pose.translation).head<2>().norm();
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

Verdict criterion5() {
  std::vector<TrialLog> gated, single;
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    TrialConfig tc;
    tc.pattern = p;
    tc.trials = 5;
    tc.seed = 2000;
    tc.faults.placement_bias = Vec2(0.008, 0.0);
    tc.policy = PolicyKind::Rules;
    for (TrialLog& l : run_experiment(tc).first) gated.push_back(std::move(l));
    tc.policy = PolicyKind::SingleAgent;
    for (TrialLog& l : run_experiment(tc).first) single.push_back(std::move(l));
  }
  const double eg = mean_final_xy_error(gated);
  const double es = mean_final_xy_error(single);
  Verdict v;
  v.pass = es - eg >= 0.003;
  v.detail = fmt("mean final e_xy: single-agent %.2f mm, gated %.2f mm, gap %.2f mm", es * 1e3, eg * 1e3,
                 (es - eg) * 1e3);
  return v;
}

// --- 7 ----------------------------------------------------------------------

Verdict criterion7() {
  const Config cfg;
  const bool predicted_slip = !slip_check(cfg.world.brick_mass, 15.0, 0.0, cfg.tolerances).verdict;
  int trials = 0, ok = 0;
  std::string first;
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    for (int skip : {0, 3}) {
      TrialConfig tc;
      tc.pattern = p;
      tc.trials = 3;
      tc.seed = 3000 + skip;
      tc.faults.weak_grasp_skip = skip;
      tc.faults.weak_grasp_count = 1;
      tc.faults.weak_grasp_total_force = 15.0;
      for (const TrialLog& log : run_experiment(tc).first) {
        ++trials;
        int failed_lift = 0, regrasps = 0;
        bool resumed_at_agent1 = true;
        for (std::size_t i = 0; i < log.records.size(); ++i) {
          const LogRecord& r = log.records[i];
          if (r.kind == RecordKind::Agent && r.agent == 4 && r.sigma == false) ++failed_lift;
          if (r.retry_edge == std::string("regrasp")) {
            ++regrasps;
            resumed_at_agent1 = resumed_at_agent1 && i + 1 < log.records.size() && log.records[i + 1].agent == 1;
          }
        }
        const bool good = failed_lift == 1 && regrasps == 1 && resumed_at_agent1 && log.summary.success;
        ok += good;
        if (!good && first.empty())
          first = fmt("trial %d: sigma4=0 x%d, regrasp x%d, success %d", log.header.trial, failed_lift, regrasps,
                      log.summary.success);
      }
    }
  }
  Verdict v;
  v.pass = predicted_slip && ok == trials;
  v.detail = fmt("15 N on %.1f kg slips: %s; %d/%d trials with one failed lift, one regrasp, completion",
                 cfg.world.brick_mass, predicted_slip ? "yes" : "no", ok, trials);
  if (!first.empty()) v.detail += " (" + first + ")";
  return v;
}

// --- 8 ----------------------------------------------------------------------

Verdict criterion8() {
  const MetricsReport r = aggregate(load_logs(kFixtures + "/metrics"));
  std::ifstream in(kFixtures + "/metrics/expected.json");
  const json expected = json::parse(in);
  double worst = 0.0;
  auto cmp = [&](const BrickMetrics& m, const json& e) {
    worst = std::max(worst, std::abs(m.center_offset_m - e.at("center_offset_m").get<double>()));
    worst = std::max(worst, std::abs(m.rotation_error_deg - e.at("rotation_error_deg").get<double>()));
    worst = std::max(worst, std::abs(m.iou - e.at("iou").get<double>()));
  };
  bool shape = r.global.has_value() && r.success_count == expected.at("success_count").get<int>() &&
               r.per_trial.size() == expected.at("trials").size();
  if (shape) {
    cmp(*r.global, expected.at("global"));
    for (std::size_t i = 0; i < r.per_trial.size(); ++i) {
      shape = shape && r.per_trial[i].mean.has_value();
      if (r.per_trial[i].mean) cmp(*r.per_trial[i].mean, expected.at("trials")[i]);
    }
  }

  TrialLog log;
  log.header.policy = "multi_agent";
  log.header.goal.pattern = Pattern::Pyramid;
  const Vec3 half(0.10, 0.05, 0.03);
  const Vec3 offsets[] = {Vec3(0.003, 0.004, 0.0), Vec3::Zero()};
  for (int i = 0; i < 2; ++i) {
    Slot s;
    s.index = i;
    s.pose = Pose::from_translation(Vec3(0.0, 0.0, 0.03));
    log.header.goal.slots.push_back(s);
    FinalBrickPose f;
    f.slot = i;
    f.brick_id = i;
    f.half_extents = half;
    f.pose = Pose::from_translation(s.pose.translation + offsets[i]);
    f.status = BrickStatus::Placed;
    log.summary.final_poses.push_back(f);
  }
  log.summary.success = true;
  const TrialMetrics t = trial_metrics(log);
  const bool exact = t.mean && t.mean->center_offset_m == 0.0025;

  Verdict v;
  v.pass = shape && worst <= 1e-9 && exact;
  v.detail = fmt("fixture max deviation %.2e, (3,4,0)+(0,0,0) mm mean = %.17g m", worst,
                 t.mean ? t.mean->center_offset_m : -1.0);
  return v;
}

// --- 9 ----------------------------------------------------------------------

int count_events(const TrialLog& log, const std::string& kind) {
  int n = 0;
  for (const LogRecord& r : log.records)
    for (const PolicyEvent& e : r.policy_events) n += e.kind == kind;
  return n;
}

// Recomputes every agent gate from the serialized state and returns the
// number of mismatches.
int gate_mismatches(const TrialLog& log, const Config& cfg, int& checked) {
  int bad = 0;
  for (const LogRecord& r : log.records) {
    if (r.kind != RecordKind::Agent || !r.scene_before || !r.memory_before || !r.sigma) continue;
    Proposal p;
    p.waypoints = r.waypoints;
    const AgentOutcome out = verify_and_execute(r.agent, *r.scene_before, log.header.goal, *r.memory_before, p, cfg);
    bad += out.sigma != *r.sigma;
    ++checked;
  }
  return bad;
}

std::vector<TrialLog> mock_trials(const std::string& script, Pattern p, int trials) {
  TrialConfig tc;
  tc.pattern = p;
  tc.trials = trials;
  tc.seed = 4000;
  tc.policy = PolicyKind::Llm;
  tc.config.llm.mock_script = kFixtures + "/llm/" + script;
  return run_experiment(tc).first;
}

// Serves chat completions over loopback, answering with the offline mock.
class LoopbackEndpoint {
 public:
  LoopbackEndpoint() : mock_(json::object(), Config{}) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body);
      ChatRequest chat;
      for (const json& m : body.at("messages")) chat.messages.push_back({m.at("role"), m.at("content")});
      std::string content;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        content = mock_.complete(chat);
        ++requests_;
      }
      const json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return fmt("http://127.0.0.1:%d/v1/chat/completions", port_); }
  int requests() const { return requests_; }

 private:
  httplib::Server server_;
  MockTransport mock_;
  std::mutex mutex_;
  std::thread thread_;
  int port_ = 0;
  int requests_ = 0;
};

Verdict criterion9() {
  const Config cfg;
  int trials = 0, completed = 0, checked = 0, mismatches = 0;
  auto tally = [&](const std::vector<TrialLog>& logs) {
    for (const TrialLog& log : logs) {
      ++trials;
      completed += log.summary.success;
      mismatches += gate_mismatches(log, cfg, checked);
    }
  };
  for (Pattern p : {Pattern::Pyramid, Pattern::Grid}) {
    tally(mock_trials("mock_rules.json", p, 2));
    tally(mock_trials("mock_tools.json", p, 1));
  }

  // The malformed fixture: one re-prompt then fallback at cycle 1 agent 3,
  // and a re-prompt that recovers at cycle 2 agent 2.
  const std::vector<TrialLog> malformed = mock_trials("mock_malformed.json", Pattern::Pyramid, 2);
  tally(malformed);
  bool malformed_ok = true;
  for (const TrialLog& log : malformed) {
    malformed_ok = malformed_ok && count_events(log, "reprompt") == 2 && count_events(log, "fallback") == 1;
    for (const LogRecord& r : log.records) {
      if (r.kind != RecordKind::Agent || r.cycle != 1 || r.agent != 3) continue;
      std::vector<std::string> kinds;
      for (const PolicyEvent& e : r.policy_events) kinds.push_back(e.kind);
      malformed_ok = malformed_ok && kinds == std::vector<std::string>{"reprompt", "fallback"};
    }
  }

  // Same policy through the HTTP transport against a loopback endpoint.
  bool http_ok = false;
  int http_requests = 0;
  {
    LoopbackEndpoint endpoint;
    TrialConfig tc;
    tc.trials = 1;
    tc.seed = 4000;
    tc.policy = PolicyKind::Llm;
    tc.config.llm.endpoint = endpoint.url();
    tc.config.llm.timeout_s = 10.0;
    const std::vector<TrialLog> logs = run_experiment(tc).first;
    tally(logs);
    http_requests = endpoint.requests();
    http_ok = logs.size() == 1 && logs[0].summary.success && count_events(logs[0], "fallback") == 0 &&
              http_requests > 0;
  }

  Verdict v;
  v.pass = completed == trials && mismatches == 0 && checked > 0 && malformed_ok && http_ok;
  v.detail = fmt("%d/%d offline trials completed, %d gates recomputed with %d mismatches, malformed fixture %s, "
                 "loopback HTTP %s (%d requests)",
                 completed, trials, checked, mismatches, malformed_ok ? "ok" : "wrong", http_ok ? "ok" : "failed",
                 http_requests);
  return v;
}

Verdict guarded(const std::function<Verdict()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  const Nominal nominal = [] {
    try {
      return run_nominal();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "nominal run failed: %s\n", e.what());
      return Nominal{};
    }
  }();
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, criterion1},
      {2, [&] { return criterion2(nominal); }},
      {3, [&] { return criterion3(nominal); }},
      {4, criterion4},
      {5, criterion5},
      {6, [&] { return criterion6(nominal); }},
      {7, criterion7},
      {8, criterion8},
      {9, criterion9},
  };
  int failed = 0;
  for (const auto& [n, f] : criteria) {
    const Verdict v = guarded(f);
    failed += !v.pass;
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", n, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
