#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "brickstack/baselines.hpp"
#include "brickstack/harness.hpp"
#include "brickstack/reasoner.hpp"
#include "brickstack/serialize.hpp"

namespace brickstack {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

void TrialConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (bricks < 1) throw std::invalid_argument("bricks must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw std::invalid_argument("noise must be >= 0");
  if (faults.weak_grasp_skip < 0 || faults.weak_grasp_count < 0 || faults.weak_grasp_total_force < 0.0)
    throw std::invalid_argument("weak-grasp fault settings must be non-negative");
  config.tolerances.validate();
}

Goal trial_goal(const TrialConfig& tc) {
  const WorldConfig& w = tc.config.world;
  return generate_goal(tc.pattern, w.brick_half_extents, default_gap(tc.pattern), w.goal_base, tc.bricks);
}

SceneState trial_scene(const TrialConfig& tc, const Goal& goal, int trial_index) {
  const std::uint64_t seed = tc.seed + static_cast<std::uint64_t>(trial_index);
  WorldConfig w = tc.config.world;
  w.brick_count = tc.bricks;
  SceneState scene = randomize_initial(initial_scene(w), goal, seed, w);
  if (tc.noise_sigma > 0.0) apply_perception_noise(scene, tc.noise_sigma, mix(seed));
  scene.faults = tc.faults;
  return scene;
}

TrialLog run_trial(const TrialConfig& tc, int trial_index) {
  const Goal goal = trial_goal(tc);
  const SceneState scene = trial_scene(tc, goal, trial_index);
  TrialLog log;
  switch (tc.policy) {
    case PolicyKind::Rules: {
      RuleProposer p;
      log = run_pipeline(scene, goal, p, tc.config, PipelineMode::Gated);
      break;
    }
    case PolicyKind::Llm: {
      LlmProposer p(make_transport(tc.config.llm, tc.config), tc.config.llm, false);
      log = run_pipeline(scene, goal, p, tc.config, PipelineMode::Gated);
      break;
    }
    case PolicyKind::SingleAgent: {
      RuleProposer p;
      log = single_agent_trial(scene, goal, p, tc.config);
      break;
    }
    case PolicyKind::Classical:
      log = classical_controller(scene, goal, tc.config);
      break;
  }
  log.header.trial = trial_index;
  log.header.seed = tc.seed + static_cast<std::uint64_t>(trial_index);
  log.header.noise_sigma = tc.noise_sigma;
  return log;
}

std::pair<std::vector<TrialLog>, MetricsReport> run_experiment(const TrialConfig& tc) {
  tc.validate();
  if (!tc.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(tc.out_dir, ec);
    if (ec) throw IoError("cannot create " + tc.out_dir + ": " + ec.message());
  }
  std::vector<TrialLog> logs(static_cast<std::size_t>(tc.trials));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (int i = next++; i < tc.trials; i = next++) {
      try {
        logs[static_cast<std::size_t>(i)] = run_trial(tc, i);
        if (!tc.out_dir.empty()) write_log(tc.out_dir, logs[static_cast<std::size_t>(i)]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tc.trials;
      }
    }
  };
  const int n = std::min(tc.workers, tc.trials);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  MetricsReport report = aggregate(logs);
  return {std::move(logs), std::move(report)};
}

std::string log_file_name(const TrialLog& log) {
  std::ostringstream os;
  os << log.header.policy;
  if (log.header.proposer == "llm") os << "-llm";
  os << '_' << to_string(log.header.goal.pattern) << "_trial";
  if (log.header.trial < 10) os << '0';
  os << log.header.trial << "_seed" << log.header.seed << ".jsonl";
  return os.str();
}

void write_log(const std::string& dir, const TrialLog& log) {
  save_text((fs::path(dir) / log_file_name(log)).string(), to_jsonl(log));
}

std::vector<TrialLog> load_logs(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<TrialLog> logs;
  for (const fs::path& f : files) {
    try {
      logs.push_back(trial_log_from_jsonl(load_text(f.string())));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
  }
  return logs;
}

ReplayResult replay(const std::string& text, std::int64_t from_tick) {
  const TrialLog original = trial_log_from_jsonl(text);
  const TrialHeader& h = original.header;
  if (h.proposer != "rules") throw std::invalid_argument("replay needs a log produced by the rule proposer");
  PipelineMode mode;
  if (h.policy == "multi_agent")
    mode = PipelineMode::Gated;
  else if (h.policy == "single_agent")
    mode = PipelineMode::Ungated;
  else
    throw std::invalid_argument("replay is not supported for policy " + h.policy);

  std::size_t k = 0;
  for (; k < original.records.size(); ++k) {
    const LogRecord& r = original.records[k];
    if ((r.kind == RecordKind::Agent || r.kind == RecordKind::SingleAgent) && r.tick >= from_tick &&
        r.scene_before && r.memory_before)
      break;
  }
  if (k == original.records.size())
    throw std::invalid_argument("no stage record at or after tick " + std::to_string(from_tick));

  TrialLog again;
  again.header = h;
  again.records.assign(original.records.begin(), original.records.begin() + static_cast<std::ptrdiff_t>(k));
  RuleProposer proposer;
  continue_pipeline(*original.records[k].scene_before, *original.records[k].memory_before, h.goal, proposer,
                    h.config, mode, again);

  ReplayResult res;
  res.resume_record = k;
  res.resume_tick = original.records[k].tick;
  const std::vector<std::string> want = split_lines(text);
  const std::vector<std::string> got = jsonl_lines(again);
  const std::size_t n = std::min(want.size(), got.size());
  for (std::size_t i = 0; i < n; ++i) {
    ++res.compared_lines;
    if (want[i] != got[i]) {
      res.mismatch = "line " + std::to_string(i + 1) + " differs";
      return res;
    }
  }
  if (want.size() != got.size()) {
    res.mismatch = "line count " + std::to_string(got.size()) + " != " + std::to_string(want.size());
    return res;
  }
  res.identical = true;
  return res;
}

std::vector<std::string> audit_log(const TrialLog& log) {
  std::vector<std::string> v;
  const auto& recs = log.records;
  auto at = [&](std::size_t i) {
    return "record " + std::to_string(i) + " (cycle " + std::to_string(recs[i].cycle) + ", agent " +
           std::to_string(recs[i].agent) + "): ";
  };

  if (log.header.policy != "multi_agent") {
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (recs[i].sigma || recs[i].retry_edge) v.push_back(at(i) + "ungated log carries a gate or retry edge");
    return v;
  }

  const Tolerances& tol = log.header.config.tolerances;
  const double dh = tol.raise_dh;
  int cycle = 0;
  int expect = 1;
  bool closed = false;
  std::vector<int> completed;

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const LogRecord& r = recs[i];
    const LogRecord* next = i + 1 < recs.size() ? &recs[i + 1] : nullptr;

    if (r.cycle != cycle) {
      if (r.cycle < cycle) v.push_back(at(i) + "cycle number decreased");
      if (cycle != 0 && !closed) v.push_back(at(i) + "cycle " + std::to_string(cycle) + " ended without a release");
      cycle = r.cycle;
      expect = 1;
      closed = false;
    }

    if (r.memory_before) {
      const Memory& m = *r.memory_before;
      if (m.completed.size() < completed.size() ||
          !std::equal(completed.begin(), completed.end(), m.completed.begin()))
        v.push_back(at(i) + "completed bricks shrank or changed");
      completed = m.completed;
      for (int a = 1; a <= kAgentCount; ++a) {
        const int cap = a == 6 ? 1 : tol.max_retries;
        if (m.retry_counters[static_cast<std::size_t>(a)] > cap)
          v.push_back(at(i) + "retry counter of agent " + std::to_string(a) + " exceeds its budget");
      }
    }

    switch (r.kind) {
      case RecordKind::Agent: {
        if (closed) v.push_back(at(i) + "stage ran after the cycle completed");
        if (r.agent != expect)
          v.push_back(at(i) + "agent " + std::to_string(r.agent) + " ran while agent " + std::to_string(expect) +
                      " was due");
        if (r.memory_before && r.memory_before->current_step != r.agent)
          v.push_back(at(i) + "memory step does not match the running agent");
        if (!r.sigma) {
          v.push_back(at(i) + "stage record without a gate value");
          break;
        }
        if (*r.sigma) {
          if (r.retry_edge) v.push_back(at(i) + "accepted stage carries a retry edge");
          expect = r.agent + 1;
          if (r.agent == kAgentCount) closed = true;
          break;
        }
        const bool next_fails = next && next->kind == RecordKind::Failure;
        if (r.agent == 4) {
          const bool regrasp = next && next->kind == RecordKind::Agent && next->agent == 1 && next->cycle == r.cycle;
          if (!(regrasp || next_fails)) v.push_back(at(i) + "rejected lift is not followed by a re-grasp or failure");
          if (regrasp && r.retry_edge != std::optional<std::string>("regrasp"))
            v.push_back(at(i) + "re-grasp without a regrasp edge");
          expect = 1;
        } else if (r.agent == 5) {
          const bool raise = next && next->kind == RecordKind::Raise;
          if (!(raise || next_fails)) v.push_back(at(i) + "rejected placement is not followed by a raise or failure");
          if (raise) {
            const LogRecord& n = *next;
            if (!n.z_before || !n.z_after || std::abs((*n.z_after - *n.z_before) - dh) > 1e-9)
              v.push_back(at(i + 1) + "raise does not lift by the configured height");
          }
          expect = 5;
        } else if (r.agent == 6) {
          const bool fb = next && next->kind == RecordKind::RetractFallback;
          if (!(fb || next_fails)) v.push_back(at(i) + "rejected release is not followed by a fallback or failure");
          expect = 0;
        } else {
          if (!next_fails) v.push_back(at(i) + "rejected stage is not followed by a failure");
          expect = 0;
        }
        break;
      }
      case RecordKind::Raise:
        if (i == 0 || recs[i - 1].kind != RecordKind::Agent || recs[i - 1].agent != 5 || recs[i - 1].sigma != false)
          v.push_back(at(i) + "raise without a rejected placement");
        break;
      case RecordKind::RetractFallback:
        if (i == 0 || recs[i - 1].kind != RecordKind::Agent || recs[i - 1].agent != 6 || recs[i - 1].sigma != false)
          v.push_back(at(i) + "fallback without a rejected release");
        if (r.sigma == true) closed = true;
        break;
      case RecordKind::Failure:
        if (next) v.push_back(at(i) + "records follow a failure");
        closed = true;
        break;
      default:
        v.push_back(at(i) + "unexpected record kind " + to_string(r.kind));
        break;
    }
  }
  if (cycle != 0 && !closed) v.push_back("log ends inside cycle " + std::to_string(cycle));
  return v;
}

}  // namespace brickstack
