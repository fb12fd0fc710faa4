#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "brickstack/agents.hpp"

namespace brickstack {

enum class PolicyKind { Rules, Llm, SingleAgent, Classical };
const char* to_string(PolicyKind p);
PolicyKind policy_from_string(const std::string& s);

struct TrialConfig {
  Pattern pattern = Pattern::Pyramid;
  int trials = 10;
  int bricks = 6;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::Rules;
  Config config;
  double noise_sigma = 0.0;  // m
  Faults faults;
  int workers = 1;
  std::string out_dir;  // empty: keep logs in memory only

  void validate() const;
};

// --- metrics ---------------------------------------------------------------

struct BrickMetrics {
  double center_offset_m = 0.0;
  double rotation_error_deg = 0.0;
  double iou = 0.0;
};

/// Final pose against the assigned slot, using the brick's own half-extents for the slot box.
BrickMetrics brick_metrics(const FinalBrickPose& final_pose, const Goal& goal);

struct TrialMetrics {
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int bricks = 0;  // bricks averaged
  std::optional<BrickMetrics> mean;  // absent when no brick was assigned
};

TrialMetrics trial_metrics(const TrialLog& log);

struct MetricsReport {
  std::string policy;
  std::string pattern;
  int trials = 0;
  int success_count = 0;
  std::optional<BrickMetrics> global;  // mean of per-trial bars over successful trials
  std::vector<TrialMetrics> per_trial;
};

MetricsReport aggregate(const std::vector<TrialLog>& logs);
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
/// One row per trial plus a "global" row holding the success count, trial
/// count and global means (n/a when undefined).
std::string report_csv(const MetricsReport& r);
std::string reports_csv(const std::vector<MetricsReport>& reports);

/// Groups reports by (policy, pattern).
std::vector<MetricsReport> aggregate_by_pattern(const std::vector<TrialLog>& logs);

/// One row of a comparison: a method and its reports, one per pattern.
struct ComparisonSide {
  std::string label;
  std::vector<MetricsReport> reports;
};

/// Table of rotation error (deg), centre offset (cm) and IoU (%) per pattern
/// and pooled over patterns, one row per side.  With exactly two sides a
/// difference row (first minus second) follows.  Throws std::invalid_argument
/// when the sides do not cover the same patterns or fewer than two are given.
std::string compare_table(const std::vector<ComparisonSide>& sides, bool csv = false);

// --- experiments -----------------------------------------------------------

SceneState trial_scene(const TrialConfig& tc, const Goal& goal, int trial_index);
Goal trial_goal(const TrialConfig& tc);
TrialLog run_trial(const TrialConfig& tc, int trial_index);
std::pair<std::vector<TrialLog>, MetricsReport> run_experiment(const TrialConfig& tc);

std::string log_file_name(const TrialLog& log);
void write_log(const std::string& dir, const TrialLog& log);
/// Reads every *.jsonl file in `dir`, sorted by name.
std::vector<TrialLog> load_logs(const std::string& dir);

// --- replay and audit ------------------------------------------------------

struct ReplayResult {
  bool identical = false;
  std::int64_t resume_tick = 0;
  std::size_t resume_record = 0;  // index into the log's records
  std::size_t compared_lines = 0;
  std::string mismatch;  // first differing line, if any
};

/// Restarts the pipeline from the first stage record at or after `from_tick`
/// using only the serialized state in that record, and compares every
/// regenerated line with the original text.
ReplayResult replay(const std::string& jsonl_text, std::int64_t from_tick);

/// Gate-ordering and retry-edge checks.  Returns one message per violation.
std::vector<std::string> audit_log(const TrialLog& log);

}  // namespace brickstack
