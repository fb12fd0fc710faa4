#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "brickstack/harness.hpp"
#include "brickstack/serialize.hpp"

namespace brickstack {

const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Rules: return "rules";
    case PolicyKind::Llm: return "llm";
    case PolicyKind::SingleAgent: return "single-agent";
    case PolicyKind::Classical: return "classical";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& s) {
  for (PolicyKind p : {PolicyKind::Rules, PolicyKind::Llm, PolicyKind::SingleAgent, PolicyKind::Classical})
    if (s == to_string(p)) return p;
  throw std::invalid_argument("unknown policy: " + s);
}

BrickMetrics brick_metrics(const FinalBrickPose& f, const Goal& goal) {
  const auto it = std::find_if(goal.slots.begin(), goal.slots.end(), [&](const Slot& s) { return s.index == f.slot; });
  if (it == goal.slots.end()) throw std::out_of_range("no slot " + std::to_string(f.slot));
  const Obb target{it->pose, f.half_extents};
  const Obb actual{f.pose, f.half_extents};
  return {center_offset(f.pose.translation, it->pose.translation), rotation_error_deg(f.pose.rotation, it->pose.rotation),
          obb_iou(actual, target)};
}

TrialMetrics trial_metrics(const TrialLog& log) {
  TrialMetrics t;
  t.trial = log.header.trial;
  t.seed = log.header.seed;
  t.success = log.summary.success;
  if (log.summary.final_poses.empty()) return t;
  BrickMetrics sum;
  for (const FinalBrickPose& f : log.summary.final_poses) {
    const BrickMetrics m = brick_metrics(f, log.header.goal);
    sum.center_offset_m += m.center_offset_m;
    sum.rotation_error_deg += m.rotation_error_deg;
    sum.iou += m.iou;
  }
  const double n = static_cast<double>(log.summary.final_poses.size());
  t.bricks = static_cast<int>(log.summary.final_poses.size());
  t.mean = BrickMetrics{sum.center_offset_m / n, sum.rotation_error_deg / n, sum.iou / n};
  return t;
}

MetricsReport aggregate(const std::vector<TrialLog>& logs) {
  MetricsReport r;
  if (!logs.empty()) {
    const TrialHeader& h = logs.front().header;
    r.policy = h.policy == "multi_agent" && h.proposer == "llm" ? "llm" : h.policy;
    r.pattern = to_string(h.goal.pattern);
  }
  r.trials = static_cast<int>(logs.size());
  BrickMetrics sum;
  for (const TrialLog& log : logs) {
    r.per_trial.push_back(trial_metrics(log));
    const TrialMetrics& t = r.per_trial.back();
    if (!t.success || !t.mean) continue;
    ++r.success_count;
    sum.center_offset_m += t.mean->center_offset_m;
    sum.rotation_error_deg += t.mean->rotation_error_deg;
    sum.iou += t.mean->iou;
  }
  if (r.success_count > 0) {
    const double n = r.success_count;
    r.global = BrickMetrics{sum.center_offset_m / n, sum.rotation_error_deg / n, sum.iou / n};
  }
  return r;
}

namespace {

json metrics_json(const std::optional<BrickMetrics>& m) {
  if (!m) return nullptr;
  return {{"center_offset_m", m->center_offset_m}, {"rotation_error_deg", m->rotation_error_deg}, {"iou", m->iou}};
}

std::optional<BrickMetrics> metrics_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return BrickMetrics{j.at("center_offset_m").get<double>(), j.at("rotation_error_deg").get<double>(),
                      j.at("iou").get<double>()};
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  std::string s = os.str();
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000"
  return s;
}

}  // namespace

json report_to_json(const MetricsReport& r) {
  json trials = json::array();
  for (const TrialMetrics& t : r.per_trial) {
    trials.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"success", t.success},
                      {"bricks", t.bricks},
                      {"mean", metrics_json(t.mean)}});
  }
  return {{"policy", r.policy},
          {"pattern", r.pattern},
          {"trials", r.trials},
          {"success_count", r.success_count},
          {"global_defined", r.global.has_value()},
          {"global", metrics_json(r.global)},
          {"per_trial", trials}};
}

MetricsReport report_from_json(const json& j) {
  try {
    MetricsReport r;
    r.policy = j.at("policy").get<std::string>();
    r.pattern = j.at("pattern").get<std::string>();
    r.trials = j.at("trials").get<int>();
    r.success_count = j.at("success_count").get<int>();
    r.global = metrics_from(j.at("global"));
    for (const json& t : j.at("per_trial")) {
      TrialMetrics m;
      m.trial = t.at("trial").get<int>();
      m.seed = t.at("seed").get<std::uint64_t>();
      m.success = t.at("success").get<bool>();
      m.bricks = t.at("bricks").get<int>();
      m.mean = metrics_from(t.at("mean"));
      r.per_trial.push_back(m);
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  }
}

std::string reports_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "policy,pattern,trial,seed,success,bricks,center_offset_m,rotation_error_deg,iou\n";
  for (const MetricsReport& r : reports) {
    const std::string key = r.policy + ',' + r.pattern + ',';
    for (const TrialMetrics& t : r.per_trial) {
      os << key << t.trial << ',' << t.seed << ',' << (t.success ? 1 : 0) << ',' << t.bricks << ',';
      if (t.mean)
        os << t.mean->center_offset_m << ',' << t.mean->rotation_error_deg << ',' << t.mean->iou << '\n';
      else
        os << ",,\n";
    }
    os << key << "global,," << r.success_count << ',' << r.trials << ',';
    if (r.global)
      os << r.global->center_offset_m << ',' << r.global->rotation_error_deg << ',' << r.global->iou << '\n';
    else
      os << "n/a,n/a,n/a\n";
  }
  return os.str();
}

std::string report_csv(const MetricsReport& r) { return reports_csv({r}); }

std::vector<MetricsReport> aggregate_by_pattern(const std::vector<TrialLog>& logs) {
  std::vector<std::pair<std::string, std::vector<TrialLog>>> groups;
  for (const TrialLog& log : logs) {
    const std::string key = log.header.policy + "/" + log.header.proposer + "/" + to_string(log.header.goal.pattern);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, {}});
      it = std::prev(groups.end());
    }
    it->second.push_back(log);
  }
  std::vector<MetricsReport> out;
  for (const auto& g : groups) out.push_back(aggregate(g.second));
  return out;
}

std::string compare_table(const std::vector<ComparisonSide>& sides, bool csv) {
  if (sides.size() < 2) throw std::invalid_argument("compare needs at least two reports");

  std::vector<std::string> patterns;
  for (const MetricsReport& r : sides.front().reports)
    if (std::find(patterns.begin(), patterns.end(), r.pattern) == patterns.end()) patterns.push_back(r.pattern);
  if (patterns.empty()) throw std::invalid_argument("report " + sides.front().label + " is empty");
  auto find = [&](const ComparisonSide& side, const std::string& pat) -> const MetricsReport* {
    for (const MetricsReport& r : side.reports)
      if (r.pattern == pat) return &r;
    return nullptr;
  };
  for (const ComparisonSide& side : sides) {
    for (const MetricsReport& r : side.reports)
      if (std::find(patterns.begin(), patterns.end(), r.pattern) == patterns.end())
        throw std::invalid_argument("mismatched patterns: " + side.label + " has " + r.pattern);
    for (const std::string& pat : patterns)
      if (!find(side, pat)) throw std::invalid_argument("mismatched patterns: " + side.label + " lacks " + pat);
  }

  // Per pattern the global means; the average column pools successful trials across patterns.
  auto cell = [&](const ComparisonSide& side, const std::string& pat) -> std::optional<BrickMetrics> {
    if (pat != "avg") return find(side, pat)->global;
    BrickMetrics sum;
    int n = 0;
    for (const std::string& p : patterns) {
      for (const TrialMetrics& t : find(side, p)->per_trial) {
        if (!t.success || !t.mean) continue;
        sum.center_offset_m += t.mean->center_offset_m;
        sum.rotation_error_deg += t.mean->rotation_error_deg;
        sum.iou += t.mean->iou;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return BrickMetrics{sum.center_offset_m / n, sum.rotation_error_deg / n, sum.iou / n};
  };

  std::vector<std::string> cols = patterns;
  cols.push_back("avg");
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"method"};
  for (const std::string& c : cols) {
    head.push_back(c + " rot(deg)");
    head.push_back(c + " ctr(cm)");
    head.push_back(c + " IoU(%)");
  }
  rows.push_back(head);

  auto fmt = [](const std::optional<BrickMetrics>& m, std::vector<std::string>& row) {
    if (!m) {
      row.insert(row.end(), {"n/a", "n/a", "n/a"});
      return;
    }
    row.push_back(fixed(m->rotation_error_deg, 3));
    row.push_back(fixed(m->center_offset_m * 100.0, 3));
    row.push_back(fixed(m->iou * 100.0, 2));
  };
  for (const ComparisonSide& side : sides) {
    std::vector<std::string> row{side.label};
    for (const std::string& c : cols) fmt(cell(side, c), row);
    rows.push_back(row);
  }
  if (sides.size() == 2) {
    std::vector<std::string> row{"diff"};
    for (const std::string& c : cols) {
      const auto a = cell(sides[0], c);
      const auto b = cell(sides[1], c);
      if (a && b) {
        fmt(BrickMetrics{a->center_offset_m - b->center_offset_m, a->rotation_error_deg - b->rotation_error_deg,
                         a->iou - b->iou},
            row);
      } else {
        fmt(std::nullopt, row);
      }
    }
    rows.push_back(row);
  }

  std::ostringstream os;
  if (csv) {
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
      os << '\n';
    }
    return os.str();
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0)
        os << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      else
        os << "  " << std::right << std::setw(static_cast<int>(width[i])) << row[i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace brickstack
