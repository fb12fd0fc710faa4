#include "brickstack/brickstack.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <stdexcept>
#include <string>

#include "brickstack/harness.hpp"
#include "brickstack/serialize.hpp"

using namespace brickstack;

struct bks_experiment {
  TrialConfig config;
  std::vector<TrialLog> logs;
};

namespace {

thread_local std::string g_last_error;

bks_status fail(bks_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
bks_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const IoError& e) {
    return fail(BKS_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(BKS_ERR_IO, e.what());
  } catch (const ParseError& e) {
    return fail(BKS_ERR_PARSE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(BKS_ERR_PARSE, e.what());
  } catch (const InfeasibleAction& e) {
    return fail(BKS_ERR_INFEASIBLE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(BKS_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(BKS_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(BKS_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BKS_ERR_INTERNAL, "unknown error");
  }
}

bks_status ok() {
  g_last_error.clear();
  return BKS_OK;
}

#define BKS_REQUIRE(cond, msg) \
  if (!(cond)) return fail(BKS_ERR_INVALID_ARGUMENT, msg)

std::vector<MetricsReport> reports_from_text(const char* text) {
  const json j = json::parse(text);
  std::vector<MetricsReport> out;
  if (j.is_array()) {
    for (const json& r : j) out.push_back(report_from_json(r));
  } else {
    out.push_back(report_from_json(j));
  }
  return out;
}

}  // namespace

extern "C" {

const char* bks_version(void) { return BRICKSTACK_VERSION; }

const char* bks_status_string(bks_status status) {
  switch (status) {
    case BKS_OK: return "ok";
    case BKS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BKS_ERR_IO: return "i/o error";
    case BKS_ERR_PARSE: return "parse error";
    case BKS_ERR_INFEASIBLE: return "infeasible";
    case BKS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bks_last_error(void) { return g_last_error.c_str(); }

void bks_string_free(char* s) { std::free(s); }

bks_status bks_experiment_create(const char* config_path, bks_experiment** out) {
  BKS_REQUIRE(out, "out is null");
  return guarded([&] {
    auto e = std::make_unique<bks_experiment>();
    if (config_path && *config_path) e->config.config = load_config(config_path);
    *out = e.release();
    return BKS_OK;
  });
}

void bks_experiment_destroy(bks_experiment* e) { delete e; }

bks_status bks_experiment_set_pattern(bks_experiment* e, const char* pattern) {
  BKS_REQUIRE(e && pattern, "null argument");
  return guarded([&] {
    e->config.pattern = pattern_from_string(pattern);
    return BKS_OK;
  });
}

bks_status bks_experiment_set_policy(bks_experiment* e, const char* policy) {
  BKS_REQUIRE(e && policy, "null argument");
  return guarded([&] {
    e->config.policy = policy_from_string(policy);
    return BKS_OK;
  });
}

bks_status bks_experiment_set_trials(bks_experiment* e, int trials) {
  BKS_REQUIRE(e, "null handle");
  BKS_REQUIRE(trials >= 1, "trials must be >= 1");
  e->config.trials = trials;
  return ok();
}

bks_status bks_experiment_set_bricks(bks_experiment* e, int bricks) {
  BKS_REQUIRE(e, "null handle");
  BKS_REQUIRE(bricks >= 1, "bricks must be >= 1");
  e->config.bricks = bricks;
  return ok();
}

bks_status bks_experiment_set_seed(bks_experiment* e, uint64_t seed) {
  BKS_REQUIRE(e, "null handle");
  e->config.seed = seed;
  return ok();
}

bks_status bks_experiment_set_noise(bks_experiment* e, double sigma_m) {
  BKS_REQUIRE(e, "null handle");
  BKS_REQUIRE(sigma_m >= 0.0 && sigma_m < 1.0, "noise must be in [0, 1) m");
  e->config.noise_sigma = sigma_m;
  return ok();
}

bks_status bks_experiment_set_workers(bks_experiment* e, int workers) {
  BKS_REQUIRE(e, "null handle");
  BKS_REQUIRE(workers >= 1, "workers must be >= 1");
  e->config.workers = workers;
  return ok();
}

bks_status bks_experiment_set_out_dir(bks_experiment* e, const char* dir) {
  BKS_REQUIRE(e, "null handle");
  e->config.out_dir = dir ? dir : "";
  return ok();
}

bks_status bks_experiment_set_placement_bias(bks_experiment* e, double dx_m, double dy_m) {
  BKS_REQUIRE(e, "null handle");
  BKS_REQUIRE(std::isfinite(dx_m) && std::isfinite(dy_m), "bias must be finite");
  e->config.faults.placement_bias = Vec2(dx_m, dy_m);
  return ok();
}

bks_status bks_experiment_set_weak_grasp(bks_experiment* e, int skip, int count, double total_force_n) {
  BKS_REQUIRE(e, "null handle");
  BKS_REQUIRE(skip >= 0 && count >= 0 && total_force_n >= 0.0, "weak-grasp settings must be non-negative");
  e->config.faults.weak_grasp_skip = skip;
  e->config.faults.weak_grasp_count = count;
  e->config.faults.weak_grasp_total_force = total_force_n;
  return ok();
}

bks_status bks_experiment_run(bks_experiment* e, char** report_json) {
  BKS_REQUIRE(e, "null handle");
  return guarded([&] {
    auto [logs, report] = run_experiment(e->config);
    e->logs = std::move(logs);
    if (report_json) *report_json = dup(report_to_json(report).dump(2));
    return BKS_OK;
  });
}

size_t bks_experiment_log_count(const bks_experiment* e) { return e ? e->logs.size() : 0; }

bks_status bks_experiment_log_jsonl(const bks_experiment* e, size_t index, char** jsonl) {
  BKS_REQUIRE(e && jsonl, "null argument");
  BKS_REQUIRE(index < e->logs.size(), "log index out of range");
  return guarded([&] {
    *jsonl = dup(to_jsonl(e->logs[index]));
    return BKS_OK;
  });
}

bks_status bks_eval_logs(const char* dir, char** reports_json, char** csv) {
  BKS_REQUIRE(dir, "dir is null");
  return guarded([&] {
    const std::vector<TrialLog> logs = load_logs(dir);
    if (logs.empty()) throw IoError(std::string("no .jsonl logs in ") + dir);
    const std::vector<MetricsReport> reports = aggregate_by_pattern(logs);
    json arr = json::array();
    for (const MetricsReport& r : reports) arr.push_back(report_to_json(r));
    if (reports_json) *reports_json = dup(arr.dump(2));
    if (csv) *csv = dup(reports_csv(reports));
    return BKS_OK;
  });
}

bks_status bks_report_csv(const char* reports_json, char** csv) {
  BKS_REQUIRE(reports_json && csv, "null argument");
  return guarded([&] {
    *csv = dup(reports_csv(reports_from_text(reports_json)));
    return BKS_OK;
  });
}

bks_status bks_compare(const char* const* reports_json, const char* const* labels, size_t count, int csv,
                       char** table) {
  BKS_REQUIRE(reports_json && table, "null argument");
  return guarded([&] {
    std::vector<ComparisonSide> sides;
    for (size_t i = 0; i < count; ++i) {
      if (!reports_json[i]) throw std::invalid_argument("null report");
      ComparisonSide side;
      side.reports = reports_from_text(reports_json[i]);
      if (side.reports.empty()) throw std::invalid_argument("empty report");
      side.label = labels && labels[i] ? labels[i] : side.reports.front().policy;
      sides.push_back(std::move(side));
    }
    *table = dup(compare_table(sides, csv != 0));
    return BKS_OK;
  });
}

bks_status bks_replay(const char* log_jsonl, int64_t from_tick, int* identical, char** result_json) {
  BKS_REQUIRE(log_jsonl, "log is null");
  return guarded([&] {
    const ReplayResult r = replay(log_jsonl, from_tick);
    if (identical) *identical = r.identical ? 1 : 0;
    if (result_json) {
      const json j = {{"identical", r.identical},
                      {"resume_tick", r.resume_tick},
                      {"resume_record", r.resume_record},
                      {"compared_lines", r.compared_lines},
                      {"mismatch", r.mismatch}};
      *result_json = dup(j.dump(2));
    }
    return BKS_OK;
  });
}

bks_status bks_audit(const char* log_jsonl, char** violations_json) {
  BKS_REQUIRE(log_jsonl && violations_json, "null argument");
  return guarded([&] {
    const std::vector<std::string> v = audit_log(trial_log_from_jsonl(log_jsonl));
    *violations_json = dup(json(v).dump(2));
    return BKS_OK;
  });
}

}  // extern "C"
