// brickstack: run, evaluate, compare and replay brick-stacking experiments.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brickstack/brickstack.h"

namespace {

struct CString {
  char* p = nullptr;
  ~CString() { bks_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Failure {
  bks_status status;
};

void check(bks_status s) {
  if (s != BKS_OK) {
    std::cerr << "error (" << bks_status_string(s) << "): " << bks_last_error() << "\n";
    throw Failure{s};
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    throw Failure{BKS_ERR_IO};
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{BKS_ERR_IO};
  }
}

int exit_code(bks_status s) { return s == BKS_OK ? 0 : 10 + static_cast<int>(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated multi-stage brick stacking: experiments, metrics and replay"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bks_version()));

  // run
  auto* run = app.add_subcommand("run", "Run seeded trials and write one JSONL log per trial");
  std::string pattern = "pyramid", policy = "rules", config_path, out_dir;
  int trials = 10, bricks = 6, workers = 1;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::vector<double> bias_mm;
  double weak_force = -1.0;
  int weak_skip = 0, weak_count = 1;
  run->add_option("--pattern", pattern, "Goal pattern")->check(CLI::IsMember({"pyramid", "grid"}));
  run->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
  run->add_option("--policy", policy, "Planner")->check(CLI::IsMember({"rules", "llm", "single-agent", "classical"}));
  run->add_option("--seed", seed, "Base seed; trial i uses seed + i");
  run->add_option("--noise", noise, "Initial pose noise sigma (m)")->check(CLI::Range(0.0, 0.1));
  run->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--bricks", bricks, "Bricks per trial")->check(CLI::PositiveNumber);
  run->add_option("--workers", workers, "Parallel trials")->check(CLI::PositiveNumber);
  run->add_option("--placement-bias-mm", bias_mm, "Bias added to placement targets, dx dy (mm)")->expected(2);
  run->add_option("--weak-grasp-force", weak_force, "Total grip force (N) for weakened grasps");
  run->add_option("--weak-grasp-skip", weak_skip, "Grasps before the first weakened one")->check(CLI::NonNegativeNumber);
  run->add_option("--weak-grasp-count", weak_count, "Number of weakened grasps")->check(CLI::NonNegativeNumber);

  // eval
  auto* eval = app.add_subcommand("eval", "Compute metrics from a directory of trial logs");
  std::string logs_dir, eval_out;
  eval->add_option("--logs", logs_dir, "Directory of .jsonl logs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_out, "Output prefix for .json and .csv (default: <logs>/metrics)");

  // compare
  auto* compare = app.add_subcommand("compare", "Side-by-side table of two or more metrics reports");
  std::vector<std::string> report_paths, labels;
  std::string compare_out;
  bool compare_csv = false;
  compare->add_option("--reports", report_paths, "Report JSON files")->required()->expected(2, 16)->check(CLI::ExistingFile);
  compare->add_option("--labels", labels, "Row labels, one per report");
  compare->add_flag("--csv", compare_csv, "Emit CSV instead of aligned text");
  compare->add_option("--out", compare_out, "Write the table to a file as well");

  // replay
  auto* replay = app.add_subcommand("replay", "Re-execute a log from a tick and compare with the original");
  std::string log_path;
  std::int64_t from_tick = 0;
  replay->add_option("--log", log_path, "Trial log")->required()->check(CLI::ExistingFile);
  replay->add_option("--from-tick", from_tick, "Resume at the first stage at or after this tick")->required();

  // audit
  auto* audit = app.add_subcommand("audit", "Check gate ordering and retry edges in trial logs");
  std::vector<std::string> audit_paths;
  audit->add_option("--log", audit_paths, "Trial logs")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      bks_experiment* raw = nullptr;
      check(bks_experiment_create(config_path.empty() ? nullptr : config_path.c_str(), &raw));
      std::unique_ptr<bks_experiment, decltype(&bks_experiment_destroy)> e(raw, bks_experiment_destroy);
      check(bks_experiment_set_pattern(e.get(), pattern.c_str()));
      check(bks_experiment_set_policy(e.get(), policy.c_str()));
      check(bks_experiment_set_trials(e.get(), trials));
      check(bks_experiment_set_bricks(e.get(), bricks));
      check(bks_experiment_set_seed(e.get(), seed));
      check(bks_experiment_set_noise(e.get(), noise));
      check(bks_experiment_set_workers(e.get(), workers));
      check(bks_experiment_set_out_dir(e.get(), out_dir.c_str()));
      if (!bias_mm.empty()) check(bks_experiment_set_placement_bias(e.get(), bias_mm[0] * 1e-3, bias_mm[1] * 1e-3));
      if (weak_force >= 0.0) check(bks_experiment_set_weak_grasp(e.get(), weak_skip, weak_count, weak_force));

      CString report, csv;
      check(bks_experiment_run(e.get(), &report.p));
      check(bks_report_csv(report.p, &csv.p));
      const std::filesystem::path dir(out_dir);
      const std::string stem = policy + "_" + pattern;
      write_file((dir / (stem + "_report.json")).string(), report.str() + "\n");
      write_file((dir / (stem + "_report.csv")).string(), csv.str());
      std::cout << report.str() << "\n";
      return 0;
    }

    if (*eval) {
      CString reports, csv;
      check(bks_eval_logs(logs_dir.c_str(), &reports.p, &csv.p));
      const std::string prefix =
          eval_out.empty() ? (std::filesystem::path(logs_dir) / "metrics").string() : eval_out;
      write_file(prefix + ".json", reports.str() + "\n");
      write_file(prefix + ".csv", csv.str());
      std::cout << reports.str() << "\n";
      return 0;
    }

    if (*compare) {
      if (!labels.empty() && labels.size() != report_paths.size()) {
        std::cerr << "error: --labels needs one label per report\n";
        return exit_code(BKS_ERR_INVALID_ARGUMENT);
      }
      std::vector<std::string> texts;
      for (const std::string& p : report_paths) texts.push_back(read_file(p));
      std::vector<const char*> text_ptrs, label_ptrs;
      for (const std::string& t : texts) text_ptrs.push_back(t.c_str());
      for (const std::string& l : labels) label_ptrs.push_back(l.c_str());
      CString table;
      check(bks_compare(text_ptrs.data(), labels.empty() ? nullptr : label_ptrs.data(), text_ptrs.size(),
                        compare_csv ? 1 : 0, &table.p));
      if (!compare_out.empty()) write_file(compare_out, table.str());
      std::cout << table.str();
      return 0;
    }

    if (*replay) {
      const std::string text = read_file(log_path);
      int identical = 0;
      CString result;
      check(bks_replay(text.c_str(), from_tick, &identical, &result.p));
      std::cout << result.str() << "\n";
      return identical ? 0 : 1;
    }

    if (*audit) {
      bool clean = true;
      for (const std::string& p : audit_paths) {
        const std::string text = read_file(p);
        CString v;
        check(bks_audit(text.c_str(), &v.p));
        const std::string s = v.str();
        const bool empty = s.find('"') == std::string::npos;
        std::cout << p << ": " << (empty ? "ok" : s) << "\n";
        clean = clean && empty;
      }
      return clean ? 0 : 1;
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 0;
}
