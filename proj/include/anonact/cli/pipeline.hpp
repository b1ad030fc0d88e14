#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "anonact/cli/config.hpp"
#include "anonact/cli/manifest.hpp"
#include "anonact/score/score.hpp"

namespace anonact::cli {

// gen-corpus, train, unlearn, steer, sample, score, report
const std::vector<std::string>& stage_names();

using LogFn = std::function<void(const std::string&)>;

struct RunOptions {
  std::string until;  // last stage to run; empty runs every stage
  LogFn log;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.ini";

// Runs the stages in order inside `out_dir`, skipping any whose recorded
// config hash matches and whose outputs still carry their stored hashes.
// A failing stage is recorded as failed in the manifest before rethrowing.
RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                           const RunOptions& options = {});
RunManifest run_experiment(const std::filesystem::path& config_path,
                           const std::filesystem::path& out_dir, const RunOptions& options = {});

// The report of a completed score stage, recomputed from its artifacts.
score::ExperimentReport load_report(const std::filesystem::path& run_dir);

struct Summary {
  std::string experiment;
  std::size_t questions = 0;
  std::vector<sample::Condition> conditions;
  std::map<sample::Condition, std::string> auc;  // formatted as in auc.csv, "na" without a curve
  std::map<sample::Condition, double> median_caf;
  std::size_t steered_above_unlearned = 0;
  bool no_improvement = false;  // median steered CAF <= median unlearned CAF
  // Replacement runs only: questions where steering lowered the false
  // keyword's probability / raised the next-token entropy.
  bool replacement = false;
  std::size_t false_keyword_down = 0;
  std::size_t entropy_up = 0;
};

Summary summarize(const std::filesystem::path& run_dir);
std::string format_summary(const Summary& summary);

// CSV, SVG and summary.txt under <run_dir>/report. Throws StateError when the
// score stage has not completed.
void emit_report(const std::filesystem::path& run_dir);

struct AblationRow {
  double coefficient = 0.0;
  std::size_t layer = 0;  // post-block index
  double median_caf = 0.0;
  double mean_caf = 0.0;
  std::size_t improved = 0;  // questions with steered CAF above unlearned
  std::size_t questions = 0;
};

// Coefficient x layer sweep over the unlearned model (needs a completed
// unlearn stage); writes ablation/ablation.csv and records an "ablate" stage.
std::vector<AblationRow> run_ablation(const std::filesystem::path& run_dir,
                                      const RunOptions& options = {});

}  // namespace anonact::cli
