#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "anonact/cli/config.hpp"
#include "anonact/cli/pipeline.hpp"

namespace fs = std::filesystem;
using namespace anonact;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string stage;
  std::string preset;
  std::optional<std::size_t> samples;
  std::optional<double> coefficient;
  std::string layers;
  bool global = false;
};

void add_flags(CLI::App* app, Flags& f, bool with_stage) {
  app->add_option("--config", f.config, "experiment config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out, "run directory")->capture_default_str();
  if (with_stage) app->add_option("--stage", f.stage, "last stage to run");
  app->add_option("--preset", f.preset, "built-in experiment")->check(CLI::IsMember(cli::preset_names()));
  app->add_option("--samples", f.samples, "answers sampled per question and condition");
  app->add_option("--coefficient", f.coefficient, "steering coefficient");
  app->add_option("--layers", f.layers, "comma-separated post-block layer indices");
  app->add_flag("--global", f.global, "steer with the mean vector over questions");
}

// Preset (or the run directory's saved config), then the config file, then flags.
cli::ExperimentConfig resolve(const Flags& f) {
  cli::ExperimentConfig c;
  const auto saved = fs::path(f.out) / cli::kConfigFile;
  if (!f.preset.empty()) {
    c = cli::preset(f.preset);
  } else if (f.config.empty() && fs::exists(saved)) {
    c = cli::load_config(saved, c);
  }
  if (!f.config.empty()) c = cli::load_config(f.config, c);
  if (f.seed) c.seed = *f.seed;
  if (f.samples) c.decode.samples = *f.samples;
  if (f.coefficient) c.steer.coefficient = *f.coefficient;
  if (!f.layers.empty()) c.steer.layers = cli::parse_size_list(f.layers);
  if (f.global) c.steer.global = true;
  c.validate();
  return c;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anonymized-activation steering laboratory"};
  app.require_subcommand(1);
  Flags flags;

  std::vector<std::pair<CLI::App*, std::string>> stage_cmds;
  for (const auto& name : cli::stage_names()) {
    auto* sub = app.add_subcommand(name, "run the pipeline through the " + name + " stage");
    add_flags(sub, flags, false);
    stage_cmds.emplace_back(sub, name);
  }
  auto* run = app.add_subcommand("run", "run every stage (or through --stage)");
  add_flags(run, flags, true);
  auto* ablate = app.add_subcommand("ablate", "coefficient x layer sweep on the unlearned model");
  add_flags(ablate, flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(flags);
    cli::RunOptions opts;
    opts.log = log_line;
    for (const auto& [sub, name] : stage_cmds) {
      if (sub->parsed()) opts.until = name;
    }
    if (run->parsed()) opts.until = flags.stage;
    if (ablate->parsed()) {
      opts.until = "unlearn";
      cli::run_experiment(config, flags.out, opts);
      const auto rows = cli::run_ablation(flags.out, opts);
      std::cout << rows.size() << " ablation cells written to "
                << (fs::path(flags.out) / "ablation" / "ablation.csv").string() << '\n';
      return 0;
    }
    cli::run_experiment(config, flags.out, opts);
    if (opts.until.empty() || opts.until == "report") std::cout << cli::format_summary(cli::summarize(flags.out));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
