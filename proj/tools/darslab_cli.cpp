// Command-line front end: launch and resume runs, evaluate checkpoints,
// export plot data, and inspect resolved configurations.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "darslab/checkpoint.hpp"
#include "darslab/config.hpp"
#include "darslab/errors.hpp"
#include "darslab/evaluation.hpp"
#include "darslab/experiment.hpp"
#include "darslab/metrics.hpp"
#include "darslab/plot_data.hpp"
#include "darslab/presets.hpp"
#include "darslab/version.hpp"

namespace {

struct ConfigFlags {
  std::string preset;
  std::string config_file;
  std::string run_name;
  std::string out_dir;
  std::string schedule;
  std::string advantage_mode;
  std::uint64_t seed = 0;
  int threads = 0;
  int total_steps = 0;
  int n_max = 0;
  int ppo_splits = 0;
  int ppo_epochs = 0;
  int batch_size = 0;
  int rollout_n = 0;
  double lr = 0.0;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--preset", f.preset, "preset name (see list-presets)");
  cmd->add_option("--config", f.config_file, "JSON config file layered over the preset");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--run-name", f.run_name, "run directory name under the output root");
  cmd->add_option("--out-dir", f.out_dir, "output root for run directories")
      ->envname("DARSLAB_OUT");
  cmd->add_option("--threads", f.threads, "worker threads (0 = hardware)");
  cmd->add_option("--total-steps", f.total_steps, "training iterations");
  cmd->add_option("--n-max", f.n_max, "DARS cap on extra rollouts per prompt");
  cmd->add_option("--schedule", f.schedule, "DARS schedule: et or hw");
  cmd->add_option("--ppo-splits", f.ppo_splits, "mini-batch shards per iteration");
  cmd->add_option("--ppo-epochs", f.ppo_epochs, "passes over the iteration's shards");
  cmd->add_option("--batch-size", f.batch_size, "prompts per iteration");
  cmd->add_option("--rollout-n", f.rollout_n, "rollouts per prompt (and DARS phase-1 k0)");
  cmd->add_option("--lr", f.lr, "SGD learning rate");
  cmd->add_option("--advantage-mode", f.advantage_mode, "nostd or std");
}

darslab::ExperimentConfig resolve_config(const CLI::App* cmd, const ConfigFlags& f) {
  using namespace darslab;
  nlohmann::json file_json;
  std::string preset = "baseline";
  if (cmd->count("--config")) {
    file_json = parse_json_file(f.config_file);
    if (file_json.is_object() && file_json.contains("preset")) {
      try {
        preset = file_json["preset"].get<std::string>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("type-mismatch: config.preset");
      }
    }
  }
  if (cmd->count("--preset")) preset = f.preset;
  ExperimentConfig cfg = make_preset(preset);
  if (cmd->count("--config")) cfg = config_from_json(file_json, cfg);
  cfg.preset = preset;

  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--run-name")) cfg.run_name = f.run_name;
  if (cmd->count("--out-dir")) cfg.out_root = f.out_dir;
  if (cmd->count("--threads")) cfg.threads = f.threads;
  if (cmd->count("--total-steps")) cfg.trainer.total_steps = f.total_steps;
  if (cmd->count("--ppo-splits")) cfg.trainer.ppo_splits = f.ppo_splits;
  if (cmd->count("--ppo-epochs")) cfg.trainer.ppo_epochs = f.ppo_epochs;
  if (cmd->count("--batch-size")) cfg.trainer.batch_size = f.batch_size;
  if (cmd->count("--rollout-n")) cfg.trainer.rollout_n = f.rollout_n;
  if (cmd->count("--lr")) cfg.trainer.learning_rate = f.lr;
  if (cmd->count("--advantage-mode"))
    cfg.trainer.advantage_mode = detail::parse_advantage_mode(f.advantage_mode);
  if (cmd->count("--n-max")) {
    if (!cfg.trainer.dars) throw ConfigError("constraint: --n-max requires a DARS preset");
    cfg.trainer.dars->n_max = f.n_max;
  }
  if (cmd->count("--schedule")) {
    if (!cfg.trainer.dars) throw ConfigError("constraint: --schedule requires a DARS preset");
    cfg.trainer.dars->schedule = detail::parse_schedule(f.schedule);
  }
  if (cfg.trainer.dars) {
    cfg.trainer.dars->advantage_mode = cfg.trainer.advantage_mode;
    cfg.trainer.dars->base_rollout_n = cfg.trainer.rollout_n;
    if (cmd->count("--rollout-n")) cfg.trainer.dars->phase1_k0 = f.rollout_n;
  }
  validate_config(cfg);
  return cfg;
}

void print_eval_report(const darslab::EvalReport& report) {
  using darslab::format_double;
  std::cout << "step " << report.step << ", " << report.samples_per_problem
            << " samples/problem\n";
  std::cout << "pass@1 " << format_double(report.pass1) << "\n";
  for (const auto& [k, v] : report.pass_at_k)
    std::cout << "pass@" << k << " " << format_double(v) << "\n";
  std::cout << "coverage@" << report.samples_per_problem << " "
            << format_double(report.coverage_at_n) << "\n";
  for (const auto& [k, v] : report.analytic_pass_at_k)
    std::cout << "analytic_pass@" << k << " " << format_double(v) << "\n";
  std::cout << "mean_token_entropy " << format_double(report.mean_token_entropy) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"darslab: desk-scale RLVR training laboratory"};
  app.set_version_flag("--version", darslab::kVersion);
  app.require_subcommand(1);

  ConfigFlags run_flags;
  std::string resume_dir;
  CLI::App* run_cmd = app.add_subcommand("run", "train under a preset or config");
  add_config_flags(run_cmd, run_flags);
  run_cmd->add_option("--resume", resume_dir, "continue an interrupted run directory");

  std::string eval_dir;
  int eval_threads = 0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a run's checkpoint");
  eval_cmd->add_option("--run-dir", eval_dir, "run directory")->required();
  eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = hardware)");

  std::string plot_kind;
  std::string plot_out;
  int plot_rollout_n = 8;
  int plot_resolution = 64;
  std::vector<int> plot_n_max = {8, 16, 32};
  std::vector<std::string> plot_runs;
  CLI::App* plot_cmd = app.add_subcommand("plot-data", "export figure/table CSVs");
  plot_cmd->add_option("--kind", plot_kind, "fig3, fig5, fig7, fig8, fig10 or table2")
      ->required();
  plot_cmd->add_option("--out", plot_out, "output CSV path (default <kind>.csv)");
  plot_cmd->add_option("--rollout-n", plot_rollout_n, "curve group size (fig3)");
  plot_cmd->add_option("--resolution", plot_resolution, "curve sampling resolution (fig3)");
  plot_cmd->add_option("--n-max", plot_n_max, "re-balance caps to overlay (fig3)");
  plot_cmd->add_option("runs", plot_runs, "run directories");

  ConfigFlags show_flags;
  CLI::App* show_cmd = app.add_subcommand("show-config", "print the resolved config as JSON");
  add_config_flags(show_cmd, show_flags);

  CLI::App* list_cmd = app.add_subcommand("list-presets", "list preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      std::filesystem::path dir;
      if (run_cmd->count("--resume")) {
        std::optional<int> steps;
        std::optional<int> threads;
        if (run_cmd->count("--total-steps")) steps = run_flags.total_steps;
        if (run_cmd->count("--threads")) threads = run_flags.threads;
        dir = darslab::resume_experiment(resume_dir, steps, threads);
      } else {
        dir = darslab::run_experiment(resolve_config(run_cmd, run_flags));
      }
      std::cout << dir.string() << "\n";
    } else if (eval_cmd->parsed()) {
      const auto paths = darslab::run_paths(eval_dir);
      const darslab::ExperimentConfig cfg = darslab::load_run_config(eval_dir);
      const darslab::TaskSuite suite =
          darslab::import_suite(darslab::detail::read_text_file(paths.suite_txt));
      const darslab::Checkpoint ckpt = darslab::load_checkpoint(paths.checkpoint_bin);
      const darslab::Parallel par(eval_cmd->count("--threads") ? eval_threads : cfg.threads);
      const darslab::EvalReport report =
          darslab::evaluate(ckpt.policy, suite, darslab::resolved_eval_config(cfg),
                            static_cast<int>(ckpt.step), par);
      print_eval_report(report);
    } else if (plot_cmd->parsed()) {
      const std::filesystem::path out = plot_out.empty() ? plot_kind + ".csv" : plot_out;
      if (plot_kind == "fig3") {
        darslab::write_fig3(out, plot_rollout_n, plot_resolution, plot_n_max);
      } else {
        if (plot_runs.empty())
          throw darslab::ConfigError("constraint: plot-data kind " + plot_kind +
                                     " needs at least one run directory");
        std::vector<darslab::RunData> runs;
        for (const std::string& dir : plot_runs) runs.push_back(darslab::load_run(dir));
        if (plot_kind == "fig5")
          darslab::write_fig5(out, runs);
        else if (plot_kind == "fig7")
          darslab::write_fig7(out, runs);
        else if (plot_kind == "fig8")
          darslab::write_fig8(out, runs);
        else if (plot_kind == "fig10")
          darslab::write_fig10(out, runs);
        else if (plot_kind == "table2")
          darslab::write_table2(out, runs);
        else
          throw darslab::ConfigError("unknown plot-data kind: " + plot_kind);
      }
      std::cout << out.string() << "\n";
    } else if (show_cmd->parsed()) {
      std::cout << darslab::config_to_json(resolve_config(show_cmd, show_flags)).dump(2) << "\n";
    } else if (list_cmd->parsed()) {
      for (const std::string& name : darslab::preset_names()) std::cout << name << "\n";
    }
  } catch (const darslab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const darslab::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const darslab::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
