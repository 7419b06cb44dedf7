#pragma once

#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "darslab/checkpoint.hpp"
#include "darslab/config.hpp"
#include "darslab/errors.hpp"
#include "darslab/evaluation.hpp"
#include "darslab/metrics.hpp"
#include "darslab/presets.hpp"
#include "darslab/trainer.hpp"

namespace darslab {

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config_json;
  std::filesystem::path suite_txt;
  std::filesystem::path metrics_csv;
  std::filesystem::path audit_csv;
  std::filesystem::path checkpoint_bin;
  std::filesystem::path report_txt;
};

inline RunPaths run_paths(const std::filesystem::path& dir) {
  return {dir,
          dir / "config.json",
          dir / "suite.txt",
          dir / "metrics.csv",
          dir / "dars_audit.csv",
          dir / "checkpoint.bin",
          dir / "report.txt"};
}

// Stable identity of a run as it appears inside metrics rows. Deliberately
// timestamp-free: re-running the same preset and seed must reproduce the
// metrics file byte for byte.
inline std::string run_id(const ExperimentConfig& cfg) {
  return cfg.preset + "-s" + std::to_string(cfg.seed);
}

// Directory name for a fresh run; the timestamp keeps repeated launches from
// colliding on disk without leaking into any recorded content.
inline std::string default_run_name(const ExperimentConfig& cfg) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  return run_id(cfg) + "-" + stamp;
}

inline constexpr const char* kAuditHeader =
    "step,problem_id,phase1_k0,successes,a_hat,extra,effective_n_max";

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("file-write: cannot open " + path.string());
  out << text;
  if (!out) throw IoError("file-write: short write to " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("file-read: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_report(const RunPaths& paths, const ExperimentConfig& cfg,
                         const EvalReport& final_eval, long cumulative_rollouts) {
  std::ostringstream out;
  out << "run: " << run_id(cfg) << "\n";
  out << "preset: " << cfg.preset << "  seed: " << cfg.seed << "\n";
  out << "steps: " << cfg.trainer.total_steps
      << "  cumulative rollouts: " << cumulative_rollouts << "\n";
  out << "final eval (step " << final_eval.step << ", " << final_eval.samples_per_problem
      << " samples/problem)\n";
  out << "  pass@1: " << format_double(final_eval.pass1) << "\n";
  for (const auto& [k, v] : final_eval.pass_at_k)
    out << "  pass@" << k << ": " << format_double(v) << "\n";
  out << "  coverage@" << final_eval.samples_per_problem << ": "
      << format_double(final_eval.coverage_at_n) << "\n";
  for (const auto& [k, v] : final_eval.analytic_pass_at_k)
    out << "  analytic pass@" << k << ": " << format_double(v) << "\n";
  out << "  mean token entropy: " << format_double(final_eval.mean_token_entropy) << "\n";
  write_text_file(paths.report_txt, out.str());
}

// Everything shared between a fresh start and a resume: hook wiring, the
// training loop, and the final report.
inline std::filesystem::path run_common(const ExperimentConfig& cfg, const TaskSuite& suite,
                                        const RunPaths& paths, int start_step,
                                        const Policy* initial, long cumulative_start,
                                        bool fresh_metrics) {
  const Parallel par(cfg.threads);
  // The run seed drives everything; TrainerConfig::seed only exists so the
  // training layer can stand alone.
  TrainerConfig trainer_cfg = cfg.trainer;
  trainer_cfg.seed = cfg.seed;
  MetricsWriter writer(paths.metrics_csv, !fresh_metrics);
  std::ofstream audit;
  if (cfg.trainer.dars) {
    audit.open(paths.audit_csv, fresh_metrics ? std::ios::trunc : std::ios::app);
    if (!audit) throw IoError("audit-write: cannot open " + paths.audit_csv.string());
    if (fresh_metrics) audit << kAuditHeader << '\n';
  }

  const std::string id = run_id(cfg);
  const EvalConfig eval_cfg = resolved_eval_config(cfg);
  long cumulative = cumulative_start;
  EvalReport last_eval;

  const auto emit = [&](int step, const std::string& metric, std::optional<int> k, double value) {
    writer.write({id, cfg.preset, cfg.seed, step, metric, k, value});
  };

  RunHooks hooks;
  hooks.on_metrics = [&](const IterationMetrics& m) {
    cumulative += m.rollout_count;
    emit(m.step, "mean_reward", std::nullopt, m.mean_reward);
    emit(m.step, "zero_gradient_group_fraction", std::nullopt, m.zero_gradient_group_fraction);
    emit(m.step, "mean_token_entropy", std::nullopt, m.mean_token_entropy);
    emit(m.step, "avg_rollouts_per_prompt", std::nullopt, m.avg_rollouts_per_prompt);
    emit(m.step, "rollouts", std::nullopt, static_cast<double>(m.rollout_count));
    emit(m.step, "cumulative_rollouts", std::nullopt, static_cast<double>(cumulative));
    if (!m.updates.empty()) {
      double grad_norm = 0.0;
      double clip_fraction = 0.0;
      long tokens = 0;
      for (const UpdateStats& u : m.updates) {
        grad_norm += u.grad_norm;
        clip_fraction += u.clip_fraction;
        tokens += u.tokens;
      }
      emit(m.step, "surrogate", std::nullopt, m.updates.front().surrogate);
      emit(m.step, "grad_norm", std::nullopt, grad_norm / m.updates.size());
      emit(m.step, "clip_fraction", std::nullopt, clip_fraction / m.updates.size());
      emit(m.step, "update_count", std::nullopt, static_cast<double>(m.updates.size()));
      emit(m.step, "tokens", std::nullopt, static_cast<double>(tokens));
    }
  };
  hooks.on_eval = [&](int step, const Policy& policy) {
    const EvalReport report = evaluate(policy, suite, eval_cfg, step, par);
    emit(step, "pass_at_1", std::nullopt, report.pass1);
    for (const auto& [k, v] : report.pass_at_k) emit(step, "pass_at_k", k, v);
    emit(step, "coverage_at_n", report.samples_per_problem, report.coverage_at_n);
    for (const auto& [k, v] : report.analytic_pass_at_k) emit(step, "analytic_pass_at_k", k, v);
    emit(step, "eval_mean_token_entropy", std::nullopt, report.mean_token_entropy);
    last_eval = report;
  };
  hooks.on_plan = [&](int step, const AllocationPlan& plan) {
    if (!audit.is_open()) return;
    for (const AllocationEntry& e : plan.entries) {
      const double a_hat = static_cast<double>(e.successes) / e.phase1_k0;
      audit << step << ',' << e.problem_id << ',' << e.phase1_k0 << ',' << e.successes << ','
            << format_double(a_hat) << ',' << e.extra << ',' << plan.effective_n_max << '\n';
    }
    audit.flush();
  };
  hooks.on_checkpoint = [&](int step, const Policy& policy) {
    save_checkpoint({static_cast<std::uint64_t>(step), cfg.seed, policy}, paths.checkpoint_bin);
  };

  run_training(trainer_cfg, suite, hooks, par, start_step, initial);
  // A resume that lands exactly on total_steps runs zero iterations and
  // triggers no evaluation; keep the previous report in that case.
  if (last_eval.samples_per_problem > 0) write_report(paths, cfg, last_eval, cumulative);
  return paths.dir;
}

}  // namespace detail

// Launches a fresh run: materializes the run directory with the resolved
// config and the generated suite, then trains with metrics, audit,
// checkpoint and report files filling in as it goes.
inline std::filesystem::path run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::string name = cfg.run_name.empty() ? default_run_name(cfg) : cfg.run_name;
  const RunPaths paths = run_paths(std::filesystem::path(cfg.out_root) / name);
  if (std::filesystem::exists(paths.metrics_csv))
    throw IoError("run-dir-not-empty: " + paths.dir.string());
  std::filesystem::create_directories(paths.dir);

  ExperimentConfig stored = cfg;
  stored.run_name = name;
  detail::write_text_file(paths.config_json, config_to_json(stored).dump(2) + "\n");

  const TaskSuite suite = generate_suite(cfg.suite, cfg.suite_seed);
  detail::write_text_file(paths.suite_txt, export_suite(suite));

  return detail::run_common(cfg, suite, paths, 0, nullptr, 0, true);
}

inline ExperimentConfig load_run_config(const std::filesystem::path& dir) {
  const RunPaths paths = run_paths(dir);
  const nlohmann::json j = parse_json_file(paths.config_json);
  std::string preset = "baseline";
  if (j.contains("preset")) preset = j["preset"].get<std::string>();
  ExperimentConfig cfg = config_from_json(j, make_preset(preset));
  validate_config(cfg);
  return cfg;
}

// Continues an interrupted run from its checkpoint. Metrics rows beyond the
// checkpointed step (possible if the process died mid-iteration) are pruned
// before appending, so the resumed file matches an uninterrupted run
// byte for byte.
inline std::filesystem::path resume_experiment(const std::filesystem::path& dir,
                                               std::optional<int> total_steps_override = {},
                                               std::optional<int> threads_override = {}) {
  const RunPaths paths = run_paths(dir);
  if (!std::filesystem::exists(paths.dir)) throw IoError("resume: no such run: " + dir.string());
  ExperimentConfig cfg = load_run_config(dir);
  bool config_changed = false;
  if (total_steps_override && *total_steps_override != cfg.trainer.total_steps) {
    cfg.trainer.total_steps = *total_steps_override;
    config_changed = true;
  }
  if (threads_override && *threads_override != cfg.threads) {
    cfg.threads = *threads_override;
    config_changed = true;
  }
  validate_config(cfg);
  if (config_changed)
    detail::write_text_file(paths.config_json, config_to_json(cfg).dump(2) + "\n");

  const TaskSuite suite = import_suite(detail::read_text_file(paths.suite_txt));
  const Checkpoint ckpt = load_checkpoint(paths.checkpoint_bin);
  if (ckpt.seed != cfg.seed) throw IoError("resume: checkpoint seed does not match config");
  const int start_step = static_cast<int>(ckpt.step);

  std::vector<MetricsRecord> kept;
  for (MetricsRecord& r : read_metrics(paths.metrics_csv))
    if (r.step <= start_step) kept.push_back(std::move(r));
  long cumulative = 0;
  for (const MetricsRecord& r : kept)
    if (r.metric == "rollouts") cumulative += static_cast<long>(r.value);
  {
    std::ofstream out(paths.metrics_csv, std::ios::trunc);
    if (!out) throw IoError("metrics-write: cannot open " + paths.metrics_csv.string());
    out << kMetricsHeader << '\n';
    for (const MetricsRecord& r : kept) out << format_metrics_record(r) << '\n';
  }
  if (cfg.trainer.dars && std::filesystem::exists(paths.audit_csv)) {
    std::ifstream in(paths.audit_csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
      if (rows.empty() && line == kAuditHeader) {
        rows.push_back(line);
        continue;
      }
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      int step = 0;
      try {
        step = std::stoi(line.substr(0, comma));
      } catch (const std::exception&) {
        continue;
      }
      if (step <= start_step) rows.push_back(line);
    }
    in.close();
    std::ofstream out(paths.audit_csv, std::ios::trunc);
    for (const std::string& r : rows) out << r << '\n';
  }

  return detail::run_common(cfg, suite, paths, start_step, &ckpt.policy, cumulative, false);
}

}  // namespace darslab
