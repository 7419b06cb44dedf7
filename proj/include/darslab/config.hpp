#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "darslab/errors.hpp"
#include "darslab/evaluation.hpp"
#include "darslab/task_suite.hpp"
#include "darslab/trainer.hpp"
#include "darslab/version.hpp"

namespace darslab {

// Fully resolved experiment description: preset defaults, then config file
// values, then command-line flags, each layer overriding the previous one.
struct ExperimentConfig {
  std::string preset = "baseline";
  std::uint64_t seed = 0;
  SuiteConfig suite;
  std::uint64_t suite_seed = 42;
  TrainerConfig trainer;
  EvalConfig eval;
  std::optional<std::uint64_t> eval_seed_override;  // defaults to the run seed
  std::string out_root = "runs";
  std::string run_name;  // empty: derived from preset, seed and timestamp
  int threads = 1;
};

inline EvalConfig resolved_eval_config(const ExperimentConfig& cfg) {
  EvalConfig ec = cfg.eval;
  ec.eval_seed = cfg.eval_seed_override.value_or(cfg.seed);
  return ec;
}

inline void validate_config(const ExperimentConfig& cfg) {
  validate_suite_config(cfg.suite);
  const TrainerConfig& t = cfg.trainer;
  if (t.batch_size < 1 || t.batch_size > cfg.suite.num_problems)
    throw ConfigError("constraint: 1 <= trainer.batch_size <= suite.num_problems");
  if (t.rollout_n < 1) throw ConfigError("constraint: trainer.rollout_n >= 1");
  if (!(t.clip_epsilon > 0.0)) throw ConfigError("constraint: trainer.clip_epsilon > 0");
  if (!(t.learning_rate >= 0.0)) throw ConfigError("constraint: trainer.learning_rate >= 0");
  if (t.ppo_splits < 1) throw ConfigError("constraint: trainer.ppo_splits >= 1");
  if (t.ppo_epochs < 1) throw ConfigError("constraint: trainer.ppo_epochs >= 1");
  if (t.ppo_splits > 1 && t.ppo_epochs != 1)
    throw ConfigError("constraint: ppo_splits > 1 requires ppo_epochs == 1");
  if (t.ppo_splits > t.batch_size)
    throw ConfigError("constraint: trainer.ppo_splits <= trainer.batch_size");
  if (t.total_steps < 0) throw ConfigError("constraint: trainer.total_steps >= 0");
  if (t.eval_every < 1) throw ConfigError("constraint: trainer.eval_every >= 1");
  if (t.dars) {
    const DarsConfig& d = *t.dars;
    if (d.phase1_k0 < 1) throw ConfigError("constraint: dars.phase1_k0 >= 1");
    if (d.n_max < 0) throw ConfigError("constraint: dars.n_max >= 0");
    if (d.rebalance_rounds < 1) throw ConfigError("constraint: dars.rebalance_rounds >= 1");
    if (d.anneal) {
      if (d.anneal->start_n_max < d.anneal->end_n_max || d.anneal->end_n_max < 0)
        throw ConfigError("constraint: dars.anneal start_n_max >= end_n_max >= 0");
      if (d.anneal->total_steps < 1)
        throw ConfigError("constraint: dars.anneal.total_steps >= 1");
    }
  }
  if (cfg.eval.samples_per_problem < 1)
    throw ConfigError("constraint: eval.samples_per_problem >= 1");
  for (int k : cfg.eval.k_values)
    if (k < 1 || k > cfg.eval.samples_per_problem)
      throw ConfigError("constraint: eval.k_values within [1, samples_per_problem]");
  for (int k : cfg.eval.analytic_k_grid)
    if (k < 1) throw ConfigError("constraint: eval.analytic_k_grid >= 1");
  if (cfg.threads < 0) throw ConfigError("constraint: threads >= 0");
}

namespace detail {

inline void require_keys(const nlohmann::json& obj, const char* where,
                         std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError(std::string("unknown-key: ") + where + "." + it.key());
  }
}

template <typename T>
void fetch(const nlohmann::json& obj, const char* where, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("type-mismatch: ") + where + "." + key);
  }
}

inline AdvantageMode parse_advantage_mode(const std::string& s) {
  if (s == "nostd") return AdvantageMode::NoStd;
  if (s == "std") return AdvantageMode::Std;
  throw ConfigError("constraint: advantage_mode must be 'nostd' or 'std'");
}

inline ScheduleKind parse_schedule(const std::string& s) {
  if (s == "et") return ScheduleKind::EqualTreatment;
  if (s == "hw") return ScheduleKind::HardnessWeighted;
  throw ConfigError("constraint: schedule must be 'et' or 'hw'");
}

inline const char* advantage_mode_name(AdvantageMode m) {
  return m == AdvantageMode::Std ? "std" : "nostd";
}

inline const char* schedule_name(ScheduleKind s) {
  return s == ScheduleKind::HardnessWeighted ? "hw" : "et";
}

}  // namespace detail

// Applies a parsed config file on top of a base config. Unknown keys and
// type mismatches are hard errors; silent typos in experiment configs are
// worse than a failed launch.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
  using detail::fetch;
  if (!j.is_object()) throw ConfigError("type-mismatch: config root must be an object");
  detail::require_keys(j, "config",
                       {"version", "preset", "seed", "run_name", "out_root", "threads", "suite",
                        "trainer", "dars", "eval"});
  fetch(j, "config", "seed", base.seed);
  fetch(j, "config", "run_name", base.run_name);
  fetch(j, "config", "out_root", base.out_root);
  fetch(j, "config", "threads", base.threads);
  if (auto it = j.find("suite"); it != j.end()) {
    detail::require_keys(*it, "suite",
                         {"num_problems", "vocab_size", "feature_dim", "max_steps", "seed"});
    fetch(*it, "suite", "num_problems", base.suite.num_problems);
    fetch(*it, "suite", "vocab_size", base.suite.vocab_size);
    fetch(*it, "suite", "feature_dim", base.suite.feature_dim);
    fetch(*it, "suite", "max_steps", base.suite.max_steps);
    fetch(*it, "suite", "seed", base.suite_seed);
  }
  if (auto it = j.find("trainer"); it != j.end()) {
    detail::require_keys(*it, "trainer",
                         {"batch_size", "rollout_n", "clip_epsilon", "learning_rate",
                          "ppo_splits", "ppo_epochs", "advantage_mode", "total_steps",
                          "eval_every"});
    fetch(*it, "trainer", "batch_size", base.trainer.batch_size);
    fetch(*it, "trainer", "rollout_n", base.trainer.rollout_n);
    fetch(*it, "trainer", "clip_epsilon", base.trainer.clip_epsilon);
    fetch(*it, "trainer", "learning_rate", base.trainer.learning_rate);
    fetch(*it, "trainer", "ppo_splits", base.trainer.ppo_splits);
    fetch(*it, "trainer", "ppo_epochs", base.trainer.ppo_epochs);
    fetch(*it, "trainer", "total_steps", base.trainer.total_steps);
    fetch(*it, "trainer", "eval_every", base.trainer.eval_every);
    std::string mode;
    fetch(*it, "trainer", "advantage_mode", mode);
    if (!mode.empty()) base.trainer.advantage_mode = detail::parse_advantage_mode(mode);
  }
  if (auto it = j.find("dars"); it != j.end()) {
    detail::require_keys(*it, "dars",
                         {"enabled", "schedule", "phase1_k0", "n_max", "rebalance_rounds",
                          "anneal"});
    bool enabled = base.trainer.dars.has_value();
    fetch(*it, "dars", "enabled", enabled);
    if (!enabled) {
      base.trainer.dars.reset();
    } else {
      DarsConfig d = base.trainer.dars.value_or(DarsConfig{});
      std::string sched;
      fetch(*it, "dars", "schedule", sched);
      if (!sched.empty()) d.schedule = detail::parse_schedule(sched);
      fetch(*it, "dars", "phase1_k0", d.phase1_k0);
      fetch(*it, "dars", "n_max", d.n_max);
      fetch(*it, "dars", "rebalance_rounds", d.rebalance_rounds);
      if (auto an = it->find("anneal"); an != it->end()) {
        if (an->is_null()) {
          d.anneal.reset();
        } else {
          detail::require_keys(*an, "dars.anneal", {"start_n_max", "end_n_max", "total_steps"});
          AnnealSpec spec = d.anneal.value_or(AnnealSpec{});
          fetch(*an, "dars.anneal", "start_n_max", spec.start_n_max);
          fetch(*an, "dars.anneal", "end_n_max", spec.end_n_max);
          fetch(*an, "dars.anneal", "total_steps", spec.total_steps);
          d.anneal = spec;
        }
      }
      base.trainer.dars = d;
    }
  }
  if (auto it = j.find("eval"); it != j.end()) {
    detail::require_keys(*it, "eval",
                         {"samples_per_problem", "k_values", "analytic_k_grid", "eval_seed"});
    fetch(*it, "eval", "samples_per_problem", base.eval.samples_per_problem);
    fetch(*it, "eval", "k_values", base.eval.k_values);
    fetch(*it, "eval", "analytic_k_grid", base.eval.analytic_k_grid);
    if (auto es = it->find("eval_seed"); es != it->end() && !es->is_null()) {
      std::uint64_t v = 0;
      fetch(*it, "eval", "eval_seed", v);
      base.eval_seed_override = v;
    }
  }
  // DARS reuses the trainer's group conventions; keep them in lockstep.
  if (base.trainer.dars) {
    base.trainer.dars->advantage_mode = base.trainer.advantage_mode;
    base.trainer.dars->base_rollout_n = base.trainer.rollout_n;
  }
  return base;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["run_name"] = cfg.run_name;
  j["out_root"] = cfg.out_root;
  j["threads"] = cfg.threads;
  j["suite"] = {{"num_problems", cfg.suite.num_problems},
                {"vocab_size", cfg.suite.vocab_size},
                {"feature_dim", cfg.suite.feature_dim},
                {"max_steps", cfg.suite.max_steps},
                {"seed", cfg.suite_seed}};
  j["trainer"] = {{"batch_size", cfg.trainer.batch_size},
                  {"rollout_n", cfg.trainer.rollout_n},
                  {"clip_epsilon", cfg.trainer.clip_epsilon},
                  {"learning_rate", cfg.trainer.learning_rate},
                  {"ppo_splits", cfg.trainer.ppo_splits},
                  {"ppo_epochs", cfg.trainer.ppo_epochs},
                  {"advantage_mode", detail::advantage_mode_name(cfg.trainer.advantage_mode)},
                  {"total_steps", cfg.trainer.total_steps},
                  {"eval_every", cfg.trainer.eval_every}};
  if (cfg.trainer.dars) {
    const DarsConfig& d = *cfg.trainer.dars;
    j["dars"] = {{"enabled", true},
                 {"schedule", detail::schedule_name(d.schedule)},
                 {"phase1_k0", d.phase1_k0},
                 {"n_max", d.n_max},
                 {"rebalance_rounds", d.rebalance_rounds}};
    if (d.anneal) {
      j["dars"]["anneal"] = {{"start_n_max", d.anneal->start_n_max},
                             {"end_n_max", d.anneal->end_n_max},
                             {"total_steps", d.anneal->total_steps}};
    } else {
      j["dars"]["anneal"] = nullptr;
    }
  } else {
    j["dars"] = {{"enabled", false}};
  }
  j["eval"] = {{"samples_per_problem", cfg.eval.samples_per_problem},
               {"k_values", cfg.eval.k_values},
               {"analytic_k_grid", cfg.eval.analytic_k_grid}};
  if (cfg.eval_seed_override)
    j["eval"]["eval_seed"] = *cfg.eval_seed_override;
  else
    j["eval"]["eval_seed"] = nullptr;
  return j;
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config-read: cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config-parse: ") + e.what());
  }
}

}  // namespace darslab
