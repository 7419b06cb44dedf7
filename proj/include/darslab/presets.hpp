#pragma once

#include <string>
#include <vector>

#include "darslab/config.hpp"
#include "darslab/errors.hpp"

namespace darslab {

// Experiment presets. The two scales share a 24x prompt-batch ratio and a 5x
// learning-rate ratio: baseline-scale runs touch 16 prompts per iteration
// for many iterations, breadth-scale runs touch 384 prompts per iteration
// for few. DARS variants layer the adaptive phase-2 top-up (cap 32) onto
// either scale without changing anything else.
inline std::vector<std::string> preset_names() {
  return {"baseline",  "depth-naive",     "breadth-naive", "dars-et",
          "dars-hw",   "dars-et-breadth", "dars-hw-breadth"};
}

inline ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  cfg.suite = SuiteConfig{512, 16, 32, 6};
  cfg.suite_seed = 42;
  cfg.eval.samples_per_problem = 128;
  cfg.eval.k_values = {1, 32, 128};
  cfg.eval.analytic_k_grid = {1, 2, 4, 8, 16, 32, 64, 128};

  TrainerConfig& t = cfg.trainer;
  t.clip_epsilon = 0.2;
  t.advantage_mode = AdvantageMode::NoStd;

  // Learning rates and step counts are calibrated to the synthetic suite:
  // large enough that the interesting dynamics (sharpening, the pass@128
  // rise-and-fall, the schedule crossovers) play out within a run, small
  // enough that per-step gradient noise does not drown them.
  const auto baseline_scale = [&] {
    t.batch_size = 16;
    t.rollout_n = 8;
    t.learning_rate = 0.2;
    t.ppo_splits = 2;
    t.ppo_epochs = 1;
    t.total_steps = 1440;
    t.eval_every = 5;
  };
  const auto breadth_scale = [&] {
    t.batch_size = 384;
    t.rollout_n = 8;
    t.learning_rate = 1.0;
    t.ppo_splits = 1;
    t.ppo_epochs = 2;
    t.total_steps = 240;
    t.eval_every = 1;
  };
  const auto with_dars = [&](ScheduleKind schedule) {
    DarsConfig d;
    d.schedule = schedule;
    d.phase1_k0 = t.rollout_n;
    d.base_rollout_n = t.rollout_n;
    d.n_max = 32;
    d.advantage_mode = t.advantage_mode;
    t.dars = d;
  };

  if (name == "baseline") {
    baseline_scale();
  } else if (name == "depth-naive") {
    baseline_scale();
    t.rollout_n = 32;
  } else if (name == "breadth-naive") {
    breadth_scale();
  } else if (name == "dars-et") {
    baseline_scale();
    with_dars(ScheduleKind::EqualTreatment);
  } else if (name == "dars-hw") {
    baseline_scale();
    with_dars(ScheduleKind::HardnessWeighted);
  } else if (name == "dars-et-breadth") {
    breadth_scale();
    with_dars(ScheduleKind::EqualTreatment);
  } else if (name == "dars-hw-breadth") {
    breadth_scale();
    with_dars(ScheduleKind::HardnessWeighted);
  } else {
    throw ConfigError("unknown-preset: " + name);
  }
  return cfg;
}

}  // namespace darslab
