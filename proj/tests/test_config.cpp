#include "darslab/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "darslab/presets.hpp"

using namespace darslab;
using nlohmann::json;

namespace {

void expect_same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.run_name, b.run_name);
  EXPECT_EQ(a.out_root, b.out_root);
  EXPECT_EQ(a.threads, b.threads);
  EXPECT_EQ(a.suite.num_problems, b.suite.num_problems);
  EXPECT_EQ(a.suite.vocab_size, b.suite.vocab_size);
  EXPECT_EQ(a.suite.feature_dim, b.suite.feature_dim);
  EXPECT_EQ(a.suite.max_steps, b.suite.max_steps);
  EXPECT_EQ(a.suite_seed, b.suite_seed);
  EXPECT_EQ(a.trainer.batch_size, b.trainer.batch_size);
  EXPECT_EQ(a.trainer.rollout_n, b.trainer.rollout_n);
  EXPECT_EQ(a.trainer.clip_epsilon, b.trainer.clip_epsilon);
  EXPECT_EQ(a.trainer.learning_rate, b.trainer.learning_rate);
  EXPECT_EQ(a.trainer.ppo_splits, b.trainer.ppo_splits);
  EXPECT_EQ(a.trainer.ppo_epochs, b.trainer.ppo_epochs);
  EXPECT_EQ(a.trainer.advantage_mode, b.trainer.advantage_mode);
  EXPECT_EQ(a.trainer.total_steps, b.trainer.total_steps);
  EXPECT_EQ(a.trainer.eval_every, b.trainer.eval_every);
  ASSERT_EQ(a.trainer.dars.has_value(), b.trainer.dars.has_value());
  if (a.trainer.dars) {
    EXPECT_EQ(a.trainer.dars->schedule, b.trainer.dars->schedule);
    EXPECT_EQ(a.trainer.dars->phase1_k0, b.trainer.dars->phase1_k0);
    EXPECT_EQ(a.trainer.dars->base_rollout_n, b.trainer.dars->base_rollout_n);
    EXPECT_EQ(a.trainer.dars->n_max, b.trainer.dars->n_max);
    EXPECT_EQ(a.trainer.dars->advantage_mode, b.trainer.dars->advantage_mode);
    EXPECT_EQ(a.trainer.dars->rebalance_rounds, b.trainer.dars->rebalance_rounds);
    ASSERT_EQ(a.trainer.dars->anneal.has_value(), b.trainer.dars->anneal.has_value());
    if (a.trainer.dars->anneal) {
      EXPECT_EQ(a.trainer.dars->anneal->start_n_max, b.trainer.dars->anneal->start_n_max);
      EXPECT_EQ(a.trainer.dars->anneal->end_n_max, b.trainer.dars->anneal->end_n_max);
      EXPECT_EQ(a.trainer.dars->anneal->total_steps, b.trainer.dars->anneal->total_steps);
    }
  }
  EXPECT_EQ(a.eval.samples_per_problem, b.eval.samples_per_problem);
  EXPECT_EQ(a.eval.k_values, b.eval.k_values);
  EXPECT_EQ(a.eval.analytic_k_grid, b.eval.analytic_k_grid);
  EXPECT_EQ(a.eval_seed_override, b.eval_seed_override);
}

}  // namespace

TEST(PresetTest, AllPresetsValidateAndShareTheSuite) {
  for (const std::string& name : preset_names()) {
    const ExperimentConfig cfg = make_preset(name);
    EXPECT_NO_THROW(validate_config(cfg)) << name;
    EXPECT_EQ(cfg.preset, name);
    EXPECT_EQ(cfg.suite.num_problems, 512) << name;
    EXPECT_EQ(cfg.suite.vocab_size, 16) << name;
    EXPECT_EQ(cfg.suite_seed, 42u) << name;
    EXPECT_EQ(cfg.eval.samples_per_problem, 128) << name;
  }
  EXPECT_THROW(make_preset("no-such-preset"), ConfigError);
}

TEST(PresetTest, ScaleRelationships) {
  const ExperimentConfig base = make_preset("baseline");
  const ExperimentConfig breadth = make_preset("breadth-naive");
  const ExperimentConfig depth = make_preset("depth-naive");

  EXPECT_EQ(base.trainer.batch_size, 16);
  EXPECT_EQ(breadth.trainer.batch_size, 24 * base.trainer.batch_size);
  EXPECT_DOUBLE_EQ(breadth.trainer.learning_rate, 5.0 * base.trainer.learning_rate);
  EXPECT_EQ(base.trainer.rollout_n, 8);
  EXPECT_EQ(breadth.trainer.rollout_n, 8);
  EXPECT_EQ(depth.trainer.rollout_n, 32);
  EXPECT_EQ(depth.trainer.batch_size, base.trainer.batch_size);
  // same update count per iteration, arranged differently
  EXPECT_EQ(base.trainer.ppo_splits, 2);
  EXPECT_EQ(base.trainer.ppo_epochs, 1);
  EXPECT_EQ(breadth.trainer.ppo_splits, 1);
  EXPECT_EQ(breadth.trainer.ppo_epochs, 2);
  EXPECT_FALSE(base.trainer.dars.has_value());
  EXPECT_FALSE(depth.trainer.dars.has_value());
}

TEST(PresetTest, DarsVariants) {
  for (const char* name : {"dars-et", "dars-hw", "dars-et-breadth", "dars-hw-breadth"}) {
    const ExperimentConfig cfg = make_preset(name);
    ASSERT_TRUE(cfg.trainer.dars.has_value()) << name;
    const DarsConfig& d = *cfg.trainer.dars;
    EXPECT_EQ(d.n_max, 32) << name;
    EXPECT_EQ(d.phase1_k0, cfg.trainer.rollout_n) << name;
    EXPECT_EQ(d.base_rollout_n, cfg.trainer.rollout_n) << name;
    EXPECT_EQ(d.advantage_mode, cfg.trainer.advantage_mode) << name;
    const bool hw = std::string(name).find("hw") != std::string::npos;
    EXPECT_EQ(d.schedule, hw ? ScheduleKind::HardnessWeighted : ScheduleKind::EqualTreatment)
        << name;
  }
}

TEST(ConfigJsonTest, OverridesApplyOnTopOfBase) {
  const json j = json::parse(R"({
    "seed": 7,
    "threads": 4,
    "suite": {"num_problems": 64, "seed": 9},
    "trainer": {"rollout_n": 4, "advantage_mode": "std", "learning_rate": 0.5},
    "dars": {"enabled": true, "schedule": "hw", "n_max": 16},
    "eval": {"samples_per_problem": 32, "k_values": [1, 8]}
  })");
  const ExperimentConfig cfg = config_from_json(j, make_preset("baseline"));
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.threads, 4);
  EXPECT_EQ(cfg.suite.num_problems, 64);
  EXPECT_EQ(cfg.suite.vocab_size, 16);  // untouched
  EXPECT_EQ(cfg.suite_seed, 9u);
  EXPECT_EQ(cfg.trainer.rollout_n, 4);
  EXPECT_EQ(cfg.trainer.advantage_mode, AdvantageMode::Std);
  EXPECT_DOUBLE_EQ(cfg.trainer.learning_rate, 0.5);
  ASSERT_TRUE(cfg.trainer.dars.has_value());
  EXPECT_EQ(cfg.trainer.dars->schedule, ScheduleKind::HardnessWeighted);
  EXPECT_EQ(cfg.trainer.dars->n_max, 16);
  // the trainer's conventions propagate into the dars block
  EXPECT_EQ(cfg.trainer.dars->advantage_mode, AdvantageMode::Std);
  EXPECT_EQ(cfg.trainer.dars->base_rollout_n, 4);
  EXPECT_EQ(cfg.eval.samples_per_problem, 32);
  EXPECT_EQ(cfg.eval.k_values, (std::vector<int>{1, 8}));
}

TEST(ConfigJsonTest, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(config_from_json(json::parse(R"({"sede": 1})"), make_preset("baseline")),
               ConfigError);
  EXPECT_THROW(
      config_from_json(json::parse(R"({"trainer": {"batch_sizee": 4}})"), make_preset("baseline")),
      ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"seed": "seven"})"), make_preset("baseline")),
               ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"trainer": {"rollout_n": "many"}})"),
                                make_preset("baseline")),
               ConfigError);
  EXPECT_THROW(config_from_json(json::parse("[1,2]"), make_preset("baseline")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"trainer": {"advantage_mode": "mean"}})"),
                                make_preset("baseline")),
               ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"dars": {"enabled": true, "schedule": "xx"}})"),
                                make_preset("baseline")),
               ConfigError);
}

TEST(ConfigJsonTest, DarsToggleAndAnneal) {
  const ExperimentConfig off =
      config_from_json(json::parse(R"({"dars": {"enabled": false}})"), make_preset("dars-et"));
  EXPECT_FALSE(off.trainer.dars.has_value());

  const ExperimentConfig with_anneal = config_from_json(
      json::parse(R"({"dars": {"anneal": {"start_n_max": 32, "end_n_max": 8, "total_steps": 100}}})"),
      make_preset("dars-hw"));
  ASSERT_TRUE(with_anneal.trainer.dars.has_value());
  ASSERT_TRUE(with_anneal.trainer.dars->anneal.has_value());
  EXPECT_EQ(with_anneal.trainer.dars->anneal->start_n_max, 32);
  EXPECT_EQ(with_anneal.trainer.dars->anneal->end_n_max, 8);
  EXPECT_EQ(with_anneal.trainer.dars->anneal->total_steps, 100);

  ExperimentConfig base = make_preset("dars-hw");
  base.trainer.dars->anneal = AnnealSpec{32, 8, 100};
  const ExperimentConfig cleared =
      config_from_json(json::parse(R"({"dars": {"anneal": null}})"), base);
  ASSERT_TRUE(cleared.trainer.dars.has_value());
  EXPECT_FALSE(cleared.trainer.dars->anneal.has_value());
}

TEST(ConfigJsonTest, EvalSeedOverride) {
  ExperimentConfig cfg = make_preset("baseline");
  cfg.seed = 11;
  EXPECT_FALSE(cfg.eval_seed_override.has_value());
  EXPECT_EQ(resolved_eval_config(cfg).eval_seed, 11u);

  cfg = config_from_json(json::parse(R"({"eval": {"eval_seed": 123}})"), cfg);
  ASSERT_TRUE(cfg.eval_seed_override.has_value());
  EXPECT_EQ(resolved_eval_config(cfg).eval_seed, 123u);

  cfg = config_from_json(json::parse(R"({"eval": {"eval_seed": null}})"), make_preset("baseline"));
  EXPECT_FALSE(cfg.eval_seed_override.has_value());
}

TEST(ConfigJsonTest, RoundTripsEveryPreset) {
  for (const std::string& name : preset_names()) {
    ExperimentConfig cfg = make_preset(name);
    cfg.seed = 5;
    cfg.run_name = "rt";
    cfg.threads = 3;
    const ExperimentConfig back = config_from_json(config_to_json(cfg), make_preset(name));
    expect_same_config(cfg, back);
  }
  // and one with every optional field populated
  ExperimentConfig cfg = make_preset("dars-et");
  cfg.trainer.dars->anneal = AnnealSpec{32, 4, 50};
  cfg.trainer.dars->rebalance_rounds = 2;
  cfg.eval_seed_override = 77;
  const ExperimentConfig back = config_from_json(config_to_json(cfg), make_preset("dars-et"));
  expect_same_config(cfg, back);
}

TEST(ConfigValidationTest, ConstraintViolations) {
  const auto expect_invalid = [](void (*mutate)(ExperimentConfig&), const char* label) {
    ExperimentConfig cfg = make_preset("dars-et");
    mutate(cfg);
    EXPECT_THROW(validate_config(cfg), ConfigError) << label;
  };
  expect_invalid([](ExperimentConfig& c) { c.trainer.batch_size = 0; }, "batch 0");
  expect_invalid([](ExperimentConfig& c) { c.trainer.batch_size = 513; }, "batch > suite");
  expect_invalid([](ExperimentConfig& c) { c.trainer.rollout_n = 0; }, "rollout 0");
  expect_invalid([](ExperimentConfig& c) { c.trainer.clip_epsilon = 0.0; }, "epsilon 0");
  expect_invalid([](ExperimentConfig& c) { c.trainer.learning_rate = -1.0; }, "negative lr");
  expect_invalid(
      [](ExperimentConfig& c) {
        c.trainer.ppo_splits = 2;
        c.trainer.ppo_epochs = 2;
      },
      "splits with epochs");
  expect_invalid([](ExperimentConfig& c) { c.trainer.ppo_splits = 17; }, "splits > batch");
  expect_invalid([](ExperimentConfig& c) { c.trainer.eval_every = 0; }, "eval_every 0");
  expect_invalid([](ExperimentConfig& c) { c.trainer.dars->phase1_k0 = 0; }, "k0 0");
  expect_invalid([](ExperimentConfig& c) { c.trainer.dars->n_max = -1; }, "negative cap");
  expect_invalid([](ExperimentConfig& c) { c.trainer.dars->rebalance_rounds = 0; }, "rounds 0");
  expect_invalid([](ExperimentConfig& c) { c.trainer.dars->anneal = AnnealSpec{4, 8, 10}; },
                 "anneal rising");
  expect_invalid([](ExperimentConfig& c) { c.trainer.dars->anneal = AnnealSpec{8, 4, 0}; },
                 "anneal steps 0");
  expect_invalid([](ExperimentConfig& c) { c.eval.samples_per_problem = 0; }, "samples 0");
  expect_invalid([](ExperimentConfig& c) { c.eval.k_values = {256}; }, "k > samples");
  expect_invalid([](ExperimentConfig& c) { c.eval.analytic_k_grid = {0}; }, "analytic k 0");
  expect_invalid([](ExperimentConfig& c) { c.threads = -1; }, "negative threads");
}

TEST(ConfigFileTest, ParseJsonFileErrors) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "darslab_config_test";
  fs::create_directories(dir);
  const fs::path good = dir / "good.json";
  const fs::path bad = dir / "bad.json";
  std::ofstream(good) << R"({"seed": 3})";
  std::ofstream(bad) << "{not json";

  EXPECT_EQ(parse_json_file(good)["seed"], 3);
  EXPECT_THROW(parse_json_file(bad), ConfigError);
  EXPECT_THROW(parse_json_file(dir / "missing.json"), IoError);
  fs::remove_all(dir);
}
