#include "darslab/evaluation.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

using namespace darslab;

namespace {

// Enumeration oracle: draw every size-k subset of n samples (as a bitmask)
// and count the ones that miss all c successes. Shares no arithmetic with
// the production estimator beyond the final 1 - miss/total division, which
// is exact-input division in both, so the comparison can demand equality.
double pass_at_k_by_enumeration(int n, int c, int k) {
  long total = 0;
  long miss = 0;
  const std::uint32_t success_mask = (1u << c) - 1u;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    ++total;
    if ((mask & success_mask) == 0u) ++miss;
  }
  return 1.0 - static_cast<double>(miss) / static_cast<double>(total);
}

Policy random_policy(int d, int v, std::uint64_t key, double scale) {
  Policy p = Policy::zeros(d, v);
  RngStream rng(key);
  for (double& w : p.weights) w = scale * rng.next_normal();
  return p;
}

}  // namespace

TEST(PassAtKTest, MatchesEnumerationForAllSmallCases) {
  for (int n = 1; n <= 10; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k)
        EXPECT_EQ(pass_at_k_unbiased(n, c, k), pass_at_k_by_enumeration(n, c, k))
            << "n=" << n << " c=" << c << " k=" << k;
}

TEST(PassAtKTest, MonotoneInSuccessesAndInK) {
  const int n = 10;
  for (int k = 1; k <= n; ++k)
    for (int c = 0; c < n; ++c)
      EXPECT_LE(pass_at_k_unbiased(n, c, k), pass_at_k_unbiased(n, c + 1, k));
  for (int c = 0; c <= n; ++c)
    for (int k = 1; k < n; ++k)
      EXPECT_LE(pass_at_k_unbiased(n, c, k), pass_at_k_unbiased(n, c, k + 1));
}

TEST(PassAtKTest, EdgesAndValidation) {
  EXPECT_EQ(pass_at_1(8, 0), 0.0);
  EXPECT_EQ(pass_at_1(8, 8), 1.0);
  EXPECT_EQ(pass_at_1(8, 2), 0.25);
  EXPECT_THROW(pass_at_1(0, 0), NumericError);
  EXPECT_THROW(pass_at_1(4, 5), NumericError);

  EXPECT_EQ(pass_at_k_unbiased(8, 0, 4), 0.0);
  EXPECT_EQ(pass_at_k_unbiased(8, 8, 1), 1.0);
  EXPECT_EQ(pass_at_k_unbiased(8, 1, 8), 1.0);  // k = n sees every sample
  EXPECT_THROW(pass_at_k_unbiased(0, 0, 1), NumericError);
  EXPECT_THROW(pass_at_k_unbiased(8, -1, 1), NumericError);
  EXPECT_THROW(pass_at_k_unbiased(8, 9, 1), NumericError);
  EXPECT_THROW(pass_at_k_unbiased(8, 1, 0), NumericError);
  EXPECT_THROW(pass_at_k_unbiased(8, 1, 9), NumericError);
}

TEST(PassAtKTest, LargeCountsStayAccurate) {
  // c = 1 telescopes: 1 - C(n-1,k)/C(n,k) = k/n, so the long rescaled
  // product has a closed-form answer to check against.
  EXPECT_NEAR(pass_at_k_unbiased(100000, 1, 50000), 0.5, 1e-9);
  EXPECT_NEAR(pass_at_k_unbiased(100000, 1, 25000), 0.25, 1e-9);
  {
    const double n = 5000, c = 7, k = 100;
    const double log_miss = std::lgamma(n - c + 1) + std::lgamma(n - k + 1) -
                            std::lgamma(n - c - k + 1) - std::lgamma(n + 1);
    const double expected = 1.0 - std::exp(log_miss);
    EXPECT_NEAR(pass_at_k_unbiased(5000, 7, 100), expected, 1e-9);
  }
}

TEST(AnalyticPassAtKTest, HandValuesAndPolicyOverload) {
  const std::vector<double> probs = {0.0, 1.0, 0.5};
  EXPECT_NEAR(pass_at_k_analytic(probs, 1), 0.5, 1e-15);
  EXPECT_NEAR(pass_at_k_analytic(probs, 2), 1.75 / 3.0, 1e-15);
  EXPECT_THROW(pass_at_k_analytic(probs, 0), NumericError);
  EXPECT_THROW(pass_at_k_analytic(std::vector<double>{}, 1), NumericError);

  const TaskSuite suite = generate_suite(SuiteConfig{16, 8, 8, 4}, 7);
  const Policy policy = random_policy(8, 8, 11, 0.4);
  const std::vector<double> p = success_probabilities(policy, suite);
  EXPECT_DOUBLE_EQ(pass_at_k_analytic(policy, suite, 8), pass_at_k_analytic(p, 8));
  // k = 1 is the mean success probability
  double mean = 0.0;
  for (double x : p) mean += x;
  mean /= static_cast<double>(p.size());
  EXPECT_NEAR(pass_at_k_analytic(p, 1), mean, 1e-15);
}

TEST(EvaluateTest, ReportIsInternallyConsistent) {
  const TaskSuite suite = generate_suite(SuiteConfig{32, 8, 8, 4}, 13);
  const Policy policy = random_policy(8, 8, 17, 0.4);
  EvalConfig cfg;
  cfg.samples_per_problem = 24;
  cfg.k_values = {1, 4, 24};
  cfg.analytic_k_grid = {1, 8};
  cfg.eval_seed = 99;

  const EvalReport report = evaluate(policy, suite, cfg, 3);
  EXPECT_EQ(report.step, 3);
  EXPECT_EQ(report.samples_per_problem, 24);
  ASSERT_EQ(report.per_problem.size(), 32u);

  long successes = 0;
  long covered = 0;
  for (const ProblemCount& pc : report.per_problem) {
    EXPECT_EQ(pc.samples, 24);
    EXPECT_GE(pc.successes, 0);
    EXPECT_LE(pc.successes, 24);
    successes += pc.successes;
    covered += pc.successes > 0 ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(report.pass1, static_cast<double>(successes) / (24.0 * 32.0));
  EXPECT_DOUBLE_EQ(report.coverage_at_n, static_cast<double>(covered) / 32.0);

  ASSERT_EQ(report.pass_at_k.size(), 3u);
  for (const auto& [k, value] : report.pass_at_k) {
    double acc = 0.0;
    for (const ProblemCount& pc : report.per_problem)
      acc += pass_at_k_unbiased(24, pc.successes, k);
    EXPECT_DOUBLE_EQ(value, acc / 32.0);
  }

  const std::vector<double> p = success_probabilities(policy, suite);
  ASSERT_EQ(report.analytic_pass_at_k.size(), 2u);
  EXPECT_EQ(report.analytic_pass_at_k[0].first, 1);
  EXPECT_DOUBLE_EQ(report.analytic_pass_at_k[0].second, pass_at_k_analytic(p, 1));
  EXPECT_DOUBLE_EQ(report.analytic_pass_at_k[1].second, pass_at_k_analytic(p, 8));

  EXPECT_NEAR(report.mean_token_entropy, mean_token_entropy(policy, suite), 1e-12);
}

TEST(EvaluateTest, DeterministicAndIndependentOfWorkerCount) {
  const TaskSuite suite = generate_suite(SuiteConfig{24, 8, 8, 4}, 19);
  const Policy policy = random_policy(8, 8, 23, 0.3);
  EvalConfig cfg;
  cfg.samples_per_problem = 16;
  cfg.k_values = {1, 8};
  cfg.eval_seed = 5;

  const EvalReport a = evaluate(policy, suite, cfg, 1, Parallel(1));
  const EvalReport b = evaluate(policy, suite, cfg, 1, Parallel(8));
  EXPECT_EQ(a.pass1, b.pass1);
  EXPECT_EQ(a.coverage_at_n, b.coverage_at_n);
  EXPECT_EQ(a.mean_token_entropy, b.mean_token_entropy);
  ASSERT_EQ(a.per_problem.size(), b.per_problem.size());
  for (std::size_t j = 0; j < a.per_problem.size(); ++j)
    EXPECT_EQ(a.per_problem[j].successes, b.per_problem[j].successes);
  for (std::size_t i = 0; i < a.pass_at_k.size(); ++i)
    EXPECT_EQ(a.pass_at_k[i].second, b.pass_at_k[i].second);
}

TEST(EvaluateTest, StepAndSeedKeyTheSampleStreams) {
  const TaskSuite suite = generate_suite(SuiteConfig{24, 8, 8, 4}, 29);
  const Policy policy = random_policy(8, 8, 31, 0.3);
  EvalConfig cfg;
  cfg.samples_per_problem = 32;
  cfg.k_values = {1};
  cfg.eval_seed = 7;

  const EvalReport base = evaluate(policy, suite, cfg, 0);
  const EvalReport other_step = evaluate(policy, suite, cfg, 1);
  EvalConfig reseeded = cfg;
  reseeded.eval_seed = 8;
  const EvalReport other_seed = evaluate(policy, suite, reseeded, 0);

  const auto counts = [](const EvalReport& r) {
    std::vector<int> c;
    for (const ProblemCount& pc : r.per_problem) c.push_back(pc.successes);
    return c;
  };
  EXPECT_NE(counts(base), counts(other_step));
  EXPECT_NE(counts(base), counts(other_seed));
  // the analytic numbers do not involve sampling at all
  EXPECT_EQ(base.analytic_pass_at_k, other_step.analytic_pass_at_k);
  EXPECT_EQ(base.analytic_pass_at_k, other_seed.analytic_pass_at_k);
}

TEST(EvaluateTest, SampledRatesTrackExactProbabilities) {
  const TaskSuite suite = generate_suite(SuiteConfig{16, 8, 8, 3}, 37);
  const Policy policy = random_policy(8, 8, 41, 0.3);
  EvalConfig cfg;
  cfg.samples_per_problem = 4096;
  cfg.k_values = {1};
  cfg.eval_seed = 3;

  const EvalReport report = evaluate(policy, suite, cfg);
  const std::vector<double> p = success_probabilities(policy, suite);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double observed = static_cast<double>(report.per_problem[j].successes) / 4096.0;
    const double se = std::sqrt(p[j] * (1.0 - p[j]) / 4096.0);
    EXPECT_NEAR(observed, p[j], 4.0 * se + 1e-3) << "problem " << j;
  }
}

TEST(EvaluateTest, ConfigValidation) {
  const TaskSuite suite = generate_suite(SuiteConfig{8, 8, 8, 3}, 43);
  const Policy policy = Policy::zeros(8, 8);
  EvalConfig bad;
  bad.samples_per_problem = 0;
  EXPECT_THROW(evaluate(policy, suite, bad), ConfigError);
  bad.samples_per_problem = 8;
  bad.k_values = {16};
  EXPECT_THROW(evaluate(policy, suite, bad), ConfigError);
  bad.k_values = {1};
  bad.analytic_k_grid = {0};
  EXPECT_THROW(evaluate(policy, suite, bad), ConfigError);
}

TEST(RolloutEfficiencyTest, MeanOfPlanAverages) {
  AllocationPlan a;
  a.avg_rollouts_per_prompt = 8.5;
  AllocationPlan b;
  b.avg_rollouts_per_prompt = 9.5;
  const std::vector<AllocationPlan> plans = {a, b};
  EXPECT_DOUBLE_EQ(rollout_efficiency(plans), 9.0);
  EXPECT_THROW(rollout_efficiency(std::vector<AllocationPlan>{}), NumericError);
}
