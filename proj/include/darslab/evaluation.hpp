#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "darslab/dars.hpp"
#include "darslab/errors.hpp"
#include "darslab/parallel.hpp"
#include "darslab/policy.hpp"
#include "darslab/rng.hpp"
#include "darslab/task_suite.hpp"

namespace darslab {

inline double pass_at_1(long n, long c) {
  if (n < 1 || c < 0 || c > n) throw NumericError("invalid-counts");
  return static_cast<double>(c) / n;
}

// Unbiased any-of-k estimator 1 - C(n-c,k) / C(n,k) from n samples with c
// successes. Numerator and denominator products accumulate separately and a
// power-of-two rescale guards overflow without rounding error, so small
// cases come out bit-equal to the combinatorial definition.
inline double pass_at_k_unbiased(long n, long c, long k) {
  if (n < 1 || c < 0 || c > n) throw NumericError("invalid-counts");
  if (k < 1 || k > n) throw NumericError("invalid-k");
  if (c == 0) return 0.0;
  if (c > n - k) return 1.0;
  double num = 1.0;
  double den = 1.0;
  for (long i = 0; i < k; ++i) {
    num *= static_cast<double>(n - c - i);
    den *= static_cast<double>(n - i);
    if (den > 0x1p512) {
      num = std::ldexp(num, -512);
      den = std::ldexp(den, -512);
    }
  }
  return std::clamp(1.0 - num / den, 0.0, 1.0);
}

// Exact pass@k under the policy itself: mean over problems of
// 1 - (1 - p_j)^k with p_j the closed-form success probability. No sampling
// involved, so it sees tail improvements far below any feasible sample size.
inline std::vector<double> success_probabilities(const Policy& policy, const TaskSuite& suite,
                                                 const Parallel& par = Parallel{}) {
  std::vector<double> p(suite.problems.size(), 0.0);
  par.for_each(p.size(), [&](std::size_t j) {
    p[j] = success_probability(policy, suite.problems[j]);
  });
  return p;
}

inline double pass_at_k_analytic(std::span<const double> success_probs, int k) {
  if (k < 1) throw NumericError("invalid-k");
  if (success_probs.empty()) throw NumericError("empty-selection");
  double acc = 0.0;
  for (double p : success_probs)
    acc += 1.0 - std::pow(1.0 - p, static_cast<double>(k));
  return acc / static_cast<double>(success_probs.size());
}

inline double pass_at_k_analytic(const Policy& policy, const TaskSuite& suite, int k,
                                 const Parallel& par = Parallel{}) {
  const std::vector<double> p = success_probabilities(policy, suite, par);
  return pass_at_k_analytic(p, k);
}

struct EvalConfig {
  int samples_per_problem = 128;
  std::vector<int> k_values = {1, 32, 128};              // sampled estimators
  std::vector<int> analytic_k_grid = {1, 2, 4, 8, 16, 32, 64, 128};
  std::uint64_t eval_seed = 0;
};

struct ProblemCount {
  std::string problem_id;
  int samples = 0;
  int successes = 0;
};

struct EvalReport {
  int step = 0;
  int samples_per_problem = 0;
  double pass1 = 0.0;
  std::vector<std::pair<int, double>> pass_at_k;           // unbiased, from samples
  double coverage_at_n = 0.0;                              // fraction with any success
  std::vector<std::pair<int, double>> analytic_pass_at_k;  // from exact probabilities
  double mean_token_entropy = 0.0;
  std::vector<ProblemCount> per_problem;
};

// Fixed-budget evaluation over the whole suite. Sample streams live in their
// own domain keyed by (eval seed, suite seed, step, problem, sample), so
// evaluation never perturbs training draws and is reproducible in isolation.
inline EvalReport evaluate(const Policy& policy, const TaskSuite& suite, const EvalConfig& config,
                           int step = 0, const Parallel& par = Parallel{}) {
  const int n = config.samples_per_problem;
  if (n < 1) throw ConfigError("constraint: eval.samples_per_problem >= 1");
  for (int k : config.k_values)
    if (k < 1 || k > n) throw ConfigError("constraint: eval k_values within [1, samples]");
  for (int k : config.analytic_k_grid)
    if (k < 1) throw ConfigError("constraint: eval analytic_k_grid >= 1");

  EvalReport report;
  report.step = step;
  report.samples_per_problem = n;

  const std::size_t num_problems = suite.problems.size();
  std::vector<int> counts(num_problems, 0);
  std::vector<double> probs(num_problems, 0.0);
  std::vector<double> entropy_sums(num_problems, 0.0);
  std::vector<long> entropy_steps(num_problems, 0);
  par.for_each(num_problems, [&](std::size_t j) {
    const Problem& problem = suite.problems[j];
    const auto dists = step_distributions(policy, problem);
    int c = 0;
    for (int s = 0; s < n; ++s) {
      RngStream stream = RngStream::keyed(
          config.eval_seed, {stream_domain::kEvalRollout, suite.seed,
                             static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(j),
                             static_cast<std::uint64_t>(s)});
      bool ok = true;
      for (int t = 0; t < problem.num_steps; ++t) {
        const int tok = sample_categorical(dists[t].probs, stream.next_unit());
        ok = ok && problem.accepts(t, tok);
      }
      c += ok ? 1 : 0;
    }
    counts[j] = c;
    double mass_product = 1.0;
    double h = 0.0;
    for (int t = 0; t < problem.num_steps; ++t) {
      double mass = 0.0;
      for (int tok : problem.accepted_sets[t]) mass += dists[t].probs[tok];
      mass_product *= std::min(mass, 1.0);
      h += dists[t].entropy;
    }
    probs[j] = mass_product;
    entropy_sums[j] = h;
    entropy_steps[j] = problem.num_steps;
  });

  report.per_problem.resize(num_problems);
  long total_successes = 0;
  long covered = 0;
  double entropy_total = 0.0;
  long entropy_count = 0;
  for (std::size_t j = 0; j < num_problems; ++j) {
    report.per_problem[j] = {suite.problems[j].id, n, counts[j]};
    total_successes += counts[j];
    covered += counts[j] > 0 ? 1 : 0;
    entropy_total += entropy_sums[j];
    entropy_count += entropy_steps[j];
  }
  report.pass1 = static_cast<double>(total_successes) / (static_cast<double>(n) * num_problems);
  report.coverage_at_n = static_cast<double>(covered) / num_problems;
  report.mean_token_entropy = entropy_total / static_cast<double>(entropy_count);

  for (int k : config.k_values) {
    double acc = 0.0;
    for (std::size_t j = 0; j < num_problems; ++j) acc += pass_at_k_unbiased(n, counts[j], k);
    report.pass_at_k.emplace_back(k, acc / static_cast<double>(num_problems));
  }
  for (int k : config.analytic_k_grid)
    report.analytic_pass_at_k.emplace_back(k, pass_at_k_analytic(probs, k));
  return report;
}

// Mean sampling cost per prompt across a run's allocation plans.
inline double rollout_efficiency(std::span<const AllocationPlan> plans) {
  if (plans.empty()) throw NumericError("empty-plans");
  double acc = 0.0;
  for (const AllocationPlan& p : plans) acc += p.avg_rollouts_per_prompt;
  return acc / static_cast<double>(plans.size());
}

}  // namespace darslab
