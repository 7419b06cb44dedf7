#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "darslab/errors.hpp"
#include "darslab/parallel.hpp"
#include "darslab/rng.hpp"
#include "darslab/task_suite.hpp"

namespace darslab {

// Linear-softmax sequence policy shared across all problems: the logit of
// token v at a step is weights(:,v) . features(problem, step). Steps are
// conditionally independent given the problem, so exact success
// probabilities are products over steps.
struct Policy {
  int feature_dim = 0;
  int vocab_size = 0;
  std::vector<double> weights;  // feature_dim x vocab_size, row-major

  static Policy zeros(int feature_dim, int vocab_size) {
    Policy p;
    p.feature_dim = feature_dim;
    p.vocab_size = vocab_size;
    p.weights.assign(static_cast<std::size_t>(feature_dim) * vocab_size, 0.0);
    return p;
  }

  double at(int k, int v) const { return weights[static_cast<std::size_t>(k) * vocab_size + v]; }
  double& at(int k, int v) { return weights[static_cast<std::size_t>(k) * vocab_size + v]; }
};

struct StepDistribution {
  std::vector<double> probs;
  std::vector<double> logprobs;
  double entropy = 0.0;  // nats
};

inline StepDistribution policy_step_distribution(const Policy& policy, const Problem& problem,
                                                 int step) {
  const int V = policy.vocab_size;
  const int d = policy.feature_dim;
  const double* f = problem.feature_row(step, d);
  std::vector<double> logits(V, 0.0);
  for (int k = 0; k < d; ++k) {
    const double fk = f[k];
    const double* row = policy.weights.data() + static_cast<std::size_t>(k) * V;
    for (int v = 0; v < V; ++v) logits[v] += row[v] * fk;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  StepDistribution out;
  out.probs.resize(V);
  out.logprobs.resize(V);
  double sum = 0.0;
  for (int v = 0; v < V; ++v) {
    out.probs[v] = std::exp(logits[v] - mx);
    sum += out.probs[v];
  }
  const double log_sum = std::log(sum);
  double entropy = 0.0;
  for (int v = 0; v < V; ++v) {
    out.probs[v] /= sum;
    out.logprobs[v] = logits[v] - mx - log_sum;
    entropy -= out.probs[v] * out.logprobs[v];
  }
  out.entropy = entropy;
  return out;
}

inline std::vector<StepDistribution> step_distributions(const Policy& policy,
                                                        const Problem& problem) {
  std::vector<StepDistribution> out;
  out.reserve(problem.num_steps);
  for (int step = 0; step < problem.num_steps; ++step)
    out.push_back(policy_step_distribution(policy, problem, step));
  return out;
}

// One sampled rollout. logprobs_old are frozen at sampling time and serve as
// the denominator of later importance ratios.
struct Trajectory {
  std::string problem_id;
  std::vector<int> tokens;
  std::vector<double> logprobs_old;
  int reward = 0;
};

inline int sample_categorical(std::span<const double> probs, double unit) {
  double acc = 0.0;
  for (std::size_t v = 0; v + 1 < probs.size(); ++v) {
    acc += probs[v];
    if (unit < acc) return static_cast<int>(v);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Sampling against precomputed step distributions; the hot path caches them
// once per (policy, problem) and reuses across a whole rollout group.
inline Trajectory sample_trajectory_from(const Problem& problem,
                                         std::span<const StepDistribution> dists,
                                         RngStream& stream) {
  Trajectory t;
  t.problem_id = problem.id;
  t.tokens.resize(problem.num_steps);
  t.logprobs_old.resize(problem.num_steps);
  bool ok = true;
  for (int step = 0; step < problem.num_steps; ++step) {
    const int tok = sample_categorical(dists[step].probs, stream.next_unit());
    t.tokens[step] = tok;
    t.logprobs_old[step] = dists[step].logprobs[tok];
    ok = ok && problem.accepts(step, tok);
  }
  t.reward = ok ? 1 : 0;
  return t;
}

inline Trajectory sample_trajectory(const Policy& policy, const Problem& problem,
                                    RngStream& stream) {
  const auto dists = step_distributions(policy, problem);
  return sample_trajectory_from(problem, dists, stream);
}

// Exact probability that a fresh rollout passes the verifier: the product
// over steps of the accepted sets' probability mass.
inline double success_probability(const Policy& policy, const Problem& problem) {
  double p = 1.0;
  for (int step = 0; step < problem.num_steps; ++step) {
    const StepDistribution d = policy_step_distribution(policy, problem, step);
    double mass = 0.0;
    for (int tok : problem.accepted_sets[step]) mass += d.probs[tok];
    p *= std::min(mass, 1.0);
  }
  return p;
}

inline double problem_mean_entropy(const Policy& policy, const Problem& problem) {
  double h = 0.0;
  for (int step = 0; step < problem.num_steps; ++step)
    h += policy_step_distribution(policy, problem, step).entropy;
  return h / problem.num_steps;
}

// Flat average over all (problem, step) pairs of the selected problems,
// in nats. Per-problem sums land in slots, the fold is sequential.
inline double mean_token_entropy(const Policy& policy, const TaskSuite& suite,
                                 std::span<const int> problem_indices,
                                 const Parallel& par = Parallel{}) {
  if (problem_indices.empty()) throw NumericError("empty-selection");
  std::vector<double> sums(problem_indices.size(), 0.0);
  std::vector<long> counts(problem_indices.size(), 0);
  par.for_each(problem_indices.size(), [&](std::size_t i) {
    const Problem& p = suite.problems[problem_indices[i]];
    double h = 0.0;
    for (int step = 0; step < p.num_steps; ++step)
      h += policy_step_distribution(policy, p, step).entropy;
    sums[i] = h;
    counts[i] = p.num_steps;
  });
  double total = 0.0;
  long steps = 0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    total += sums[i];
    steps += counts[i];
  }
  return total / static_cast<double>(steps);
}

inline double mean_token_entropy(const Policy& policy, const TaskSuite& suite,
                                 const Parallel& par = Parallel{}) {
  std::vector<int> all(suite.problems.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return mean_token_entropy(policy, suite, all, par);
}

}  // namespace darslab
