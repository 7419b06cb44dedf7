#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "darslab/advantage.hpp"
#include "darslab/dars.hpp"
#include "darslab/errors.hpp"
#include "darslab/parallel.hpp"
#include "darslab/policy.hpp"
#include "darslab/rng.hpp"
#include "darslab/task_suite.hpp"

namespace darslab {

struct TrainerConfig {
  int batch_size = 16;   // prompts per iteration
  int rollout_n = 8;     // rollouts per prompt when DARS is off; also phase-1 k0
  double clip_epsilon = 0.2;
  double learning_rate = 2e-3;
  int ppo_splits = 2;    // mini-batch shards per iteration
  int ppo_epochs = 1;    // passes over the iteration's shards
  AdvantageMode advantage_mode = AdvantageMode::NoStd;
  std::optional<DarsConfig> dars;
  int total_steps = 0;
  int eval_every = 5;
  std::uint64_t seed = 0;
};

// All rollouts of one prompt in one iteration (phase 1 and, under DARS, the
// merged phase-2 top-up).
struct RolloutGroup {
  int problem_index = -1;
  std::vector<Trajectory> trajectories;

  RewardGroup rewards() const {
    std::vector<int> r(trajectories.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = trajectories[i].reward;
    return RewardGroup(std::move(r));
  }
};

// View of one group as the update step consumes it: every trajectory carries
// its group-relative advantage, broadcast to all its steps.
struct GroupBatchEntry {
  const Problem* problem = nullptr;
  std::span<const Trajectory> trajectories;
  std::span<const double> advantages;
};

// Ratio of new to frozen sampling probability for one step of one rollout.
inline double importance_ratio(const Policy& policy_new, const Problem& problem,
                               const Trajectory& trajectory, int step) {
  const StepDistribution d = policy_step_distribution(policy_new, problem, step);
  const double r = std::exp(d.logprobs[trajectory.tokens[step]] - trajectory.logprobs_old[step]);
  if (!std::isfinite(r)) throw NumericError("numerical-overflow: importance ratio");
  return r;
}

namespace detail {

struct ShardEval {
  double surrogate = 0.0;
  double clip_fraction = 0.0;
  long tokens = 0;
  std::vector<double> gradient;  // feature_dim x vocab_size when requested
};

// Evaluates the clipped surrogate over a shard of groups, optionally with
// its exact gradient. Work parallelizes across groups into per-group slots;
// the fold runs in group order so values never depend on the worker count.
//
// Per (group, step) the gradient of the unclipped terms collapses to
//   f (x) (c - total * p)
// with c[v] the summed coefficients A*r of rollouts whose token is v. Terms
// where the clipped branch is strictly smaller contribute no gradient.
inline ShardEval eval_shard(const Policy& policy, std::span<const GroupBatchEntry> groups,
                            double epsilon, bool with_gradient, const Parallel& par) {
  const int V = policy.vocab_size;
  const int d = policy.feature_dim;
  const std::size_t n = groups.size();

  struct Slot {
    double value = 0.0;
    long clipped = 0;
    long terms = 0;
    bool overflow = false;
    std::vector<double> grad;
  };
  std::vector<Slot> slots(n);

  par.for_each(n, [&](std::size_t g) {
    const GroupBatchEntry& e = groups[g];
    Slot& slot = slots[g];
    const int group_size = static_cast<int>(e.trajectories.size());
    if (with_gradient) slot.grad.assign(static_cast<std::size_t>(d) * V, 0.0);
    std::vector<double> coef_by_token(V, 0.0);
    for (int t = 0; t < e.problem->num_steps; ++t) {
      const StepDistribution dist = policy_step_distribution(policy, *e.problem, t);
      double total_coef = 0.0;
      bool any_coef = false;
      std::fill(coef_by_token.begin(), coef_by_token.end(), 0.0);
      for (int i = 0; i < group_size; ++i) {
        const Trajectory& traj = e.trajectories[i];
        const int tok = traj.tokens[t];
        const double ratio = std::exp(dist.logprobs[tok] - traj.logprobs_old[t]);
        if (!std::isfinite(ratio)) {
          slot.overflow = true;
          continue;
        }
        const double a = e.advantages[i];
        const double unclipped = ratio * a;
        const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * a;
        if (unclipped <= clipped) {
          slot.value += unclipped;
          if (with_gradient && a != 0.0) {
            const double coef = a * ratio;
            coef_by_token[tok] += coef;
            total_coef += coef;
            any_coef = true;
          }
        } else {
          slot.value += clipped;
          ++slot.clipped;
        }
      }
      if (with_gradient && any_coef) {
        const double* f = e.problem->feature_row(t, d);
        for (int k = 0; k < d; ++k) {
          const double fk = f[k];
          double* row = slot.grad.data() + static_cast<std::size_t>(k) * V;
          for (int v = 0; v < V; ++v) row[v] += fk * (coef_by_token[v] - total_coef * dist.probs[v]);
        }
      }
    }
    slot.terms = static_cast<long>(group_size) * e.problem->num_steps;
    slot.value /= group_size;
    if (with_gradient)
      for (double& x : slot.grad) x /= group_size;
  });

  ShardEval out;
  if (with_gradient) out.gradient.assign(static_cast<std::size_t>(d) * V, 0.0);
  long clipped = 0;
  long terms = 0;
  for (const Slot& slot : slots) {
    if (slot.overflow) throw NumericError("numerical-overflow: importance ratio");
    out.surrogate += slot.value;
    clipped += slot.clipped;
    terms += slot.terms;
    if (with_gradient)
      for (std::size_t j = 0; j < out.gradient.size(); ++j) out.gradient[j] += slot.grad[j];
  }
  out.surrogate /= static_cast<double>(n);
  if (with_gradient) {
    for (double& x : out.gradient) {
      x /= static_cast<double>(n);
      if (!std::isfinite(x)) throw NumericError("non-finite-gradient");
    }
  }
  out.clip_fraction = terms > 0 ? static_cast<double>(clipped) / terms : 0.0;
  out.tokens = terms;
  return out;
}

}  // namespace detail

// Mean over groups of the per-group token-mean clipped objective
//   (1/G) sum_i sum_t min(r A, clip(r, 1-eps, 1+eps) A).
inline double clipped_surrogate(const Policy& policy_new, std::span<const GroupBatchEntry> batch,
                                double epsilon, const Parallel& par = Parallel{}) {
  if (batch.empty()) throw NumericError("empty-batch");
  return detail::eval_shard(policy_new, batch, epsilon, false, par).surrogate;
}

// Exact gradient of clipped_surrogate in the policy weights, laid out like
// Policy::weights. Terms on the clipped branch contribute zero.
inline std::vector<double> surrogate_gradient(const Policy& policy_new,
                                              std::span<const GroupBatchEntry> batch,
                                              double epsilon, const Parallel& par = Parallel{}) {
  if (batch.empty()) throw NumericError("empty-batch");
  return detail::eval_shard(policy_new, batch, epsilon, true, par).gradient;
}

struct UpdateStats {
  double surrogate = 0.0;      // objective before this update was applied
  double grad_norm = 0.0;      // Frobenius norm
  double clip_fraction = 0.0;  // fraction of (rollout, step) terms clipped
  long tokens = 0;
};

struct IterationMetrics {
  int step = 0;  // 1-based, the number of completed iterations
  double mean_reward = 0.0;
  double zero_gradient_group_fraction = 0.0;
  double mean_token_entropy = 0.0;  // of the sampling policy, over the batch
  double avg_rollouts_per_prompt = 0.0;
  long rollout_count = 0;
  std::vector<UpdateStats> updates;
};

struct IterationResult {
  Policy policy;
  IterationMetrics metrics;
  std::optional<AllocationPlan> plan;
};

// Deterministic batch for an iteration: whole slices of a per-epoch
// Fisher-Yates permutation, so a batch never repeats a prompt and every
// prompt is visited once per floor(suite/batch) iterations.
inline std::vector<int> batch_for_step(const TrainerConfig& config, const TaskSuite& suite,
                                       int step) {
  const int n = suite.size();
  const int m = config.batch_size;
  if (m < 1 || m > n) throw ConfigError("constraint: 1 <= batch_size <= suite size");
  const int per_epoch = n / m;
  const int epoch = step / per_epoch;
  const int slot = step % per_epoch;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream order = RngStream::keyed(
      config.seed, {stream_domain::kBatchOrder, suite.seed, static_cast<std::uint64_t>(epoch)});
  for (int i = 0; i < n - 1; ++i) {
    const int j = i + order.next_below(n - i);
    std::swap(perm[i], perm[j]);
  }
  return std::vector<int>(perm.begin() + static_cast<std::size_t>(slot) * m,
                          perm.begin() + static_cast<std::size_t>(slot + 1) * m);
}

namespace detail {

inline RngStream rollout_stream(std::uint64_t seed, std::uint64_t suite_seed, int step,
                                int problem_index, int rollout_index) {
  return RngStream::keyed(seed, {stream_domain::kTrainRollout, suite_seed,
                                 static_cast<std::uint64_t>(step),
                                 static_cast<std::uint64_t>(problem_index),
                                 static_cast<std::uint64_t>(rollout_index)});
}

}  // namespace detail

// One training iteration: sample rollout groups for the batch (with the DARS
// phase-2 top-up when configured), compute group-relative advantages, then
// run the configured shard/epoch schedule of SGD ascent steps. logprobs_old
// and advantages stay frozen across all updates of the iteration.
inline IterationResult train_iteration(const Policy& policy, const TaskSuite& suite,
                                       std::span<const int> batch_indices,
                                       const TrainerConfig& config, int step,
                                       const Parallel& par = Parallel{}) {
  if (batch_indices.empty()) throw NumericError("empty-batch");
  const std::size_t m = batch_indices.size();
  const int k0 = config.dars ? config.dars->phase1_k0 : config.rollout_n;

  std::vector<RolloutGroup> groups(m);
  std::vector<std::vector<StepDistribution>> dist_cache(m);
  par.for_each(m, [&](std::size_t i) {
    const int pi = batch_indices[i];
    const Problem& problem = suite.problems[pi];
    dist_cache[i] = step_distributions(policy, problem);
    groups[i].problem_index = pi;
    groups[i].trajectories.reserve(k0);
    for (int r = 0; r < k0; ++r) {
      RngStream s = detail::rollout_stream(config.seed, suite.seed, step, pi, r);
      groups[i].trajectories.push_back(sample_trajectory_from(problem, dist_cache[i], s));
    }
  });

  std::optional<AllocationPlan> plan;
  if (config.dars) {
    const DarsConfig& dars = *config.dars;
    std::vector<DifficultyEstimate> estimates;
    estimates.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
      estimates.push_back(estimate_difficulty(suite.problems[batch_indices[i]].id,
                                              groups[i].rewards()));
    plan = build_allocation_plan(estimates, dars, step);

    std::vector<int> allocated(m, 0);
    std::vector<int> round_extra(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (const AllocationEntry& e : plan->entries)
        if (e.problem_id == suite.problems[batch_indices[i]].id) round_extra[i] = e.extra;
    }
    for (int round = 1; round <= dars.rebalance_rounds; ++round) {
      if (round > 1) {
        // Optional follow-up rounds re-estimate accuracy over the merged
        // groups and top up within whatever increment budget remains.
        long added = 0;
        for (std::size_t i = 0; i < m; ++i) {
          const RewardGroup merged = groups[i].rewards();
          const double a_hat = static_cast<double>(merged.successes()) / merged.size();
          const int remaining = plan->effective_n_max - allocated[i];
          round_extra[i] =
              extra_rollouts_at(dars.schedule, a_hat, merged.size(), dars, remaining);
          added += round_extra[i];
        }
        if (added == 0) break;
      }
      par.for_each(m, [&](std::size_t i) {
        if (round_extra[i] == 0) return;
        const int pi = batch_indices[i];
        const Problem& problem = suite.problems[pi];
        const int from = static_cast<int>(groups[i].trajectories.size());
        for (int r = from; r < from + round_extra[i]; ++r) {
          RngStream s = detail::rollout_stream(config.seed, suite.seed, step, pi, r);
          groups[i].trajectories.push_back(sample_trajectory_from(problem, dist_cache[i], s));
        }
      });
      for (std::size_t i = 0; i < m; ++i) allocated[i] += round_extra[i];
    }
    if (dars.rebalance_rounds > 1) {
      // Fold follow-up allocations back into the audit plan.
      long total = 0;
      for (AllocationEntry& e : plan->entries) {
        for (std::size_t i = 0; i < m; ++i)
          if (suite.problems[batch_indices[i]].id == e.problem_id) e.extra = allocated[i];
        total += e.extra;
      }
      plan->total_extra = total;
      plan->avg_rollouts_per_prompt = dars.phase1_k0 + static_cast<double>(total) / m;
    }
  }

  // Advantages are a pure function of the merged groups' rewards; computed
  // once here and reused across every shard and epoch.
  std::vector<std::vector<double>> advs(m);
  IterationMetrics metrics;
  metrics.step = step + 1;
  long successes = 0;
  long rollouts = 0;
  int degenerate = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const RewardGroup rg = groups[i].rewards();
    const int c = rg.successes();
    successes += c;
    rollouts += rg.size();
    if (c == 0 || c == rg.size()) ++degenerate;
    advs[i] = advantages(rg, config.advantage_mode);
  }
  metrics.mean_reward = static_cast<double>(successes) / rollouts;
  metrics.zero_gradient_group_fraction = static_cast<double>(degenerate) / m;
  metrics.mean_token_entropy = mean_token_entropy(policy, suite, batch_indices, par);
  metrics.rollout_count = rollouts;
  metrics.avg_rollouts_per_prompt =
      plan ? plan->avg_rollouts_per_prompt : static_cast<double>(k0);

  std::vector<GroupBatchEntry> entries(m);
  for (std::size_t i = 0; i < m; ++i)
    entries[i] = {&suite.problems[batch_indices[i]], groups[i].trajectories, advs[i]};

  Policy current = policy;
  const int splits = config.ppo_splits;
  for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    for (int s = 0; s < splits; ++s) {
      const std::size_t lo = m * s / splits;
      const std::size_t hi = m * (s + 1) / splits;
      if (lo == hi) continue;
      const std::span<const GroupBatchEntry> shard(entries.data() + lo, hi - lo);
      const detail::ShardEval eval =
          detail::eval_shard(current, shard, config.clip_epsilon, true, par);
      UpdateStats st;
      st.surrogate = eval.surrogate;
      st.clip_fraction = eval.clip_fraction;
      st.tokens = eval.tokens;
      double norm_sq = 0.0;
      for (double g : eval.gradient) norm_sq += g * g;
      st.grad_norm = std::sqrt(norm_sq);
      metrics.updates.push_back(st);
      for (std::size_t j = 0; j < current.weights.size(); ++j)
        current.weights[j] += config.learning_rate * eval.gradient[j];
    }
  }

  return {std::move(current), std::move(metrics), std::move(plan)};
}

struct RunHooks {
  std::function<void(const IterationMetrics&)> on_metrics;
  std::function<void(int step, const Policy&)> on_eval;
  std::function<void(int step, const Policy&)> on_checkpoint;
  std::function<void(int step, const AllocationPlan&)> on_plan;
};

struct TrainResult {
  Policy policy;
  std::vector<IterationMetrics> metrics;
};

// Full training run. Evaluation fires at step 0 (fresh runs only), every
// eval_every completed iterations, and at the final step; checkpoints fire
// after every iteration. Passing start_step plus the checkpointed policy
// resumes mid-run and reproduces the uninterrupted trajectory exactly.
inline TrainResult run_training(const TrainerConfig& config, const TaskSuite& suite,
                                const RunHooks& hooks = {}, const Parallel& par = Parallel{},
                                int start_step = 0, const Policy* initial = nullptr) {
  TrainResult result;
  result.policy = initial ? *initial
                          : Policy::zeros(suite.config.feature_dim, suite.config.vocab_size);
  if (start_step == 0 && hooks.on_eval) hooks.on_eval(0, result.policy);
  for (int step = start_step; step < config.total_steps; ++step) {
    const std::vector<int> batch = batch_for_step(config, suite, step);
    IterationResult res = train_iteration(result.policy, suite, batch, config, step, par);
    result.policy = std::move(res.policy);
    const int done = step + 1;
    if (hooks.on_plan && res.plan) hooks.on_plan(done, *res.plan);
    if (hooks.on_metrics) hooks.on_metrics(res.metrics);
    if (hooks.on_eval &&
        (done == config.total_steps || (config.eval_every > 0 && done % config.eval_every == 0)))
      hooks.on_eval(done, result.policy);
    // The checkpoint comes last: once it exists, every earlier row for this
    // step is known to be complete, which is what resume relies on.
    if (hooks.on_checkpoint) hooks.on_checkpoint(done, result.policy);
    result.metrics.push_back(std::move(res.metrics));
  }
  return result;
}

}  // namespace darslab
