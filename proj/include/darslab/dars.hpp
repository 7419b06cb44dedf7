#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "darslab/advantage.hpp"
#include "darslab/errors.hpp"

namespace darslab {

// Difficulty-adaptive rollout schedules. EqualTreatment tops every unsolved
// prompt up to the mid-difficulty cumulative advantage A^N(1/2);
// HardnessWeighted scales the target by 2x so harder prompts get more.
enum class ScheduleKind { EqualTreatment, HardnessWeighted };

// Linear decay of the extra-rollout cap over training.
struct AnnealSpec {
  int start_n_max = 0;
  int end_n_max = 0;
  int total_steps = 0;
};

struct DarsConfig {
  int base_rollout_n = 8;  // N of the reference curve A^N
  int phase1_k0 = 8;       // probe rollouts per prompt in phase 1
  int n_max = 32;          // cap on the per-prompt increment, not on the total
  ScheduleKind schedule = ScheduleKind::EqualTreatment;
  AdvantageMode advantage_mode = AdvantageMode::NoStd;
  std::optional<AnnealSpec> anneal;
  int rebalance_rounds = 1;  // >1 re-estimates after merging and tops up again
};

// Phase-1 outcome for one prompt. Accuracy and difficulty are derived from
// the integer counts on demand, so downstream arithmetic can stay exact.
struct DifficultyEstimate {
  std::string problem_id;
  int phase1_count_k0 = 0;
  int successes = 0;

  double accuracy_a_hat() const {
    return static_cast<double>(successes) / phase1_count_k0;
  }
  double difficulty_x() const {
    return static_cast<double>(phase1_count_k0 - successes) / phase1_count_k0;
  }
};

inline DifficultyEstimate estimate_difficulty(std::string problem_id,
                                              const RewardGroup& phase1_rewards) {
  return {std::move(problem_id), phase1_rewards.size(), phase1_rewards.successes()};
}

// S(a) = 2a(1-a): the marginal cumulative advantage one extra rollout is
// expected to add at accuracy a.
inline double s_weight(double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw NumericError("invalid-accuracy");
  return 2.0 * accuracy * (1.0 - accuracy);
}

// Re-balancing target L for one prompt: A^N(1/2) under EqualTreatment,
// 2 x A^N(1/2) under HardnessWeighted.
inline double target_cumulative_advantage(ScheduleKind schedule,
                                          const DifficultyEstimate& estimate,
                                          const DarsConfig& config) {
  const double mid =
      cumulative_advantage_closed_form(config.base_rollout_n, 0.5, config.advantage_mode);
  if (schedule == ScheduleKind::EqualTreatment) return mid;
  return 2.0 * estimate.difficulty_x() * mid;
}

namespace detail {

// Integer ceiling with a snap window. The allocation ratios are rationals
// with small denominators; a value within 1e-9 of an integer is that integer
// up to double rounding, and plain ceil would jump one too high.
inline long snap_ceil(double x) {
  const double r = std::nearbyint(x);
  if (std::abs(x - r) < 1e-9) return static_cast<long>(r);
  return static_cast<long>(std::ceil(x));
}

}  // namespace detail

// Extra rollouts for a prompt whose running group currently has current_size
// members at estimated accuracy a_hat, against the schedule target. The first
// round passes current_size == base_rollout_n, which reduces the deficit to
// the textbook form (L - A^N(a)) / S(a); later re-balancing rounds pass the
// merged group size. Conventions for the S(a) = 0 endpoints: a positive
// deficit maps to the full cap (the prompt cannot be re-balanced by finitely
// many rollouts), a non-positive one to zero. EqualTreatment never tops up
// prompts with a_hat >= 1/2.
inline int extra_rollouts_at(ScheduleKind schedule, double a_hat, int current_size,
                             const DarsConfig& config, int effective_n_max) {
  if (!(a_hat >= 0.0 && a_hat <= 1.0)) throw NumericError("invalid-accuracy");
  if (current_size < 1) throw NumericError("invalid-group-size");
  if (effective_n_max <= 0) return 0;
  const double mid =
      cumulative_advantage_closed_form(config.base_rollout_n, 0.5, config.advantage_mode);
  const double own =
      cumulative_advantage_closed_form(current_size, a_hat, config.advantage_mode);
  double deficit = 0.0;
  if (schedule == ScheduleKind::EqualTreatment) {
    if (a_hat >= 0.5) return 0;
    deficit = mid - own;
  } else {
    deficit = 2.0 * (1.0 - a_hat) * mid - own;
  }
  const double s = s_weight(a_hat);
  if (s == 0.0) return deficit > 0.0 ? effective_n_max : 0;
  const long raw = detail::snap_ceil(deficit / s);
  if (raw <= 0) return 0;
  return static_cast<int>(std::min<long>(raw, effective_n_max));
}

inline int extra_rollouts(ScheduleKind schedule, const DifficultyEstimate& estimate,
                          const DarsConfig& config, int effective_n_max) {
  return extra_rollouts_at(schedule, estimate.accuracy_a_hat(), config.base_rollout_n,
                           config, effective_n_max);
}

// Cap for a given step under the linear anneal; config.n_max when no anneal
// is set. Non-increasing in step for start >= end.
inline int anneal_n_max(int step, const DarsConfig& config) {
  if (!config.anneal) return config.n_max;
  const AnnealSpec& a = *config.anneal;
  if (a.total_steps <= 0 || step >= a.total_steps) return a.end_n_max;
  if (step <= 0) return a.start_n_max;
  const double t = static_cast<double>(step) / a.total_steps;
  const long v = std::lround(a.start_n_max + (a.end_n_max - a.start_n_max) * t);
  const long lo = std::min(a.start_n_max, a.end_n_max);
  const long hi = std::max(a.start_n_max, a.end_n_max);
  return static_cast<int>(std::clamp(v, lo, hi));
}

struct AllocationEntry {
  std::string problem_id;
  int phase1_k0 = 0;
  int successes = 0;
  int extra = 0;
};

// Phase-2 plan for one batch, ordered by problem id for stable audits.
struct AllocationPlan {
  std::vector<AllocationEntry> entries;
  int effective_n_max = 0;
  long total_extra = 0;
  double avg_rollouts_per_prompt = 0.0;
};

inline AllocationPlan build_allocation_plan(const std::vector<DifficultyEstimate>& estimates,
                                            const DarsConfig& config, int step) {
  if (estimates.empty()) throw NumericError("empty-estimates");
  AllocationPlan plan;
  plan.effective_n_max = anneal_n_max(step, config);
  plan.entries.reserve(estimates.size());
  for (const auto& e : estimates) {
    const int extra = extra_rollouts(config.schedule, e, config, plan.effective_n_max);
    plan.entries.push_back({e.problem_id, e.phase1_count_k0, e.successes, extra});
    plan.total_extra += extra;
  }
  std::sort(plan.entries.begin(), plan.entries.end(),
            [](const AllocationEntry& a, const AllocationEntry& b) {
              return a.problem_id < b.problem_id;
            });
  plan.avg_rollouts_per_prompt =
      config.phase1_k0 + static_cast<double>(plan.total_extra) / estimates.size();
  return plan;
}

// Effective cumulative advantage after one re-balancing pass,
// A^N(u) + dn(u) S(u), sampled at u = k / resolution. Shrinking n_max
// contracts the correction toward the plain curve; n_max = 0 recovers it.
inline std::vector<CurvePoint> rebalanced_cumulative_advantage_curve(ScheduleKind schedule,
                                                                     const DarsConfig& config,
                                                                     int resolution) {
  if (resolution < 2) throw NumericError("invalid-resolution");
  std::vector<CurvePoint> pts;
  pts.reserve(static_cast<std::size_t>(resolution) + 1);
  for (int k = 0; k <= resolution; ++k) {
    const double u = static_cast<double>(k) / resolution;
    const double base =
        cumulative_advantage_closed_form(config.base_rollout_n, u, config.advantage_mode);
    const int extra =
        extra_rollouts_at(schedule, u, config.base_rollout_n, config, config.n_max);
    pts.push_back({u, base + extra * s_weight(u)});
  }
  return pts;
}

}  // namespace darslab
