#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "darslab/errors.hpp"

namespace darslab {

// Group-relative advantage normalization for binary rewards. Std divides the
// centered reward by the group standard deviation, NoStd leaves it centered.
enum class AdvantageMode { NoStd, Std };

// Group std uses the population convention sqrt(u(1-u)). The sample
// convention (n-1 denominator) would break the closed forms below.
inline constexpr const char* kStdConvention = "population";

// Rewards of one rollout group; strictly 0/1.
struct RewardGroup {
  std::vector<int> rewards;

  explicit RewardGroup(std::vector<int> r) : rewards(std::move(r)) {
    if (rewards.empty()) throw NumericError("empty-group");
    for (int v : rewards)
      if (v != 0 && v != 1) throw NumericError("non-binary-reward");
  }

  int size() const { return static_cast<int>(rewards.size()); }

  int successes() const {
    int c = 0;
    for (int v : rewards) c += v;
    return c;
  }
};

struct GroupStats {
  double mean_u = 0.0;
  double std_sigma = 0.0;
  int size = 0;
};

inline GroupStats group_stats(const RewardGroup& group) {
  const int n = group.size();
  const int c = group.successes();
  GroupStats s;
  s.size = n;
  s.mean_u = static_cast<double>(c) / n;
  // sqrt(u(1-u)) written over the integer counts: one rounding step fewer.
  s.std_sigma = std::sqrt(static_cast<double>(c) * (n - c)) / n;
  return s;
}

// Per-rollout advantages: r_i - u, divided by sigma in Std mode. A group with
// zero variance yields all-zero advantages in both modes (the Std limit is
// taken as 0, not NaN), so such groups contribute nothing to updates.
inline std::vector<double> advantages(const RewardGroup& group, AdvantageMode mode) {
  const GroupStats s = group_stats(group);
  std::vector<double> out(group.rewards.size(), 0.0);
  if (mode == AdvantageMode::Std && s.std_sigma == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double centered = static_cast<double>(group.rewards[i]) - s.mean_u;
    out[i] = mode == AdvantageMode::Std ? centered / s.std_sigma : centered;
  }
  return out;
}

// Closed form of the group cumulative advantage A^n(u) = sum_i |A_i| for a
// group of size n at accuracy u:
//   NoStd: 2 n u (1 - u)
//   Std:   2 n sqrt(u (1 - u))
// Both peak at u = 1/2 and vanish at u in {0, 1}.
inline double cumulative_advantage_closed_form(int size_n, double accuracy_u,
                                               AdvantageMode mode) {
  if (size_n < 1) throw NumericError("invalid-group-size");
  if (!(accuracy_u >= 0.0 && accuracy_u <= 1.0)) throw NumericError("invalid-accuracy");
  const double spread = accuracy_u * (1.0 - accuracy_u);
  return mode == AdvantageMode::Std ? 2.0 * size_n * std::sqrt(spread)
                                    : 2.0 * size_n * spread;
}

// Sum of |advantage| over a group, evaluated from the success count. With c
// successes out of n the sum telescopes to 2c(n-c)/n (NoStd) respectively
// 2 sqrt(c(n-c)) (Std); the NoStd value is a single correctly rounded
// division, i.e. exact as a function of the counts.
inline double cumulative_advantage_empirical(const RewardGroup& group, AdvantageMode mode) {
  const int n = group.size();
  const int c = group.successes();
  if (mode == AdvantageMode::Std) {
    if (c == 0 || c == n) return 0.0;
    return 2.0 * std::sqrt(static_cast<double>(c) * (n - c));
  }
  return 2.0 * static_cast<double>(c) * (n - c) / n;
}

struct CurvePoint {
  double u = 0.0;
  double value = 0.0;
};

// A^n(u) sampled at u = k / resolution for k = 0..resolution.
inline std::vector<CurvePoint> cumulative_advantage_curve(AdvantageMode mode, int size_n,
                                                          int resolution) {
  if (resolution < 2) throw NumericError("invalid-resolution");
  std::vector<CurvePoint> pts;
  pts.reserve(static_cast<std::size_t>(resolution) + 1);
  for (int k = 0; k <= resolution; ++k) {
    const double u = static_cast<double>(k) / resolution;
    pts.push_back({u, cumulative_advantage_closed_form(size_n, u, mode)});
  }
  return pts;
}

}  // namespace darslab
