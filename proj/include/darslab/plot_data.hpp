#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "darslab/dars.hpp"
#include "darslab/errors.hpp"
#include "darslab/metrics.hpp"

namespace darslab {

// CSV exporters feeding the standard figures: each function writes one file
// with a fixed header so downstream plotting never has to guess columns.

struct RunData {
  std::string run_id;
  std::string preset;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
};

inline RunData load_run(const std::filesystem::path& dir) {
  RunData run;
  run.records = read_metrics(dir / "metrics.csv");
  if (run.records.empty()) throw IoError("plot-data: empty metrics in " + dir.string());
  run.run_id = run.records.front().run_id;
  run.preset = run.records.front().preset;
  run.seed = run.records.front().seed;
  return run;
}

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("plot-data: cannot open " + path.string());
  return out;
}

// value of (metric, k) at a given step, if recorded
inline std::optional<double> metric_at(const RunData& run, int step, const std::string& metric,
                                       std::optional<int> k = {}) {
  for (const MetricsRecord& r : run.records)
    if (r.step == step && r.metric == metric && r.k == k) return r.value;
  return std::nullopt;
}

inline double require_metric(const RunData& run, int step, const std::string& metric,
                             std::optional<int> k = {}) {
  const auto v = metric_at(run, step, metric, k);
  if (!v)
    throw IoError("missing-metric: " + metric + (k ? "@" + std::to_string(*k) : "") +
                  " at step " + std::to_string(step) + " for run " + run.run_id);
  return *v;
}

inline std::vector<int> steps_with(const RunData& run, const std::string& metric) {
  std::set<int> steps;
  for (const MetricsRecord& r : run.records)
    if (r.metric == metric) steps.insert(r.step);
  return std::vector<int>(steps.begin(), steps.end());
}

}  // namespace detail

// Cumulative advantage curves: the plain A^N(u) in both normalizations plus
// the re-balanced NoStd curve for each requested cap, both schedules.
inline void write_fig3(const std::filesystem::path& path, int rollout_n, int resolution,
                       const std::vector<int>& n_max_values) {
  auto out = detail::open_csv(path);
  out << "u,base_nostd,base_std";
  for (int m : n_max_values) out << ",et_nmax" << m << ",hw_nmax" << m;
  out << '\n';
  const auto base_nostd =
      cumulative_advantage_curve(AdvantageMode::NoStd, rollout_n, resolution);
  const auto base_std = cumulative_advantage_curve(AdvantageMode::Std, rollout_n, resolution);
  std::vector<std::vector<CurvePoint>> et, hw;
  for (int m : n_max_values) {
    DarsConfig d;
    d.base_rollout_n = rollout_n;
    d.n_max = m;
    d.advantage_mode = AdvantageMode::NoStd;
    d.schedule = ScheduleKind::EqualTreatment;
    et.push_back(rebalanced_cumulative_advantage_curve(d.schedule, d, resolution));
    d.schedule = ScheduleKind::HardnessWeighted;
    hw.push_back(rebalanced_cumulative_advantage_curve(d.schedule, d, resolution));
  }
  for (std::size_t i = 0; i < base_nostd.size(); ++i) {
    out << format_double(base_nostd[i].u) << ',' << format_double(base_nostd[i].value) << ','
        << format_double(base_std[i].value);
    for (std::size_t j = 0; j < n_max_values.size(); ++j)
      out << ',' << format_double(et[j][i].value) << ',' << format_double(hw[j][i].value);
    out << '\n';
  }
}

// Learning curves at evaluation steps: sampled pass@1 and policy entropy.
inline void write_fig5(const std::filesystem::path& path, const std::vector<RunData>& runs) {
  auto out = detail::open_csv(path);
  out << "run_id,preset,seed,step,pass_at_1,eval_mean_token_entropy\n";
  for (const RunData& run : runs) {
    for (int step : detail::steps_with(run, "pass_at_1")) {
      out << run.run_id << ',' << run.preset << ',' << run.seed << ',' << step << ','
          << format_double(detail::require_metric(run, step, "pass_at_1")) << ','
          << format_double(detail::require_metric(run, step, "eval_mean_token_entropy")) << '\n';
    }
  }
}

// Exact pass@k over training steps, with the cumulative sampling cost so the
// same table plots against either axis.
inline void write_fig7(const std::filesystem::path& path, const std::vector<RunData>& runs,
                       const std::vector<int>& k_values = {32, 128}) {
  auto out = detail::open_csv(path);
  out << "run_id,preset,seed,step,cumulative_rollouts,pass_at_1";
  for (int k : k_values) out << ",analytic_pass_at_" << k;
  out << '\n';
  for (const RunData& run : runs) {
    for (int step : detail::steps_with(run, "pass_at_1")) {
      double cumulative = 0.0;
      if (step > 0) cumulative = detail::require_metric(run, step, "cumulative_rollouts");
      out << run.run_id << ',' << run.preset << ',' << run.seed << ',' << step << ','
          << format_double(cumulative) << ','
          << format_double(detail::require_metric(run, step, "pass_at_1"));
      for (int k : k_values)
        out << ',' << format_double(detail::require_metric(run, step, "analytic_pass_at_k", k));
      out << '\n';
    }
  }
}

// Pass@k against pass@1 as the run progresses, long form: one row per
// (evaluation step, k) with every k the run recorded.
inline void write_fig8(const std::filesystem::path& path, const std::vector<RunData>& runs) {
  auto out = detail::open_csv(path);
  out << "run_id,preset,seed,step,pass_at_1,k,analytic_pass_at_k\n";
  for (const RunData& run : runs) {
    const auto steps = detail::steps_with(run, "analytic_pass_at_k");
    if (steps.empty())
      throw IoError("missing-metric: analytic_pass_at_k for run " + run.run_id);
    for (int step : steps) {
      const double pass1 = detail::require_metric(run, step, "pass_at_1");
      std::set<int> ks;
      for (const MetricsRecord& r : run.records)
        if (r.metric == "analytic_pass_at_k" && r.step == step && r.k) ks.insert(*r.k);
      for (int k : ks) {
        out << run.run_id << ',' << run.preset << ',' << run.seed << ',' << step << ','
            << format_double(pass1) << ',' << k << ','
            << format_double(detail::require_metric(run, step, "analytic_pass_at_k", k)) << '\n';
      }
    }
  }
}

// The full pass@k-versus-k curve at the final evaluation: exact analytic
// values plus, where the estimator was recorded for that k, the sampled
// counterpart (empty cell otherwise).
inline void write_fig10(const std::filesystem::path& path, const std::vector<RunData>& runs) {
  auto out = detail::open_csv(path);
  out << "run_id,preset,seed,k,analytic_pass_at_k,sampled_pass_at_k\n";
  for (const RunData& run : runs) {
    const auto steps = detail::steps_with(run, "analytic_pass_at_k");
    if (steps.empty())
      throw IoError("missing-metric: analytic_pass_at_k for run " + run.run_id);
    const int final_step = steps.back();
    std::set<int> ks;
    for (const MetricsRecord& r : run.records)
      if (r.metric == "analytic_pass_at_k" && r.step == final_step && r.k) ks.insert(*r.k);
    for (int k : ks) {
      out << run.run_id << ',' << run.preset << ',' << run.seed << ',' << k << ','
          << format_double(detail::require_metric(run, final_step, "analytic_pass_at_k", k))
          << ',';
      const auto sampled = detail::metric_at(run, final_step, "pass_at_k", k);
      if (sampled) out << format_double(*sampled);
      out << '\n';
    }
  }
}

// Per-run cost and quality summary: mean sampling cost per prompt over the
// run, final sampled pass@1, final exact pass@32 and pass@128.
inline void write_table2(const std::filesystem::path& path, const std::vector<RunData>& runs) {
  auto out = detail::open_csv(path);
  out << "run_id,preset,seed,mean_rollouts_per_prompt,final_pass_at_1,"
         "final_analytic_pass_at_32,final_analytic_pass_at_128\n";
  for (const RunData& run : runs) {
    const auto steps = detail::steps_with(run, "avg_rollouts_per_prompt");
    if (steps.empty())
      throw IoError("missing-metric: avg_rollouts_per_prompt for run " + run.run_id);
    double acc = 0.0;
    for (int step : steps) acc += detail::require_metric(run, step, "avg_rollouts_per_prompt");
    const auto eval_steps = detail::steps_with(run, "pass_at_1");
    if (eval_steps.empty()) throw IoError("missing-metric: pass_at_1 for run " + run.run_id);
    const int final_step = eval_steps.back();
    out << run.run_id << ',' << run.preset << ',' << run.seed << ','
        << format_double(acc / static_cast<double>(steps.size())) << ','
        << format_double(detail::require_metric(run, final_step, "pass_at_1")) << ','
        << format_double(detail::require_metric(run, final_step, "analytic_pass_at_k", 32)) << ','
        << format_double(detail::require_metric(run, final_step, "analytic_pass_at_k", 128))
        << '\n';
  }
}

}  // namespace darslab
