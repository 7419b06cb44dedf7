#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "darslab/errors.hpp"
#include "darslab/rng.hpp"

namespace darslab {

struct SuiteConfig {
  int num_problems = 512;
  int vocab_size = 16;
  int feature_dim = 32;
  int max_steps = 6;
};

// One verifiable task. A sampled trajectory succeeds iff every token lies in
// that step's accepted set; the verifier needs nothing but these sets.
// Features drive the shared policy's logits and are regenerated from
// (suite seed, id, step) rather than serialized.
struct Problem {
  std::string id;
  int num_steps = 0;
  std::vector<std::vector<int>> accepted_sets;  // per step, sorted, may be empty
  std::vector<double> features;                 // num_steps x feature_dim, row-major

  const double* feature_row(int step, int feature_dim) const {
    return features.data() + static_cast<std::size_t>(step) * feature_dim;
  }

  bool accepts(int step, int token) const {
    const auto& s = accepted_sets[step];
    return std::binary_search(s.begin(), s.end(), token);
  }

  // Chance that a uniform-random trajectory passes the verifier.
  double uniform_success_probability(int vocab_size) const {
    double p = 1.0;
    for (const auto& s : accepted_sets) p *= static_cast<double>(s.size()) / vocab_size;
    return p;
  }
};

struct TaskSuite {
  SuiteConfig config;
  std::uint64_t seed = 0;
  std::vector<Problem> problems;

  int size() const { return static_cast<int>(problems.size()); }
};

namespace detail {

// Difficulty bands for the uniform-policy solvability target. Stratified
// jittered log-uniform draws inside each band guarantee the suite spans from
// below 1e-4 up to above 0.9 at the default sizes.
struct DifficultyBand {
  double lo = 0.0;
  double hi = 0.0;
  double share = 0.0;
};

inline constexpr DifficultyBand kDifficultyBands[] = {
    {0.35, 0.95, 0.25},
    {0.06, 0.35, 0.30},
    {0.005, 0.06, 0.30},
    {2e-5, 0.005, 0.15},
};

inline std::string problem_id_for(int index, int num_problems) {
  std::size_t width = 4;
  for (long cap = 10000; cap < num_problems; cap *= 10) ++width;
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "p" + digits;
}

inline void fill_features(Problem& p, std::uint64_t suite_seed, int feature_dim) {
  const std::uint64_t id_hash = fnv1a64(p.id);
  p.features.assign(static_cast<std::size_t>(p.num_steps) * feature_dim, 0.0);
  for (int step = 0; step < p.num_steps; ++step) {
    RngStream fs = RngStream::keyed(
        suite_seed, {stream_domain::kSuiteFeature, id_hash, static_cast<std::uint64_t>(step)});
    for (int k = 0; k < feature_dim; ++k)
      p.features[static_cast<std::size_t>(step) * feature_dim + k] = fs.next_normal();
  }
}

// Greedy accepted-set sizing: walk the steps keeping track of the solvability
// still required, and pick each set size as the per-step geometric mean of
// what is left. Realized probability lands within a small factor of target.
inline std::vector<int> plan_set_sizes(double target, int num_steps, int vocab_size) {
  std::vector<int> sizes(num_steps, 1);
  double target_left = target;
  for (int step = 0; step < num_steps; ++step) {
    const int steps_left = num_steps - step;
    const double ratio = std::pow(target_left, 1.0 / steps_left);
    const int a = std::clamp(static_cast<int>(std::lround(ratio * vocab_size)), 1, vocab_size);
    sizes[step] = a;
    target_left *= static_cast<double>(vocab_size) / a;
    target_left = std::min(target_left, 1.0);
  }
  return sizes;
}

}  // namespace detail

inline void validate_suite_config(const SuiteConfig& config) {
  if (config.num_problems < 1) throw ConfigError("constraint: suite.num_problems >= 1");
  if (config.vocab_size < 2) throw ConfigError("constraint: suite.vocab_size >= 2");
  if (config.feature_dim < 1) throw ConfigError("constraint: suite.feature_dim >= 1");
  if (config.max_steps < 1) throw ConfigError("constraint: suite.max_steps >= 1");
}

inline TaskSuite generate_suite(const SuiteConfig& config, std::uint64_t seed) {
  validate_suite_config(config);
  TaskSuite suite;
  suite.config = config;
  suite.seed = seed;

  // Band membership by index block; batch sampling permutes anyway.
  std::vector<int> band_of(config.num_problems, 0);
  {
    int next = 0;
    double acc = 0.0;
    for (int b = 0; b < 4; ++b) {
      acc += detail::kDifficultyBands[b].share;
      const int until = b == 3 ? config.num_problems
                               : std::min(config.num_problems,
                                          static_cast<int>(std::lround(acc * config.num_problems)));
      for (; next < until; ++next) band_of[next] = b;
    }
  }
  std::vector<int> band_count(4, 0), band_rank(config.num_problems, 0);
  for (int i = 0; i < config.num_problems; ++i) band_rank[i] = band_count[band_of[i]]++;

  const double log_v = std::log(static_cast<double>(config.vocab_size));
  suite.problems.resize(config.num_problems);
  for (int i = 0; i < config.num_problems; ++i) {
    Problem& p = suite.problems[i];
    p.id = detail::problem_id_for(i, config.num_problems);
    RngStream shape = RngStream::keyed(
        seed, {stream_domain::kSuiteShape, fnv1a64(p.id)});

    const auto& band = detail::kDifficultyBands[band_of[i]];
    const int in_band = band_count[band_of[i]];
    const double span = std::log(band.hi) - std::log(band.lo);
    const double frac = (band_rank[i] + shape.next_unit()) / in_band;
    const double target = std::exp(std::log(band.lo) + span * frac);

    const int steps_needed =
        std::max(1, static_cast<int>(std::ceil(std::log(1.0 / target) / log_v - 1e-12)));
    p.num_steps = std::min(steps_needed + shape.next_below(3), config.max_steps);

    const std::vector<int> sizes =
        detail::plan_set_sizes(target, p.num_steps, config.vocab_size);
    p.accepted_sets.resize(p.num_steps);
    for (int step = 0; step < p.num_steps; ++step) {
      // Partial Fisher-Yates draw of sizes[step] distinct tokens.
      std::vector<int> pool(config.vocab_size);
      std::iota(pool.begin(), pool.end(), 0);
      for (int j = 0; j < sizes[step]; ++j) {
        const int pick = j + shape.next_below(config.vocab_size - j);
        std::swap(pool[j], pool[pick]);
      }
      auto& set = p.accepted_sets[step];
      set.assign(pool.begin(), pool.begin() + sizes[step]);
      std::sort(set.begin(), set.end());
    }
    detail::fill_features(p, seed, config.feature_dim);
  }
  return suite;
}

// Plain-text format, one problem per line:
//   darslab-suite 1
//   <num_problems> <vocab_size> <feature_dim> <max_steps> <seed>
//   <id> <num_steps> <set_0> <set_1> ...
// with each set a comma-joined sorted token list ("-" when empty). Features
// are reproduced from the seed on import, and export(import(x)) == x.
inline std::string export_suite(const TaskSuite& suite) {
  std::ostringstream out;
  out << "darslab-suite 1\n";
  out << suite.config.num_problems << ' ' << suite.config.vocab_size << ' '
      << suite.config.feature_dim << ' ' << suite.config.max_steps << ' ' << suite.seed << '\n';
  for (const Problem& p : suite.problems) {
    out << p.id << ' ' << p.num_steps;
    for (const auto& set : p.accepted_sets) {
      out << ' ';
      if (set.empty()) {
        out << '-';
      } else {
        for (std::size_t j = 0; j < set.size(); ++j) {
          if (j) out << ',';
          out << set[j];
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

inline TaskSuite import_suite(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "darslab-suite" || version != 1)
    throw IoError("suite-parse: bad header");
  TaskSuite suite;
  if (!(in >> suite.config.num_problems >> suite.config.vocab_size >>
        suite.config.feature_dim >> suite.config.max_steps >> suite.seed))
    throw IoError("suite-parse: bad config line");
  try {
    validate_suite_config(suite.config);
  } catch (const ConfigError& e) {
    throw IoError(std::string("suite-parse: ") + e.what());
  }

  suite.problems.resize(suite.config.num_problems);
  for (int i = 0; i < suite.config.num_problems; ++i) {
    Problem& p = suite.problems[i];
    if (!(in >> p.id >> p.num_steps)) throw IoError("suite-parse: truncated problem list");
    if (p.num_steps < 1 || p.num_steps > suite.config.max_steps)
      throw IoError("suite-parse: step count out of range for " + p.id);
    p.accepted_sets.resize(p.num_steps);
    for (int step = 0; step < p.num_steps; ++step) {
      std::string tok;
      if (!(in >> tok)) throw IoError("suite-parse: missing set for " + p.id);
      auto& set = p.accepted_sets[step];
      if (tok != "-") {
        std::istringstream ts(tok);
        std::string item;
        while (std::getline(ts, item, ',')) {
          int v = 0;
          try {
            std::size_t pos = 0;
            v = std::stoi(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
          } catch (const std::exception&) {
            throw IoError("suite-parse: bad token in set for " + p.id);
          }
          if (v < 0 || v >= suite.config.vocab_size)
            throw IoError("suite-parse: token out of range for " + p.id);
          set.push_back(v);
        }
      }
      if (!std::is_sorted(set.begin(), set.end()) ||
          std::adjacent_find(set.begin(), set.end()) != set.end())
        throw IoError("suite-parse: set not sorted/unique for " + p.id);
    }
    detail::fill_features(p, suite.seed, suite.config.feature_dim);
  }
  std::string trailing;
  if (in >> trailing) throw IoError("suite-parse: trailing data");
  return suite;
}

}  // namespace darslab
