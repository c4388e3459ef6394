#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "inclg/config.hpp"

namespace inclg {

/// Seed for trial `index` of a search started from `master_seed`.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

/// Copy of `base` with every dimension of `base.search` drawn uniformly
/// (continuous ranges) or from `choices`, and `seed` set to the trial seed.
TrainingConfig sample_trial_config(const TrainingConfig& base, std::uint64_t trial_seed);

/// Trains a trial config and returns its validation score (lower is better).
/// A thrown NonFiniteLossError or a non-finite score counts as +inf.
using TrialRunner = std::function<double(const TrainingConfig&)>;

struct Trial {
  std::size_t index = 0;
  TrainingConfig config;
  double score = std::numeric_limits<double>::infinity();
};

struct SearchResult {
  TrainingConfig best;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<Trial> trials;
};

/// Uniform random search. Trials are independent: trial i only depends on
/// (base, derive_seed(base.seed, i)). Ties go to the lower index.
SearchResult hyperparameter_search(const TrainingConfig& base, int n_trials, const TrialRunner& run);

/// Default runner: `trial_iterations` steps (0 = one pass over the training
/// list) on the configured flists, scored by validation pixel loss plus
/// landmark error.
TrialRunner default_trial_runner(std::int64_t trial_iterations);

}  // namespace inclg
