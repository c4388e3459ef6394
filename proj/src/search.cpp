#include "inclg/search.hpp"

#include "inclg/logging.hpp"

#include <cmath>
#include <random>

#include "inclg/data.hpp"
#include "inclg/errors.hpp"
#include "inclg/trainer.hpp"

namespace inclg {

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  // splitmix64 finaliser over (master, index)
  std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double draw(const SearchDimension& dim, std::mt19937_64& rng) {
  if (!dim.choices.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, dim.choices.size() - 1);
    return dim.choices[pick(rng)];
  }
  if (dim.low == dim.high) return dim.low;
  return std::uniform_real_distribution<double>(dim.low, dim.high)(rng);
}

}  // namespace

TrainingConfig sample_trial_config(const TrainingConfig& base, std::uint64_t trial_seed) {
  TrainingConfig config = base;
  config.seed = trial_seed;
  std::mt19937_64 rng(trial_seed);
  // fixed draw order keeps trials comparable when dimensions are toggled
  if (base.search.landmark_weight) config.weights.landmark = draw(*base.search.landmark_weight, rng);
  if (base.search.learning_rate) config.learning_rate = draw(*base.search.learning_rate, rng);
  if (base.search.decay_factor) config.decay_factor = draw(*base.search.decay_factor, rng);
  if (base.search.batch_size) {
    config.batch_size = static_cast<int>(std::lround(draw(*base.search.batch_size, rng)));
  }
  config.validate();
  return config;
}

SearchResult hyperparameter_search(const TrainingConfig& base, int n_trials, const TrialRunner& run) {
  if (n_trials < 1) throw ConfigError("hyperparameter search needs at least one trial");
  if (!run) throw ConfigError("hyperparameter search needs a trial runner");
  SearchResult result;
  result.best = base;
  for (int i = 0; i < n_trials; ++i) {
    Trial trial;
    trial.index = static_cast<std::size_t>(i);
    trial.config = sample_trial_config(base, derive_seed(base.seed, trial.index));
    try {
      trial.score = run(trial.config);
    } catch (const NonFiniteLossError& e) {
      logging::warn("trial {} diverged ({}); scored as +inf", i, e.what());
      trial.score = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(trial.score)) trial.score = std::numeric_limits<double>::infinity();
    logging::info("trial {}: landmark weight {:.6g}, lr {:.6g}, decay {:.6g}, batch {} -> score {:.6g}", i,
                 trial.config.weights.landmark, trial.config.learning_rate, trial.config.decay_factor,
                 trial.config.batch_size, trial.score);
    if (result.trials.empty() || trial.score < result.best_score) {
      result.best = trial.config;
      result.best_score = trial.score;
    }
    result.trials.push_back(std::move(trial));
  }
  return result;
}

TrialRunner default_trial_runner(std::int64_t trial_iterations) {
  return [trial_iterations](const TrainingConfig& trial) {
    const int size = trial.model.image_size;
    BatchIterator batches(read_flist(trial.train_images), read_flist(trial.train_landmarks),
                          read_flist(trial.train_masks), trial.batch_size, trial.seed, size);
    const auto validation = ValidationSet::load(read_flist(trial.val_images), read_flist(trial.val_landmarks),
                                                read_flist(trial.val_masks), size);
    TrainingConfig config = trial;
    config.max_iterations = trial_iterations > 0 ? trial_iterations : batches.batches_per_epoch();
    auto trainer = GanTrainer::create(config);
    while (trainer.iteration() < config.max_iterations) trainer.train_step(batches.batch(trainer.iteration()));
    const auto metrics = validate(trainer.generator(), validation, config.batch_size);
    return metrics.pixel_loss + metrics.landmark_error;
  };
}

}  // namespace inclg
