#pragma once

#include <torch/torch.h>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "inclg/config.hpp"
#include "inclg/data.hpp"
#include "inclg/discriminator.hpp"
#include "inclg/feature_extractor.hpp"
#include "inclg/generator.hpp"
#include "inclg/losses.hpp"

namespace inclg {

struct StepLosses {
  double pixel = 0, landmark = 0, tv = 0, style = 0, perceptual = 0;
  double adversarial_g = 0, adversarial_d = 0;
  double generator_total = 0;
  double learning_rate = 0;

  static const std::array<const char*, 8>& names();
  std::array<double, 8> values() const;
};

struct ValidationMetrics {
  double pixel_loss = 0;      // L1 of the composited output against ground truth
  double landmark_error = 0;  // mean point distance, normalised units
  double masked_psnr = 0;     // dB over hole pixels, averaged over images
  std::int64_t samples = 0;
};

/// Callbacks fired between the two halves of a training step.
struct StepObserver {
  std::function<void()> after_discriminator_update;
  std::function<void()> after_generator_update;
};

/// Owns both networks, their Adam optimisers and the iteration counter.
/// Every step updates the discriminator on L_d with the generator frozen,
/// then the generator on the aggregated L_G with the discriminator frozen.
class GanTrainer {
 public:
  GanTrainer(TrainingConfig config, std::shared_ptr<GeneratorModule> generator,
             PatchDiscriminator discriminator, std::shared_ptr<FeatureExtractor> extractor);

  /// Seeds torch from `config.seed`, then builds the multi-task generator,
  /// the patch discriminator and the VGG extractor.
  static GanTrainer create(const TrainingConfig& config);

  StepLosses train_step(const Batch& batch, const StepObserver* observer = nullptr);

  std::int64_t iteration() const { return iteration_; }
  const TrainingConfig& config() const { return config_; }
  GeneratorModule& generator() { return *generator_; }
  std::shared_ptr<GeneratorModule> generator_ptr() const { return generator_; }
  PatchDiscriminator& discriminator() { return discriminator_; }
  const FeatureExtractor& extractor() const { return *extractor_; }

  /// Mean of each logged term since the start of training.
  std::array<double, 8> running_means() const;
  std::optional<double> best_validation() const { return best_validation_; }
  void record_validation(double score);

  void save_checkpoint(const std::filesystem::path& path) const;
  /// All-or-nothing: on any error the trainer is left untouched.
  void load_checkpoint(const std::filesystem::path& path);

  /// Converts everything (networks, optimiser state, extractor) to `dtype`.
  void to(torch::Dtype dtype);

 private:
  void set_learning_rates();

  TrainingConfig config_;
  std::shared_ptr<GeneratorModule> generator_;
  PatchDiscriminator discriminator_;
  std::shared_ptr<FeatureExtractor> extractor_;
  std::unique_ptr<torch::optim::Adam> generator_optimizer_;
  std::unique_ptr<torch::optim::Adam> discriminator_optimizer_;
  std::int64_t iteration_ = 0;
  std::array<double, 8> loss_sums_{};
  std::int64_t loss_count_ = 0;
  std::optional<double> best_validation_;
};

/// Forward passes over the whole set in eval mode without touching parameters.
ValidationMetrics validate(GeneratorModule& generator, const ValidationSet& set, int batch_size = 4);

struct TrainLoopResult {
  std::vector<std::filesystem::path> checkpoints;  // in write order, final last
  StepLosses last;
  std::optional<ValidationMetrics> last_validation;
};

/// Runs steps from the trainer's current iteration up to max_iterations,
/// writing `iter_NNNNNNNN.pt` every checkpoint_interval steps, `final.pt` at
/// the end, and one CSV row per step to `log_path` (appending on resume).
TrainLoopResult train_loop(GanTrainer& trainer, BatchIterator& batches,
                           const std::filesystem::path& checkpoint_dir,
                           const std::filesystem::path& log_path,
                           const ValidationSet* validation = nullptr);

/// Config snapshot and iteration stored in a checkpoint.
struct CheckpointInfo {
  TrainingConfig config;
  std::int64_t iteration = 0;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Loads only the generator weights (validated against the module's names and shapes).
void load_generator_weights(const std::filesystem::path& path, torch::nn::Module& generator);

}  // namespace inclg
