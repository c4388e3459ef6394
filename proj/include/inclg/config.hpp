#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace inclg {

/// Network geometry. Defaults are the full-size model; `reduced()` is the
/// 32x32 quarter-width variant used by structural and gradient tests.
struct ModelConfig {
  int image_size = 256;
  int base_channels = 64;  // encoder widths: base, 2*base, 4*base (= shared width)
  int residual_blocks = 8;
  int residual_dilation = 2;
  std::vector<int> landmark_branches = {64, 128, 256};
  int landmark_count = 68;
  int landmark_map_size = 128;
  int landmark_map_copies = 68;
  double attention_temperature = 1.0;
  int discriminator_channels = 64;

  static ModelConfig reduced();

  int shared_channels() const { return 4 * base_channels; }
  int shared_size() const { return image_size / 4; }
  int landmark_values() const { return 2 * landmark_count; }
  void validate() const;
};

struct LossWeights {
  double pixel = 1.0;
  double landmark = 0.1;
  double tv = 0.1;
  double style = 250.0;
  double perceptual = 0.1;
  double adversarial = 0.1;
};

/// Closed interval sampled uniformly; `choices` wins when non-empty.
struct SearchDimension {
  double low = 0.0;
  double high = 0.0;
  std::vector<double> choices;

  bool empty() const { return choices.empty() && low == 0.0 && high == 0.0; }
};

struct SearchSpace {
  std::optional<SearchDimension> landmark_weight;
  std::optional<SearchDimension> learning_rate;
  std::optional<SearchDimension> decay_factor;
  std::optional<SearchDimension> batch_size;
};

struct TrainingConfig {
  ModelConfig model;
  LossWeights weights;
  double pixel_hole_weight = 1.0;

  double learning_rate = 1e-4;
  double discriminator_lr_ratio = 0.1;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double decay_factor = 1.0;
  std::int64_t decay_interval = 10000;
  int batch_size = 4;
  std::int64_t max_iterations = 1000;
  std::uint64_t seed = 42;
  std::int64_t checkpoint_interval = 1000;
  std::int64_t validation_interval = 0;  // 0 disables periodic validation
  bool reduced = false;

  std::vector<std::string> extractor_layers = {"relu1_1", "relu2_1", "relu3_1", "relu4_1",
                                               "relu5_1"};
  std::filesystem::path extractor_weights;

  std::filesystem::path train_images, train_landmarks, train_masks;
  std::filesystem::path val_images, val_landmarks, val_masks;
  std::filesystem::path test_images, test_masks, test_landmarks;
  std::filesystem::path output_dir = "output";

  SearchSpace search;
  int search_trials = 10;
  std::int64_t search_iterations = 0;  // 0 = one pass over the training list

  void validate() const;
  double learning_rate_at(std::int64_t iteration) const;
};

/// Flat `key: value` file. Unknown keys and nested values are errors.
TrainingConfig load_config(const std::filesystem::path& path);
TrainingConfig parse_config(const std::string& text);

/// Applies `key=value` overrides on top of an existing config.
void apply_overrides(TrainingConfig& config, const std::map<std::string, std::string>& overrides);

/// Serialises every key so that `parse_config(to_config_text(c))` reproduces `c`.
std::string to_config_text(const TrainingConfig& config);

}  // namespace inclg
