#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

namespace inclg {

/// Frozen image-to-activations map used by the perceptual and style losses.
/// Implementations must be deterministic and must never expose trainable
/// parameters.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// images: [N,3,H,W] in [0,1]. One activation tensor per configured layer.
  virtual std::vector<torch::Tensor> extract(const torch::Tensor& images) const = 0;
  virtual void to(torch::Dtype dtype) = 0;
};

/// VGG19 convolutional trunk. Layer names follow the usual reluS_K scheme
/// (relu1_1 ... relu5_4). Inputs are normalised with the ImageNet mean/std.
class VggFeatureExtractor : public FeatureExtractor {
 public:
  /// Weights come from `weights` (a torch.save'd torchvision `features`
  /// state dict, keys "0.weight", "0.bias", ...). An empty path selects a
  /// fixed initialisation seeded by `seed`.
  VggFeatureExtractor(std::vector<std::string> layers, const std::filesystem::path& weights = {},
                      std::uint64_t seed = 0);

  std::vector<torch::Tensor> extract(const torch::Tensor& images) const override;
  void to(torch::Dtype dtype) override;

  const std::vector<std::string>& layers() const { return layers_; }
  bool pretrained() const { return pretrained_; }

  static const std::vector<std::string>& known_layers();

 private:
  void load_weights(const std::filesystem::path& path);

  struct Conv {
    torch::Tensor weight, bias;
    bool pool_before;
    std::string name;
  };
  std::vector<std::string> layers_;
  std::vector<Conv> convs_;
  std::size_t depth_ = 0;  // number of convolutions actually evaluated
  torch::Tensor mean_, std_;
  bool pretrained_ = false;
};

}  // namespace inclg
