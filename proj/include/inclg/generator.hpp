#pragma once

#include <torch/torch.h>

#include <vector>

#include "inclg/config.hpp"
#include "inclg/landmarks.hpp"
#include "inclg/layers.hpp"

namespace inclg {

/// out = generated where mask == 1, original where mask == 0. Selection is
/// exact: known pixels are copied, never recomputed.
torch::Tensor composite(const torch::Tensor& generated, const torch::Tensor& original,
                        const torch::Tensor& mask);

/// Zero-fills the hole and appends the mask as a fourth channel.
torch::Tensor prepare_input(const torch::Tensor& image, const torch::Tensor& mask);

struct GeneratorOutput {
  torch::Tensor raw;        // [N,3,S,S] synthesis before compositing, in [0,1]
  torch::Tensor image;      // composite(raw, input, mask)
  torch::Tensor landmarks;  // [N,2K] normalised, unclamped
  torch::Tensor shared;     // f_share
  torch::Tensor f1;         // image feature handed to the landmark head
};

/// Anything the GAN trainer can optimise.
class GeneratorModule : public torch::nn::Module {
 public:
  virtual GeneratorOutput forward(const torch::Tensor& image, const torch::Tensor& mask) = 0;
};

struct EncoderOutput {
  torch::Tensor shared;
  std::vector<torch::Tensor> skips;  // full-resolution block, half-resolution block
};

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& config);

  EncoderOutput forward(const torch::Tensor& image, const torch::Tensor& mask);

  GatedConv2d block1{nullptr}, block2{nullptr}, block3{nullptr};
  torch::nn::ModuleList residual{nullptr};
  MaskedAttention attention{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(Encoder);

class MultiTaskGeneratorImpl : public GeneratorModule {
 public:
  explicit MultiTaskGeneratorImpl(const ModelConfig& config);

  GeneratorOutput forward(const torch::Tensor& image, const torch::Tensor& mask) override;

  const ModelConfig& config() const { return config_; }

  Encoder encoder{nullptr};
  GatedConv2d upsample1{nullptr}, upsample2{nullptr};
  torch::nn::Conv2d fuse_skip{nullptr};      // F1
  torch::nn::Conv2d fuse_landmarks{nullptr}; // F2
  torch::nn::Conv2d fuse_detail{nullptr};    // F3
  torch::nn::Conv2d output{nullptr};
  LandmarkPredictor landmark_head{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(MultiTaskGenerator);

void check_image_pair(const torch::Tensor& image, const torch::Tensor& mask, int size);

}  // namespace inclg
