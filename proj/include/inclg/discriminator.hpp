#pragma once

#include <torch/torch.h>

#include "inclg/layers.hpp"

namespace inclg {

/// Five 4x4 spectral-normalised convolutions (stride 2, 2, 2, 1, 1) with
/// LeakyReLU(0.2) between them. A 256x256 image maps to a 30x30 score grid.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit PatchDiscriminatorImpl(int base_channels = 64);

  torch::Tensor forward(const torch::Tensor& image);
  /// One power iteration on every layer; only the discriminator update calls this.
  void update_spectral_estimates();

  /// Spatial size of the score map for a square input of `input_size`.
  static int64_t output_size(int64_t input_size);

  torch::nn::ModuleList layers{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

}  // namespace inclg
