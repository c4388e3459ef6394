#pragma once

#include <torch/torch.h>

#include <vector>

namespace inclg {

/// Rasterises landmarks [N, 2*K] (x0, y0, x1, y1, ... normalised to [0,1])
/// into a binary `size`x`size` map with a 1 at (row = round(y*(size-1)),
/// col = round(x*(size-1))) per point, replicated into `copies` identical
/// channels: [N, copies, size, size]. Coordinates are clamped to [0,1]
/// (non-finite ones to 0) and rounded half away from zero. The result carries
/// no gradient.
torch::Tensor rasterize_landmarks(const torch::Tensor& landmarks, int size = 128, int copies = 68);

/// Adaptive fusion:  FC(gamma * P(f1_pooled) + f_lmk)
/// `projection` maps the pooled image feature onto f_lmk's length.
torch::Tensor adaptive_fusion(const torch::Tensor& f1_pooled, const torch::Tensor& landmark_features,
                              const torch::Tensor& gamma, torch::nn::Linear& projection,
                              torch::nn::Linear& fc);

/// Landmark head. Each branch is a 1x1 convolution over f_share followed by
/// global average pooling; the widest branch additionally goes through a
/// PReLU. The pooled vectors are concatenated into f_lmk and fused with the
/// pooled image feature f1 through a zero-initialised gate `gamma`.
class LandmarkPredictorImpl : public torch::nn::Module {
 public:
  LandmarkPredictorImpl(int shared_channels, int image_channels, std::vector<int> branch_widths,
                        int landmark_values);

  torch::Tensor forward(const torch::Tensor& shared, const torch::Tensor& f1);
  /// Concatenated branch features [N, sum(branch_widths)].
  torch::Tensor landmark_features(const torch::Tensor& shared);

  const std::vector<int>& branch_widths() const { return widths_; }
  int feature_length() const;

  torch::nn::ModuleList branches{nullptr};
  torch::nn::PReLU widest_activation{nullptr};
  torch::nn::Linear projection{nullptr};
  torch::nn::Linear fc{nullptr};
  torch::Tensor gamma;

 private:
  int shared_channels_;
  int image_channels_;
  std::vector<int> widths_;
};
TORCH_MODULE(LandmarkPredictor);

}  // namespace inclg
