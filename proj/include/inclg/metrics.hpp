#pragma once

#include <torch/torch.h>

namespace inclg {

/// Reported when the hole is empty or reproduced exactly.
inline constexpr double kMaxPsnr = 100.0;

/// PSNR (peak 1.0) over hole pixels of one image [C,H,W] with mask [1,H,W].
double masked_psnr(const torch::Tensor& output, const torch::Tensor& target, const torch::Tensor& mask);

/// Mean Euclidean distance between corresponding points, in normalised units.
/// Inputs are [N, 2K] or [2K].
double landmark_error(const torch::Tensor& predicted, const torch::Tensor& target);

}  // namespace inclg
