#pragma once

#include <torch/torch.h>

#include <optional>

#include "inclg/config.hpp"
#include "inclg/feature_extractor.hpp"

namespace inclg {

/// Mean absolute difference. With a mask and `hole_weight` != 1, hole pixels
/// count `hole_weight` times; the normaliser stays the element count.
torch::Tensor pixel_loss(const torch::Tensor& generated, const torch::Tensor& target,
                         const torch::Tensor& mask = {}, double hole_weight = 1.0);

/// Mean squared error over the 2K landmark scalars.
torch::Tensor landmark_loss(const torch::Tensor& predicted, const torch::Tensor& target);

/// Anisotropic L1 total variation:
///   (sum |horizontal diffs| + sum |vertical diffs|) / (#horizontal pairs + #vertical pairs)
torch::Tensor tv_loss(const torch::Tensor& image);

/// [N,C,H,W] -> [N,C,C], normalised by C*H*W.
torch::Tensor gram_matrix(const torch::Tensor& features);

/// Sum over extractor layers of mean |Gram(x) - Gram(X)|.
torch::Tensor style_loss(const torch::Tensor& generated, const torch::Tensor& target,
                         const FeatureExtractor& extractor);
torch::Tensor style_loss_from_features(const std::vector<torch::Tensor>& generated,
                                       const std::vector<torch::Tensor>& target);

/// Sum over extractor layers of mean |phi(x) - phi(X)|.
torch::Tensor perceptual_loss(const torch::Tensor& generated, const torch::Tensor& target,
                              const FeatureExtractor& extractor);
torch::Tensor perceptual_loss_from_features(const std::vector<torch::Tensor>& generated,
                                            const std::vector<torch::Tensor>& target);

/// Hinge losses: generator = -mean(fake);
/// discriminator = mean(relu(1 - real)) + mean(relu(1 + fake)).
torch::Tensor generator_hinge_loss(const torch::Tensor& fake_scores);
torch::Tensor discriminator_hinge_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

struct AdversarialLosses {
  torch::Tensor generator;
  torch::Tensor discriminator;
};
AdversarialLosses adversarial_losses(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

struct LossBundle {
  std::optional<torch::Tensor> pixel, landmark, tv, style, perceptual, adversarial_g, adversarial_d;
};

/// Weighted sum of the six generator terms. A zero weight drops its term
/// entirely; a missing term is an error.
torch::Tensor aggregate_generator_loss(const LossBundle& bundle, const LossWeights& weights);

}  // namespace inclg
