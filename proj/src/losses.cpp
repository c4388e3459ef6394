#include "inclg/losses.hpp"

#include <sstream>

#include "inclg/errors.hpp"

namespace inclg {

NonFiniteLossError::NonFiniteLossError(std::string term, double value)
    : std::runtime_error([&] {
        std::ostringstream msg;
        msg << "non-finite loss term '" << term << "' (" << value << ")";
        return msg.str();
      }()),
      term_(std::move(term)) {}

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                     c10::str(b.sizes()));
  }
}

void check_layers(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.empty()) throw ConfigError("feature extractor produced no layers");
  if (a.size() != b.size()) throw ShapeError("feature layer count mismatch");
}

}  // namespace

torch::Tensor pixel_loss(const torch::Tensor& generated, const torch::Tensor& target,
                         const torch::Tensor& mask, double hole_weight) {
  check_same_shape(generated, target, "pixel loss");
  const auto diff = (generated - target).abs();
  if (!mask.defined() || hole_weight == 1.0) return diff.mean();
  return (diff * (1 + (hole_weight - 1) * mask)).mean();
}

torch::Tensor landmark_loss(const torch::Tensor& predicted, const torch::Tensor& target) {
  if (predicted.numel() != target.numel()) {
    throw ShapeError("landmark loss: " + std::to_string(predicted.numel()) + " vs " +
                     std::to_string(target.numel()) + " values");
  }
  return (predicted - target.reshape_as(predicted)).pow(2).mean();
}

torch::Tensor tv_loss(const torch::Tensor& image) {
  if (image.dim() < 2) throw ShapeError("tv loss needs at least a 2-D image");
  const auto h = image.size(-2);
  const auto w = image.size(-1);
  const auto horizontal = (image.narrow(-1, 1, w - 1) - image.narrow(-1, 0, w - 1)).abs().sum();
  const auto vertical = (image.narrow(-2, 1, h - 1) - image.narrow(-2, 0, h - 1)).abs().sum();
  const auto planes = image.numel() / (h * w);
  const auto pairs = planes * (h * (w - 1) + (h - 1) * w);
  if (pairs == 0) return torch::zeros({}, image.options());
  return (horizontal + vertical) / static_cast<double>(pairs);
}

torch::Tensor gram_matrix(const torch::Tensor& features) {
  if (features.dim() != 4) throw ShapeError("gram matrix expects [N, C, H, W]");
  const auto n = features.size(0);
  const auto c = features.size(1);
  const auto positions = features.size(2) * features.size(3);
  const auto flat = features.reshape({n, c, positions});
  return flat.bmm(flat.transpose(1, 2)) / static_cast<double>(c * positions);
}

torch::Tensor style_loss_from_features(const std::vector<torch::Tensor>& generated,
                                       const std::vector<torch::Tensor>& target) {
  check_layers(generated, target);
  auto total = torch::zeros({}, generated.front().options());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    check_same_shape(generated[i], target[i], "style loss");
    total = total + (gram_matrix(generated[i]) - gram_matrix(target[i])).abs().mean();
  }
  return total;
}

torch::Tensor style_loss(const torch::Tensor& generated, const torch::Tensor& target,
                         const FeatureExtractor& extractor) {
  check_same_shape(generated, target, "style loss");
  return style_loss_from_features(extractor.extract(generated), extractor.extract(target));
}

torch::Tensor perceptual_loss_from_features(const std::vector<torch::Tensor>& generated,
                                            const std::vector<torch::Tensor>& target) {
  check_layers(generated, target);
  auto total = torch::zeros({}, generated.front().options());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    check_same_shape(generated[i], target[i], "perceptual loss");
    total = total + (generated[i] - target[i]).abs().mean();
  }
  return total;
}

torch::Tensor perceptual_loss(const torch::Tensor& generated, const torch::Tensor& target,
                              const FeatureExtractor& extractor) {
  check_same_shape(generated, target, "perceptual loss");
  return perceptual_loss_from_features(extractor.extract(generated), extractor.extract(target));
}

torch::Tensor generator_hinge_loss(const torch::Tensor& fake_scores) { return -fake_scores.mean(); }

torch::Tensor discriminator_hinge_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return torch::relu(1 - real_scores).mean() + torch::relu(1 + fake_scores).mean();
}

AdversarialLosses adversarial_losses(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return {generator_hinge_loss(fake_scores), discriminator_hinge_loss(real_scores, fake_scores)};
}

torch::Tensor aggregate_generator_loss(const LossBundle& bundle, const LossWeights& weights) {
  const std::pair<const std::optional<torch::Tensor>*, std::pair<const char*, double>> terms[] = {
      {&bundle.pixel, {"pixel", weights.pixel}},
      {&bundle.landmark, {"landmark", weights.landmark}},
      {&bundle.tv, {"tv", weights.tv}},
      {&bundle.style, {"style", weights.style}},
      {&bundle.perceptual, {"perceptual", weights.perceptual}},
      {&bundle.adversarial_g, {"adversarial", weights.adversarial}},
  };
  torch::Tensor total;
  for (const auto& [term, spec] : terms) {
    if (!term->has_value() || !(*term)->defined()) {
      throw ConfigError(std::string("loss bundle is missing the ") + spec.first + " term");
    }
    if (spec.second == 0.0) continue;
    const auto weighted = **term * spec.second;
    total = total.defined() ? total + weighted : weighted;
  }
  if (!total.defined()) total = torch::zeros({}, bundle.pixel->options());
  return total;
}

}  // namespace inclg
