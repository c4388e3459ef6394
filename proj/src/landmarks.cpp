#include "inclg/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inclg/errors.hpp"

namespace inclg {

namespace {

int64_t to_pixel(double coordinate, int size) {
  if (!std::isfinite(coordinate)) coordinate = 0.0;
  coordinate = std::clamp(coordinate, 0.0, 1.0);
  return static_cast<int64_t>(std::round(coordinate * (size - 1)));
}

}  // namespace

torch::Tensor rasterize_landmarks(const torch::Tensor& landmarks, int size, int copies) {
  if (landmarks.dim() != 2 || landmarks.size(1) % 2 != 0) {
    throw ShapeError("landmarks must be [N, 2*K], got " + c10::str(landmarks.sizes()));
  }
  if (size < 2 || copies < 1) throw ConfigError("invalid landmark map geometry");
  const auto points = landmarks.detach().to(torch::kCPU, torch::kDouble).contiguous();
  const auto batch = points.size(0);
  const auto count = points.size(1) / 2;
  auto single = torch::zeros({batch, 1, size, size}, torch::kFloat);
  auto canvas = single.accessor<float, 4>();
  auto coords = points.accessor<double, 2>();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t k = 0; k < count; ++k) {
      const auto col = to_pixel(coords[b][2 * k], size);
      const auto row = to_pixel(coords[b][2 * k + 1], size);
      canvas[b][0][row][col] = 1.0f;
    }
  }
  return single.expand({batch, copies, size, size})
      .contiguous()
      .to(landmarks.device(), landmarks.scalar_type());
}

torch::Tensor adaptive_fusion(const torch::Tensor& f1_pooled, const torch::Tensor& landmark_features,
                              const torch::Tensor& gamma, torch::nn::Linear& projection,
                              torch::nn::Linear& fc) {
  if (f1_pooled.dim() != 2 || f1_pooled.size(1) != projection->options.in_features()) {
    throw ConfigError("pooled image feature " + c10::str(f1_pooled.sizes()) +
                      " does not match projection input " +
                      std::to_string(projection->options.in_features()));
  }
  if (landmark_features.dim() != 2 ||
      landmark_features.size(1) != projection->options.out_features() ||
      landmark_features.size(1) != fc->options.in_features()) {
    throw ConfigError("landmark feature " + c10::str(landmark_features.sizes()) +
                      " does not match fusion width " +
                      std::to_string(fc->options.in_features()));
  }
  return fc->forward(gamma * projection->forward(f1_pooled) + landmark_features);
}

LandmarkPredictorImpl::LandmarkPredictorImpl(int shared_channels, int image_channels,
                                             std::vector<int> branch_widths, int landmark_values)
    : shared_channels_(shared_channels), image_channels_(image_channels), widths_(std::move(branch_widths)) {
  if (widths_.empty()) throw ConfigError("landmark head needs at least one branch");
  for (std::size_t i = 1; i < widths_.size(); ++i) {
    if (widths_[i] <= widths_[i - 1]) throw ConfigError("landmark branch widths must increase");
  }
  branches = register_module("branches", torch::nn::ModuleList());
  for (int width : widths_) {
    branches->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(shared_channels, width, 1)));
  }
  widest_activation = register_module("widest_activation", torch::nn::PReLU());
  projection = register_module("projection", torch::nn::Linear(image_channels, feature_length()));
  fc = register_module("fc", torch::nn::Linear(feature_length(), landmark_values));
  gamma = register_parameter("gamma", torch::zeros({1}));
}

int LandmarkPredictorImpl::feature_length() const {
  return std::accumulate(widths_.begin(), widths_.end(), 0);
}

torch::Tensor LandmarkPredictorImpl::landmark_features(const torch::Tensor& shared) {
  if (shared.dim() != 4 || shared.size(1) != shared_channels_) {
    throw ShapeError("landmark head expects " + std::to_string(shared_channels_) +
                     "-channel shared features, got " + c10::str(shared.sizes()));
  }
  std::vector<torch::Tensor> pooled;
  for (std::size_t i = 0; i < branches->size(); ++i) {
    auto feature = branches[i]->as<torch::nn::Conv2d>()->forward(shared).mean({2, 3});
    if (i + 1 == branches->size()) feature = widest_activation->forward(feature);
    pooled.push_back(feature);
  }
  return torch::cat(pooled, 1);
}

torch::Tensor LandmarkPredictorImpl::forward(const torch::Tensor& shared, const torch::Tensor& f1) {
  if (f1.dim() != 4 || f1.size(1) != image_channels_) {
    throw ShapeError("landmark head expects " + std::to_string(image_channels_) +
                     "-channel image features, got " + c10::str(f1.sizes()));
  }
  return adaptive_fusion(f1.mean({2, 3}), landmark_features(shared), gamma, projection, fc);
}

}  // namespace inclg
