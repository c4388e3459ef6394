#include "inclg/generator.hpp"

#include "inclg/errors.hpp"

namespace F = torch::nn::functional;

namespace inclg {

torch::Tensor composite(const torch::Tensor& generated, const torch::Tensor& original,
                        const torch::Tensor& mask) {
  if (generated.sizes() != original.sizes()) {
    throw ShapeError("composite: generated " + c10::str(generated.sizes()) + " vs original " +
                     c10::str(original.sizes()));
  }
  if (mask.dim() != original.dim() || mask.size(0) != original.size(0) ||
      mask.size(-1) != original.size(-1) || mask.size(-2) != original.size(-2)) {
    throw ShapeError("composite: mask " + c10::str(mask.sizes()) + " does not match image " +
                     c10::str(original.sizes()));
  }
  return torch::where(mask > 0.5, generated, original);
}

void check_image_pair(const torch::Tensor& image, const torch::Tensor& mask, int size) {
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != size || image.size(3) != size) {
    throw ShapeError("expected image [N, 3, " + std::to_string(size) + ", " + std::to_string(size) +
                     "], got " + c10::str(image.sizes()));
  }
  if (mask.dim() != 4 || mask.size(0) != image.size(0) || mask.size(1) != 1 ||
      mask.size(2) != size || mask.size(3) != size) {
    throw ShapeError("expected mask [N, 1, " + std::to_string(size) + ", " + std::to_string(size) +
                     "], got " + c10::str(mask.sizes()));
  }
}

torch::Tensor prepare_input(const torch::Tensor& image, const torch::Tensor& mask) {
  return torch::cat({image * (1 - mask), mask}, 1);
}

EncoderImpl::EncoderImpl(const ModelConfig& config) : config_(config) {
  const int c = config.base_channels;
  block1 = register_module("block1", GatedConv2d(GatedConvOptions(4, c, 7).with_padding(3)));
  block2 = register_module(
      "block2", GatedConv2d(GatedConvOptions(c, 2 * c, 4).with_stride(2).with_padding(1)));
  block3 = register_module(
      "block3", GatedConv2d(GatedConvOptions(2 * c, 4 * c, 4).with_stride(2).with_padding(1)));
  residual = register_module("residual", torch::nn::ModuleList());
  for (int i = 0; i < config.residual_blocks; ++i) {
    residual->push_back(DilatedResidualBlock(4 * c, config.residual_dilation));
  }
  attention = register_module("attention", MaskedAttention(config.attention_temperature));
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& image, const torch::Tensor& mask) {
  check_image_pair(image, mask, config_.image_size);
  const auto full = block1->forward(prepare_input(image, mask));
  const auto half = block2->forward(full);
  auto shared = block3->forward(half);
  for (const auto& block : *residual) shared = block->as<DilatedResidualBlock>()->forward(shared);
  shared = attention->forward(shared, downsample_mask(mask, config_.shared_size()));
  return {shared, {full, half}};
}

MultiTaskGeneratorImpl::MultiTaskGeneratorImpl(const ModelConfig& config) : config_(config) {
  config.validate();
  const int c = config.base_channels;
  const auto conv1x1 = [](int in, int out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
  };
  encoder = register_module("encoder", Encoder(config));
  upsample1 = register_module(
      "upsample1",
      GatedConv2d(GatedConvOptions(4 * c, 2 * c, 4).with_stride(2).with_padding(1).as_transposed()));
  fuse_skip = register_module("fuse_skip", conv1x1(4 * c, 2 * c));
  fuse_landmarks =
      register_module("fuse_landmarks", conv1x1(2 * c + config.landmark_map_copies, 2 * c));
  upsample2 = register_module(
      "upsample2",
      GatedConv2d(GatedConvOptions(2 * c, c, 4).with_stride(2).with_padding(1).as_transposed()));
  fuse_detail = register_module("fuse_detail", conv1x1(2 * c, c));
  output = register_module("output",
                           torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 3, 7).padding(3)));
  landmark_head = register_module(
      "landmark_head", LandmarkPredictor(4 * c, 2 * c, config.landmark_branches,
                                         config.landmark_values()));
}

GeneratorOutput MultiTaskGeneratorImpl::forward(const torch::Tensor& image, const torch::Tensor& mask) {
  const auto encoded = encoder->forward(image, mask);
  const auto& full = encoded.skips[0];
  const auto& half = encoded.skips[1];

  const auto up = upsample1->forward(encoded.shared);
  const auto f1 = fuse_skip->forward(torch::cat({up, half}, 1));
  const auto landmarks = landmark_head->forward(encoded.shared, f1);

  auto landmark_map =
      rasterize_landmarks(landmarks, config_.landmark_map_size, config_.landmark_map_copies);
  if (landmark_map.size(2) != f1.size(2) || landmark_map.size(3) != f1.size(3)) {
    landmark_map = F::interpolate(landmark_map, F::InterpolateFuncOptions()
                                                    .size(std::vector<int64_t>{f1.size(2), f1.size(3)})
                                                    .mode(torch::kBilinear)
                                                    .align_corners(false)
                                                    .antialias(true));
  }
  const auto f2 = fuse_landmarks->forward(torch::cat({f1, landmark_map}, 1));
  const auto detail = upsample2->forward(f2);
  const auto f3 = fuse_detail->forward(torch::cat({detail, full}, 1));
  const auto raw = (torch::tanh(output->forward(f3)) + 1) / 2;
  return {raw, composite(raw, image, mask), landmarks, encoded.shared, f1};
}

}  // namespace inclg
