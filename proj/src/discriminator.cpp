#include "inclg/discriminator.hpp"

#include <array>

#include "inclg/errors.hpp"

namespace inclg {

namespace {

struct LayerSpec {
  int in_scale;
  int out_scale;
  int stride;
};

// channel multipliers of the base width; the last layer emits one score channel
constexpr std::array<LayerSpec, 5> kLayers = {{{0, 1, 2}, {1, 2, 2}, {2, 4, 2}, {4, 8, 1}, {8, 0, 1}}};

}  // namespace

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int base_channels) {
  if (base_channels < 1) throw ConfigError("discriminator width must be positive");
  layers = register_module("layers", torch::nn::ModuleList());
  for (const auto& spec : kLayers) {
    const int in = spec.in_scale == 0 ? 3 : spec.in_scale * base_channels;
    const int out = spec.out_scale == 0 ? 1 : spec.out_scale * base_channels;
    layers->push_back(SpectralNormConv2d(in, out, 4, spec.stride, 1));
  }
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw ShapeError("discriminator expects [N, 3, H, W], got " + c10::str(image.sizes()));
  }
  if (output_size(image.size(2)) < 1 || output_size(image.size(3)) < 1) {
    throw ShapeError("discriminator input " + c10::str(image.sizes()) + " is too small");
  }
  auto x = image;
  for (std::size_t i = 0; i < layers->size(); ++i) {
    x = layers[i]->as<SpectralNormConv2d>()->forward(x);
    if (i + 1 < layers->size()) x = torch::leaky_relu(x, 0.2);
  }
  return x;
}

void PatchDiscriminatorImpl::update_spectral_estimates() {
  for (const auto& layer : *layers) layer->as<SpectralNormConv2d>()->update_estimate();
}

int64_t PatchDiscriminatorImpl::output_size(int64_t input_size) {
  // conv arithmetic with kernel 4, padding 1
  for (const auto& spec : kLayers) input_size = (input_size + 2 - 4) / spec.stride + 1;
  return input_size;
}

}  // namespace inclg
