#include "inclg/layers.hpp"

#include "inclg/logging.hpp"

#include "inclg/errors.hpp"

namespace F = torch::nn::functional;

namespace inclg {

GatedConv2dImpl::GatedConv2dImpl(const GatedConvOptions& options) : options_(options) {
  if (options.in_channels < 1 || options.out_channels < 1 || options.kernel_size < 1 ||
      options.stride < 1 || options.dilation < 1 || options.padding < 0) {
    throw ConfigError("invalid gated convolution geometry");
  }
  if (options.transposed) {
    auto make = [&] {
      return torch::nn::ConvTranspose2d(
          torch::nn::ConvTranspose2dOptions(options.in_channels, options.out_channels,
                                            options.kernel_size)
              .stride(options.stride)
              .padding(options.padding)
              .dilation(options.dilation));
    };
    feature_deconv_ = register_module("feature", make());
    gate_deconv_ = register_module("gate", make());
  } else {
    auto make = [&] {
      return torch::nn::Conv2d(
          torch::nn::Conv2dOptions(options.in_channels, options.out_channels, options.kernel_size)
              .stride(options.stride)
              .padding(options.padding)
              .dilation(options.dilation));
    };
    feature_conv_ = register_module("feature", make());
    gate_conv_ = register_module("gate", make());
  }
}

void GatedConv2dImpl::check_input(const torch::Tensor& input) const {
  if (input.dim() != 4 || input.size(1) != options_.in_channels) {
    throw ConfigError("gated convolution expects [N, " + std::to_string(options_.in_channels) +
                      ", H, W] input, got " + c10::str(input.sizes()));
  }
  const auto extent = options_.dilation * (options_.kernel_size - 1) + 1;
  if (!options_.transposed &&
      (input.size(2) + 2 * options_.padding < extent || input.size(3) + 2 * options_.padding < extent)) {
    throw ShapeError("input " + c10::str(input.sizes()) + " is smaller than the kernel footprint");
  }
}

torch::Tensor GatedConv2dImpl::run(torch::nn::Conv2d& conv, torch::nn::ConvTranspose2d& deconv,
                                   const torch::Tensor& input) {
  return options_.transposed ? deconv->forward(input) : conv->forward(input);
}

torch::Tensor GatedConv2dImpl::features(const torch::Tensor& input) {
  check_input(input);
  return run(feature_conv_, feature_deconv_, input);
}

torch::Tensor GatedConv2dImpl::gate(const torch::Tensor& input) {
  check_input(input);
  return torch::sigmoid(run(gate_conv_, gate_deconv_, input));
}

torch::Tensor GatedConv2dImpl::forward(const torch::Tensor& input) {
  auto activated = torch::relu(features(input));
  if (options_.normalize) activated = F::instance_norm(activated);
  return activated * gate(input);
}

torch::Tensor& GatedConv2dImpl::feature_weight() {
  return options_.transposed ? feature_deconv_->weight : feature_conv_->weight;
}
torch::Tensor& GatedConv2dImpl::feature_bias() {
  return options_.transposed ? feature_deconv_->bias : feature_conv_->bias;
}
torch::Tensor& GatedConv2dImpl::gate_weight() {
  return options_.transposed ? gate_deconv_->weight : gate_conv_->weight;
}
torch::Tensor& GatedConv2dImpl::gate_bias() {
  return options_.transposed ? gate_deconv_->bias : gate_conv_->bias;
}

DilatedResidualBlockImpl::DilatedResidualBlockImpl(int channels, int dilation) : channels_(channels) {
  conv = register_module(
      "conv", torch::nn::Conv2d(
                  torch::nn::Conv2dOptions(channels, channels, 3).padding(dilation).dilation(dilation)));
}

torch::Tensor DilatedResidualBlockImpl::residual(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != channels_) {
    throw ShapeError("residual block expects " + std::to_string(channels_) + " channels, got " +
                     c10::str(input.sizes()));
  }
  return torch::relu(F::instance_norm(conv->forward(input)));
}

torch::Tensor DilatedResidualBlockImpl::forward(const torch::Tensor& input) {
  return input + residual(input);
}

torch::Tensor downsample_mask(const torch::Tensor& mask, int size) {
  if (mask.dim() != 4 || mask.size(1) != 1) {
    throw ShapeError("mask must be [N, 1, H, W], got " + c10::str(mask.sizes()));
  }
  if (mask.size(2) == size && mask.size(3) == size) return mask;
  return F::adaptive_max_pool2d(mask, F::AdaptiveMaxPool2dFuncOptions({size, size}));
}

MaskedAttentionImpl::MaskedAttentionImpl(double temperature) : temperature_(temperature) {
  if (!(temperature > 0.0)) throw ConfigError("attention temperature must be > 0");
}

torch::Tensor MaskedAttentionImpl::attention_term(const torch::Tensor& features,
                                                  const torch::Tensor& mask) const {
  if (features.dim() != 4) throw ShapeError("attention expects [N, C, H, W] features");
  if (mask.dim() != 4 || mask.size(0) != features.size(0) || mask.size(1) != 1 ||
      mask.size(2) != features.size(2) || mask.size(3) != features.size(3)) {
    throw ShapeError("attention mask " + c10::str(mask.sizes()) + " does not match features " +
                     c10::str(features.sizes()));
  }
  const auto channels = features.size(1);
  const auto positions = features.size(2) * features.size(3);
  std::vector<torch::Tensor> terms;
  terms.reserve(static_cast<std::size_t>(features.size(0)));
  for (int64_t b = 0; b < features.size(0); ++b) {
    const auto flat = features[b].reshape({channels, positions});
    const auto hole = mask[b].reshape({positions}) > 0.5;
    const auto queries = torch::nonzero(hole).squeeze(1);
    const auto keys = torch::nonzero(hole.logical_not()).squeeze(1);
    auto term = torch::zeros_like(flat);
    if (queries.numel() > 0 && keys.numel() == 0) {
      logging::warn("attention: every position is masked, falling back to identity");
    } else if (queries.numel() > 0) {
      const auto values = flat.index_select(1, keys);
      const auto q = F::normalize(flat.index_select(1, queries), F::NormalizeFuncOptions().dim(0));
      const auto k = F::normalize(values, F::NormalizeFuncOptions().dim(0));
      const auto weights = torch::softmax(q.t().matmul(k) / temperature_, 1);  // [Q, K]
      term = term.index_copy(1, queries, values.matmul(weights.t()));
    }
    terms.push_back(term.reshape_as(features[b]));
  }
  return torch::stack(terms);
}

torch::Tensor MaskedAttentionImpl::forward(const torch::Tensor& features, const torch::Tensor& mask) {
  return features + attention_term(features, mask);
}

SpectralNormConv2dImpl::SpectralNormConv2dImpl(int in, int out, int kernel, int stride, int padding)
    : in_channels_(in), stride_(stride), padding_(padding) {
  torch::nn::Conv2d init(torch::nn::Conv2dOptions(in, out, kernel));
  weight = register_parameter("weight", init->weight.detach().clone());
  bias = register_parameter("bias", init->bias.detach().clone());
  u = register_buffer("u", F::normalize(torch::randn({out}), F::NormalizeFuncOptions().dim(0)));
  v = register_buffer("v", F::normalize(torch::randn({in * kernel * kernel}),
                                        F::NormalizeFuncOptions().dim(0)));
  // one iteration makes sigma = |W v| > 0 before the first forward
  update_estimate();
}

torch::Tensor SpectralNormConv2dImpl::sigma() const {
  const auto matrix = weight.reshape({weight.size(0), -1});
  return torch::dot(u, matrix.mv(v));
}

void SpectralNormConv2dImpl::update_estimate() {
  torch::NoGradGuard no_grad;
  const auto matrix = weight.reshape({weight.size(0), -1});
  const auto opts = F::NormalizeFuncOptions().dim(0).eps(1e-12);
  v.copy_(F::normalize(matrix.t().mv(u), opts));
  u.copy_(F::normalize(matrix.mv(v), opts));
}

torch::Tensor SpectralNormConv2dImpl::forward(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != in_channels_) {
    throw ShapeError("discriminator layer expects " + std::to_string(in_channels_) +
                     " channels, got " + c10::str(input.sizes()));
  }
  return F::conv2d(input, weight / sigma(),
                   F::Conv2dFuncOptions().bias(bias).stride(stride_).padding(padding_));
}

}  // namespace inclg
