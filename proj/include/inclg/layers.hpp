#pragma once

#include <torch/torch.h>

namespace inclg {

struct GatedConvOptions {
  GatedConvOptions(int in, int out, int kernel) : in_channels(in), out_channels(out), kernel_size(kernel) {}

  int in_channels;
  int out_channels;
  int kernel_size;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  bool transposed = false;  // upsampling variant
  bool normalize = true;

  GatedConvOptions& with_stride(int s) { stride = s; return *this; }
  GatedConvOptions& with_padding(int p) { padding = p; return *this; }
  GatedConvOptions& with_dilation(int d) { dilation = d; return *this; }
  GatedConvOptions& as_transposed(bool t = true) { transposed = t; return *this; }
  GatedConvOptions& with_normalization(bool n) { normalize = n; return *this; }
};

/// Gated convolution block:
///   out = InstanceNorm(ReLU(feature(x))) * sigmoid(gate(x))
/// Both branches share kernel geometry; `transposed` swaps in a transposed
/// convolution for upsampling.
class GatedConv2dImpl : public torch::nn::Module {
 public:
  explicit GatedConv2dImpl(const GatedConvOptions& options);

  torch::Tensor forward(const torch::Tensor& input);
  /// Gate activations in (0, 1), same shape as the block output.
  torch::Tensor gate(const torch::Tensor& input);
  /// Pre-gate response of the feature branch.
  torch::Tensor features(const torch::Tensor& input);

  const GatedConvOptions& options() const { return options_; }

  torch::Tensor& feature_weight();
  torch::Tensor& feature_bias();
  torch::Tensor& gate_weight();
  torch::Tensor& gate_bias();

 private:
  void check_input(const torch::Tensor& input) const;
  torch::Tensor run(torch::nn::Conv2d& conv, torch::nn::ConvTranspose2d& deconv,
                    const torch::Tensor& input);

  GatedConvOptions options_;
  torch::nn::Conv2d feature_conv_{nullptr}, gate_conv_{nullptr};
  torch::nn::ConvTranspose2d feature_deconv_{nullptr}, gate_deconv_{nullptr};
};
TORCH_MODULE(GatedConv2d);

/// out = x + ReLU(InstanceNorm(dilated_conv3x3(x))). Zero weights give the identity.
class DilatedResidualBlockImpl : public torch::nn::Module {
 public:
  DilatedResidualBlockImpl(int channels, int dilation);

  torch::Tensor forward(const torch::Tensor& input);
  /// The residual branch alone.
  torch::Tensor residual(const torch::Tensor& input);

  torch::nn::Conv2d conv{nullptr};

 private:
  int channels_;
};
TORCH_MODULE(DilatedResidualBlock);

/// Downsamples a {0,1} hole mask [B,1,H,W] to `size`; a cell is a hole when any
/// of its source pixels is.
torch::Tensor downsample_mask(const torch::Tensor& mask, int size);

/// Single-head cosine-similarity attention from hole positions to known
/// positions. Every hole feature receives the softmax-weighted sum of known
/// features as a residual; known positions pass through unchanged. A sample
/// with no known position falls back to the identity and logs a warning.
class MaskedAttentionImpl : public torch::nn::Module {
 public:
  explicit MaskedAttentionImpl(double temperature = 1.0);

  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& mask);
  /// The attention term alone (zero at known positions).
  torch::Tensor attention_term(const torch::Tensor& features, const torch::Tensor& mask) const;

  double temperature() const { return temperature_; }

 private:
  double temperature_;
};
TORCH_MODULE(MaskedAttention);

/// Convolution whose weight is divided by a power-iteration estimate of its
/// largest singular value. The estimate vectors are buffers and only move when
/// `update_estimate()` is called.
class SpectralNormConv2dImpl : public torch::nn::Module {
 public:
  SpectralNormConv2dImpl(int in, int out, int kernel, int stride, int padding);

  torch::Tensor forward(const torch::Tensor& input);
  void update_estimate();
  torch::Tensor sigma() const;

  torch::Tensor weight, bias, u, v;

 private:
  int in_channels_;
  int stride_;
  int padding_;
};
TORCH_MODULE(SpectralNormConv2d);

}  // namespace inclg
