#include "inclg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "inclg/errors.hpp"

namespace inclg {

double masked_psnr(const torch::Tensor& output, const torch::Tensor& target, const torch::Tensor& mask) {
  if (output.sizes() != target.sizes() || output.dim() != 3) {
    throw ShapeError("masked PSNR expects matching [C, H, W] images");
  }
  const auto hole = (mask > 0.5).expand_as(output);
  const auto count = hole.sum().item<std::int64_t>();
  if (count == 0) return kMaxPsnr;
  const auto diff = (output.to(torch::kDouble) - target.to(torch::kDouble)).masked_select(hole);
  const double mse = diff.pow(2).mean().item<double>();
  if (mse <= 0.0) return kMaxPsnr;
  return std::min(kMaxPsnr, -10.0 * std::log10(mse));
}

double landmark_error(const torch::Tensor& predicted, const torch::Tensor& target) {
  if (predicted.numel() != target.numel() || predicted.numel() % 2 != 0 || predicted.numel() == 0) {
    throw ShapeError("landmark error needs matching point sets");
  }
  const auto a = predicted.detach().to(torch::kDouble).reshape({-1, 2});
  const auto b = target.detach().to(torch::kDouble).reshape({-1, 2});
  return (a - b).pow(2).sum(1).sqrt().mean().item<double>();
}

}  // namespace inclg
