#include "inclg/feature_extractor.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include "inclg/logging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "inclg/errors.hpp"

namespace F = torch::nn::functional;

namespace inclg {

namespace {

struct VggStage {
  int channels;
  int convs;
};

constexpr VggStage kVgg19[] = {{64, 2}, {128, 2}, {256, 4}, {512, 4}, {512, 4}};

}  // namespace

const std::vector<std::string>& VggFeatureExtractor::known_layers() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    int stage = 1;
    for (const auto& s : kVgg19) {
      for (int k = 1; k <= s.convs; ++k) {
        out.push_back("relu" + std::to_string(stage) + "_" + std::to_string(k));
      }
      ++stage;
    }
    return out;
  }();
  return names;
}

VggFeatureExtractor::VggFeatureExtractor(std::vector<std::string> layers,
                                         const std::filesystem::path& weights, std::uint64_t seed)
    : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("feature extractor needs at least one layer");
  const auto& names = known_layers();
  for (const auto& layer : layers_) {
    const auto it = std::find(names.begin(), names.end(), layer);
    if (it == names.end()) throw ConfigError("unknown extractor layer '" + layer + "'");
    depth_ = std::max(depth_, static_cast<std::size_t>(it - names.begin()) + 1);
  }

  auto generator = at::detail::createCPUGenerator(seed);
  int in = 3;
  std::size_t index = 0;
  bool first_stage = true;
  for (const auto& stage : kVgg19) {
    for (int k = 0; k < stage.convs; ++k) {
      const double scale = std::sqrt(2.0 / (in * 9));
      Conv conv;
      conv.weight = torch::randn({stage.channels, in, 3, 3}, generator) * scale;
      conv.bias = torch::zeros({stage.channels});
      conv.pool_before = !first_stage && k == 0;
      conv.name = names[index++];
      convs_.push_back(std::move(conv));
      in = stage.channels;
    }
    first_stage = false;
  }
  mean_ = torch::tensor({0.485, 0.456, 0.406}).view({1, 3, 1, 1});
  std_ = torch::tensor({0.229, 0.224, 0.225}).view({1, 3, 1, 1});

  if (!weights.empty()) {
    load_weights(weights);
    pretrained_ = true;
  } else {
    logging::warn("no extractor weights configured; perceptual/style losses use a fixed seeded VGG19");
  }
}

void VggFeatureExtractor::load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read extractor weights " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  c10::impl::GenericDict dict(c10::StringType::get(), c10::TensorType::get());
  try {
    dict = torch::pickle_load(bytes).toGenericDict();
  } catch (const c10::Error& e) {
    throw ConfigError("extractor weights " + path.string() + " are not a tensor dict: " + e.what_without_backtrace());
  }
  // torchvision indices: every conv is followed by a ReLU, every stage by a pool
  int index = 0;
  std::size_t conv = 0;
  for (const auto& stage : kVgg19) {
    for (int k = 0; k < stage.convs; ++k, ++conv, index += 2) {
      const auto key = std::to_string(index);
      if (!dict.contains(key + ".weight") || !dict.contains(key + ".bias")) {
        if (conv < depth_) throw ConfigError("extractor weights lack layer " + key);
        continue;
      }
      auto weight = dict.at(key + ".weight").toTensor().to(torch::kFloat);
      auto bias = dict.at(key + ".bias").toTensor().to(torch::kFloat);
      if (weight.sizes() != convs_[conv].weight.sizes()) {
        throw ConfigError("extractor weight " + key + " has shape " + c10::str(weight.sizes()));
      }
      convs_[conv].weight = weight.contiguous();
      convs_[conv].bias = bias.contiguous();
    }
    ++index;  // pooling layer
  }
}

void VggFeatureExtractor::to(torch::Dtype dtype) {
  for (auto& conv : convs_) {
    conv.weight = conv.weight.to(dtype);
    conv.bias = conv.bias.to(dtype);
  }
  mean_ = mean_.to(dtype);
  std_ = std_.to(dtype);
}

std::vector<torch::Tensor> VggFeatureExtractor::extract(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw ShapeError("feature extractor expects [N, 3, H, W], got " + c10::str(images.sizes()));
  }
  std::vector<torch::Tensor> out;
  auto x = (images - mean_) / std_;
  for (std::size_t i = 0; i < depth_; ++i) {
    const auto& conv = convs_[i];
    if (conv.pool_before) x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2));
    x = torch::relu(F::conv2d(x, conv.weight, F::Conv2dFuncOptions().bias(conv.bias).padding(1)));
    if (std::find(layers_.begin(), layers_.end(), conv.name) != layers_.end()) out.push_back(x);
  }
  return out;
}

}  // namespace inclg
