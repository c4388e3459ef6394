#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include <opencv2/core.hpp>

#include "inclg/config.hpp"
#include "inclg/data.hpp"
#include "inclg/feature_extractor.hpp"
#include "inclg/generator.hpp"

namespace inclg::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Smooth face-like RGB image (8-bit): shaded background, skin ellipse,
/// eyes and a mouth. `variant` shifts colours and geometry slightly.
cv::Mat synthetic_face(int size, int variant);

/// Filled rectangle hole covering roughly `fraction` of a size x size mask (255 = hole).
cv::Mat rectangle_mask(int size, double fraction, int variant);

/// 68 points on the synthetic face layout, normalised.
LandmarkSet synthetic_landmarks(int variant);

void write_png(const fs::path& path, const cv::Mat& image);

struct Dataset {
  FileList images, landmarks, masks;
  fs::path image_list, landmark_list, mask_list;
};

/// Writes `n_images` faces with landmark files and `n_masks` masks at
/// `size` x `size`, plus one flist for each kind.
Dataset write_dataset(const fs::path& dir, int n_images, int n_masks, int size);

/// Reduced-scale training config pointing at `data` for train and validation.
TrainingConfig tiny_config(const Dataset& data, const fs::path& output_dir);

/// Passes images through unchanged as a single "layer".
class IdentityExtractor : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> extract(const torch::Tensor& images) const override { return {images}; }
  void to(torch::Dtype) override {}
};

/// raw = weight * image, landmarks = 0. One scalar parameter.
class ScaleGenerator : public GeneratorModule {
 public:
  explicit ScaleGenerator(double initial);
  GeneratorOutput forward(const torch::Tensor& image, const torch::Tensor& mask) override;
  torch::Tensor weight;
};

/// raw = constant gray (or the input itself when `copy`), fixed landmarks.
class FixedGenerator : public GeneratorModule {
 public:
  FixedGenerator(bool copy, double gray, torch::Tensor landmarks = {});
  GeneratorOutput forward(const torch::Tensor& image, const torch::Tensor& mask) override;

 private:
  bool copy_;
  double gray_;
  torch::Tensor landmarks_;
  torch::Tensor unused_;
};

/// Bit-exact tensor equality (same shape, same dtype, same bytes).
bool identical(const torch::Tensor& a, const torch::Tensor& b);

/// Deep copies of every parameter and buffer, keyed by name.
std::map<std::string, torch::Tensor> snapshot(const torch::nn::Module& module);
bool identical(const std::map<std::string, torch::Tensor>& a, const std::map<std::string, torch::Tensor>& b);

}  // namespace inclg::testing
