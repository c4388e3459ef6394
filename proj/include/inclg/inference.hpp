#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "inclg/data.hpp"
#include "inclg/generator.hpp"

namespace inclg {

struct InferenceResult {
  torch::Tensor image;  // [3,S,S] composite, float in [0,1]
  LandmarkSet landmarks;
  double latency_ms = 0;
  std::string model_id;
  bool no_op = false;
  std::vector<std::string> warnings;
};

/// Result at the caller's resolution. `image` is 8-bit RGB with the same size
/// as the request; pixels where the mask is 0 are the request bytes.
struct NativeResult {
  cv::Mat image;
  LandmarkSet landmarks;  // normalised to [0,1]
  double latency_ms = 0;
  std::string model_id;
  bool no_op = false;
  std::vector<std::string> warnings;
};

/// Read-only inpainting backend shared by the batch tester and the HTTP service.
class Inpainter {
 public:
  virtual ~Inpainter() = default;
  /// image: 8-bit RGB, mask: 8-bit single channel (> 127 = hole), same size.
  /// Throws ShapeError naming both sizes when they differ.
  virtual NativeResult infer_native(const cv::Mat& image, const cv::Mat& mask) const = 0;
  virtual const std::string& model_id() const = 0;
  virtual int image_size() const = 0;
};

class InpaintingModel : public Inpainter {
 public:
  /// Rebuilds the generator from the checkpoint's config snapshot and loads
  /// its weights. The model id is the checkpoint file's SHA-256.
  static std::shared_ptr<InpaintingModel> load(const std::filesystem::path& checkpoint);

  InpaintingModel(std::shared_ptr<GeneratorModule> generator, int image_size, std::string model_id);

  /// image [3,S,S] in [0,1], mask [1,S,S] in {0,1}.
  InferenceResult infer(const torch::Tensor& image, const torch::Tensor& mask) const;
  NativeResult infer_native(const cv::Mat& image, const cv::Mat& mask) const override;

  const std::string& model_id() const override { return model_id_; }
  int image_size() const override { return image_size_; }

 private:
  std::shared_ptr<GeneratorModule> generator_;
  int image_size_;
  std::string model_id_;
};

/// 8-bit RGB <-> [3,H,W] float in [0,1].
torch::Tensor image_to_tensor(const cv::Mat& rgb);
cv::Mat tensor_to_image(const torch::Tensor& image);

struct BatchTestSummary {
  std::int64_t written = 0;
  std::int64_t skipped = 0;
  double mean_latency_ms = 0;
  std::optional<double> mean_psnr;            // hole PSNR against the input images
  std::optional<double> mean_landmark_error;  // when ground-truth landmarks are given
};

struct BatchTestOptions {
  bool score_against_input = true;
  std::optional<FileList> landmarks;
};

/// Pairs image i with mask i and writes `<stem>.png` plus `<stem>.txt`
/// (landmark file in the input image's pixel coordinates) into `out_dir`.
/// Unreadable records are logged and counted as skipped.
BatchTestSummary batch_test(const Inpainter& model, const FileList& images, const FileList& masks,
                            const std::filesystem::path& out_dir, const BatchTestOptions& options = {});

}  // namespace inclg
