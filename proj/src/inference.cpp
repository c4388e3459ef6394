#include "inclg/inference.hpp"

#include "inclg/logging.hpp"

#include <chrono>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "inclg/codec.hpp"
#include "inclg/errors.hpp"
#include "inclg/metrics.hpp"
#include "inclg/trainer.hpp"

namespace fs = std::filesystem;

namespace inclg {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string size_text(const cv::Mat& m) { return std::to_string(m.cols) + "x" + std::to_string(m.rows); }

LandmarkSet clamped_landmarks(const torch::Tensor& values) {
  auto set = LandmarkSet::from_tensor(values);
  for (auto& v : set.values) v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
  return set;
}

constexpr const char* kFullMaskWarning = "mask covers the whole image; attention has no known region to draw from";

}  // namespace

torch::Tensor image_to_tensor(const cv::Mat& rgb) {
  if (rgb.type() != CV_8UC3) throw ShapeError("expected an 8-bit RGB image");
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3, 1.0 / 255.0);
  return torch::from_blob(as_float.data, {rgb.rows, rgb.cols, 3}, torch::kFloat).permute({2, 0, 1}).clone();
}

cv::Mat tensor_to_image(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw ShapeError("expected a [3,H,W] image tensor");
  const auto bytes = (image.detach().to(torch::kFloat).clamp(0, 1) * 255.0f)
                         .round()
                         .to(torch::kUInt8)
                         .permute({1, 2, 0})
                         .contiguous();
  cv::Mat out(static_cast<int>(image.size(1)), static_cast<int>(image.size(2)), CV_8UC3);
  std::memcpy(out.data, bytes.data_ptr<std::uint8_t>(), bytes.numel());
  return out;
}

std::shared_ptr<InpaintingModel> InpaintingModel::load(const fs::path& checkpoint) {
  const auto info = read_checkpoint_info(checkpoint);
  auto generator = std::make_shared<MultiTaskGeneratorImpl>(info.config.model);
  load_generator_weights(checkpoint, *generator);
  return std::make_shared<InpaintingModel>(std::move(generator), info.config.model.image_size,
                                           sha256_file(checkpoint));
}

InpaintingModel::InpaintingModel(std::shared_ptr<GeneratorModule> generator, int image_size, std::string model_id)
    : generator_(std::move(generator)), image_size_(image_size), model_id_(std::move(model_id)) {
  if (!generator_) throw ConfigError("inpainting model needs a generator");
  generator_->eval();
  for (auto& p : generator_->parameters()) p.set_requires_grad(false);
}

InferenceResult InpaintingModel::infer(const torch::Tensor& image, const torch::Tensor& mask) const {
  const auto start = Clock::now();
  check_image_pair(image.unsqueeze(0), mask.unsqueeze(0), image_size_);
  InferenceResult result;
  result.model_id = model_id_;
  const auto binary = (mask > 0.5).to(image.scalar_type());
  const auto holes = binary.sum().item<double>();
  if (holes == 0.0) {
    result.image = image.clone();
    result.landmarks = LandmarkSet{};
    result.no_op = true;
    result.latency_ms = elapsed_ms(start);
    return result;
  }
  if (holes == static_cast<double>(binary.numel())) result.warnings.emplace_back(kFullMaskWarning);
  torch::NoGradGuard no_grad;
  const auto output = generator_->forward(image.unsqueeze(0), binary.unsqueeze(0));
  result.image = output.image[0];
  result.landmarks = clamped_landmarks(output.landmarks[0]);
  result.latency_ms = elapsed_ms(start);
  return result;
}

NativeResult InpaintingModel::infer_native(const cv::Mat& image, const cv::Mat& mask) const {
  const auto start = Clock::now();
  if (image.type() != CV_8UC3) throw ShapeError("image must be 8-bit RGB");
  if (mask.type() != CV_8UC1) throw ShapeError("mask must be 8-bit single channel");
  if (image.size() != mask.size()) {
    throw ShapeError("image is " + size_text(image) + " but mask is " + size_text(mask));
  }
  const cv::Mat hole = mask > 127;

  NativeResult result;
  result.model_id = model_id_;
  if (cv::countNonZero(hole) == 0) {
    result.image = image.clone();
    result.no_op = true;
    result.latency_ms = elapsed_ms(start);
    return result;
  }

  const cv::Size model_size(image_size_, image_size_);
  cv::Mat small_image = image, small_mask = hole;
  if (image.size() != model_size) {
    cv::resize(image, small_image, model_size, 0, 0, cv::INTER_LINEAR);
    cv::resize(hole, small_mask, model_size, 0, 0, cv::INTER_NEAREST);
  }
  cv::Mat mask_float;
  small_mask.convertTo(mask_float, CV_32F, 1.0 / 255.0);
  const auto mask_tensor =
      torch::from_blob(mask_float.data, {1, image_size_, image_size_}, torch::kFloat).clone();
  auto model_result = infer(image_to_tensor(small_image), mask_tensor);

  cv::Mat generated = tensor_to_image(model_result.image);
  if (generated.size() != image.size()) cv::resize(generated, generated, image.size(), 0, 0, cv::INTER_LINEAR);
  // composite at native resolution: only hole pixels come from the model
  result.image = image.clone();
  generated.copyTo(result.image, hole);

  result.landmarks = model_result.landmarks;
  result.no_op = model_result.no_op;
  result.warnings = std::move(model_result.warnings);
  result.latency_ms = elapsed_ms(start);
  return result;
}

BatchTestSummary batch_test(const Inpainter& model, const FileList& images, const FileList& masks,
                            const fs::path& out_dir, const BatchTestOptions& options) {
  if (images.size() != masks.size()) {
    throw ConfigError("test image list has " + std::to_string(images.size()) + " entries but mask list has " +
                      std::to_string(masks.size()));
  }
  if (options.landmarks && options.landmarks->size() != images.size()) {
    throw ConfigError("test landmark list does not match the image list");
  }
  fs::create_directories(out_dir);

  BatchTestSummary summary;
  double latency_sum = 0.0, psnr_sum = 0.0, landmark_sum = 0.0;
  std::set<std::string> used;
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      cv::Mat bgr = cv::imread(images[i].string(), cv::IMREAD_COLOR);
      cv::Mat mask = cv::imread(masks[i].string(), cv::IMREAD_GRAYSCALE);
      if (bgr.empty()) throw DataError("cannot decode image " + images[i].string());
      if (mask.empty()) throw DataError("cannot decode mask " + masks[i].string());
      cv::Mat rgb;
      cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
      if (mask.size() != rgb.size()) cv::resize(mask, mask, rgb.size(), 0, 0, cv::INTER_NEAREST);
      std::optional<LandmarkSet> truth;
      if (options.landmarks) truth = load_landmarks((*options.landmarks)[i]);

      const auto result = model.infer_native(rgb, mask);

      std::string stem = images[i].stem().string();
      if (!used.insert(stem).second) {
        stem += "_" + std::to_string(i);
        used.insert(stem);
      }
      cv::Mat out_bgr;
      cv::cvtColor(result.image, out_bgr, cv::COLOR_RGB2BGR);
      if (!cv::imwrite((out_dir / (stem + ".png")).string(), out_bgr)) {
        throw DataError("cannot write " + (out_dir / (stem + ".png")).string());
      }
      write_landmarks(out_dir / (stem + ".txt"), result.landmarks, rgb.cols, rgb.rows);

      latency_sum += result.latency_ms;
      if (options.score_against_input) {
        cv::Mat hole_float;
        cv::Mat(mask > 127).convertTo(hole_float, CV_32F, 1.0 / 255.0);
        const auto hole = torch::from_blob(hole_float.data, {1, rgb.rows, rgb.cols}, torch::kFloat).clone();
        psnr_sum += masked_psnr(image_to_tensor(result.image), image_to_tensor(rgb), hole);
      }
      if (truth) landmark_sum += landmark_error(result.landmarks.to_tensor(), truth->to_tensor());
      ++summary.written;
    } catch (const std::exception& e) {
      logging::error("skipping test record {}: {}", i, e.what());
      ++summary.skipped;
    }
  }
  if (summary.written > 0) {
    const auto n = static_cast<double>(summary.written);
    summary.mean_latency_ms = latency_sum / n;
    if (options.score_against_input) summary.mean_psnr = psnr_sum / n;
    if (options.landmarks) summary.mean_landmark_error = landmark_sum / n;
  }
  logging::info("batch test: {} written, {} skipped, mean latency {:.1f} ms", summary.written, summary.skipped,
               summary.mean_latency_ms);
  return summary;
}

}  // namespace inclg
