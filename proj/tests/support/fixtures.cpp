#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace inclg::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("inclg-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

// Face layout in normalised coordinates, shared by the image and its landmarks.
struct Layout {
  double cx, cy, rx, ry;
};

Layout layout(int variant) {
  return {0.5 + 0.02 * ((variant % 3) - 1), 0.52 + 0.015 * ((variant % 2) ? 1 : -1),
          0.30 + 0.01 * (variant % 4), 0.38 - 0.01 * (variant % 3)};
}

}  // namespace

cv::Mat synthetic_face(int size, int variant) {
  const auto l = layout(variant);
  cv::Mat img(size, size, CV_8UC3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = double(x) / size, v = double(y) / size;
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(60 + 80 * v + 10 * (variant % 5)),
                                          static_cast<uchar>(90 + 60 * u),
                                          static_cast<uchar>(140 - 40 * v + 7 * (variant % 3)));
    }
  }
  const auto px = [&](double t) { return static_cast<int>(std::lround(t * size)); };
  const cv::Scalar skin(220 - 6 * (variant % 4), 180 - 5 * (variant % 3), 150 + 4 * (variant % 5));
  cv::ellipse(img, {px(l.cx), px(l.cy)}, {px(l.rx), px(l.ry)}, 0, 0, 360, skin, cv::FILLED, cv::LINE_AA);
  const cv::Scalar eye(40, 30, 30);
  cv::circle(img, {px(l.cx - 0.12), px(l.cy - 0.1)}, std::max(1, px(0.035)), eye, cv::FILLED, cv::LINE_AA);
  cv::circle(img, {px(l.cx + 0.12), px(l.cy - 0.1)}, std::max(1, px(0.035)), eye, cv::FILLED, cv::LINE_AA);
  cv::ellipse(img, {px(l.cx), px(l.cy + 0.17)}, {px(0.1), std::max(1, px(0.035))}, 0, 0, 360,
              cv::Scalar(170, 60, 70), cv::FILLED, cv::LINE_AA);
  cv::GaussianBlur(img, img, cv::Size(3, 3), 0.8);
  return img;
}

cv::Mat rectangle_mask(int size, double fraction, int variant) {
  cv::Mat mask = cv::Mat::zeros(size, size, CV_8UC1);
  const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(fraction) * size)));
  const int x0 = std::clamp(size / 2 - side / 2 + (variant % 3 - 1) * size / 16, 0, size - side);
  const int y0 = std::clamp(size / 2 + size / 8 - side / 2 + (variant % 2) * size / 16, 0, size - side);
  mask(cv::Rect(x0, y0, side, side)).setTo(255);
  return mask;
}

LandmarkSet synthetic_landmarks(int variant) {
  const auto l = layout(variant);
  LandmarkSet set;
  int k = 0;
  const auto put = [&](double x, double y) {
    set.values[2 * k] = static_cast<float>(std::clamp(x, 0.0, 1.0));
    set.values[2 * k + 1] = static_cast<float>(std::clamp(y, 0.0, 1.0));
    ++k;
  };
  const double pi = std::acos(-1.0);
  for (int i = 0; i < 17; ++i) {  // jaw
    const double a = pi * (0.05 + 0.9 * i / 16.0);
    put(l.cx - l.rx * std::cos(a), l.cy + l.ry * std::sin(a) * 0.9);
  }
  for (int i = 0; i < 10; ++i) put(l.cx - 0.2 + 0.044 * i + (i >= 5 ? 0.02 : 0.0), l.cy - 0.17);  // brows
  for (int i = 0; i < 9; ++i) put(l.cx - 0.04 + (i < 4 ? 0.04 : 0.01 * (i - 4)), l.cy - 0.08 + 0.025 * std::min(i, 4));
  for (int side = -1; side <= 1; side += 2) {  // eyes
    for (int i = 0; i < 6; ++i) {
      const double a = 2 * pi * i / 6;
      put(l.cx + side * 0.12 + 0.035 * std::cos(a), l.cy - 0.1 + 0.02 * std::sin(a));
    }
  }
  for (int i = 0; i < 20; ++i) {  // mouth
    const double a = 2 * pi * i / 20;
    const double r = i < 12 ? 1.0 : 0.6;
    put(l.cx + 0.1 * r * std::cos(a), l.cy + 0.17 + 0.035 * r * std::sin(a));
  }
  return set;
}

void write_png(const fs::path& path, const cv::Mat& image) {
  fs::create_directories(path.parent_path());
  cv::Mat out;
  if (image.channels() == 3) {
    cv::cvtColor(image, out, cv::COLOR_RGB2BGR);
  } else {
    out = image;
  }
  if (!cv::imwrite(path.string(), out)) throw std::runtime_error("cannot write " + path.string());
}

Dataset write_dataset(const fs::path& dir, int n_images, int n_masks, int size) {
  Dataset data;
  for (int i = 0; i < n_images; ++i) {
    const auto stem = "face_" + std::to_string(i);
    const auto image_path = dir / "images" / (stem + ".png");
    write_png(image_path, synthetic_face(size, i));
    const auto landmark_path = dir / "landmarks" / (stem + ".txt");
    fs::create_directories(landmark_path.parent_path());
    write_landmarks(landmark_path, synthetic_landmarks(i), size, size);
    data.images.push_back(image_path);
    data.landmarks.push_back(landmark_path);
  }
  for (int i = 0; i < n_masks; ++i) {
    const auto mask_path = dir / "masks" / ("mask_" + std::to_string(i) + ".png");
    write_png(mask_path, rectangle_mask(size, 0.08 + 0.04 * (i % 4), i));
    data.masks.push_back(mask_path);
  }
  data.image_list = dir / "images.flist";
  data.landmark_list = dir / "landmarks.flist";
  data.mask_list = dir / "masks.flist";
  write_flist(data.image_list, data.images);
  write_flist(data.landmark_list, data.landmarks);
  write_flist(data.mask_list, data.masks);
  return data;
}

TrainingConfig tiny_config(const Dataset& data, const fs::path& output_dir) {
  auto config = parse_config("reduced: true\n");
  config.batch_size = 2;
  config.max_iterations = 4;
  config.checkpoint_interval = 0;
  config.seed = 7;
  config.train_images = config.val_images = config.test_images = data.image_list;
  config.train_landmarks = config.val_landmarks = config.test_landmarks = data.landmark_list;
  config.train_masks = config.val_masks = config.test_masks = data.mask_list;
  config.output_dir = output_dir;
  return config;
}

ScaleGenerator::ScaleGenerator(double initial) {
  weight = register_parameter("weight", torch::full({1}, initial));
}

GeneratorOutput ScaleGenerator::forward(const torch::Tensor& image, const torch::Tensor& mask) {
  GeneratorOutput out;
  out.raw = weight * image;
  out.image = composite(out.raw, image, mask);
  out.landmarks = torch::zeros({image.size(0), kLandmarkValues}, image.options());
  return out;
}

FixedGenerator::FixedGenerator(bool copy, double gray, torch::Tensor landmarks)
    : copy_(copy), gray_(gray), landmarks_(std::move(landmarks)) {
  unused_ = register_parameter("unused", torch::zeros({1}));
  if (!landmarks_.defined()) landmarks_ = synthetic_landmarks(0).to_tensor();
}

GeneratorOutput FixedGenerator::forward(const torch::Tensor& image, const torch::Tensor& mask) {
  GeneratorOutput out;
  out.raw = copy_ ? image.clone() : torch::full_like(image, gray_);
  out.image = composite(out.raw, image, mask);
  out.landmarks = landmarks_.to(image.scalar_type()).reshape({1, -1}).expand({image.size(0), -1}).clone();
  return out;
}

bool identical(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes() || a.scalar_type() != b.scalar_type()) return false;
  const auto ca = a.detach().contiguous(), cb = b.detach().contiguous();
  return std::memcmp(ca.data_ptr(), cb.data_ptr(), ca.numel() * ca.element_size()) == 0;
}

std::map<std::string, torch::Tensor> snapshot(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : module.named_parameters()) out.emplace(p.key(), p.value().detach().clone());
  for (const auto& b : module.named_buffers()) out.emplace(b.key(), b.value().detach().clone());
  return out;
}

bool identical(const std::map<std::string, torch::Tensor>& a, const std::map<std::string, torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, tensor] : a) {
    const auto it = b.find(name);
    if (it == b.end() || !identical(tensor, it->second)) return false;
  }
  return true;
}

}  // namespace inclg::testing
