#include "inclg/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include "inclg/logging.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "inclg/errors.hpp"

namespace fs = std::filesystem;

namespace inclg {

torch::Tensor LandmarkSet::to_tensor() const {
  return torch::from_blob(const_cast<float*>(values.data()), {kLandmarkValues}, torch::kFloat).clone();
}

LandmarkSet LandmarkSet::from_tensor(const torch::Tensor& values) {
  if (values.numel() != kLandmarkValues) {
    throw ShapeError("landmark set needs " + std::to_string(kLandmarkValues) + " values, got " +
                     std::to_string(values.numel()));
  }
  const auto flat = values.detach().to(torch::kCPU, torch::kFloat).contiguous().view({-1});
  LandmarkSet out;
  std::copy_n(flat.data_ptr<float>(), kLandmarkValues, out.values.begin());
  return out;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  // explicit Fisher-Yates so the order does not depend on the standard library
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

cv::Mat read_or_throw(const fs::path& path, int flags) {
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) throw DataError("cannot decode image " + path.string());
  return mat;
}

torch::Tensor mask_from_mat(const cv::Mat& gray) {
  cv::Mat binary;
  cv::threshold(gray, binary, 127.5, 1.0, cv::THRESH_BINARY);
  cv::Mat as_float;
  binary.convertTo(as_float, CV_32F);
  return torch::from_blob(as_float.data, {1, as_float.rows, as_float.cols}, torch::kFloat).clone();
}

}  // namespace

FileList build_flist(const fs::path& root, const std::vector<std::string>& extensions) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DataError("cannot read directory " + root.string());
  std::set<std::string> wanted;
  for (const auto& ext : extensions) wanted.insert(lower(ext));
  FileList files;
  for (fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
       it != end; it.increment(ec)) {
    if (ec) throw DataError("error while walking " + root.string() + ": " + ec.message());
    if (it->is_regular_file() && wanted.count(lower(it->path().extension().string()))) {
      files.push_back(it->path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) logging::warn("no matching files under {}", root.string());
  return files;
}

void write_flist(const fs::path& path, const FileList& files) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file list " + path.string());
  for (const auto& file : files) out << file.string() << '\n';
}

FileList read_flist(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file list " + path.string());
  FileList files;
  std::set<fs::path> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fs::path entry(line);
    if (entry.is_relative()) entry = path.parent_path() / entry;
    if (!fs::exists(entry)) throw DataError(path.string() + ": missing file " + entry.string());
    if (!seen.insert(entry.lexically_normal()).second) {
      throw DataError(path.string() + ": duplicate entry " + entry.string());
    }
    files.push_back(entry);
  }
  return files;
}

torch::Tensor load_image(const fs::path& path, int size) {
  cv::Mat bgr = read_or_throw(path, cv::IMREAD_COLOR);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (rgb.rows != size || rgb.cols != size) {
    cv::resize(rgb, rgb, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  }
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3, 1.0 / 255.0);
  return torch::from_blob(as_float.data, {size, size, 3}, torch::kFloat).permute({2, 0, 1}).clone();
}

torch::Tensor load_mask(const fs::path& path, int size) {
  cv::Mat gray = read_or_throw(path, cv::IMREAD_GRAYSCALE);
  if (gray.rows != size || gray.cols != size) {
    cv::resize(gray, gray, cv::Size(size, size), 0, 0, cv::INTER_NEAREST);
  }
  return mask_from_mat(gray);
}

torch::Tensor load_mask_native(const fs::path& path) {
  return mask_from_mat(read_or_throw(path, cv::IMREAD_GRAYSCALE));
}

double mask_ratio(const torch::Tensor& mask) {
  if (mask.numel() == 0) throw ShapeError("mask ratio of an empty mask");
  const auto holes = (mask > 0.5).sum().item<std::int64_t>();
  return static_cast<double>(holes) / static_cast<double>(mask.numel());
}

LandmarkSet load_landmarks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read landmark file " + path.string());
  double width = 0.0;
  double height = 0.0;
  if (!(in >> width >> height) || !(width > 0.0) || !(height > 0.0)) {
    throw DataError(path.string() + ": first line must hold the positive source size \"W H\"");
  }
  std::vector<double> values;
  double v = 0.0;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw DataError(path.string() + ": non-numeric landmark value");
  if (values.size() != kLandmarkValues) {
    throw DataError(path.string() + ": expected " + std::to_string(kLandmarkValues) +
                    " landmark values, found " + std::to_string(values.size()));
  }
  LandmarkSet out;
  for (int i = 0; i < kLandmarkValues; ++i) {
    if (!std::isfinite(values[i])) throw DataError(path.string() + ": non-finite landmark value");
    const double scale = (i % 2 == 0) ? width : height;
    out.values[i] = static_cast<float>(std::clamp(values[i] / scale, 0.0, 1.0));
  }
  return out;
}

void write_landmarks(const fs::path& path, const LandmarkSet& landmarks, int width, int height) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write landmark file " + path.string());
  out << width << ' ' << height << '\n' << std::setprecision(9);
  for (int i = 0; i < kLandmarkValues; ++i) {
    const double scale = (i % 2 == 0) ? width : height;
    out << (i ? " " : "") << static_cast<double>(landmarks.values[i]) * scale;
  }
  out << '\n';
}

std::optional<MaskGroup> assign_group(double ratio) {
  if (!(ratio > 0.0) || ratio > 0.6) return std::nullopt;
  if (ratio < 0.2) return MaskGroup::G1;
  if (ratio < 0.4) return MaskGroup::G2;
  return MaskGroup::G3;
}

std::string group_label(MaskGroup group) {
  switch (group) {
    case MaskGroup::G1: return "G1 [0, 0.2)";
    case MaskGroup::G2: return "G2 [0.2, 0.4)";
    case MaskGroup::G3: return "G3 [0.4, 0.6]";
  }
  return "?";
}

MaskSplit group_and_sample_masks(const FileList& masks, int n_train_per_group, int n_val_per_group,
                                 std::uint64_t seed, const RatioFunction& ratio) {
  if (n_train_per_group < 0 || n_val_per_group < 0) throw ConfigError("sample counts must be >= 0");
  const RatioFunction measure =
      ratio ? ratio : RatioFunction([](const fs::path& p) { return mask_ratio(load_mask_native(p)); });

  MaskSplit split;
  std::set<fs::path> seen;
  for (const auto& path : masks) {
    if (!seen.insert(path.lexically_normal()).second) {
      throw DataError("duplicate mask path " + path.string());
    }
    const auto group = assign_group(measure(path));
    if (group) {
      split.groups[static_cast<std::size_t>(*group)].push_back(path);
    } else {
      split.discarded.push_back(path);
    }
  }

  const auto needed = static_cast<std::size_t>(n_train_per_group + n_val_per_group);
  for (std::size_t g = 0; g < split.groups.size(); ++g) {
    auto members = split.groups[g];
    if (members.size() < needed) {
      throw DataError("mask group " + group_label(static_cast<MaskGroup>(g)) + " has " +
                      std::to_string(members.size()) + " masks, need " + std::to_string(needed) +
                      " (" + std::to_string(n_train_per_group) + " train + " +
                      std::to_string(n_val_per_group) + " val)");
    }
    auto rng = make_rng(seed, g, 0x6d61736bULL);
    seeded_shuffle(members, rng);
    split.train.insert(split.train.end(), members.begin(), members.begin() + n_train_per_group);
    split.val.insert(split.val.end(), members.begin() + n_train_per_group,
                     members.begin() + static_cast<std::ptrdiff_t>(needed));
  }
  return split;
}

BatchIterator::BatchIterator(FileList images, FileList landmarks, FileList masks, int batch_size,
                             std::uint64_t seed, int image_size, bool cache)
    : images_(std::move(images)),
      landmarks_(std::move(landmarks)),
      masks_(std::move(masks)),
      batch_size_(batch_size),
      seed_(seed),
      image_size_(image_size),
      cache_(cache) {
  if (images_.size() != landmarks_.size()) {
    throw DataError("image list has " + std::to_string(images_.size()) + " records but landmark list has " +
                    std::to_string(landmarks_.size()));
  }
  if (images_.empty()) throw DataError("image list is empty");
  if (masks_.empty()) throw DataError("mask list is empty");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

std::int64_t BatchIterator::batches_per_epoch() const {
  const auto n = records();
  return (n + batch_size_ - 1) / batch_size_;
}

std::vector<std::int64_t> BatchIterator::permutation(std::int64_t epoch) const {
  std::vector<std::int64_t> order(images_.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed_, static_cast<std::uint64_t>(epoch), 0x6f72646572ULL);
  seeded_shuffle(order, rng);
  return order;
}

std::vector<std::int64_t> BatchIterator::mask_draws(std::int64_t epoch) const {
  std::vector<std::int64_t> draws(images_.size());
  auto rng = make_rng(seed_, static_cast<std::uint64_t>(epoch), 0x6d61736bULL);
  for (auto& d : draws) d = static_cast<std::int64_t>(rng() % masks_.size());
  return draws;
}

torch::Tensor BatchIterator::image(std::int64_t index) {
  if (auto it = image_cache_.find(index); it != image_cache_.end()) return it->second;
  auto t = load_image(images_[index], image_size_);
  if (cache_) image_cache_.emplace(index, t);
  return t;
}

torch::Tensor BatchIterator::mask(std::int64_t index) {
  if (auto it = mask_cache_.find(index); it != mask_cache_.end()) return it->second;
  auto t = load_mask(masks_[index], image_size_);
  if (cache_) mask_cache_.emplace(index, t);
  return t;
}

torch::Tensor BatchIterator::landmarks(std::int64_t index) {
  if (auto it = landmark_cache_.find(index); it != landmark_cache_.end()) return it->second;
  auto t = load_landmarks(landmarks_[index]).to_tensor();
  if (cache_) landmark_cache_.emplace(index, t);
  return t;
}

Batch BatchIterator::batch(std::int64_t index) {
  if (index < 0) throw ConfigError("negative batch index");
  const auto per_epoch = batches_per_epoch();
  const auto epoch = index / per_epoch;
  const auto first = (index % per_epoch) * batch_size_;
  const auto order = permutation(epoch);
  const auto draws = mask_draws(epoch);
  const auto last = std::min<std::int64_t>(first + batch_size_, records());

  Batch batch;
  std::vector<torch::Tensor> image_rows, mask_rows, landmark_rows;
  for (auto slot = first; slot < last; ++slot) {
    const auto record = order[slot];
    const auto mask_record = draws[slot];
    try {
      auto img = image(record);
      auto lmk = landmarks(record);
      auto msk = mask(mask_record);
      image_rows.push_back(img);
      landmark_rows.push_back(lmk);
      mask_rows.push_back(msk);
    } catch (const DataError& e) {
      logging::error("skipping record {}: {}", record, e.what());
      continue;
    }
    batch.records.push_back(record);
    batch.mask_records.push_back(mask_record);
  }
  if (image_rows.empty()) throw DataError("batch " + std::to_string(index) + " has no readable records");
  batch.images = torch::stack(image_rows);
  batch.masks = torch::stack(mask_rows);
  batch.landmarks = torch::stack(landmark_rows);
  return batch;
}

ValidationSet ValidationSet::load(const FileList& images, const FileList& landmarks, const FileList& masks,
                                  int image_size) {
  if (images.size() != landmarks.size()) {
    throw DataError("validation image and landmark lists differ in length");
  }
  if (images.empty()) throw DataError("validation set is empty");
  if (masks.empty()) throw DataError("validation mask list is empty");
  std::vector<torch::Tensor> imgs, msks, lmks;
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      auto img = load_image(images[i], image_size);
      auto lmk = load_landmarks(landmarks[i]).to_tensor();
      auto msk = load_mask(masks[i % masks.size()], image_size);
      imgs.push_back(img);
      lmks.push_back(lmk);
      msks.push_back(msk);
    } catch (const DataError& e) {
      logging::error("skipping validation record {}: {}", i, e.what());
    }
  }
  if (imgs.empty()) throw DataError("validation set has no readable records");
  return {torch::stack(imgs), torch::stack(msks), torch::stack(lmks)};
}

}  // namespace inclg
