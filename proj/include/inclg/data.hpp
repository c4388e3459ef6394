#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace inclg {

using FileList = std::vector<std::filesystem::path>;

inline constexpr int kLandmarkCount = 68;
inline constexpr int kLandmarkValues = 2 * kLandmarkCount;

/// 68 (x, y) points normalised to [0,1]: x0, y0, x1, y1, ...
struct LandmarkSet {
  std::array<float, kLandmarkValues> values{};

  torch::Tensor to_tensor() const;
  static LandmarkSet from_tensor(const torch::Tensor& values);
};

// ---- file lists -----------------------------------------------------------

/// Recursively collects files under `root` whose lower-cased extension is in
/// `extensions`, sorted lexicographically. An empty result logs a warning.
FileList build_flist(const std::filesystem::path& root,
                     const std::vector<std::string>& extensions = {".png", ".jpg", ".jpeg"});

/// One path per line, LF-terminated.
void write_flist(const std::filesystem::path& path, const FileList& files);

/// Relative entries resolve against the list file's directory. Missing files
/// and duplicates are errors.
FileList read_flist(const std::filesystem::path& path);

// ---- records ----------------------------------------------------------------

/// [3,size,size] RGB in [0,1]. Bilinear resize, skipped when the size already matches.
torch::Tensor load_image(const std::filesystem::path& path, int size = 256);

/// [1,size,size] in {0,1}, 1 = hole. Nearest-neighbour resize, threshold at 0.5.
torch::Tensor load_mask(const std::filesystem::path& path, int size = 256);

/// Mask at the file's own resolution, thresholded.
torch::Tensor load_mask_native(const std::filesystem::path& path);

/// Fraction of hole pixels.
double mask_ratio(const torch::Tensor& mask);

/// Line 1: "W H" (source size), line 2: 136 numbers in source pixel coordinates.
LandmarkSet load_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const LandmarkSet& landmarks, int width,
                     int height);

// ---- mask groups --------------------------------------------------------------

enum class MaskGroup { G1, G2, G3 };

/// [0,0.2) -> G1, [0.2,0.4) -> G2, [0.4,0.6] -> G3; 0 and > 0.6 are discarded.
std::optional<MaskGroup> assign_group(double ratio);
std::string group_label(MaskGroup group);

struct MaskSplit {
  FileList train;
  FileList val;
  std::array<FileList, 3> groups;  // every usable mask, per group
  FileList discarded;
};

using RatioFunction = std::function<double(const std::filesystem::path&)>;

/// Groups masks by ratio and draws, per group, a seeded sample of
/// n_train + n_val without replacement, split into disjoint train/val lists.
/// Ratios default to `mask_ratio(load_mask_native(path))`.
MaskSplit group_and_sample_masks(const FileList& masks, int n_train_per_group, int n_val_per_group,
                                 std::uint64_t seed, const RatioFunction& ratio = {});

// ---- batches ----------------------------------------------------------------

struct Batch {
  torch::Tensor images;     // [B,3,S,S]
  torch::Tensor masks;      // [B,1,S,S]
  torch::Tensor landmarks;  // [B,136]
  std::vector<std::int64_t> records;       // image/landmark record index per sample
  std::vector<std::int64_t> mask_records;  // mask index per sample

  std::int64_t size() const { return static_cast<std::int64_t>(records.size()); }
};

/// Seeded, epoch-aware batches. Batch `t` is a pure function of
/// (lists, batch size, seed, t): the record order is a per-epoch shuffle and
/// every sample draws its mask independently. Undecodable records are logged
/// and dropped from their batch.
class BatchIterator {
 public:
  BatchIterator(FileList images, FileList landmarks, FileList masks, int batch_size,
                std::uint64_t seed, int image_size = 256, bool cache = true);

  std::int64_t batches_per_epoch() const;
  std::int64_t records() const { return static_cast<std::int64_t>(images_.size()); }
  int batch_size() const { return batch_size_; }

  Batch batch(std::int64_t index);
  Batch next() { return batch(position_++); }
  void seek(std::int64_t index) { position_ = index; }
  std::int64_t position() const { return position_; }

 private:
  std::vector<std::int64_t> permutation(std::int64_t epoch) const;
  std::vector<std::int64_t> mask_draws(std::int64_t epoch) const;
  torch::Tensor image(std::int64_t index);
  torch::Tensor mask(std::int64_t index);
  torch::Tensor landmarks(std::int64_t index);

  FileList images_, landmarks_, masks_;
  int batch_size_;
  std::uint64_t seed_;
  int image_size_;
  bool cache_;
  std::int64_t position_ = 0;
  std::map<std::int64_t, torch::Tensor> image_cache_, mask_cache_, landmark_cache_;
};

/// Fixed validation records: image i is paired with mask i mod #masks.
struct ValidationSet {
  torch::Tensor images, masks, landmarks;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  static ValidationSet load(const FileList& images, const FileList& landmarks, const FileList& masks,
                            int image_size = 256);
};

}  // namespace inclg
