#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include <opencv2/imgproc.hpp>

#include "fixtures.hpp"
#include "inclg/config.hpp"
#include "inclg/data.hpp"
#include "inclg/errors.hpp"

using namespace inclg;
namespace fx = inclg::testing;
using inclg::testing::TempDir;
using inclg::testing::write_png;
namespace fs = std::filesystem;

namespace {

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << "x";
}

cv::Mat filled(int rows, int cols, int holes) {
  cv::Mat m = cv::Mat::zeros(rows, cols, CV_8UC1);
  for (int i = 0; i < holes; ++i) m.at<uchar>(i / cols, i % cols) = 255;
  return m;
}

}  // namespace

TEST(Flist, SortedAndFilteredByExtension) {
  TempDir dir;
  touch(dir / "b.png");
  touch(dir / "a.png");
  touch(dir / "notes.txt");
  touch(dir / "C.JPG");
  const auto files = build_flist(dir.path());
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "C.JPG");
  EXPECT_EQ(files[1].filename(), "a.png");
  EXPECT_EQ(files[2].filename(), "b.png");
}

TEST(Flist, EmptyDirectoryGivesEmptyList) {
  TempDir dir;
  EXPECT_TRUE(build_flist(dir.path()).empty());
  EXPECT_THROW(build_flist(dir / "missing"), DataError);
}

TEST(Flist, NestedDirectoriesMatchRecursiveWalk) {
  TempDir dir;
  for (const auto* name : {"x/1.png", "x/y/2.png", "z/3.jpeg", "4.png", "x/y/w/5.jpg", "x/6.bmp"}) {
    touch(dir / name);
  }
  FileList expected;
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) expected.push_back(e.path());
  }
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(expected.size(), 5u);
  EXPECT_EQ(build_flist(dir.path()), expected);
}

TEST(Flist, WriteReadRoundTripAndErrors) {
  TempDir dir;
  touch(dir / "a.png");
  touch(dir / "b.png");
  const FileList files{dir / "a.png", dir / "b.png"};
  write_flist(dir / "l.flist", files);
  EXPECT_EQ(read_flist(dir / "l.flist"), files);

  std::ofstream(dir / "rel.flist") << "a.png\r\n\nb.png\n";
  EXPECT_EQ(read_flist(dir / "rel.flist"), files);

  std::ofstream(dir / "dup.flist") << "a.png\n" << (dir / "a.png").string() << "\n";
  EXPECT_THROW(read_flist(dir / "dup.flist"), DataError);
  std::ofstream(dir / "gone.flist") << "nothing.png\n";
  EXPECT_THROW(read_flist(dir / "gone.flist"), DataError);
  EXPECT_THROW(read_flist(dir / "absent.flist"), DataError);
}

TEST(LoadImage, DownsamplesLargeInput) {
  TempDir dir;
  write_png(dir / "big.png", fx::synthetic_face(512, 0));
  const auto t = load_image(dir / "big.png");
  EXPECT_EQ(t.sizes(), (std::vector<int64_t>{3, 256, 256}));
  EXPECT_GE(t.min().item<double>(), 0.0);
  EXPECT_LE(t.max().item<double>(), 1.0);
}

TEST(LoadImage, NativeSizeIsUnchanged) {
  TempDir dir;
  const auto face = fx::synthetic_face(256, 1);
  write_png(dir / "face.png", face);
  const auto t = load_image(dir / "face.png");
  for (int y : {0, 17, 128, 255}) {
    for (int x : {0, 99, 200}) {
      const auto px = face.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(t[c][y][x].item<float>(), static_cast<float>(px[c] / 255.0));
    }
  }
}

TEST(LoadImage, UniformGrayAndUndecodable) {
  TempDir dir;
  write_png(dir / "gray.png", cv::Mat(256, 256, CV_8UC3, cv::Scalar(128, 128, 128)));
  const auto t = load_image(dir / "gray.png");
  EXPECT_NEAR(t.min().item<double>(), 0.50196, 1e-5);
  EXPECT_NEAR(t.max().item<double>(), 0.50196, 1e-5);
  std::ofstream(dir / "junk.png") << "not an image";
  EXPECT_THROW(load_image(dir / "junk.png"), DataError);
}

TEST(LoadMask, WhiteBlackAndHalf) {
  TempDir dir;
  write_png(dir / "white.png", cv::Mat(256, 256, CV_8UC1, cv::Scalar(255)));
  write_png(dir / "black.png", cv::Mat::zeros(256, 256, CV_8UC1));
  cv::Mat half = cv::Mat::zeros(512, 512, CV_8UC1);
  half(cv::Rect(0, 0, 256, 512)).setTo(255);
  write_png(dir / "half.png", half);
  EXPECT_EQ(mask_ratio(load_mask(dir / "white.png")), 1.0);
  EXPECT_EQ(mask_ratio(load_mask(dir / "black.png")), 0.0);
  const auto m = load_mask(dir / "half.png");
  EXPECT_EQ(m.sizes(), (std::vector<int64_t>{1, 256, 256}));
  EXPECT_NEAR(mask_ratio(m), 0.5, 0.01);
  EXPECT_TRUE(((m == 0) | (m == 1)).all().item<bool>());
}

TEST(MaskGroups, RatioJustBelowOneFifthIsFirstGroup) {
  auto m = torch::zeros({1, 256, 256});
  m.view({-1}).narrow(0, 0, 6553).fill_(1);
  EXPECT_EQ(assign_group(mask_ratio(m)), MaskGroup::G1);
}

TEST(MaskGroups, Boundaries) {
  EXPECT_EQ(assign_group(0.0), std::nullopt);
  EXPECT_EQ(assign_group(0.01), MaskGroup::G1);
  EXPECT_EQ(assign_group(0.2), MaskGroup::G2);
  EXPECT_EQ(assign_group(0.39999), MaskGroup::G2);
  EXPECT_EQ(assign_group(0.4), MaskGroup::G3);
  EXPECT_EQ(assign_group(0.6), MaskGroup::G3);
  EXPECT_EQ(assign_group(0.61), std::nullopt);
}

TEST(MaskGroups, NativeResolutionFilesLandInTheirGroups) {
  TempDir dir;
  const std::vector<std::pair<int, std::optional<MaskGroup>>> cases{
      {0, std::nullopt}, {19, MaskGroup::G1}, {20, MaskGroup::G2}, {40, MaskGroup::G3},
      {60, MaskGroup::G3}, {61, std::nullopt}};
  for (const auto& [holes, group] : cases) {
    const auto p = dir / ("m" + std::to_string(holes) + ".png");
    write_png(p, filled(10, 10, holes));
    EXPECT_EQ(assign_group(mask_ratio(load_mask_native(p))), group) << holes;
  }
}

namespace {

// 3 masks per group plus 2 discards, ratios looked up by file name
struct FakeMasks {
  FileList paths;
  std::map<std::string, double> ratio;

  FakeMasks() {
    const double ratios[] = {0.1, 0.15, 0.05, 0.3, 0.25, 0.35, 0.45, 0.5, 0.6, 0.0, 0.8};
    for (int i = 0; i < 11; ++i) {
      paths.emplace_back("m" + std::to_string(i) + ".png");
      ratio[paths.back().string()] = ratios[i];
    }
  }
  RatioFunction fn() const {
    return [this](const fs::path& p) { return ratio.at(p.string()); };
  }
};

}  // namespace

TEST(MaskSplit, SizesDisjointAndPerGroup) {
  FakeMasks masks;
  const auto split = group_and_sample_masks(masks.paths, 2, 1, 5, masks.fn());
  EXPECT_EQ(split.train.size(), 6u);
  EXPECT_EQ(split.val.size(), 3u);
  EXPECT_EQ(split.discarded.size(), 2u);
  std::set<fs::path> train(split.train.begin(), split.train.end());
  for (const auto& v : split.val) EXPECT_EQ(train.count(v), 0u);
  for (std::size_t g = 0; g < 3; ++g) {
    int in_train = 0, in_val = 0;
    for (const auto& p : split.groups[g]) {
      in_train += train.count(p);
      in_val += std::count(split.val.begin(), split.val.end(), p);
    }
    EXPECT_EQ(in_train, 2);
    EXPECT_EQ(in_val, 1);
  }
}

TEST(MaskSplit, DeterministicPerSeed) {
  FakeMasks masks;
  const auto a = group_and_sample_masks(masks.paths, 1, 1, 5, masks.fn());
  const auto b = group_and_sample_masks(masks.paths, 1, 1, 5, masks.fn());
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
}

TEST(MaskSplit, DefaultCountsFromLargeGroups) {
  FileList paths;
  std::map<std::string, double> ratio;
  for (int i = 0; i < 3 * 3600; ++i) {
    paths.emplace_back("m" + std::to_string(i));
    ratio[paths.back().string()] = 0.1 + 0.2 * (i % 3);
  }
  const auto split =
      group_and_sample_masks(paths, 3300, 200, 1, [&](const fs::path& p) { return ratio.at(p.string()); });
  EXPECT_EQ(split.train.size(), 9900u);
  EXPECT_EQ(split.val.size(), 600u);
}

TEST(MaskSplit, InsufficientGroupNamesGroupAndCounts) {
  FakeMasks masks;
  try {
    group_and_sample_masks(masks.paths, 3, 1, 5, masks.fn());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("G1"), std::string::npos);
    EXPECT_NE(what.find("has 3"), std::string::npos);
    EXPECT_NE(what.find("need 4"), std::string::npos);
  }
}

TEST(Landmarks, ZerosAndScaling) {
  TempDir dir;
  {
    std::ofstream out(dir / "zero.txt");
    out << "256 256\n";
    for (int i = 0; i < 136; ++i) out << "0 ";
  }
  const auto zero = load_landmarks(dir / "zero.txt").to_tensor();
  EXPECT_EQ(zero.numel(), 136);
  EXPECT_EQ(zero.abs().sum().item<double>(), 0.0);

  {
    std::ofstream out(dir / "point.txt");
    out << "512 512\n256 128";
    for (int i = 2; i < 136; ++i) out << " 0";
  }
  const auto p = load_landmarks(dir / "point.txt");
  EXPECT_FLOAT_EQ(p.values[0], 0.5f);
  EXPECT_FLOAT_EQ(p.values[1], 0.25f);
}

TEST(Landmarks, WrongCountNamesFile) {
  TempDir dir;
  {
    std::ofstream out(dir / "short.txt");
    out << "256 256\n";
    for (int i = 0; i < 135; ++i) out << "1 ";
  }
  try {
    load_landmarks(dir / "short.txt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("short.txt"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("135"), std::string::npos);
  }
}

TEST(Landmarks, WriteReadRoundTrip) {
  TempDir dir;
  const auto set = fx::synthetic_landmarks(3);
  write_landmarks(dir / "l.txt", set, 300, 200);
  const auto back = load_landmarks(dir / "l.txt");
  for (int i = 0; i < 136; ++i) EXPECT_NEAR(back.values[i], set.values[i], 1e-6);
}

class BatchTest : public ::testing::Test {
 protected:
  void SetUp() override { data = fx::write_dataset(dir.path(), 8, 3, 32); }
  TempDir dir;
  fx::Dataset data;
};

TEST_F(BatchTest, EpochLengthAndShapes) {
  BatchIterator it(data.images, data.landmarks, data.masks, 4, 1, 32);
  EXPECT_EQ(it.batches_per_epoch(), 2);
  const auto b = it.next();
  EXPECT_EQ(b.images.sizes(), (std::vector<int64_t>{4, 3, 32, 32}));
  EXPECT_EQ(b.masks.sizes(), (std::vector<int64_t>{4, 1, 32, 32}));
  EXPECT_EQ(b.landmarks.sizes(), (std::vector<int64_t>{4, 136}));
  EXPECT_EQ(TrainingConfig{}.batch_size, 4);
}

TEST_F(BatchTest, EpochVisitsEveryRecordOnce) {
  BatchIterator it(data.images, data.landmarks, data.masks, 3, 2, 32);
  std::multiset<int64_t> seen;
  for (int i = 0; i < it.batches_per_epoch(); ++i) {
    for (auto r : it.next().records) seen.insert(r);
  }
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_EQ(std::set<int64_t>(seen.begin(), seen.end()).size(), 8u);
}

TEST_F(BatchTest, SameSeedSameBatches) {
  BatchIterator a(data.images, data.landmarks, data.masks, 4, 9, 32);
  BatchIterator b(data.images, data.landmarks, data.masks, 4, 9, 32, false);
  for (int i = 0; i < 5; ++i) {
    const auto x = a.next(), y = b.next();
    EXPECT_EQ(x.records, y.records);
    EXPECT_EQ(x.mask_records, y.mask_records);
    EXPECT_TRUE(fx::identical(x.images, y.images));
    EXPECT_TRUE(fx::identical(x.masks, y.masks));
  }
}

TEST_F(BatchTest, ImagesStayPairedWithTheirLandmarks) {
  BatchIterator it(data.images, data.landmarks, data.masks, 4, 3, 32);
  for (int i = 0; i < 4; ++i) {
    const auto b = it.next();
    for (int64_t k = 0; k < b.size(); ++k) {
      const auto r = b.records[k];
      EXPECT_TRUE(torch::equal(b.landmarks[k], load_landmarks(data.landmarks[r]).to_tensor()));
      EXPECT_TRUE(torch::equal(b.images[k], load_image(data.images[r], 32)));
      EXPECT_TRUE(torch::equal(b.masks[k], load_mask(data.masks[b.mask_records[k]], 32)));
    }
  }
}

TEST_F(BatchTest, MisalignedListsAreRejected) {
  auto fewer = data.landmarks;
  fewer.pop_back();
  EXPECT_THROW(BatchIterator(data.images, fewer, data.masks, 4, 1, 32), DataError);
  EXPECT_THROW(BatchIterator(data.images, data.landmarks, {}, 4, 1, 32), DataError);
  EXPECT_THROW(BatchIterator(data.images, data.landmarks, data.masks, 0, 1, 32), ConfigError);
}

TEST_F(BatchTest, UndecodableRecordIsDropped) {
  std::ofstream(data.images[0], std::ios::trunc) << "broken";
  BatchIterator it(data.images, data.landmarks, data.masks, 8, 1, 32);
  const auto b = it.next();
  EXPECT_EQ(b.size(), 7);
  EXPECT_EQ(std::count(b.records.begin(), b.records.end(), 0), 0);
}

TEST_F(BatchTest, ValidationSetPairsMasksCyclically) {
  const auto v = ValidationSet::load(data.images, data.landmarks, data.masks, 32);
  EXPECT_EQ(v.size(), 8);
  EXPECT_TRUE(torch::equal(v.masks[4], load_mask(data.masks[1], 32)));
}
