#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <future>
#include <thread>

#include <opencv2/imgproc.hpp>

#include "fixtures.hpp"
#include "inclg/codec.hpp"
#include "inclg/errors.hpp"
#include "inclg/server.hpp"

using namespace inclg;
namespace fx = inclg::testing;
using nlohmann::json;

namespace {

std::shared_ptr<const InpaintingModel> reduced_model() {
  torch::manual_seed(21);
  return std::make_shared<InpaintingModel>(std::make_shared<MultiTaskGeneratorImpl>(ModelConfig::reduced()),
                                           ModelConfig::reduced().image_size, "abc123");
}

class ThrowingInpainter : public Inpainter {
 public:
  NativeResult infer_native(const cv::Mat&, const cv::Mat&) const override {
    throw std::runtime_error("boom");
  }
  const std::string& model_id() const override { return id_; }
  int image_size() const override { return 32; }

 private:
  std::string id_ = "throwing";
};

// Blocks inside inference until released.
class GatedInpainter : public Inpainter {
 public:
  NativeResult infer_native(const cv::Mat& image, const cv::Mat&) const override {
    entered = true;
    for (int i = 0; i < 1000 && !released; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    NativeResult r;
    r.image = image.clone();
    return r;
  }
  const std::string& model_id() const override { return id_; }
  int image_size() const override { return 32; }

  mutable std::atomic<bool> entered{false}, released{false};

 private:
  std::string id_ = "gated";
};

httplib::MultipartFormDataItems form(const cv::Mat& image, const cv::Mat& mask) {
  return {{"image", encode_png(image), "image.png", "image/png"}, {"mask", encode_png(mask), "mask.png", "image/png"}};
}

struct Running {
  explicit Running(std::shared_ptr<const Inpainter> model, ServerOptions options = {})
      : server(std::move(model), [&] {
          options.port = 0;
          return options;
        }()) {
    port = server.start();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60);
    return c;
  }
  InpaintServer server;
  int port;
};

}  // namespace

TEST(Server, HealthAndVersion) {
  Running s(reduced_model());
  auto c = s.client();
  const auto health = c.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");
  const auto version = json::parse(c.Get("/version")->body);
  EXPECT_EQ(version["checkpoint_hash"], "abc123");
  EXPECT_EQ(version["image_size"], 32);
  EXPECT_FALSE(version["version"].get<std::string>().empty());
}

TEST(Server, InpaintRoundTripPreservesKnownPixels) {
  Running s(reduced_model());
  cv::Mat image = fx::synthetic_face(64, 4);
  cv::resize(image, image, cv::Size(48, 64));
  cv::Mat mask = cv::Mat::zeros(64, 48, CV_8UC1);
  mask(cv::Rect(10, 20, 20, 16)).setTo(255);

  const auto res = s.client().Post("/inpaint", form(image, mask));
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["width"], 48);
  EXPECT_EQ(body["height"], 64);
  EXPECT_EQ(body["landmarks"].size(), 136u);
  EXPECT_EQ(body["checkpoint_hash"], "abc123");
  EXPECT_FALSE(body["no_op"].get<bool>());
  const auto out = decode_image(base64_decode(body["image_b64"].get<std::string>()));
  ASSERT_EQ(out.size(), image.size());
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 48; ++x)
      if (!mask.at<uchar>(y, x)) ASSERT_EQ(out.at<cv::Vec3b>(y, x), image.at<cv::Vec3b>(y, x));
}

TEST(Server, SizeMismatchIs400WithBothSizes) {
  Running s(reduced_model());
  const auto res = s.client().Post("/inpaint", form(fx::synthetic_face(40, 0), cv::Mat::zeros(30, 20, CV_8UC1)));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["reason"], "size_mismatch");
  EXPECT_EQ(body["image_size"]["width"], 40);
  EXPECT_EQ(body["mask_size"]["width"], 20);
  EXPECT_EQ(body["mask_size"]["height"], 30);
}

TEST(Server, MalformedRequestsAre400) {
  Running s(reduced_model());
  auto c = s.client();
  const auto image = fx::synthetic_face(32, 0);

  httplib::MultipartFormDataItems only_image{{"image", encode_png(image), "i.png", "image/png"}};
  auto res = c.Post("/inpaint", only_image);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["reason"], "missing_field");
  EXPECT_EQ(json::parse(res->body)["field"], "mask");

  httplib::MultipartFormDataItems garbage{{"image", "not a png", "i.png", "image/png"},
                                          {"mask", encode_png(cv::Mat::zeros(32, 32, CV_8UC1)), "m.png", "image/png"}};
  res = c.Post("/inpaint", garbage);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["reason"], "undecodable_image");

  res = c.Post("/inpaint", "{}", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["reason"], "not_multipart");
}

TEST(Server, ModelFailureIs500WithCorrelationId) {
  Running s(std::make_shared<ThrowingInpainter>());
  const auto res = s.client().Post("/inpaint", form(fx::synthetic_face(32, 0), fx::rectangle_mask(32, 0.1, 0)));
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 500);
  const auto id = json::parse(res->body)["correlation_id"].get<std::string>();
  EXPECT_EQ(id.size(), 32u);
  EXPECT_EQ(res->body.find("boom"), std::string::npos);
}

TEST(Server, BusyServerAnswers429) {
  auto gated = std::make_shared<GatedInpainter>();
  ServerOptions options;
  options.max_in_flight = 1;
  Running s(gated, options);
  const auto image = fx::synthetic_face(32, 0);
  const auto mask = fx::rectangle_mask(32, 0.1, 0);

  auto first = std::async(std::launch::async, [&] { return s.client().Post("/inpaint", form(image, mask))->status; });
  for (int i = 0; i < 500 && !gated->entered; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  ASSERT_TRUE(gated->entered);
  const auto second = s.client().Post("/inpaint", form(image, mask));
  ASSERT_TRUE(second);
  EXPECT_EQ(second->status, 429);
  gated->released = true;
  EXPECT_EQ(first.get(), 200);
}

TEST(Server, ConcurrentRequestsMatchSerialResults) {
  ServerOptions options;
  options.max_in_flight = 4;
  Running s(reduced_model(), options);
  std::vector<std::pair<cv::Mat, cv::Mat>> inputs;
  for (int i = 0; i < 4; ++i) inputs.emplace_back(fx::synthetic_face(40, i), fx::rectangle_mask(40, 0.15, i));

  std::vector<std::string> serial;
  for (const auto& [image, mask] : inputs) serial.push_back(json::parse(s.client().Post("/inpaint", form(image, mask))->body)["image_b64"]);

  std::vector<std::future<std::string>> futures;
  for (const auto& [image, mask] : inputs) {
    futures.push_back(std::async(std::launch::async, [&, image = image, mask = mask] {
      const auto res = s.client().Post("/inpaint", form(image, mask));
      return res && res->status == 200 ? json::parse(res->body)["image_b64"].get<std::string>() : std::string();
    }));
  }
  for (std::size_t i = 0; i < futures.size(); ++i) EXPECT_EQ(futures[i].get(), serial[i]) << i;
}
