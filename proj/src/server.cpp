#include "inclg/server.hpp"

#include <httplib.h>
#include "inclg/logging.hpp"

#include <atomic>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "inclg/codec.hpp"
#include "inclg/errors.hpp"

namespace inclg {

using nlohmann::json;

namespace {

std::string correlation_id() {
  static thread_local std::mt19937_64 rng(std::random_device{}());
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << rng() << std::setw(16) << rng();
  return out.str();
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void client_error(httplib::Response& res, const std::string& reason, const std::string& message,
                  json extra = json::object()) {
  extra["error"] = message;
  extra["reason"] = reason;
  send_json(res, 400, extra);
}

class InFlight {
 public:
  InFlight(std::atomic<int>& counter, int limit) : counter_(counter) {
    admitted_ = counter_.fetch_add(1) < limit;
  }
  ~InFlight() { counter_.fetch_sub(1); }
  bool admitted() const { return admitted_; }

 private:
  std::atomic<int>& counter_;
  bool admitted_;
};

}  // namespace

struct InpaintServer::Impl {
  std::shared_ptr<const Inpainter> model;
  ServerOptions options;
  httplib::Server http;
  std::atomic<int> in_flight{0};
  int port = -1;
  std::thread worker;

  void handle_inpaint(const httplib::Request& req, httplib::Response& res) {
    InFlight slot(in_flight, options.max_in_flight);
    if (!slot.admitted()) {
      send_json(res, 429, {{"error", "too many requests in flight"}, {"reason", "busy"}});
      return;
    }
    if (!req.is_multipart_form_data()) {
      client_error(res, "not_multipart", "expected multipart/form-data with fields 'image' and 'mask'");
      return;
    }
    for (const char* field : {"image", "mask"}) {
      if (!req.has_file(field)) {
        client_error(res, "missing_field", std::string("missing form field '") + field + "'",
                     {{"field", field}});
        return;
      }
    }

    cv::Mat image, mask;
    try {
      image = decode_image(req.get_file_value("image").content, false);
    } catch (const DataError& e) {
      client_error(res, "undecodable_image", e.what(), {{"field", "image"}});
      return;
    }
    try {
      mask = decode_image(req.get_file_value("mask").content, true);
    } catch (const DataError& e) {
      client_error(res, "undecodable_mask", e.what(), {{"field", "mask"}});
      return;
    }
    if (image.size() != mask.size()) {
      const json image_size = {{"width", image.cols}, {"height", image.rows}};
      const json mask_size = {{"width", mask.cols}, {"height", mask.rows}};
      client_error(res, "size_mismatch",
                   "image is " + std::to_string(image.cols) + "x" + std::to_string(image.rows) +
                       " but mask is " + std::to_string(mask.cols) + "x" + std::to_string(mask.rows),
                   {{"image_size", image_size}, {"mask_size", mask_size}});
      return;
    }

    try {
      const auto result = model->infer_native(image, mask);
      json body = {{"image_b64", base64_encode(encode_png(result.image))},
                   {"landmarks", result.landmarks.values},
                   {"width", result.image.cols},
                   {"height", result.image.rows},
                   {"latency_ms", result.latency_ms},
                   {"no_op", result.no_op},
                   {"warnings", result.warnings},
                   {"checkpoint_hash", result.model_id}};
      send_json(res, 200, body);
    } catch (const std::exception& e) {
      const auto id = correlation_id();
      logging::error("inpaint request {} failed: {}", id, e.what());
      send_json(res, 500, {{"error", "inference failed"}, {"reason", "internal"}, {"correlation_id", id}});
    }
  }

  void install_routes() {
    http.set_payload_max_length(options.max_upload_bytes);
    const auto threads = static_cast<std::size_t>(std::max(1, options.worker_threads));
    http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"checkpoint_hash", model->model_id()}});
    });
    http.Get("/version", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200,
                {{"version", INCLG_VERSION}, {"checkpoint_hash", model->model_id()},
                 {"image_size", model->image_size()}});
    });
    http.Post("/inpaint",
              [this](const httplib::Request& req, httplib::Response& res) { handle_inpaint(req, res); });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      const auto id = correlation_id();
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        logging::error("request {} failed: {}", id, e.what());
      } catch (...) {
        logging::error("request {} failed", id);
      }
      send_json(res, 500, {{"error", "internal error"}, {"reason", "internal"}, {"correlation_id", id}});
    });
  }
};

InpaintServer::InpaintServer(std::shared_ptr<const Inpainter> model, ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  if (!model) throw ConfigError("server needs a model");
  impl_->model = std::move(model);
  impl_->options = std::move(options);
  impl_->install_routes();
}

InpaintServer::~InpaintServer() { stop(); }

int InpaintServer::bind() {
  const auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->http.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) {
    throw ConfigError("cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return impl_->port;
}

void InpaintServer::run() {
  logging::info("serving on {}:{} (model {})", impl_->options.host, impl_->port, impl_->model->model_id());
  impl_->http.listen_after_bind();
}

int InpaintServer::start() {
  const int port = bind();
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void InpaintServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int InpaintServer::port() const { return impl_->port; }

}  // namespace inclg
