#pragma once

#include <memory>
#include <string>

#include "inclg/inference.hpp"

namespace inclg {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;           // 0 picks a free port
  int max_in_flight = 2;     // further /inpaint requests get 429
  std::size_t max_upload_bytes = 32u << 20;
  int worker_threads = 4;
};

/// HTTP front end over a shared, read-only Inpainter.
///
///   GET  /health   -> {"status": "ok", "checkpoint_hash": ...}
///   GET  /version  -> {"version", "checkpoint_hash", "image_size"}
///   POST /inpaint  multipart fields `image` (PNG/JPEG) and `mask` (PNG, white = hole)
///                  -> {"image_b64", "landmarks"[136], "width", "height", "latency_ms",
///                      "no_op", "warnings", "checkpoint_hash"}
///
/// Client errors are 400 with {"error", "reason"}; model failures are 500
/// with a "correlation_id" that is also logged.
class InpaintServer {
 public:
  InpaintServer(std::shared_ptr<const Inpainter> model, ServerOptions options = {});
  ~InpaintServer();
  InpaintServer(const InpaintServer&) = delete;
  InpaintServer& operator=(const InpaintServer&) = delete;

  /// Binds the socket and returns the bound port.
  int bind();
  /// Serves until stop(); call bind() first.
  void run();
  /// bind() + run() on a background thread; returns the bound port.
  int start();
  void stop();

  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace inclg
