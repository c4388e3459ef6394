#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <opencv2/core.hpp>

namespace inclg {

std::string base64_encode(std::string_view bytes);
/// Throws DataError on malformed input.
std::string base64_decode(std::string_view text);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// PNG bytes of an 8-bit image (1 or 3 channels, RGB order for colour).
std::string encode_png(const cv::Mat& image);

/// Decodes PNG/JPEG bytes. Colour images come back as 8-bit RGB, masks
/// (`grayscale`) as 8-bit single channel. Throws DataError if undecodable.
cv::Mat decode_image(std::string_view bytes, bool grayscale = false);

}  // namespace inclg
