#pragma once

#include <png.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

namespace detail {
struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};
}  // namespace detail

/// Any PNG colour type, converted to 8-bit RGB.
inline RgbImage read_png_rgb(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::MissingFile, path.string());
  detail::PngImage png;
  if (!png_image_begin_read_from_file(&png.img, path.c_str())) {
    throw Error(Errc::IoFailure, path.string() + ": " + png.img.message);
  }
  png.img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.img));
  if (!png_image_finish_read(&png.img, nullptr, buf.data(), 0, nullptr)) {
    throw Error(Errc::IoFailure, path.string() + ": " + png.img.message);
  }
  RgbImage out(png.img.height, png.img.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {static_cast<float>(buf[3 * i]), static_cast<float>(buf[3 * i + 1]), static_cast<float>(buf[3 * i + 2])};
  }
  return out;
}

inline void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint8_t> buf(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const float v = image[i][c];
      buf[3 * i + c] = static_cast<std::uint8_t>(v <= 0.f ? 0.f : v >= 255.f ? 255.f : v + 0.5f);
    }
  }
  detail::PngImage png;
  png.img.width = static_cast<png_uint_32>(image.width());
  png.img.height = static_cast<png_uint_32>(image.height());
  png.img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png.img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error(Errc::IoFailure, path.string() + ": " + png.img.message);
  }
}

/// Binary mask as single-channel PNG with values {0, 255}.
inline void write_png_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> buf(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) buf[i] = mask[i] ? 255 : 0;
  detail::PngImage png;
  png.img.width = static_cast<png_uint_32>(mask.width());
  png.img.height = static_cast<png_uint_32>(mask.height());
  png.img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png.img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw Error(Errc::IoFailure, path.string() + ": " + png.img.message);
  }
}

inline BinaryMask read_png_mask(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::MissingFile, path.string());
  detail::PngImage png;
  if (!png_image_begin_read_from_file(&png.img, path.c_str())) {
    throw Error(Errc::IoFailure, path.string() + ": " + png.img.message);
  }
  png.img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.img));
  if (!png_image_finish_read(&png.img, nullptr, buf.data(), 0, nullptr)) {
    throw Error(Errc::IoFailure, path.string() + ": " + png.img.message);
  }
  BinaryMask out(png.img.height, png.img.width);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i] >= 128 ? 1 : 0;
  return out;
}

}  // namespace coreg
