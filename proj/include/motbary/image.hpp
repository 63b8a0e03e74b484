#pragma once

#include <cstdint>
#include <vector>

#include "motbary/error.hpp"
#include "motbary/measures.hpp"

namespace motbary {

/// 8-bit grayscale raster, row-major with the origin at the top-left.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0) {}

  std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Pixels with positive intensity become atoms at (col / W, row / H) with
/// weight proportional to intensity.
inline DiscreteMeasure measure_from_image(const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height) throw InvalidArgument("image buffer size mismatch");
  std::vector<double> pts, w;
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      const auto v = img.at(r, c);
      if (v == 0) continue;
      pts.push_back(static_cast<double>(c) / static_cast<double>(img.width));
      pts.push_back(static_cast<double>(r) / static_cast<double>(img.height));
      w.push_back(v);
    }
  if (w.empty()) throw InvalidArgument("image has zero total mass");
  return DiscreteMeasure(2, std::move(pts), std::move(w));
}

}  // namespace motbary
