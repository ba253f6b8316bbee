#pragma once

#include <filesystem>
#include <vector>

namespace wsod {

// RGB image with channels interleaved, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // size 3 * width * height

  Image() = default;
  Image(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(3 * static_cast<std::size_t>(w) * h, fill) {}

  float* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const float* at(int x, int y) const { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
};

// Binary PPM (P6, maxval 255).
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);

Image flip_horizontal(const Image& image);
// Bilinear resampling to the given size.
Image resize(const Image& image, int width, int height);

}  // namespace wsod
