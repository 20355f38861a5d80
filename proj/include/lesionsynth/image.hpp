#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lesionsynth {

// 8-bit 3-channel image, row-major, interleaved RGB.
struct RGBImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // size = 3*width*height

  RGBImage() = default;
  RGBImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(3) * w * h, 0) {}

  uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  bool valid() const {
    return width >= 1 && height >= 1 &&
           pixels.size() == static_cast<size_t>(3) * width * height;
  }
};

// 8-bit single-channel image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0) {}

  uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

RGBImage read_png_rgb(const std::string& path);
GrayImage read_png_gray(const std::string& path);
void write_png_rgb(const std::string& path, const RGBImage& img);
void write_png_gray(const std::string& path, const GrayImage& img);

}  // namespace lesionsynth
