#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "beaconmap/image.hpp"

namespace beaconmap {

// 8-bit RGB raster used for overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // r, g, b interleaved

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 255) {}
  explicit RgbImage(const GrayImage& gray);

  void put(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

// Reads PBM/PGM/PPM (ASCII or binary) or PNG; colour is reduced to luminance.
// PNG resolution comes from and goes to the pHYs chunk.
GrayImage load_image(const std::filesystem::path& path);
GrayImage decode_image(const std::string& bytes);

void save_pgm(const GrayImage& img, const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& img);
void save_png(const GrayImage& img, const std::filesystem::path& path);
void save_png(const RgbImage& img, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

}  // namespace beaconmap
