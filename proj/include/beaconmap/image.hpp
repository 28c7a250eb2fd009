#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "beaconmap/error.hpp"

namespace beaconmap {

// Pixel coordinate. Ordering is row-major: (y, x).
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend bool operator<(const Pixel& a, const Pixel& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

struct BoundingBox {
  int x0 = 0, y0 = 0;  // inclusive
  int x1 = 0, y1 = 0;  // inclusive

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
};

// 8-bit grayscale raster, row-major. DPI of zero means "unset".
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 255);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ <= 0 || height_ <= 0; }
  std::size_t size() const { return pixels_.size(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  double dpi_x = 0.0;
  double dpi_y = 0.0;
  bool has_dpi() const { return dpi_x > 0.0 && dpi_y > 0.0; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

using RasterImage = GrayImage;

// Boolean raster; true marks foreground. For floor plans foreground is ink.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ <= 0 || height_ <= 0; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  // Out-of-bounds reads are background.
  bool get(int x, int y) const { return contains(x, y) && at(x, y); }

  std::size_t count() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<std::uint8_t>& bits() { return bits_; }

  BinaryImage inverted() const;

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct RegionStats {
  int label = 0;
  std::size_t area = 0;
  BoundingBox bbox;
  bool touches_border = false;
};

// Connected-component labels. 0 means the pixel is not in the target class.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;
  std::vector<RegionStats> regions;  // regions[i].label == i + 1

  std::int32_t at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  // Mask of one label.
  BinaryImage mask(int label) const;
};

enum class Connectivity { Four = 4, Eight = 8 };
enum class LabelTarget { Foreground, FreeSpace };

struct ThresholdPolicy {
  enum class Kind { Fixed, Otsu } kind = Kind::Fixed;
  int value = 128;

  static ThresholdPolicy fixed(int v) { return {Kind::Fixed, v}; }
  static ThresholdPolicy otsu() { return {Kind::Otsu, 0}; }
  friend bool operator==(const ThresholdPolicy&, const ThresholdPolicy&) = default;
};

int otsu_threshold(const GrayImage& img);

// Dark pixels (intensity < threshold) become foreground.
BinaryImage binarize(const GrayImage& img, ThresholdPolicy policy = {});

LabelImage label_regions(const BinaryImage& bin, LabelTarget target, Connectivity connectivity);

// Grows foreground by a (2r+1)x(2r+1) square.
BinaryImage dilate(const BinaryImage& bin, int radius);

// Connectivity-preserving thinning to a one-pixel-wide skeleton.
BinaryImage thin(const BinaryImage& bin);

// Number of 8-connected foreground neighbours of (x, y).
int neighbor_count(const BinaryImage& bin, int x, int y);

// True when deleting foreground pixel (x, y) changes neither foreground
// 8-connectivity nor background 4-connectivity in its neighbourhood.
bool is_simple_point(const BinaryImage& bin, int x, int y);

// Squared Euclidean distance from every pixel to the nearest true pixel of
// `target`; +inf-like (max double) when target is empty.
std::vector<double> distance_transform_sq(const BinaryImage& target);

// Bilinear resample to the given size.
GrayImage resample(const GrayImage& img, int width, int height);

// Box-filter downsample by an integer factor; DPI is divided accordingly.
GrayImage downsample(const GrayImage& img, int factor);

}  // namespace beaconmap
