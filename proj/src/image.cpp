#include "beaconmap/image.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>

namespace beaconmap {

namespace {

// Neighbour offsets, clockwise from north. Bit i of a neighbourhood code is
// set when the neighbour at kOffsets[i] is foreground.
constexpr std::array<std::array<int, 2>, 8> kOffsets = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

int neighborhood_code(const BinaryImage& bin, int x, int y) {
  int code = 0;
  for (int i = 0; i < 8; ++i) {
    if (bin.get(x + kOffsets[i][0], y + kOffsets[i][1])) code |= 1 << i;
  }
  return code;
}

int count_components(int members, bool eight) {
  int seen = 0;
  int components = 0;
  for (int start = 0; start < 8; ++start) {
    if (!(members & (1 << start)) || (seen & (1 << start))) continue;
    ++components;
    int stack[8];
    int top = 0;
    stack[top++] = start;
    seen |= 1 << start;
    while (top > 0) {
      const int i = stack[--top];
      for (int j = 0; j < 8; ++j) {
        if (!(members & (1 << j)) || (seen & (1 << j))) continue;
        const int dx = std::abs(kOffsets[i][0] - kOffsets[j][0]);
        const int dy = std::abs(kOffsets[i][1] - kOffsets[j][1]);
        const bool adjacent = eight ? (dx <= 1 && dy <= 1) : (dx + dy == 1);
        if (adjacent) {
          seen |= 1 << j;
          stack[top++] = j;
        }
      }
    }
  }
  return components;
}

std::array<bool, 256> build_simple_table() {
  std::array<bool, 256> table{};
  for (int code = 0; code < 256; ++code) {
    const int fg_components = count_components(code, true);
    // Background components that touch the centre through a 4-neighbour.
    const int background = ~code & 0xFF;
    int bg_components = 0;
    int seen = 0;
    for (int start = 0; start < 8; start += 2) {
      if (!(background & (1 << start)) || (seen & (1 << start))) continue;
      ++bg_components;
      int stack[8];
      int top = 0;
      stack[top++] = start;
      seen |= 1 << start;
      while (top > 0) {
        const int i = stack[--top];
        for (int j = 0; j < 8; ++j) {
          if (!(background & (1 << j)) || (seen & (1 << j))) continue;
          const int dx = std::abs(kOffsets[i][0] - kOffsets[j][0]);
          const int dy = std::abs(kOffsets[i][1] - kOffsets[j][1]);
          if (dx + dy == 1) {
            seen |= 1 << j;
            stack[top++] = j;
          }
        }
      }
    }
    table[code] = fg_components == 1 && bg_components == 1;
  }
  return table;
}

const std::array<bool, 256>& simple_table() {
  static const std::array<bool, 256> table = build_simple_table();
  return table;
}

void require_nonempty(int width, int height, const char* what) {
  if (width <= 0 || height <= 0) throw DimensionError(std::string(what) + ": empty image");
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill) {
  if (width < 0 || height < 0) throw DimensionError("negative image dimensions");
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0 ||
      pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DimensionError("pixel count does not match width x height");
  }
}

BinaryImage::BinaryImage(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
            fill ? 1 : 0) {
  if (width < 0 || height < 0) throw DimensionError("negative image dimensions");
}

std::size_t BinaryImage::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryImage BinaryImage::inverted() const {
  BinaryImage out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

BinaryImage LabelImage::mask(int label) const {
  BinaryImage out(width, height);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.bits()[i] = 1;
  }
  return out;
}

int otsu_threshold(const GrayImage& img) {
  require_nonempty(img.width(), img.height(), "otsu_threshold");
  std::array<double, 256> hist{};
  for (auto p : img.pixels()) hist[p] += 1.0;
  const double total = static_cast<double>(img.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  double weight_bg = 0.0, sum_bg = 0.0, best = -1.0;
  int threshold = 128;
  for (int t = 0; t < 256; ++t) {
    weight_bg += hist[t];
    if (weight_bg == 0.0) continue;
    const double weight_fg = total - weight_bg;
    if (weight_fg == 0.0) break;
    sum_bg += t * hist[t];
    const double mean_bg = sum_bg / weight_bg;
    const double mean_fg = (sum_all - sum_bg) / weight_fg;
    const double between = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
    if (between > best) {
      best = between;
      // Pixels <= t form the dark class; binarize uses strict "<".
      threshold = t + 1;
    }
  }
  return threshold;
}

BinaryImage binarize(const GrayImage& img, ThresholdPolicy policy) {
  require_nonempty(img.width(), img.height(), "binarize");
  const int threshold = policy.kind == ThresholdPolicy::Kind::Otsu ? otsu_threshold(img) : policy.value;
  BinaryImage out(img.width(), img.height());
  const auto& src = img.pixels();
  auto& dst = out.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < threshold ? 1 : 0;
  return out;
}

LabelImage label_regions(const BinaryImage& bin, LabelTarget target, Connectivity connectivity) {
  require_nonempty(bin.width(), bin.height(), "label_regions");
  const int w = bin.width();
  const int h = bin.height();
  const std::uint8_t want = target == LabelTarget::Foreground ? 1 : 0;
  const auto& bits = bin.bits();

  LabelImage out;
  out.width = w;
  out.height = h;
  out.labels.assign(bits.size(), 0);

  // 4-connectivity uses the even (axial) entries of kOffsets.
  const int step = connectivity == Connectivity::Eight ? 1 : 2;

  std::vector<std::size_t> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t seed = static_cast<std::size_t>(y) * w + x;
      if (bits[seed] != want || out.labels[seed] != 0) continue;

      RegionStats stats;
      stats.label = static_cast<int>(out.regions.size()) + 1;
      stats.bbox = {x, y, x, y};
      queue.clear();
      queue.push_back(seed);
      out.labels[seed] = stats.label;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t idx = queue[head];
        const int cx = static_cast<int>(idx % w);
        const int cy = static_cast<int>(idx / w);
        ++stats.area;
        stats.bbox.x0 = std::min(stats.bbox.x0, cx);
        stats.bbox.x1 = std::max(stats.bbox.x1, cx);
        stats.bbox.y0 = std::min(stats.bbox.y0, cy);
        stats.bbox.y1 = std::max(stats.bbox.y1, cy);
        if (cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1) stats.touches_border = true;
        for (int k = 0; k < 8; k += step) {
          const int nx = cx + kOffsets[k][0];
          const int ny = cy + kOffsets[k][1];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
          if (bits[n] == want && out.labels[n] == 0) {
            out.labels[n] = stats.label;
            queue.push_back(n);
          }
        }
      }
      out.regions.push_back(stats);
    }
  }
  return out;
}

BinaryImage dilate(const BinaryImage& bin, int radius) {
  if (radius < 0) throw ValidationError("dilate: negative radius");
  if (radius == 0 || bin.empty()) return bin;
  const int w = bin.width();
  const int h = bin.height();
  const auto& src = bin.bits();

  // Separable square element: a running count over a sliding window per row,
  // then per column.
  std::vector<std::uint8_t> rows(src.size(), 0);
  for (int y = 0; y < h; ++y) {
    const std::size_t base = static_cast<std::size_t>(y) * w;
    int count = 0;
    for (int x = 0; x < std::min(radius, w); ++x) count += src[base + x];
    for (int x = 0; x < w; ++x) {
      if (x + radius < w) count += src[base + x + radius];
      if (x - radius - 1 >= 0) count -= src[base + x - radius - 1];
      rows[base + x] = count > 0 ? 1 : 0;
    }
  }
  BinaryImage out(w, h);
  auto& dst = out.bits();
  for (int x = 0; x < w; ++x) {
    int count = 0;
    for (int y = 0; y < std::min(radius, h); ++y) count += rows[static_cast<std::size_t>(y) * w + x];
    for (int y = 0; y < h; ++y) {
      if (y + radius < h) count += rows[static_cast<std::size_t>(y + radius) * w + x];
      if (y - radius - 1 >= 0) count -= rows[static_cast<std::size_t>(y - radius - 1) * w + x];
      dst[static_cast<std::size_t>(y) * w + x] = count > 0 ? 1 : 0;
    }
  }
  return out;
}

int neighbor_count(const BinaryImage& bin, int x, int y) {
  return std::popcount(static_cast<unsigned>(neighborhood_code(bin, x, y)));
}

bool is_simple_point(const BinaryImage& bin, int x, int y) {
  return simple_table()[neighborhood_code(bin, x, y)];
}

BinaryImage thin(const BinaryImage& bin) {
  require_nonempty(bin.width(), bin.height(), "thin");
  BinaryImage out = bin;
  const int w = out.width();
  const int h = out.height();
  const auto& table = simple_table();

  // Border pixels are the only deletion candidates: a simple point always has
  // a background 4-neighbour.
  std::vector<std::uint8_t> queued(static_cast<std::size_t>(w) * h, 0);
  std::vector<Pixel> border;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!out.at(x, y)) continue;
      if (!out.get(x, y - 1) || !out.get(x, y + 1) || !out.get(x - 1, y) || !out.get(x + 1, y)) {
        border.push_back({x, y});
        queued[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }

  // Directional sub-iterations N, S, E, W keep the skeleton near the medial axis.
  constexpr std::array<std::array<int, 2>, 4> kSides = {{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};
  std::vector<Pixel> candidates;
  std::vector<Pixel> next_border;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& side : kSides) {
      candidates.clear();
      for (const auto& p : border) {
        if (out.at(p.x, p.y) && !out.get(p.x + side[0], p.y + side[1])) candidates.push_back(p);
      }
      std::sort(candidates.begin(), candidates.end());
      for (const auto& p : candidates) {
        const int code = neighborhood_code(out, p.x, p.y);
        if (std::popcount(static_cast<unsigned>(code)) < 2 || !table[code]) continue;
        out.set(p.x, p.y, false);
        changed = true;
        for (const auto& off : kOffsets) {
          const int nx = p.x + off[0];
          const int ny = p.y + off[1];
          if (!out.get(nx, ny)) continue;
          auto& q = queued[static_cast<std::size_t>(ny) * w + nx];
          if (!q) {
            q = 1;
            border.push_back({nx, ny});
          }
        }
      }
    }
    next_border.clear();
    for (const auto& p : border) {
      if (out.at(p.x, p.y)) {
        next_border.push_back(p);
      } else {
        queued[static_cast<std::size_t>(p.y) * w + p.x] = 0;
      }
    }
    border.swap(next_border);
  }
  return out;
}

namespace {

// One-dimensional lower envelope of parabolas (Felzenszwalb & Huttenlocher).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0.0);
  constexpr double kInf = std::numeric_limits<double>::max();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    while (k >= 0) {
      const int p = v[k];
      const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : ((f[q] + double(q) * q) - (f[v[k - 1]] + double(v[k - 1]) * v[k - 1])) /
                                  (2.0 * q - 2.0 * v[k - 1]);
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (j < k && z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

std::vector<double> distance_transform_sq(const BinaryImage& target) {
  const int w = target.width();
  const int h = target.height();
  constexpr double kInf = std::numeric_limits<double>::max();
  std::vector<double> grid(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = target.bits()[i] ? 0.0 : kInf;
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(static_cast<std::size_t>(std::max(w, h)));
  std::vector<double> d(f.size());
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = &grid[static_cast<std::size_t>(y) * w];
    std::copy(row, row + w, f.begin());
    edt_1d(f.data(), row, w, v, z);
  }
  return grid;
}

GrayImage resample(const GrayImage& img, int width, int height) {
  require_nonempty(img.width(), img.height(), "resample");
  if (width <= 0 || height <= 0) throw DimensionError("resample: empty target size");
  GrayImage out(width, height);
  out.dpi_x = img.dpi_x * width / img.width();
  out.dpi_y = img.dpi_y * height / img.height();
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  // Shrinking averages an n x n grid of bilinear taps per output pixel.
  const int nx = std::max(1, static_cast<int>(std::ceil(sx)));
  const int ny = std::max(1, static_cast<int>(std::ceil(sy)));
  auto bilinear = [&](double fx, double fy) {
    fx = std::clamp(fx, 0.0, img.width() - 1.0);
    fy = std::clamp(fy, 0.0, img.height() - 1.0);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double tx = fx - x0;
    const double ty = fy - y0;
    const double top = img.at(x0, y0) * (1 - tx) + img.at(x1, y0) * tx;
    const double bottom = img.at(x0, y1) * (1 - tx) + img.at(x1, y1) * tx;
    return top * (1 - ty) + bottom * ty;
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double sum = 0.0;
      for (int j = 0; j < ny; ++j) {
        const double fy = (y + (j + 0.5) / ny) * sy - 0.5;
        for (int i = 0; i < nx; ++i) {
          const double fx = (x + (i + 0.5) / nx) * sx - 0.5;
          sum += bilinear(fx, fy);
        }
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(sum / (nx * ny)));
    }
  }
  return out;
}

GrayImage downsample(const GrayImage& img, int factor) {
  require_nonempty(img.width(), img.height(), "downsample");
  if (factor < 1) throw ValidationError("downsample: factor must be >= 1");
  const int w = img.width() / factor;
  const int h = img.height() / factor;
  if (w == 0 || h == 0) throw DimensionError("downsample: factor larger than image");
  GrayImage out(w, h);
  out.dpi_x = img.dpi_x / factor;
  out.dpi_y = img.dpi_y / factor;
  const int area = factor * factor;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sum = 0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) sum += img.at(x * factor + dx, y * factor + dy);
      }
      out.at(x, y) = static_cast<std::uint8_t>((sum + area / 2) / area);
    }
  }
  return out;
}

}  // namespace beaconmap
