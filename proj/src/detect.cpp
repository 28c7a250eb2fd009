#include "beaconmap/detect.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace beaconmap {

const char* to_string(PipelineSource s) {
  switch (s) {
    case PipelineSource::Fdm:
      return "FDM";
    case PipelineSource::FdmSml:
      return "FDM+SML";
    case PipelineSource::FdSml:
      return "FD+SML";
  }
  return "?";
}

namespace {

// Running box sum of a row-major float field with a k x k window (k odd),
// replicating edges.
std::vector<float> box_sum(const std::vector<float>& src, int w, int h, int k) {
  const int r = k / 2;
  std::vector<float> tmp(src.size());
  std::vector<float> out(src.size());
  for (int y = 0; y < h; ++y) {
    const float* row = &src[static_cast<std::size_t>(y) * w];
    float* dst = &tmp[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int d = -r; d <= r; ++d) s += row[std::clamp(x + d, 0, w - 1)];
      dst[x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    float* dst = &out[static_cast<std::size_t>(y) * w];
    for (int d = -r; d <= r; ++d) {
      const float* row = &tmp[static_cast<std::size_t>(std::clamp(y + d, 0, h - 1)) * w];
      for (int x = 0; x < w; ++x) dst[x] += row[x];
    }
  }
  return out;
}

}  // namespace

std::vector<float> corner_response(const GrayImage& img, int block_size) {
  if (img.empty()) throw DimensionError("corner_response: empty image");
  if (block_size < 1 || block_size % 2 == 0) throw ValidationError("block size must be odd and positive");
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.size();
  std::vector<float> xx(n), yy(n), xy(n);
  auto px = [&](int x, int y) { return static_cast<int>(img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1))); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Sobel, scaled by 1/8.
      const int gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const float fx = gx / 8.0f;
      const float fy = gy / 8.0f;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      xx[i] = fx * fx;
      yy[i] = fy * fy;
      xy[i] = fx * fy;
    }
  }
  const auto a = box_sum(xx, w, h, block_size);
  const auto c = box_sum(yy, w, h, block_size);
  const auto b = box_sum(xy, w, h, block_size);
  std::vector<float> response(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double half_trace = 0.5 * (static_cast<double>(a[i]) + c[i]);
    const double half_diff = 0.5 * (static_cast<double>(a[i]) - c[i]);
    const double lambda = half_trace - std::sqrt(half_diff * half_diff + static_cast<double>(b[i]) * b[i]);
    response[i] = static_cast<float>(std::max(0.0, lambda));
  }
  return response;
}

std::vector<FeaturePoint> detect_features(const GrayImage& img, const FeatureOptions& options) {
  if (img.empty()) throw DimensionError("detect_features: empty image");
  const int w = img.width();
  const int h = img.height();
  const auto response = corner_response(img, options.block_size);
  const float max_response = *std::max_element(response.begin(), response.end());
  if (!(max_response > 0.0f)) return {};
  const float threshold = static_cast<float>(options.quality * max_response);

  std::vector<FeaturePoint> peaks;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float r = response[static_cast<std::size_t>(y) * w + x];
      if (r <= threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((dx || dy) && nx >= 0 && ny >= 0 && nx < w && ny < h &&
              response[static_cast<std::size_t>(ny) * w + nx] > r) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({x, y, r});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const FeaturePoint& a, const FeaturePoint& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  if (options.min_spacing <= 0.0) return peaks;

  // Greedy spacing with a bucket grid of cell size min_spacing.
  const double spacing = options.min_spacing;
  const double spacing_sq = spacing * spacing;
  const int cell = std::max(1, static_cast<int>(std::ceil(spacing)));
  const int gw = (w + cell - 1) / cell;
  const int gh = (h + cell - 1) / cell;
  std::vector<std::vector<Pixel>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<FeaturePoint> kept;
  for (const auto& p : peaks) {
    const int gx = p.x / cell;
    const int gy = p.y / cell;
    bool clear = true;
    for (int cy = std::max(0, gy - 1); cy <= std::min(gh - 1, gy + 1) && clear; ++cy) {
      for (int cx = std::max(0, gx - 1); cx <= std::min(gw - 1, gx + 1) && clear; ++cx) {
        for (const auto& q : grid[static_cast<std::size_t>(cy) * gw + cx]) {
          const double dx = q.x - p.x, dy = q.y - p.y;
          if (dx * dx + dy * dy < spacing_sq) {
            clear = false;
            break;
          }
        }
      }
    }
    if (!clear) continue;
    kept.push_back(p);
    grid[static_cast<std::size_t>(gy) * gw + gx].push_back({p.x, p.y});
  }
  return kept;
}

double ssd(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("ssd: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

GrayImage transform_patch(const GrayImage& patch, int orientation) {
  GrayImage cur = patch;
  if (orientation >= 4) {
    GrayImage m(cur.width(), cur.height());
    for (int y = 0; y < cur.height(); ++y) {
      for (int x = 0; x < cur.width(); ++x) m.at(cur.width() - 1 - x, y) = cur.at(x, y);
    }
    cur = std::move(m);
  }
  for (int t = 0; t < orientation % 4; ++t) {
    GrayImage r(cur.height(), cur.width());
    for (int y = 0; y < cur.height(); ++y) {
      for (int x = 0; x < cur.width(); ++x) r.at(cur.height() - 1 - y, x) = cur.at(x, y);
    }
    cur = std::move(r);
  }
  cur.dpi_x = patch.dpi_x;
  cur.dpi_y = patch.dpi_y;
  return cur;
}

double template_base_scale(const Template& t, double dpi, double scale_in_per_ft) {
  if (t.physical_width_ft <= 0.0 || dpi <= 0.0 || scale_in_per_ft <= 0.0 || t.patch.empty()) return 1.0;
  return t.physical_width_ft * scale_in_per_ft * dpi / t.patch.width();
}

std::vector<TemplateVariant> make_variants(std::span<const Template> templates, const MatchOptions& options) {
  std::vector<TemplateVariant> variants;
  for (const auto& t : templates) {
    if (t.patch.empty()) throw TemplateError(t.id, "empty patch");
    if (t.kind.empty()) throw TemplateError(t.id, "blank kind");
    std::vector<int> orientations = {0};
    if (t.rotations) orientations = {0, 1, 2, 3};
    if (t.mirror) {
      const auto base = orientations;
      for (int o : base) orientations.push_back(o + 4);
    }
    const double base_scale = template_base_scale(t, options.dpi, options.drawing_scale);
    std::vector<GrayImage> seen;
    for (int o : orientations) {
      GrayImage oriented = transform_patch(t.patch, o);
      if (std::find(seen.begin(), seen.end(), oriented) != seen.end()) continue;
      seen.push_back(oriented);
      for (double s : options.scales) {
        const double f = base_scale * s;
        auto odd = [](double v) { return std::max(3, 2 * static_cast<int>(std::lround((v - 1.0) / 2.0)) + 1); };
        const int w = odd(oriented.width() * f);
        const int h = odd(oriented.height() * f);
        const GrayImage patch =
            (w == oriented.width() && h == oriented.height()) ? oriented : resample(oriented, w, h);

        TemplateVariant v;
        v.source = &t;
        v.orientation = o;
        v.scale = f;
        v.width = w;
        v.height = h;
        double mean = 0.0;
        for (auto p : patch.pixels()) mean += p;
        mean /= static_cast<double>(patch.size());
        v.zero_mean.reserve(patch.size());
        for (auto p : patch.pixels()) {
          v.zero_mean.push_back(p - mean);
          v.energy += (p - mean) * (p - mean);
        }
        if (v.energy <= 0.0) throw TemplateError(t.id, "patch has no contrast");
        for (const auto& k : detect_features(patch, options.keypoint_features)) {
          if (v.keypoints.size() >= options.max_keypoints) break;
          v.keypoints.push_back({k.x, k.y});
        }
        variants.push_back(std::move(v));
      }
    }
  }
  return variants;
}

MatchScorer::MatchScorer(const GrayImage& img) : img_(img) {
  const int w = img.width();
  const int h = img.height();
  integral_.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < w; ++x) {
      row += img.at(x, y);
      integral_[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          integral_[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
    }
  }
}

double MatchScorer::score(const TemplateVariant& v, int x, int y, double bound) const {
  const int w = img_.width();
  if (x < 0 || y < 0 || x + v.width > w || y + v.height > img_.height()) {
    return std::numeric_limits<double>::infinity();
  }
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  const std::int64_t sum = integral_[(y + v.height) * stride + x + v.width] - integral_[y * stride + x + v.width] -
                           integral_[(y + v.height) * stride + x] + integral_[y * stride + x];
  const double mean = static_cast<double>(sum) / (static_cast<double>(v.width) * v.height);
  const double limit = bound * v.energy;
  const auto* px = img_.pixels().data();
  double acc = 0.0;
  for (int j = 0; j < v.height; ++j) {
    const auto* row = px + static_cast<std::size_t>(y + j) * w + x;
    const double* t = &v.zero_mean[static_cast<std::size_t>(j) * v.width];
    for (int i = 0; i < v.width; ++i) {
      const double d = row[i] - mean - t[i];
      acc += d * d;
    }
    if (acc > limit) return acc / v.energy;
  }
  return acc / v.energy;
}

std::vector<MatchCandidate> suppress_overlaps(std::vector<MatchCandidate> cands, bool same_kind_only,
                                              double radius_scale) {
  std::sort(cands.begin(), cands.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.kind < b.kind;
  });
  std::vector<MatchCandidate> kept;
  for (auto& c : cands) {
    bool clear = true;
    for (const auto& k : kept) {
      if (same_kind_only && k.kind != c.kind) continue;
      const double radius = radius_scale * std::min(k.width, k.height);
      const double dx = k.x - c.x, dy = k.y - c.y;
      if (dx * dx + dy * dy < radius * radius) {
        clear = false;
        break;
      }
    }
    if (clear) kept.push_back(std::move(c));
  }
  return kept;
}

std::vector<MatchCandidate> match_variants(const GrayImage& img, std::span<const FeaturePoint> features,
                                           std::span<const TemplateVariant> variants, const MatchOptions& options) {
  const MatchScorer scorer(img);
  const int w = img.width();
  std::vector<MatchCandidate> raw;
  std::unordered_set<std::int64_t> tried;
  for (const auto& v : variants) {
    if (v.width > img.width() || v.height > img.height()) continue;
    tried.clear();
    for (const auto& f : features) {
      for (const auto& k : v.keypoints) {
        for (int dy = -options.jitter; dy <= options.jitter; ++dy) {
          for (int dx = -options.jitter; dx <= options.jitter; ++dx) {
            const int x = f.x - k.x + dx;
            const int y = f.y - k.y + dy;
            if (x < 0 || y < 0 || x + v.width > w || y + v.height > img.height()) continue;
            if (!tried.insert(static_cast<std::int64_t>(y) * w + x).second) continue;
            const double s = scorer.score(v, x, y, options.max_score);
            if (s > options.max_score) continue;
            MatchCandidate c;
            c.x = x + v.width / 2;
            c.y = y + v.height / 2;
            c.kind = v.source->kind;
            c.score = s;
            c.template_id = v.source->id;
            c.width = v.width;
            c.height = v.height;
            raw.push_back(std::move(c));
          }
        }
      }
    }
  }
  return suppress_overlaps(std::move(raw), true);
}

std::vector<MatchCandidate> match_templates(const GrayImage& img, std::span<const FeaturePoint> features,
                                            std::span<const Template> templates, const MatchOptions& options) {
  if (templates.empty()) throw ValidationError("match_templates: no templates");
  if (img.empty()) throw DimensionError("match_templates: empty image");
  for (const auto& t : templates) {
    const double f = template_base_scale(t, options.dpi, options.drawing_scale);
    if (t.patch.width() * f > img.width() || t.patch.height() * f > img.height()) {
      throw TemplateError(t.id, "template larger than image");
    }
  }
  const auto variants = make_variants(templates, options);
  return match_variants(img, features, variants, options);
}

std::vector<MatchCandidate> filter_by_region(std::span<const MatchCandidate> cands, const IndoorPath& path,
                                             double proximity) {
  if (std::isinf(proximity)) return {cands.begin(), cands.end()};
  const auto dist = distance_transform_sq(path.mask);
  const int w = path.mask.width();
  std::vector<MatchCandidate> out;
  for (const auto& c : cands) {
    if (!path.mask.contains(c.x, c.y)) continue;
    if (dist[static_cast<std::size_t>(c.y) * w + c.x] <= proximity * proximity) out.push_back(c);
  }
  return out;
}

}  // namespace beaconmap
