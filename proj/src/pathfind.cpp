#include "beaconmap/pathfind.hpp"

#include <algorithm>
#include <cmath>

namespace beaconmap {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Point2& p, const Point2& q, const Point2& r) {
  return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) && std::min(p.y, r.y) <= q.y &&
         q.y <= std::max(p.y, r.y);
}

int sign(double v) { return (v > 0) - (v < 0); }

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& p3, const Point2& p4) {
  const int d1 = sign(cross(p3, p4, p1));
  const int d2 = sign(cross(p3, p4, p2));
  const int d3 = sign(cross(p1, p2, p3));
  const int d4 = sign(cross(p1, p2, p4));
  if (d1 != d2 && d3 != d4) return true;
  if (d1 == 0 && on_segment(p3, p1, p4)) return true;
  if (d2 == 0 && on_segment(p3, p2, p4)) return true;
  if (d3 == 0 && on_segment(p1, p3, p2)) return true;
  if (d4 == 0 && on_segment(p1, p4, p2)) return true;
  return false;
}

bool is_simple_polygon(const std::vector<Point2>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex by construction.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

// Fills scanline spans of pixel centres inside the polygon.
template <typename Fn>
void scan_polygon(const std::vector<Point2>& poly, int width, int height, Fn&& fill) {
  std::vector<double> xs;
  double min_y = poly.front().y, max_y = poly.front().y;
  for (const auto& p : poly) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int y_begin = std::max(0, static_cast<int>(std::floor(min_y)));
  const int y_end = std::min(height - 1, static_cast<int>(std::ceil(max_y)));
  const std::size_t n = poly.size();
  for (int y = y_begin; y <= y_end; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = poly[i];
      const Point2& b = poly[(i + 1) % n];
      if ((a.y <= yc) != (b.y <= yc)) xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Pixel centre x + 0.5 in [xs[k], xs[k+1]).
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int x = x0; x <= x1; ++x) fill(x, y);
    }
  }
}

}  // namespace

bool point_in_polygon(const std::vector<Point2>& polygon, double x, double y) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[j];
    if ((a.y <= y) != (b.y <= y)) {
      const double cx = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x < cx) inside = !inside;
    }
  }
  return inside;
}

void validate_zones(const std::vector<Zone>& zones, int width, int height) {
  for (std::size_t i = 0; i < zones.size(); ++i) {
    const Zone& z = zones[i];
    if (z.level < 0) throw ZoneError(i, "negative restriction level");
    if (z.polygon.size() < 3) throw ZoneError(i, "polygon needs at least 3 vertices");
    for (const auto& p : z.polygon) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 || p.x > width || p.y > height) {
        throw ZoneError(i, "vertex outside the image");
      }
    }
    if (!is_simple_polygon(z.polygon)) throw ZoneError(i, "polygon is self-intersecting");
  }
}

BinaryImage rasterize_zone(const Zone& zone, int width, int height) {
  BinaryImage out(width, height);
  if (zone.polygon.size() >= 3) scan_polygon(zone.polygon, width, height, [&](int x, int y) { out.set(x, y, true); });
  return out;
}

BinaryImage apply_zones(const BinaryImage& bin, const std::vector<Zone>& zones, int access_cutoff) {
  if (access_cutoff < 0) throw ValidationError("access cutoff must be >= 0");
  validate_zones(zones, bin.width(), bin.height());
  BinaryImage out = bin;
  for (const auto& z : zones) {
    if (z.level < access_cutoff) continue;
    scan_polygon(z.polygon, out.width(), out.height(), [&](int x, int y) { out.set(x, y, true); });
  }
  return out;
}

ZoneLevelMap zone_levels(const std::vector<Zone>& zones, int width, int height, int access_cutoff) {
  validate_zones(zones, width, height);
  ZoneLevelMap map;
  map.width = width;
  map.height = height;
  bool any = false;
  for (const auto& z : zones) any = any || (z.level > 0 && z.level < access_cutoff);
  if (!any) return map;
  map.levels.assign(static_cast<std::size_t>(width) * height, 0);
  for (const auto& z : zones) {
    if (z.level <= 0 || z.level >= access_cutoff) continue;
    const auto level = static_cast<std::uint8_t>(std::min(z.level, 255));
    scan_polygon(z.polygon, width, height, [&](int x, int y) {
      auto& v = map.levels[static_cast<std::size_t>(y) * width + x];
      v = std::max(v, level);
    });
  }
  return map;
}

IndoorPath extract_indoor_path(const LabelImage& labels, PathOptions options) {
  const RegionStats* best = nullptr;
  for (const auto& r : labels.regions) {
    if (options.exclude_margin && r.touches_border) continue;
    if (!best || r.area > best->area) best = &r;
  }
  if (!best) throw ValidationError("no walkable area");
  IndoorPath path;
  path.mask = labels.mask(best->label);
  path.source_label = best->label;
  path.area = best->area;
  return path;
}

std::size_t default_min_room_area(int width, int height) {
  return static_cast<std::size_t>(std::ceil(0.0025 * static_cast<double>(width) * height));
}

std::vector<RoomSegment> segment_rooms(const BinaryImage& bin, const IndoorPath& path, std::size_t min_area,
                                       int dilation_radius) {
  if (path.mask.width() != bin.width() || path.mask.height() != bin.height()) {
    throw DimensionError("segment_rooms: path mask does not match plan");
  }
  const BinaryImage closed = dilate(bin, dilation_radius);
  const LabelImage labels = label_regions(closed, LabelTarget::FreeSpace, Connectivity::Four);

  std::vector<std::size_t> overlap(labels.regions.size() + 1, 0);
  const auto& path_bits = path.mask.bits();
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (path_bits[i] && labels.labels[i] > 0) ++overlap[static_cast<std::size_t>(labels.labels[i])];
  }
  // The corridor core is the dilated component sharing the most pixels with
  // the indoor path.
  int core = 0;
  std::size_t core_overlap = 0;
  for (const auto& r : labels.regions) {
    if (overlap[r.label] > core_overlap) {
      core_overlap = overlap[r.label];
      core = r.label;
    }
  }

  std::vector<RoomSegment> rooms;
  for (const auto& r : labels.regions) {
    if (r.touches_border || r.label == core || r.area < min_area) continue;
    RoomSegment room;
    room.mask = BinaryImage(r.bbox.width(), r.bbox.height());
    for (int y = r.bbox.y0; y <= r.bbox.y1; ++y) {
      for (int x = r.bbox.x0; x <= r.bbox.x1; ++x) {
        if (labels.at(x, y) == r.label) room.mask.set(x - r.bbox.x0, y - r.bbox.y0, true);
      }
    }
    room.area = r.area;
    room.bbox = r.bbox;
    rooms.push_back(std::move(room));
  }
  return rooms;
}

}  // namespace beaconmap
