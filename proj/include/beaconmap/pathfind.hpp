#pragma once

#include <cstdint>
#include <vector>

#include "beaconmap/image.hpp"

namespace beaconmap {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// Restricted area drawn over the plan. Level 0 is full public access; larger
// levels restrict progressively.
struct Zone {
  std::vector<Point2> polygon;
  int level = 0;

  friend bool operator==(const Zone&, const Zone&) = default;
};

struct IndoorPath {
  BinaryImage mask;  // true = walkable
  int source_label = 0;
  std::size_t area = 0;
};

struct RoomSegment {
  BinaryImage mask;  // cropped to bbox; mask(0, 0) is plan pixel (bbox.x0, bbox.y0)
  std::size_t area = 0;
  BoundingBox bbox;
};

// Throws ZoneError on a polygon with < 3 vertices, self-intersection,
// out-of-bounds vertices or a negative level.
void validate_zones(const std::vector<Zone>& zones, int width, int height);

bool point_in_polygon(const std::vector<Point2>& polygon, double x, double y);

// Pixels whose centre lies inside the polygon (even-odd rule).
BinaryImage rasterize_zone(const Zone& zone, int width, int height);

// Free pixels inside zones with level >= access_cutoff become blocked
// (foreground). Zones below the cutoff leave pixels untouched.
BinaryImage apply_zones(const BinaryImage& bin, const std::vector<Zone>& zones, int access_cutoff);

// Per-pixel maximum level of zones below the cutoff; 0 elsewhere.
struct ZoneLevelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> levels;

  bool empty() const { return levels.empty(); }
  int at(int x, int y) const {
    return levels.empty() ? 0 : levels[static_cast<std::size_t>(y) * width + x];
  }
};
ZoneLevelMap zone_levels(const std::vector<Zone>& zones, int width, int height, int access_cutoff);

struct PathOptions {
  // Free space touching the image border is page margin, not a corridor.
  bool exclude_margin = true;
};

// Largest free-space region; ties go to the lowest label.
IndoorPath extract_indoor_path(const LabelImage& labels, PathOptions options = {});

// Dilates the line-work, labels enclosed free space, and drops margin, the
// corridor core and anything smaller than min_area.
std::vector<RoomSegment> segment_rooms(const BinaryImage& bin, const IndoorPath& path, std::size_t min_area,
                                       int dilation_radius);

// 0.25% of the image area.
std::size_t default_min_room_area(int width, int height);

}  // namespace beaconmap
