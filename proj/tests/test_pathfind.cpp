#include <doctest.h>

#include "beaconmap/pathfind.hpp"
#include "oracles.hpp"

using namespace beaconmap;

namespace {

Zone rect_zone(double x0, double y0, double x1, double y1, int level) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, level};
}

// Two rooms above a corridor, all walled in, with a door gap into each room.
BinaryImage two_room_plan() {
  BinaryImage b(120, 80);
  oracle::fill_rect(b, 10, 10, 110, 11);  // top wall
  oracle::fill_rect(b, 10, 68, 110, 69);  // bottom wall
  oracle::fill_rect(b, 10, 10, 11, 69);   // left wall
  oracle::fill_rect(b, 109, 10, 110, 69); // right wall
  oracle::fill_rect(b, 10, 45, 110, 46);  // corridor wall
  oracle::fill_rect(b, 60, 10, 61, 46);   // room divider
  oracle::fill_rect(b, 30, 45, 35, 46, false);  // door gaps
  oracle::fill_rect(b, 80, 45, 85, 46, false);
  return b;
}

}  // namespace

TEST_CASE("zone validation rejects malformed polygons") {
  CHECK_NOTHROW(validate_zones({rect_zone(1, 1, 10, 10, 1)}, 20, 20));
  CHECK_THROWS_AS(validate_zones({Zone{{{1, 1}, {5, 5}}, 1}}, 20, 20), ZoneError);
  CHECK_THROWS_AS(validate_zones({rect_zone(1, 1, 30, 10, 1)}, 20, 20), ZoneError);
  CHECK_THROWS_AS(validate_zones({rect_zone(1, 1, 10, 10, -1)}, 20, 20), ZoneError);
  // Bow tie.
  const Zone bow{{{0, 0}, {10, 10}, {10, 0}, {0, 10}}, 1};
  try {
    validate_zones({rect_zone(1, 1, 10, 10, 1), bow}, 20, 20);
    FAIL("expected ZoneError");
  } catch (const ZoneError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("point in polygon handles concave shapes") {
  // L shape.
  const std::vector<Point2> l = {{0, 0}, {10, 0}, {10, 4}, {4, 4}, {4, 10}, {0, 10}};
  CHECK(point_in_polygon(l, 2, 2));
  CHECK(point_in_polygon(l, 2, 8));
  CHECK(point_in_polygon(l, 8, 2));
  CHECK_FALSE(point_in_polygon(l, 8, 8));
  CHECK_FALSE(point_in_polygon(l, -1, 5));
}

TEST_CASE("rasterize zone covers pixel centres inside the polygon") {
  const BinaryImage m = rasterize_zone(rect_zone(2, 3, 7, 9, 1), 12, 12);
  // Centres x + 0.5 in (2, 7) -> x = 2..6; y + 0.5 in (3, 9) -> y = 3..8.
  CHECK(m.count() == 5 * 6);
  CHECK(m.at(2, 3));
  CHECK(m.at(6, 8));
  CHECK_FALSE(m.at(7, 8));
}

TEST_CASE("apply_zones blocks only zones at or above the cutoff") {
  const BinaryImage free(20, 20, false);
  const std::vector<Zone> zones = {rect_zone(0, 0, 10, 10, 1), rect_zone(10, 10, 20, 20, 3)};
  const BinaryImage blocked = apply_zones(free, zones, 2);
  CHECK_FALSE(blocked.at(5, 5));
  CHECK(blocked.at(15, 15));
  CHECK(blocked.count() == 100);
  const ZoneLevelMap lv = zone_levels(zones, 20, 20, 2);
  CHECK(lv.at(5, 5) == 1);
  CHECK(lv.at(15, 15) == 0);  // blocked zones are not annotated
  CHECK(lv.at(15, 2) == 0);
  // Overlapping zones annotate the maximum level.
  const ZoneLevelMap both = zone_levels({rect_zone(0, 0, 10, 10, 1), rect_zone(5, 5, 15, 15, 2)}, 20, 20, 5);
  CHECK(both.at(7, 7) == 2);
  CHECK(both.at(2, 2) == 1);
}

TEST_CASE("indoor path is the largest free region away from the page border") {
  const BinaryImage plan = two_room_plan();
  const IndoorPath path = extract_indoor_path(label_regions(plan, LabelTarget::FreeSpace, Connectivity::Four));
  // Rooms and corridor connect through the doors; the margin is excluded.
  CHECK(path.mask.at(50, 55));
  CHECK(path.mask.at(30, 20));
  CHECK_FALSE(path.mask.at(2, 2));
  CHECK(path.area == path.mask.count());
  // Closing a door detaches its room.
  BinaryImage closed = plan;
  oracle::fill_rect(closed, 30, 45, 35, 46);
  const IndoorPath p2 = extract_indoor_path(label_regions(closed, LabelTarget::FreeSpace, Connectivity::Four));
  CHECK(p2.area < path.area);
  CHECK_THROWS_AS(extract_indoor_path(label_regions(BinaryImage(5, 5, false), LabelTarget::FreeSpace,
                                                    Connectivity::Four)),
                  ValidationError);
  // A small box on a large page: without margin exclusion the margin wins.
  BinaryImage page(60, 60);
  oracle::fill_rect(page, 20, 20, 40, 40);
  oracle::fill_rect(page, 22, 22, 38, 38, false);
  const LabelImage pl = label_regions(page, LabelTarget::FreeSpace, Connectivity::Four);
  CHECK(extract_indoor_path(pl).area == 17 * 17);
  const IndoorPath p3 = extract_indoor_path(pl, {false});
  CHECK(p3.mask.at(2, 2));
  CHECK_FALSE(p3.mask.at(30, 30));
}

TEST_CASE("segment_rooms closes door gaps and separates rooms") {
  const BinaryImage plan = two_room_plan();
  const IndoorPath path = extract_indoor_path(label_regions(plan, LabelTarget::FreeSpace, Connectivity::Four));
  const auto rooms = segment_rooms(plan, path, 50, 3);
  // Dilation by 3 closes the 6-pixel door gaps: two rooms plus the corridor,
  // which is dropped as the core.
  REQUIRE(rooms.size() == 2);
  for (const auto& r : rooms) {
    CHECK(r.bbox.y1 < 45);
    CHECK(r.mask.count() == r.area);
  }
  CHECK(default_min_room_area(100, 100) == 25);
  CHECK_THROWS_AS(segment_rooms(BinaryImage(3, 3), path, 1, 1), DimensionError);
}
