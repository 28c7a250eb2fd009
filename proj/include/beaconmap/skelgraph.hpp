#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beaconmap/detect.hpp"
#include "beaconmap/image.hpp"
#include "beaconmap/pathfind.hpp"

namespace beaconmap {

// One-pixel-wide medial representation of the indoor path.
struct Skeleton {
  BinaryImage mask;
  std::vector<Pixel> junctions;  // >= 3 skeleton neighbours
  std::vector<Pixel> endpoints;  // exactly 1 skeleton neighbour
};

// Thins the path, optionally prunes spurs shorter than prune_length pixels,
// and classifies junction/end pixels.
Skeleton skeletonize(const IndoorPath& path, int prune_length = 0);
Skeleton make_skeleton(BinaryImage mask);

// Removes end branches (endpoint to junction) shorter than max_length pixels.
// Components that are a single line are left alone.
BinaryImage prune_spurs(const BinaryImage& mask, int max_length);

enum class NodeKind { Poi, Intersection, Spacer };
enum class NodeOrigin { Detected, Manual };

const char* to_string(NodeKind k);
const char* to_string(NodeOrigin o);
NodeKind parse_node_kind(const std::string& s);
NodeOrigin parse_node_origin(const std::string& s);

struct BeaconNode {
  int id = 0;
  Pixel pixel;
  NodeKind kind = NodeKind::Poi;
  std::string block_class;
  std::string label;
  NodeOrigin origin = NodeOrigin::Detected;

  friend bool operator==(const BeaconNode&, const BeaconNode&) = default;
};

// Image-frame step directions; N is image-up.
enum class Dir : std::uint8_t { E, W, N, S, NE, NW, SE, SW };
inline constexpr std::array<Dir, 8> kAllDirs = {Dir::E, Dir::W, Dir::N, Dir::S, Dir::NE, Dir::NW, Dir::SE, Dir::SW};

const char* to_string(Dir d);
Dir parse_dir(const std::string& s);
Dir reverse(Dir d);
// Pixel offset of a step (image coordinates, y down).
std::array<int, 2> dir_offset(Dir d);
std::optional<Dir> dir_from_offset(int dx, int dy);
double step_length(Dir d);  // 1 or sqrt(2)

// Step counts indexed by Dir.
using DirCounts = std::array<std::int64_t, 8>;

struct Edge {
  int a = 0;  // node ids; the path runs from a to b
  int b = 0;
  double pixel_length = 0.0;
  double physical_length = 0.0;  // feet
  DirCounts dir_counts{};
  int dominant_code = 0;
  int max_zone_level = 0;
  std::vector<Dir> steps;  // traced step sequence from a to b

  std::int64_t step_count() const;
  // Edge from b to a with reversed steps and mirrored counts.
  Edge reversed(double map_orientation) const;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct ConnectivityGraph {
  std::vector<BeaconNode> nodes;
  std::vector<Edge> edges;
  double map_orientation = 0.0;  // compass bearing of image-up, degrees clockwise from North
  double scale = 0.0;            // drawing inches per real foot
  double dpi = 0.0;

  const BeaconNode* find(int id) const;
  int next_id() const;

  friend bool operator==(const ConnectivityGraph&, const ConnectivityGraph&) = default;
};

// Feet from a pixel length: pixels / dpi / scale.
double to_physical(double pixel_length, double dpi, double scale);

// Numeric compass code of the resultant of the unit step vectors after
// rotating by map_orientation. 0 = N, increasing clockwise in 45 degree
// sectors; angles on a sector boundary go to the cardinal neighbour.
int orientation_code(const DirCounts& counts, double map_orientation);

// Snaps each candidate to its nearest skeleton pixel; ties prefer smaller y,
// then smaller x. Node ids start at first_id.
std::vector<BeaconNode> map_to_skeleton(std::span<const MatchCandidate> cands, const Skeleton& skel, int first_id = 0);

// Nearest skeleton pixel with the same tie-break as map_to_skeleton.
std::optional<Pixel> nearest_skeleton_pixel(const Skeleton& skel, Pixel p);

// One node per 8-connected cluster of junction pixels.
std::vector<BeaconNode> find_intersections(const Skeleton& skel, int first_id = 0);

struct TraceContext {
  const Skeleton* skeleton = nullptr;
  const ZoneLevelMap* zones = nullptr;  // optional edge annotation
  double map_orientation = 0.0;
};

// Shortest-path wavefront from every node over skeleton pixels, stopping at
// the first other node on each branch; one edge per adjacent node pair.
std::vector<Edge> trace_edges(const TraceContext& ctx, std::span<const BeaconNode> nodes);

struct SpacerPlan {
  int count = 0;         // ceil(y/x) - 1 when y > x, else 0
  double spacing = 0.0;  // y / ceil(y/x)
};
SpacerPlan spacer_plan(double length_ft, double max_spacing_ft);

// Subdivides every edge longer than max_spacing_ft with evenly spaced spacer
// nodes along its traced arc.
ConnectivityGraph insert_spacers(const ConnectivityGraph& g, double max_spacing_ft);

// Merges point-of-interest nodes whose along-skeleton distance is within
// radius_m metres into one node at the midpoint of the connecting path.
ConnectivityGraph merge_close(const ConnectivityGraph& g, const TraceContext& ctx, double radius_m = 2.0);

// Fills physical_length from pixel_length using the graph's dpi and scale.
void compute_physical(ConnectivityGraph& g);

// Re-traces edges for the current node set.
void retrace(ConnectivityGraph& g, const TraceContext& ctx);

constexpr double kFeetPerMetre = 1.0 / 0.3048;

}  // namespace beaconmap
