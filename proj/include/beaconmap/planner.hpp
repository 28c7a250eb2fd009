#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "beaconmap/detect.hpp"
#include "beaconmap/image.hpp"
#include "beaconmap/learn.hpp"
#include "beaconmap/pathfind.hpp"
#include "beaconmap/skelgraph.hpp"

namespace beaconmap {

// Physical reference of a plan.
struct PlanMeta {
  double dpi = 0.0;              // pixels per inch
  double scale = 0.0;            // drawing inches per real foot (1/16" = 1' -> 0.0625)
  double map_orientation = 0.0;  // compass bearing of image-up, degrees clockwise

  friend bool operator==(const PlanMeta&, const PlanMeta&) = default;
};

// Parses "1/16=1ft", "1/16\"=1'", "0.0625" or "1:192" into inches per foot.
double parse_scale(const std::string& text);
// "N", "E", "S", "W" or a number of degrees.
double parse_orientation(const std::string& text);

struct PlannerConfig {
  PipelineConfig pipeline;
  ThresholdPolicy threshold;
  int access_cutoff = 2;          // zones at or above this level block the path
  int prune_length = -1;          // spur pruning in pixels; -1 = from corridor width, 0 = off
  double max_spacing_ft = 30.0;   // spacer distance x
  double merge_radius_m = 2.0;
  int room_dilation = 2;          // full-plan mode room segmentation

  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
};

struct PlanResult {
  IndoorPath path;
  Skeleton skeleton;
  ZoneLevelMap zone_map;
  std::vector<MatchCandidate> candidates;
  ConnectivityGraph graph;
  std::vector<PhaseTiming> timings;
};

// Progress callback: fraction in [0, 1] and the phase just finished.
using ProgressFn = std::function<void(double, const std::string&)>;

// Phases 1-4: indoor path, building-block detection, skeleton and node
// placement, edge tracing with spacers and PoI merging.
PlanResult plan_beacons(const GrayImage& plan, const PlanMeta& meta, const std::vector<Zone>& zones,
                        const PlannerConfig& cfg, std::span<const Template> templates,
                        std::span<const SvmModel> models, const ProgressFn& progress = {});

// Phases 3-4 from a skeleton and point-of-interest nodes.
ConnectivityGraph build_graph(const Skeleton& skel, const ZoneLevelMap* zones, std::vector<BeaconNode> pois,
                              const PlanMeta& meta, const PlannerConfig& cfg);

// Default spur length: twice the median inscribed radius along the skeleton.
int auto_prune_length(const IndoorPath& path, const BinaryImage& thinned);

}  // namespace beaconmap
