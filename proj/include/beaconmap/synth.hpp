#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "beaconmap/detect.hpp"
#include "beaconmap/image.hpp"
#include "beaconmap/learn.hpp"
#include "beaconmap/planner.hpp"

namespace beaconmap {

// Synthetic floor plans with known symbol locations. Symbols are drawn at
// 200 dpi and 1/16" = 1' (12.5 px per foot) with the same renderer that
// produces the template library.

constexpr int kWallThickness = 6;
constexpr int kDoorOpening = 37;

// Door with the corridor above the wall, the leaf hinged on the left jamb and
// the swing into the room below. Odd-sized; the symbol centre is the patch
// centre.
GrayImage render_door();
// Stair: outlined run with treads, long axis vertical.
GrayImage render_stair();

// Door (rotations and mirror) and stair (rotations) templates.
std::vector<Template> builtin_templates();

struct GroundTruth {
  std::string kind;
  int x = 0;
  int y = 0;
  int orientation = 0;
};

struct SynthOptions {
  int width = 2200;
  int height = 3400;
  int poi_count = 30;          // doors + stairs; capped by the door slots the layout offers
  double stair_fraction = 0.1;
  std::uint64_t seed = 1;
  int corridor_width = 75;
  bool clutter = true;
};

struct SynthPlan {
  GrayImage image;
  std::vector<GroundTruth> truth;
  PlanMeta meta;
};

SynthPlan generate_plan(const SynthOptions& options);

// Lower-resolution scan: box downsampling by `factor` plus Gaussian noise.
SynthPlan degrade(const SynthPlan& plan, int factor, double noise_sigma, std::uint64_t seed);

struct DetectionScore {
  int truth = 0;
  int correct = 0;
  int missed = 0;
  int redundant = 0;  // candidates not matched to a distinct true symbol

  double recall() const { return truth == 0 ? 1.0 : static_cast<double>(correct) / truth; }
};

// One-to-one greedy matching by distance; a candidate matches a true symbol
// of the same kind within `radius` pixels.
DetectionScore score_detections(std::span<const GroundTruth> truth, std::span<const MatchCandidate> cands,
                                double radius);

struct TrainingOptions {
  int patch_size = 24;
  double crop_factor = 1.5;
  int jitter = 2;
  int negatives_per_plan = 120;
  int shifted_negatives = 2;  // off-centre negatives per positive symbol
  std::uint64_t seed = 7;
};

// Positives are crops at symbols of `kind`; negatives are off-centre crops of
// those symbols, crops at other symbols, corner features away from any
// symbol, and random points.
std::vector<LabeledPatch> training_patches(const SynthPlan& plan, std::span<const Template> templates,
                                           const std::string& kind, const TrainingOptions& options);

}  // namespace beaconmap
