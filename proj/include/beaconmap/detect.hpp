#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "beaconmap/image.hpp"
#include "beaconmap/pathfind.hpp"

namespace beaconmap {

// A building-block symbol from the template library.
struct Template {
  std::string id;
  std::string kind;  // "door", "stair", ...
  GrayImage patch;   // symbol centred in the patch
  int group = 0;
  double physical_width_ft = 0.0;  // patch width in real-world feet; 0 = unknown
  bool rotations = true;           // also match at 90, 180, 270 degrees
  bool mirror = false;             // also match the mirror image
};

struct FeaturePoint {
  int x = 0;
  int y = 0;
  double score = 0.0;  // minimum eigenvalue of the structure tensor

  friend bool operator==(const FeaturePoint&, const FeaturePoint&) = default;
};

enum class PipelineSource { Fdm, FdmSml, FdSml };
const char* to_string(PipelineSource s);

struct MatchCandidate {
  int x = 0;
  int y = 0;
  std::string kind;
  double score = 0.0;  // normalised SSD; 0 is a perfect match
  PipelineSource source = PipelineSource::Fdm;
  std::string template_id;
  int width = 0;  // matched window size in pixels
  int height = 0;

  friend bool operator==(const MatchCandidate&, const MatchCandidate&) = default;
};

struct FeatureOptions {
  double quality = 0.05;
  double min_spacing = 4.0;
  int block_size = 5;

  friend bool operator==(const FeatureOptions&, const FeatureOptions&) = default;
};

// Shi-Tomasi corners: local maxima of the minimum eigenvalue of the 5x5
// structure tensor, thresholded at quality * max and thinned to min_spacing.
// Sorted by descending score, ties by (y, x).
std::vector<FeaturePoint> detect_features(const GrayImage& img, const FeatureOptions& options = {});

// Minimum-eigenvalue response map used by detect_features (row-major).
std::vector<float> corner_response(const GrayImage& img, int block_size = 5);

// Plain sum of squared differences of two equal-length sequences.
double ssd(std::span<const double> a, std::span<const double> b);

// One orientation/scale instance of a template, mean-removed and ready to
// slide over an image.
struct TemplateVariant {
  const Template* source = nullptr;
  int orientation = 0;  // 0-3: quarter turns clockwise; 4-7: mirrored then turned
  double scale = 1.0;
  int width = 0;
  int height = 0;
  std::vector<double> zero_mean;  // row-major, mean removed
  double energy = 0.0;            // sum of squares of zero_mean
  std::vector<Pixel> keypoints;   // corner features within the patch
};

struct MatchOptions {
  double max_score = 0.3;
  std::vector<double> scales = {0.75, 1.0, 1.25};
  // Plan resolution and drawing scale (inches per foot); when both are set,
  // templates with a physical width are rescaled to the plan first.
  double dpi = 0.0;
  double drawing_scale = 0.0;
  std::size_t max_keypoints = 16;
  int jitter = 1;
  FeatureOptions keypoint_features{0.05, 3.0, 5};

  friend bool operator==(const MatchOptions&, const MatchOptions&) = default;
};

// Rotated/mirrored/rescaled variants of each template.
std::vector<TemplateVariant> make_variants(std::span<const Template> templates, const MatchOptions& options);

// Applies one of the 8 dihedral transforms (see TemplateVariant::orientation).
GrayImage transform_patch(const GrayImage& patch, int orientation);

// Normalised SSD of a variant placed with its top-left corner at (x, y):
// SSD of mean-removed windows divided by the template energy. Stops early
// and returns a value > bound once the partial sum exceeds bound.
class MatchScorer {
 public:
  explicit MatchScorer(const GrayImage& img);
  double score(const TemplateVariant& v, int x, int y,
               double bound = std::numeric_limits<double>::infinity()) const;
  const GrayImage& image() const { return img_; }

 private:
  const GrayImage& img_;
  std::vector<std::int64_t> integral_;
};

// Feature-guided template matching. Each image feature is paired with each
// template keypoint to hypothesise a placement; placements scoring at most
// max_score become candidates, then same-kind candidates closer than one
// template width are suppressed to the best one.
std::vector<MatchCandidate> match_templates(const GrayImage& img, std::span<const FeaturePoint> features,
                                            std::span<const Template> templates, const MatchOptions& options = {});

// Same as above with prepared variants.
std::vector<MatchCandidate> match_variants(const GrayImage& img, std::span<const FeaturePoint> features,
                                           std::span<const TemplateVariant> variants, const MatchOptions& options);

// Greedy suppression by (score, y, x): drops a candidate within `radius` of a
// better one. When same_kind_only, only candidates of the same kind compete.
std::vector<MatchCandidate> suppress_overlaps(std::vector<MatchCandidate> cands, bool same_kind_only,
                                              double radius_scale = 1.0);

// Keeps candidates whose centre is within `proximity` pixels of the path.
// Infinite proximity keeps everything.
std::vector<MatchCandidate> filter_by_region(std::span<const MatchCandidate> cands, const IndoorPath& path,
                                             double proximity);

// Scale factor mapping a template to a plan with the given DPI and drawing
// scale (drawing inches per real foot); 1 when the hint is missing.
double template_base_scale(const Template& t, double dpi, double scale_in_per_ft);

}  // namespace beaconmap
