#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "beaconmap/detect.hpp"
#include "beaconmap/image.hpp"
#include "beaconmap/pathfind.hpp"

namespace beaconmap {

// How a classifier treats patch orientation. Dihedral scores a patch as the
// best of its 8 rotations/mirrorings, so one weight vector covers a symbol in
// every orientation.
enum class PatchSymmetry { None, Dihedral };

// Linear one-vs-all classifier over normalised square patches.
struct SvmModel {
  std::vector<double> weights;  // patch_size * patch_size
  double bias = 0.0;
  int patch_size = 0;
  std::string positive_kind;
  PatchSymmetry symmetry = PatchSymmetry::None;
  bool trained = false;

  friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

struct SvmOptions {
  double reg = 1e-3;  // L2 weight on the soft-margin objective
  int iterations = 400;
  double learning_rate = 1.0;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 42;
  PatchSymmetry symmetry = PatchSymmetry::None;
  int alignment_rounds = 3;  // dihedral only: positive re-alignment passes
};

struct LabeledPatch {
  GrayImage patch;
  int label = 0;  // +1 or -1
};

struct LabeledVector {
  std::vector<double> x;
  int label = 0;
};

struct Classification {
  int label = 0;
  double margin = 0.0;
};

// Minimises reg/2 |w|^2 + mean hinge loss by deterministic subgradient
// descent and returns the averaged iterate. Vectors are used as given.
SvmModel train_svm_vectors(std::span<const LabeledVector> samples, const std::string& positive_kind,
                           const SvmOptions& options = {});

// Patch front end: every patch must be square and the same size; each is
// normalised to zero mean and unit norm before training.
SvmModel train_svm(std::span<const LabeledPatch> samples, const std::string& positive_kind,
                   const SvmOptions& options = {});

Classification classify_vector(const SvmModel& model, std::span<const double> x);

// Resamples to the model's patch size when needed, normalises, and scores.
Classification classify_patch(const SvmModel& model, const GrayImage& patch);

// Zero-mean, unit-norm flattening; constant patches map to all zeros.
std::vector<double> normalize_patch(const GrayImage& patch);

// Square crop centred at (cx, cy); pixels outside the image read as white.
GrayImage crop_patch(const GrayImage& img, int cx, int cy, int size);

// Flattened-vector index permutation for a dihedral transform of a square
// patch (same numbering as transform_patch).
std::vector<int> dihedral_permutation(int size, int orientation);

struct ClusterSet {
  std::vector<Point2> centroids;
  std::vector<int> assignments;  // feature index -> centroid index
  int k = 0;
  int initial_k = 0;
  // Sum of squared point-to-centroid distances after each Lloyd assignment step of
  // the first Lloyd run.
  std::vector<double> inertia_history;
};

struct KMeansOptions {
  std::uint64_t seed = 42;
  int max_iterations = 100;
};

// K-Means starting from ceil(n/2) clusters; centroid pairs closer than
// `separation` are merged (closest first) and Lloyd iteration resumes until
// every centroid pair is at least `separation` apart.
ClusterSet kmeans_reduce(std::span<const FeaturePoint> features, double separation, const KMeansOptions& options = {});

enum class DetectionOption { Fdm = 1, FdmSml = 2, FdSml = 3 };
enum class DetectionMode { PathOnly, FullPlan };

const char* to_string(DetectionOption o);
const char* to_string(DetectionMode m);
DetectionOption parse_option(int value);
DetectionMode parse_mode(const std::string& text);

struct PipelineConfig {
  DetectionOption option = DetectionOption::Fdm;
  DetectionMode mode = DetectionMode::PathOnly;
  double quality = 0.05;
  double min_spacing = 0.0;  // 0 = half the smallest template dimension
  MatchOptions match;
  double proximity = 0.0;    // 0 = half the largest template extent
  double crop_factor = 1.5;  // SML crop size relative to the template
  double min_margin = 0.5;   // SML acceptance: classifier margin must exceed this
  double separation = 0.0;   // 0 = half the smallest template dimension
  int refine_radius = 12;    // FD+SML local search, in classifier pixels
  std::uint64_t seed = 42;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Feature detection and building-block recognition for one plan. In
// path-only mode `path` restricts results to the corridor neighbourhood.
std::vector<MatchCandidate> run_pipeline(const GrayImage& plan, const IndoorPath* path, const PipelineConfig& cfg,
                                         std::span<const Template> templates, std::span<const SvmModel> models);

}  // namespace beaconmap
