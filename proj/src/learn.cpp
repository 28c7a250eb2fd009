#include "beaconmap/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace beaconmap {

// --- Linear SVM -------------------------------------------------------------

std::vector<int> dihedral_permutation(int size, int orientation) {
  // Transform a grid of source indices with the same moves as transform_patch.
  std::vector<int> grid(static_cast<std::size_t>(size) * size);
  std::iota(grid.begin(), grid.end(), 0);
  auto at = [size](std::vector<int>& g, int x, int y) -> int& { return g[static_cast<std::size_t>(y) * size + x]; };
  if (orientation >= 4) {
    std::vector<int> m(grid.size());
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) at(m, size - 1 - x, y) = at(grid, x, y);
    grid.swap(m);
  }
  for (int t = 0; t < orientation % 4; ++t) {
    std::vector<int> r(grid.size());
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) at(r, size - 1 - y, x) = at(grid, x, y);
    grid.swap(r);
  }
  return grid;
}

namespace {

const std::vector<std::vector<int>>& permutations_for(int size) {
  static thread_local std::map<int, std::vector<std::vector<int>>> cache;
  auto it = cache.find(size);
  if (it == cache.end()) {
    std::vector<std::vector<int>> perms;
    for (int o = 0; o < 8; ++o) perms.push_back(dihedral_permutation(size, o));
    it = cache.emplace(size, std::move(perms)).first;
  }
  return it->second;
}

std::vector<double> permuted(std::span<const double> x, const std::vector<int>& perm) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[static_cast<std::size_t>(perm[i])];
  return out;
}

double dot_permuted(std::span<const double> w, std::span<const double> x, const std::vector<int>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[static_cast<std::size_t>(perm[i])];
  return s;
}

void check_labels(std::span<const LabeledVector> samples) {
  if (samples.empty()) throw ValidationError("train_svm: no samples");
  bool pos = false, neg = false;
  const std::size_t dim = samples.front().x.size();
  for (const auto& s : samples) {
    if (s.label != 1 && s.label != -1) throw ValidationError("train_svm: labels must be +1 or -1");
    pos = pos || s.label == 1;
    neg = neg || s.label == -1;
    if (s.x.size() != dim) throw DimensionError("train_svm: inconsistent sample sizes");
  }
  if (!pos || !neg) throw ValidationError("train_svm: both classes are required");
  if (dim == 0) throw DimensionError("train_svm: empty samples");
}

}  // namespace

SvmModel train_svm_vectors(std::span<const LabeledVector> samples, const std::string& positive_kind,
                           const SvmOptions& options) {
  check_labels(samples);
  if (!(options.reg > 0.0)) throw ValidationError("train_svm: regularisation must be positive");
  if (options.iterations < 1) throw ValidationError("train_svm: iterations must be positive");
  const std::size_t n = samples.size();
  const std::size_t dim = samples.front().x.size();
  const std::size_t batch = options.batch_size == 0 ? n : std::min(options.batch_size, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);

  std::vector<double> w(dim, 0.0), w_avg(dim, 0.0), grad(dim);
  double b = 0.0, b_avg = 0.0;
  int averaged = 0;
  std::size_t cursor = n;
  for (int t = 0; t < options.iterations; ++t) {
    if (batch < n && cursor + batch > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    } else if (batch == n) {
      cursor = 0;
    }
    const double eta = options.learning_rate / (1.0 + options.reg * options.learning_rate * t);
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t k = 0; k < batch; ++k) {
      const auto& s = samples[order[cursor + k]];
      double f = b;
      for (std::size_t i = 0; i < dim; ++i) f += w[i] * s.x[i];
      if (s.label * f < 1.0) {
        for (std::size_t i = 0; i < dim; ++i) grad[i] -= s.label * s.x[i];
        grad_b -= s.label;
      }
    }
    cursor += batch;
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < dim; ++i) w[i] -= eta * (options.reg * w[i] + grad[i] * inv);
    b -= eta * grad_b * inv;
    if (t >= options.iterations / 2) {
      ++averaged;
      const double a = 1.0 / averaged;
      for (std::size_t i = 0; i < dim; ++i) w_avg[i] += (w[i] - w_avg[i]) * a;
      b_avg += (b - b_avg) * a;
    }
  }

  SvmModel model;
  model.weights = std::move(w_avg);
  model.bias = b_avg;
  model.positive_kind = positive_kind;
  const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  model.patch_size = static_cast<std::size_t>(side) * side == dim ? side : 0;
  model.trained = true;
  return model;
}

std::vector<double> normalize_patch(const GrayImage& patch) {
  std::vector<double> v(patch.pixels().begin(), patch.pixels().end());
  if (v.empty()) return v;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double norm = 0.0;
  for (auto& x : v) {
    x -= mean;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm <= 1e-12) {
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

SvmModel train_svm(std::span<const LabeledPatch> samples, const std::string& positive_kind,
                   const SvmOptions& options) {
  if (samples.empty()) throw ValidationError("train_svm: no samples");
  const int size = samples.front().patch.width();
  for (const auto& s : samples) {
    if (s.patch.width() != size || s.patch.height() != size || size <= 0) {
      throw DimensionError("train_svm: patches must be square and uniform in size");
    }
  }
  std::vector<LabeledVector> vectors;
  vectors.reserve(samples.size());
  for (const auto& s : samples) vectors.push_back({normalize_patch(s.patch), s.label});

  if (options.symmetry == PatchSymmetry::None) {
    SvmModel model = train_svm_vectors(vectors, positive_kind, options);
    model.patch_size = size;
    return model;
  }

  // Dihedral: negatives in every orientation; positives re-aligned to the
  // orientation the current model prefers.
  check_labels(vectors);
  const auto& perms = permutations_for(size);
  std::vector<LabeledVector> negatives, positives;
  for (const auto& v : vectors) {
    if (v.label < 0) {
      for (const auto& p : perms) negatives.push_back({permuted(v.x, p), -1});
    } else {
      positives.push_back(v);
    }
  }
  SvmModel model;
  std::vector<LabeledVector> train;
  for (int round = 0; round <= options.alignment_rounds; ++round) {
    train = negatives;
    for (const auto& v : positives) {
      if (round == 0) {
        train.push_back(v);
        continue;
      }
      int best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int o = 0; o < 8; ++o) {
        const double s = dot_permuted(model.weights, v.x, perms[o]);
        if (s > best_score) {
          best_score = s;
          best = o;
        }
      }
      train.push_back({permuted(v.x, perms[best]), 1});
    }
    model = train_svm_vectors(train, positive_kind, options);
  }
  model.patch_size = size;
  model.symmetry = PatchSymmetry::Dihedral;
  return model;
}

Classification classify_vector(const SvmModel& model, std::span<const double> x) {
  if (!model.trained) throw ValidationError("classify: model is not trained");
  if (x.size() != model.weights.size()) throw DimensionError("classify: vector length does not match model");
  double margin = 0.0;
  if (model.symmetry == PatchSymmetry::Dihedral && model.patch_size > 0) {
    margin = -std::numeric_limits<double>::infinity();
    for (const auto& p : permutations_for(model.patch_size)) margin = std::max(margin, dot_permuted(model.weights, x, p));
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) margin += model.weights[i] * x[i];
  }
  margin += model.bias;
  return {margin > 0.0 ? 1 : -1, margin};
}

Classification classify_patch(const SvmModel& model, const GrayImage& patch) {
  if (!model.trained) throw ValidationError("classify: model is not trained");
  if (patch.empty()) throw DimensionError("classify: empty patch");
  if (patch.width() == model.patch_size && patch.height() == model.patch_size) {
    return classify_vector(model, normalize_patch(patch));
  }
  return classify_vector(model, normalize_patch(resample(patch, model.patch_size, model.patch_size)));
}

GrayImage crop_patch(const GrayImage& img, int cx, int cy, int size) {
  GrayImage out(size, size, 255);
  const int x0 = cx - size / 2;
  const int y0 = cy - size / 2;
  for (int y = 0; y < size; ++y) {
    const int sy = y0 + y;
    if (sy < 0 || sy >= img.height()) continue;
    for (int x = 0; x < size; ++x) {
      const int sx = x0 + x;
      if (sx >= 0 && sx < img.width()) out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

// --- K-Means ----------------------------------------------------------------

namespace {

double dist_sq(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Lloyd iterations to a fixed point. Empty clusters are dropped.
void lloyd(std::span<const Point2> pts, std::vector<Point2>& centroids, std::vector<int>& assign, int max_iterations,
           std::vector<double>* history) {
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = dist_sq(pts[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
      inertia += best_d;
    }
    if (history) history->push_back(inertia);

    std::vector<Point2> sums(centroids.size());
    std::vector<int> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sums[assign[i]].x += pts[i].x;
      sums[assign[i]].y += pts[i].y;
      ++counts[assign[i]];
    }
    std::vector<Point2> next;
    std::vector<int> remap(centroids.size(), -1);
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;
      remap[c] = static_cast<int>(next.size());
      next.push_back({sums[c].x / counts[c], sums[c].y / counts[c]});
    }
    if (next.size() != centroids.size()) {
      for (auto& a : assign) a = remap[a];
      changed = true;
    } else if (!changed) {
      // Means of a stable partition: already at the fixed point.
      centroids = std::move(next);
      return;
    }
    centroids = std::move(next);
  }
}

}  // namespace

ClusterSet kmeans_reduce(std::span<const FeaturePoint> features, double separation, const KMeansOptions& options) {
  ClusterSet out;
  const std::size_t n = features.size();
  if (n == 0) return out;
  std::vector<Point2> pts;
  pts.reserve(n);
  for (const auto& f : features) pts.push_back({static_cast<double>(f.x), static_cast<double>(f.y)});

  const std::size_t k0 = (n + 1) / 2;
  out.initial_k = static_cast<int>(k0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Point2> centroids;
  for (std::size_t i = 0; i < k0; ++i) centroids.push_back(pts[order[i]]);

  std::vector<int> assign(n, -1);
  lloyd(pts, centroids, assign, options.max_iterations, &out.inertia_history);

  const double sep_sq = separation * separation;
  while (centroids.size() > 1) {
    struct Pair {
      double d;
      std::size_t a, b;
    };
    std::vector<Pair> close;
    for (std::size_t a = 0; a < centroids.size(); ++a) {
      for (std::size_t b = a + 1; b < centroids.size(); ++b) {
        const double d = dist_sq(centroids[a], centroids[b]);
        if (d < sep_sq) close.push_back({d, a, b});
      }
    }
    if (close.empty()) break;
    std::sort(close.begin(), close.end(), [](const Pair& p, const Pair& q) {
      if (p.d != q.d) return p.d < q.d;
      return p.a != q.a ? p.a < q.a : p.b < q.b;
    });
    std::vector<int> counts(centroids.size(), 0);
    for (int a : assign) ++counts[a];
    std::vector<bool> used(centroids.size(), false), dead(centroids.size(), false);
    for (const auto& p : close) {
      if (used[p.a] || used[p.b]) continue;
      used[p.a] = used[p.b] = true;
      const double wa = std::max(counts[p.a], 1), wb = std::max(counts[p.b], 1);
      centroids[p.a] = {(centroids[p.a].x * wa + centroids[p.b].x * wb) / (wa + wb),
                        (centroids[p.a].y * wa + centroids[p.b].y * wb) / (wa + wb)};
      dead[p.b] = true;
    }
    std::vector<Point2> merged;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (!dead[c]) merged.push_back(centroids[c]);
    }
    centroids = std::move(merged);
    std::fill(assign.begin(), assign.end(), -1);
    lloyd(pts, centroids, assign, options.max_iterations, nullptr);
  }

  out.centroids = std::move(centroids);
  out.assignments = std::move(assign);
  out.k = static_cast<int>(out.centroids.size());
  return out;
}

// --- Pipeline ---------------------------------------------------------------

const char* to_string(DetectionOption o) {
  switch (o) {
    case DetectionOption::Fdm:
      return "FDM";
    case DetectionOption::FdmSml:
      return "FDM+SML";
    case DetectionOption::FdSml:
      return "FD+SML";
  }
  return "?";
}

const char* to_string(DetectionMode m) { return m == DetectionMode::PathOnly ? "path-only" : "full"; }

DetectionOption parse_option(int value) {
  if (value < 1 || value > 3) throw ValidationError("option must be 1, 2 or 3");
  return static_cast<DetectionOption>(value);
}

DetectionMode parse_mode(const std::string& text) {
  if (text == "path-only" || text == "path") return DetectionMode::PathOnly;
  if (text == "full" || text == "full-plan") return DetectionMode::FullPlan;
  throw ValidationError("mode must be path-only or full");
}

namespace {

struct KindGeometry {
  int width = 0;
  int height = 0;
};

// Template footprint per kind at plan scale (largest template of the kind).
std::map<std::string, KindGeometry> kind_geometry(std::span<const Template> templates, const MatchOptions& match) {
  std::map<std::string, KindGeometry> out;
  for (const auto& t : templates) {
    const double f = template_base_scale(t, match.dpi, match.drawing_scale);
    auto& g = out[t.kind];
    g.width = std::max(g.width, static_cast<int>(std::lround(t.patch.width() * f)));
    g.height = std::max(g.height, static_cast<int>(std::lround(t.patch.height() * f)));
  }
  return out;
}

// Single-linkage groups of features closer than `link`.
std::vector<std::vector<FeaturePoint>> link_groups(std::span<const FeaturePoint> features, double link) {
  const std::size_t n = features.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const int cell = std::max(1, static_cast<int>(std::ceil(link)));
  std::map<std::pair<int, int>, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < n; ++i) grid[{features[i].x / cell, features[i].y / cell}].push_back(i);
  const double link_sq = link * link;
  for (std::size_t i = 0; i < n; ++i) {
    const int gx = features[i].x / cell, gy = features[i].y / cell;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        auto it = grid.find({gx + dx, gy + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          const double ddx = features[i].x - features[j].x, ddy = features[i].y - features[j].y;
          if (ddx * ddx + ddy * ddy <= link_sq) parent[find(i)] = find(j);
        }
      }
    }
  }
  std::map<std::size_t, std::vector<FeaturePoint>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(features[i]);
  std::vector<std::vector<FeaturePoint>> out;
  for (auto& [root, g] : groups) out.push_back(std::move(g));
  return out;
}

const SvmModel* model_for(std::span<const SvmModel> models, const std::string& kind) {
  for (const auto& m : models) {
    if (m.positive_kind == kind) return &m;
  }
  return nullptr;
}

// Classifier over a plan pre-scaled so that one crop window maps onto the
// model's patch size.
constexpr int kMaxClimbRounds = 8;

class ScaledClassifier {
 public:
  ScaledClassifier(const GrayImage& plan, const SvmModel& model, int crop_size)
      : plan_(plan), model_(model), crop_(crop_size), factor_(static_cast<double>(model.patch_size) / crop_size) {
    scaled_ = resample(plan, std::max(1, static_cast<int>(std::lround(plan.width() * factor_))),
                       std::max(1, static_cast<int>(std::lround(plan.height() * factor_))));
  }

  // Best margin near (x, y) in plan coordinates: a coarse scan every second
  // scaled pixel within `radius`, then a hill-climb over the 8-neighbourhood
  // until the peak stops moving. The winning location is written back in plan
  // coordinates.
  double best_margin(double x, double y, int radius, int& out_x, int& out_y) const {
    const int cx = static_cast<int>(std::lround((x + 0.5) * factor_ - 0.5));
    const int cy = static_cast<int>(std::lround((y + 0.5) * factor_ - 0.5));
    std::map<std::pair<int, int>, double> seen;
    auto margin_at = [&](int px, int py) {
      auto [it, fresh] = seen.try_emplace({px, py}, 0.0);
      if (fresh) {
        it->second = classify_vector(model_, normalize_patch(crop_patch(scaled_, px, py, model_.patch_size))).margin;
      }
      return it->second;
    };
    int bx = cx, by = cy;
    double best = margin_at(cx, cy);
    for (int dy = -radius; dy <= radius; dy += 2) {
      for (int dx = -radius; dx <= radius; dx += 2) {
        const double m = margin_at(cx + dx, cy + dy);
        if (m > best) {
          best = m;
          bx = cx + dx;
          by = cy + dy;
        }
      }
    }
    for (int round = 0; round < kMaxClimbRounds; ++round) {
      const int px = bx, py = by;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double m = margin_at(px + dx, py + dy);
          if (m > best) {
            best = m;
            bx = px + dx;
            by = py + dy;
          }
        }
      }
      if (bx == px && by == py) break;
    }
    out_x = static_cast<int>(std::lround((bx + 0.5) / factor_ - 0.5));
    out_y = static_cast<int>(std::lround((by + 0.5) / factor_ - 0.5));
    return refine(out_x, out_y);
  }

  // Hill-climb in plan pixels with crops taken exactly as in training: crop
  // at plan resolution, then resample to the model's patch size.
  double refine(int& x, int& y) const {
    std::map<std::pair<int, int>, double> seen;
    auto margin_at = [&](int px, int py) {
      auto [it, fresh] = seen.try_emplace({px, py}, 0.0);
      if (fresh) it->second = classify_patch(model_, crop_patch(plan_, px, py, crop_)).margin;
      return it->second;
    };
    double best = margin_at(x, y);
    const int step = std::max(1, static_cast<int>(std::lround(0.5 / factor_)));
    for (int round = 0; round < 2 * kMaxClimbRounds; ++round) {
      const int px = x, py = y;
      for (int dy = -step; dy <= step; dy += step) {
        for (int dx = -step; dx <= step; dx += step) {
          const double m = margin_at(px + dx, py + dy);
          if (m > best) {
            best = m;
            x = px + dx;
            y = py + dy;
          }
        }
      }
      if (x == px && y == py) break;
    }
    return best;
  }

 private:
  const GrayImage& plan_;
  const SvmModel& model_;
  int crop_;
  double factor_;
  GrayImage scaled_;
};

}  // namespace

std::vector<MatchCandidate> run_pipeline(const GrayImage& plan, const IndoorPath* path, const PipelineConfig& cfg,
                                         std::span<const Template> templates, std::span<const SvmModel> models) {
  const bool needs_templates = cfg.option != DetectionOption::FdSml;
  const bool needs_model = cfg.option != DetectionOption::Fdm;
  if (needs_templates && templates.empty()) throw ValidationError("template set required");
  if (needs_model && models.empty()) throw ValidationError("model required");
  for (const auto& m : models) {
    if (!m.trained) throw ValidationError("model required: " + m.positive_kind + " is untrained");
  }
  const bool path_only = cfg.mode == DetectionMode::PathOnly;
  if (path_only && path == nullptr) throw ValidationError("path-only detection needs an indoor path");
  if (plan.empty()) return {};

  auto geometry = kind_geometry(templates, cfg.match);
  for (const auto& m : models) {
    if (!geometry.count(m.positive_kind)) geometry[m.positive_kind] = {m.patch_size, m.patch_size};
  }
  int min_dim = std::numeric_limits<int>::max();
  int max_extent = 0;
  for (const auto& [kind, g] : geometry) {
    min_dim = std::min({min_dim, g.width, g.height});
    max_extent = std::max({max_extent, g.width, g.height});
  }
  if (geometry.empty()) return {};

  FeatureOptions fo;
  fo.quality = cfg.quality;
  fo.min_spacing = cfg.min_spacing > 0.0 ? cfg.min_spacing : 0.5 * min_dim;
  auto features = detect_features(plan, fo);
  const double proximity = cfg.proximity > 0.0 ? cfg.proximity : 0.5 * max_extent;

  if (path_only) {
    // A candidate centre within `proximity` of the path comes from a feature
    // within proximity + template extent of it.
    const auto dist = distance_transform_sq(path->mask);
    const double reach = proximity + max_extent * 1.5;
    std::erase_if(features, [&](const FeaturePoint& f) {
      return dist[static_cast<std::size_t>(f.y) * plan.width() + f.x] > reach * reach;
    });
  }

  std::vector<MatchCandidate> cands;
  if (cfg.option != DetectionOption::FdSml) {
    cands = match_templates(plan, features, templates, cfg.match);
    if (path_only) cands = filter_by_region(cands, *path, proximity);
    cands = suppress_overlaps(std::move(cands), false);
    if (cfg.option == DetectionOption::FdmSml) {
      std::vector<MatchCandidate> kept;
      for (auto& c : cands) {
        const SvmModel* m = model_for(models, c.kind);
        if (m != nullptr) {
          const int size = static_cast<int>(std::lround(cfg.crop_factor * std::max(c.width, c.height)));
          if (classify_patch(*m, crop_patch(plan, c.x, c.y, size)).margin <= cfg.min_margin) continue;
        }
        c.source = PipelineSource::FdmSml;
        kept.push_back(std::move(c));
      }
      cands = std::move(kept);
    }
    return cands;
  }

  const double separation = cfg.separation > 0.0 ? cfg.separation : 0.5 * min_dim;
  std::vector<Point2> sites;
  KMeansOptions ko;
  ko.seed = cfg.seed;
  for (const auto& group : link_groups(features, 2.0 * separation)) {
    const auto clusters = kmeans_reduce(group, separation, ko);
    sites.insert(sites.end(), clusters.centroids.begin(), clusters.centroids.end());
  }
  for (const auto& m : models) {
    const auto& g = geometry[m.positive_kind];
    const int crop = static_cast<int>(std::lround(cfg.crop_factor * std::max(g.width, g.height)));
    const ScaledClassifier classifier(plan, m, crop);
    for (const auto& s : sites) {
      int x = 0, y = 0;
      const double margin = classifier.best_margin(s.x, s.y, cfg.refine_radius, x, y);
      if (margin <= cfg.min_margin || !plan.contains(x, y)) continue;
      MatchCandidate c;
      c.x = x;
      c.y = y;
      c.kind = m.positive_kind;
      c.score = 1.0 / (1.0 + margin);
      c.source = PipelineSource::FdSml;
      c.width = g.width;
      c.height = g.height;
      cands.push_back(std::move(c));
    }
  }
  if (path_only) cands = filter_by_region(cands, *path, proximity);
  return suppress_overlaps(std::move(cands), false);
}

}  // namespace beaconmap
