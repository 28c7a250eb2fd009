#include "beaconmap/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <regex>
#include <set>

namespace beaconmap {

namespace {

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + text + "'");
  }
  if (used != text.size()) throw ValidationError("not a number: '" + text + "'");
  return v;
}

// "1/16", "0.25", "3"
double parse_fraction(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_number(text);
  const double num = parse_number(text.substr(0, slash));
  const double den = parse_number(text.substr(slash + 1));
  if (den == 0.0) throw ValidationError("zero denominator in '" + text + "'");
  return num / den;
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

double parse_scale(const std::string& raw) {
  std::string text;
  for (char c : raw) {
    if (c != ' ' && c != '"') text += c;
  }
  if (text.empty()) throw ValidationError("scale is empty");
  double value = 0.0;
  static const std::regex kDrawing(R"(^([0-9./]+)(?:in)?=([0-9./]+)(?:ft|')?$)");
  static const std::regex kRatio(R"(^([0-9.]+):([0-9.]+)$)");
  std::smatch m;
  if (std::regex_match(text, m, kDrawing)) {
    const double feet = parse_fraction(m[2]);
    if (feet == 0.0) throw ValidationError("scale: zero feet");
    value = parse_fraction(m[1]) / feet;
  } else if (std::regex_match(text, m, kRatio)) {
    const double a = parse_number(m[1]);
    const double b = parse_number(m[2]);
    if (b == 0.0) throw ValidationError("scale: zero ratio");
    value = 12.0 * a / b;
  } else {
    value = parse_fraction(text);
  }
  if (!(value > 0.0) || !std::isfinite(value)) throw ValidationError("scale must be positive: '" + raw + "'");
  return value;
}

double parse_orientation(const std::string& text) {
  if (text == "N" || text == "n") return 0.0;
  if (text == "E" || text == "e") return 90.0;
  if (text == "S" || text == "s") return 180.0;
  if (text == "W" || text == "w") return 270.0;
  const double deg = parse_number(text);
  if (!std::isfinite(deg)) throw ValidationError("orientation must be finite");
  return std::fmod(std::fmod(deg, 360.0) + 360.0, 360.0);
}

int auto_prune_length(const IndoorPath& path, const BinaryImage& thinned) {
  const auto dist = distance_transform_sq(path.mask.inverted());
  std::vector<double> radii;
  for (int y = 0; y < thinned.height(); ++y) {
    for (int x = 0; x < thinned.width(); ++x) {
      if (thinned.at(x, y)) radii.push_back(std::sqrt(dist[static_cast<std::size_t>(y) * thinned.width() + x]));
    }
  }
  if (radii.empty()) return 0;
  auto mid = radii.begin() + static_cast<std::ptrdiff_t>(radii.size() / 2);
  std::nth_element(radii.begin(), mid, radii.end());
  return static_cast<int>(std::ceil(2.0 * *mid));
}

ConnectivityGraph build_graph(const Skeleton& skel, const ZoneLevelMap* zones, std::vector<BeaconNode> pois,
                              const PlanMeta& meta, const PlannerConfig& cfg) {
  ConnectivityGraph g;
  g.dpi = meta.dpi;
  g.scale = meta.scale;
  g.map_orientation = meta.map_orientation;
  int next = 0;
  for (const auto& p : pois) next = std::max(next, p.id + 1);
  std::set<Pixel> taken;
  for (const auto& p : pois) taken.insert(p.pixel);
  g.nodes = std::move(pois);
  // A PoI sitting exactly on a junction already marks it.
  for (auto& n : find_intersections(skel, next)) {
    if (!taken.count(n.pixel)) g.nodes.push_back(std::move(n));
  }
  TraceContext ctx{&skel, zones, meta.map_orientation};
  g = merge_close(g, ctx, cfg.merge_radius_m);
  return insert_spacers(g, cfg.max_spacing_ft);
}

PlanResult plan_beacons(const GrayImage& plan, const PlanMeta& meta, const std::vector<Zone>& zones,
                        const PlannerConfig& cfg, std::span<const Template> templates,
                        std::span<const SvmModel> models, const ProgressFn& progress) {
  if (plan.empty()) throw DimensionError("plan image is empty");
  if (!(meta.dpi > 0.0)) throw ValidationError("dpi must be positive");
  if (!(meta.scale > 0.0)) throw ValidationError("scale must be positive");
  validate_zones(zones, plan.width(), plan.height());
  auto report = [&](double f, const char* phase) {
    if (progress) progress(f, phase);
  };

  PlanResult r;
  Stopwatch clock;

  // Phase 1: indoor path.
  const BinaryImage ink = binarize(plan, cfg.threshold);
  const BinaryImage blocked = apply_zones(ink, zones, cfg.access_cutoff);
  r.zone_map = zone_levels(zones, plan.width(), plan.height(), cfg.access_cutoff);
  r.path = extract_indoor_path(label_regions(blocked, LabelTarget::FreeSpace, Connectivity::Four));
  r.timings.push_back({"path", clock.lap()});
  report(0.2, "path");

  // Phase 2: building blocks.
  PipelineConfig pc = cfg.pipeline;
  pc.match.dpi = meta.dpi;
  pc.match.drawing_scale = meta.scale;
  const bool path_only = pc.mode == DetectionMode::PathOnly;
  auto cands = run_pipeline(plan, &r.path, pc, templates, models);
  if (!path_only) {
    // Whole-plan detections must lie in a room or by the corridor, not in the
    // page margin or title block.
    const auto rooms = segment_rooms(blocked, r.path, default_min_room_area(plan.width(), plan.height()),
                                     cfg.room_dilation);
    const auto near_path = distance_transform_sq(r.path.mask);
    const double reach = pc.proximity > 0.0 ? pc.proximity : 0.0;
    std::erase_if(cands, [&](const MatchCandidate& c) {
      const double lim = std::max(reach, 0.5 * std::max(c.width, c.height));
      if (near_path[static_cast<std::size_t>(c.y) * plan.width() + c.x] <= lim * lim) return false;
      for (const auto& room : rooms) {
        const int lx = c.x - room.bbox.x0;
        const int ly = c.y - room.bbox.y0;
        if (room.mask.get(lx, ly)) return false;
      }
      return true;
    });
  }
  r.candidates = std::move(cands);
  r.timings.push_back({"detect", clock.lap()});
  report(0.7, "detect");

  // Phase 3: skeleton and node placement.
  const BinaryImage thinned = thin(r.path.mask);
  const int prune = cfg.prune_length >= 0 ? cfg.prune_length : auto_prune_length(r.path, thinned);
  r.skeleton = make_skeleton(prune > 0 ? thin(prune_spurs(thinned, prune)) : thinned);
  auto pois = map_to_skeleton(r.candidates, r.skeleton, 0);
  r.timings.push_back({"skeleton", clock.lap()});
  report(0.85, "skeleton");

  // Phase 4: edges, merging, spacers.
  r.graph = build_graph(r.skeleton, &r.zone_map, std::move(pois), meta, cfg);
  r.timings.push_back({"graph", clock.lap()});
  report(1.0, "graph");
  return r;
}

}  // namespace beaconmap
