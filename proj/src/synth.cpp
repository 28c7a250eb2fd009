#include "beaconmap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

namespace beaconmap {

namespace {

constexpr double kDpi = 200.0;
constexpr double kScale = 1.0 / 16.0;
constexpr double kPxPerFoot = kDpi * kScale;

// Door patch layout (canonical orientation).
constexpr int kDoorStub = 5;     // wall kept on each side of the opening
constexpr int kDoorMargin = 4;   // corridor rows above the wall
constexpr int kDoorStroke = 3;   // leaf and arc thickness
constexpr int kDoorWidth = 2 * kDoorStub + kDoorOpening;                        // 47
constexpr int kDoorHeight = kDoorMargin + kWallThickness + kDoorOpening + 4;   // 51

constexpr int kStairWidth = 49;
constexpr int kStairLength = 85;
constexpr int kStairMargin = 4;

void fill(GrayImage& img, int x0, int y0, int x1, int y1, std::uint8_t v) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width());
  y1 = std::min(y1, img.height());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.at(x, y) = v;
  }
}

void outline(GrayImage& img, int x0, int y0, int x1, int y1, int t) {
  fill(img, x0, y0, x1, y0 + t, 0);
  fill(img, x0, y1 - t, x1, y1, 0);
  fill(img, x0, y0, x0 + t, y1, 0);
  fill(img, x1 - t, y0, x1, y1, 0);
}

void stamp(GrayImage& img, const GrayImage& patch, int x0, int y0) {
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      if (img.contains(x0 + x, y0 + y)) img.at(x0 + x, y0 + y) = patch.at(x, y);
    }
  }
}

struct Rect {
  int x0, y0, x1, y1;  // half-open
  bool overlaps(const Rect& o, int pad = 0) const {
    return x0 - pad < o.x1 && o.x0 < x1 + pad && y0 - pad < o.y1 && o.y0 < y1 + pad;
  }
};

// Which side of a room faces its corridor: 0 up, 1 right, 2 down, 3 left
// (matches the quarter-turn count of the door orientation).
struct Room {
  Rect r;  // boundary lines; walls are centred on them
  int corridor_side = -1;
  bool alcove = false;
  std::vector<Rect> reserved;
};

}  // namespace

GrayImage render_door() {
  GrayImage p(kDoorWidth, kDoorHeight, 255);
  const int wall0 = kDoorMargin;
  const int wall1 = kDoorMargin + kWallThickness;
  fill(p, 0, wall0, kDoorStub, wall1, 0);
  fill(p, kDoorStub + kDoorOpening, wall0, kDoorWidth, wall1, 0);
  const double hx = kDoorStub, hy = wall1;  // hinge corner
  fill(p, kDoorStub, wall1, kDoorStub + kDoorStroke, wall1 + kDoorOpening, 0);
  for (int y = wall1; y < kDoorHeight; ++y) {
    for (int x = kDoorStub; x < kDoorWidth; ++x) {
      const double r = std::hypot(x + 0.5 - hx, y + 0.5 - hy);
      if (r <= kDoorOpening && r >= kDoorOpening - kDoorStroke) p.at(x, y) = 0;
    }
  }
  p.dpi_x = p.dpi_y = kDpi;
  return p;
}

GrayImage render_stair() {
  const int w = kStairWidth + 2 * kStairMargin;
  const int h = kStairLength + 2 * kStairMargin;
  GrayImage p(w, h, 255);
  const int x0 = kStairMargin, y0 = kStairMargin;
  outline(p, x0, y0, x0 + kStairWidth, y0 + kStairLength, 3);
  for (int k = 1; k * 12 < kStairLength - 6; ++k) {
    const int y = y0 + 1 + k * 12;
    fill(p, x0, y, x0 + kStairWidth, y + 2, 0);
  }
  p.dpi_x = p.dpi_y = kDpi;
  return p;
}

std::vector<Template> builtin_templates() {
  Template door;
  door.id = "door";
  door.kind = "door";
  door.patch = render_door();
  door.group = 0;
  door.physical_width_ft = door.patch.width() / kPxPerFoot;
  door.rotations = true;
  door.mirror = true;

  Template stair;
  stair.id = "stair";
  stair.kind = "stair";
  stair.patch = render_stair();
  stair.group = 1;
  stair.physical_width_ft = stair.patch.width() / kPxPerFoot;
  stair.rotations = true;
  stair.mirror = false;
  return {door, stair};
}

SynthPlan generate_plan(const SynthOptions& o) {
  if (o.width < 600 || o.height < 600) throw ValidationError("synthetic plan must be at least 600x600");
  if (o.poi_count < 0) throw ValidationError("poi_count must be non-negative");
  std::mt19937_64 rng(o.seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  SynthPlan out;
  out.image = GrayImage(o.width, o.height, 255);
  out.image.dpi_x = out.image.dpi_y = kDpi;
  out.meta = {kDpi, kScale, 0.0};
  GrayImage& img = out.image;

  const int margin = 150;
  const int X0 = margin, X1 = o.width - margin;
  const int Y0 = margin, Y1 = o.height - margin;
  const int cw = o.corridor_width;

  // Rows: room, corridor, room, room, corridor, ..., room.
  const int nc = std::clamp((Y1 - Y0) / 900, 1, 4);
  const int depth = (Y1 - Y0 - nc * cw) / (2 * nc);
  std::vector<int> corridor_y;  // top boundary line of each corridor
  for (int i = 0; i < nc; ++i) corridor_y.push_back(Y0 + depth * (2 * i + 1) + cw * i);

  // Vertical corridors join consecutive horizontal ones.
  const int nv = nc > 1 ? 1 + static_cast<int>((X1 - X0) > 1400) : 0;
  std::vector<int> vx;
  for (int k = 0; k < nv; ++k) {
    const int span = (X1 - X0) / nv;
    vx.push_back(X0 + span * k + uniform(span / 3, span * 2 / 3 - cw));
  }

  std::vector<Room> rooms;
  auto split_row = [&](int ry0, int ry1, int side, bool cut) {
    std::vector<std::pair<int, int>> segments;
    int start = X0;
    if (cut) {
      for (int v : vx) {
        segments.emplace_back(start, v);
        start = v + cw;
      }
    }
    segments.emplace_back(start, X1);
    for (auto [s0, s1] : segments) {
      int x = s0;
      while (x < s1) {
        int w = uniform(140, 280);
        if (s1 - (x + w) < 140) w = s1 - x;
        Room room;
        room.r = {x, ry0, x + w, ry1};
        room.corridor_side = side;
        rooms.push_back(room);
        x += w;
      }
    }
  };
  for (int i = 0; i < nc; ++i) {
    const int cy = corridor_y[i];
    split_row(cy - depth, cy, 2, i > 0);
    split_row(cy + cw, cy + cw + depth, 0, i + 1 < nc);
  }

  // Symbol sites.
  const int stairs_wanted = o.poi_count == 0 ? 0
                                             : std::max(1, static_cast<int>(std::lround(o.poi_count * o.stair_fraction)));
  std::vector<std::size_t> order(rooms.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int stairs = 0;
  for (std::size_t i : order) {
    if (stairs >= std::min(stairs_wanted, o.poi_count)) break;
    rooms[i].alcove = true;
    ++stairs;
  }

  struct DoorSlot {
    std::size_t room;
    int along;  // start of the patch along the wall
  };
  std::vector<DoorSlot> slots;
  const int pad = kWallThickness / 2 + 8;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    if (rooms[i].alcove) continue;
    const Rect& r = rooms[i].r;
    const int lo = r.x0 + pad, hi = r.x1 - pad - kDoorWidth;
    if (hi < lo) continue;
    if (hi - lo >= kDoorWidth + 40) {
      slots.push_back({i, uniform(lo, lo + (hi - lo) / 2 - kDoorWidth / 2 - 20)});
      slots.push_back({i, uniform(lo + (hi - lo) / 2 + kDoorWidth / 2 + 20, hi)});
    } else {
      slots.push_back({i, uniform(lo, hi)});
    }
  }
  std::shuffle(slots.begin(), slots.end(), rng);
  const int doors_wanted = std::min<int>(o.poi_count - stairs, static_cast<int>(slots.size()));
  slots.resize(static_cast<std::size_t>(std::max(doors_wanted, 0)));
  std::sort(slots.begin(), slots.end(), [](const DoorSlot& a, const DoorSlot& b) {
    return a.room != b.room ? a.room < b.room : a.along < b.along;
  });

  // Walls.
  outline(img, X0 - 3, Y0 - 3, X1 + 3, Y1 + 3, kWallThickness);
  for (const auto& room : rooms) {
    const Rect& r = room.r;
    outline(img, r.x0 - 3, r.y0 - 3, r.x1 + 3, r.y1 + 3, kWallThickness);
  }

  // Door placements (patch rectangles) before clutter so furniture avoids them.
  const GrayImage door = render_door();
  struct Placed {
    GrayImage patch;
    int x0, y0;
    GroundTruth truth;
  };
  std::vector<Placed> placed;
  for (const auto& s : slots) {
    Room& room = rooms[s.room];
    const int side = room.corridor_side;  // 0: corridor above, 2: below
    const int orientation = side + (uniform(0, 1) ? 4 : 0);
    GrayImage p = transform_patch(door, orientation);
    int y0 = 0;
    if (side == 0) {
      y0 = room.r.y0 - 3 - kDoorMargin;
    } else {
      y0 = room.r.y1 + 3 + kDoorMargin - p.height();
    }
    const int x0 = s.along;
    room.reserved.push_back({x0, y0, x0 + p.width(), y0 + p.height()});
    GroundTruth t{"door", x0 + p.width() / 2, y0 + p.height() / 2, orientation};
    placed.push_back({std::move(p), x0, y0, t});
  }

  const GrayImage stair = render_stair();
  for (auto& room : rooms) {
    if (!room.alcove) continue;
    const Rect& r = room.r;
    // Open the corridor-side wall.
    if (room.corridor_side == 0) {
      fill(img, r.x0 + 3, r.y0 - 3, r.x1 - 3, r.y0 + 3, 255);
    } else {
      fill(img, r.x0 + 3, r.y1 - 3, r.x1 - 3, r.y1 + 3, 255);
    }
    const int sx0 = (r.x0 + r.x1) / 2 - stair.width() / 2;
    const int gap = 16;
    const int sy0 = room.corridor_side == 0 ? r.y0 + 3 + gap : r.y1 - 3 - gap - stair.height();
    GroundTruth t{"stair", sx0 + stair.width() / 2, sy0 + stair.height() / 2, 0};
    placed.push_back({stair, sx0, sy0, t});
  }

  if (o.clutter) {
    for (const auto& room : rooms) {
      if (room.alcove) continue;
      const Rect& r = room.r;
      const int n = uniform(1, 3);
      std::vector<Rect> used = room.reserved;
      for (int k = 0; k < n; ++k) {
        const int w = uniform(50, 90), h = uniform(25, 45);
        const int lo_x = r.x0 + 20, hi_x = r.x1 - 20 - w;
        const int lo_y = r.y0 + 20, hi_y = r.y1 - 20 - h;
        if (hi_x <= lo_x || hi_y <= lo_y) continue;
        const Rect d{uniform(lo_x, hi_x), uniform(lo_y, hi_y), 0, 0};
        const Rect desk{d.x0, d.y0, d.x0 + w, d.y0 + h};
        if (std::any_of(used.begin(), used.end(), [&](const Rect& u) { return u.overlaps(desk, 12); })) continue;
        outline(img, desk.x0, desk.y0, desk.x1, desk.y1, 3);
        used.push_back(desk);
      }
      // Room number: a row of glyph-like blocks.
      const int chars = uniform(2, 4);
      const int tx = (r.x0 + r.x1) / 2 - chars * 5, ty = (r.y0 + r.y1) / 2;
      const Rect label{tx, ty, tx + chars * 10, ty + 9};
      if (std::none_of(used.begin(), used.end(), [&](const Rect& u) { return u.overlaps(label, 6); })) {
        for (int c = 0; c < chars; ++c) {
          fill(img, tx + c * 10, ty, tx + c * 10 + 6, ty + 2, 0);
          fill(img, tx + c * 10, ty, tx + c * 10 + 2, ty + 9, 0);
          fill(img, tx + c * 10, ty + 7, tx + c * 10 + 6, ty + 9, 0);
        }
      }
    }
    // Title block in the page margin.
    const int bx1 = o.width - 30, by1 = o.height - 30;
    outline(img, bx1 - 300, by1 - 80, bx1, by1, 3);
    fill(img, bx1 - 280, by1 - 55, bx1 - 120, by1 - 51, 0);
    fill(img, bx1 - 280, by1 - 35, bx1 - 180, by1 - 31, 0);
  }

  for (const auto& p : placed) {
    stamp(img, p.patch, p.x0, p.y0);
    out.truth.push_back(p.truth);
  }
  std::sort(out.truth.begin(), out.truth.end(), [](const GroundTruth& a, const GroundTruth& b) {
    return Pixel{a.x, a.y} < Pixel{b.x, b.y};
  });
  return out;
}

SynthPlan degrade(const SynthPlan& plan, int factor, double noise_sigma, std::uint64_t seed) {
  if (factor < 1) throw ValidationError("degrade factor must be >= 1");
  SynthPlan out;
  out.image = downsample(plan.image, factor);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  if (noise_sigma > 0.0) {
    for (auto& v : out.image.pixels()) v = static_cast<std::uint8_t>(std::clamp(std::lround(v + noise(rng)), 0L, 255L));
  }
  out.meta = plan.meta;
  out.meta.dpi = plan.meta.dpi / factor;
  for (auto t : plan.truth) {
    t.x /= factor;
    t.y /= factor;
    out.truth.push_back(t);
  }
  return out;
}

DetectionScore score_detections(std::span<const GroundTruth> truth, std::span<const MatchCandidate> cands,
                                double radius) {
  struct Pair {
    double d;
    std::size_t t, c;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (cands[c].kind != truth[t].kind) continue;
      const double d = std::hypot(cands[c].x - truth[t].x, cands[c].y - truth[t].y);
      if (d <= radius) pairs.push_back({d, t, c});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.d != b.d ? a.d < b.d : (a.t != b.t ? a.t < b.t : a.c < b.c);
  });
  std::vector<bool> t_used(truth.size()), c_used(cands.size());
  DetectionScore s;
  s.truth = static_cast<int>(truth.size());
  for (const auto& p : pairs) {
    if (t_used[p.t] || c_used[p.c]) continue;
    t_used[p.t] = c_used[p.c] = true;
    ++s.correct;
  }
  s.missed = s.truth - s.correct;
  s.redundant = static_cast<int>(cands.size()) - s.correct;
  return s;
}

std::vector<LabeledPatch> training_patches(const SynthPlan& plan, std::span<const Template> templates,
                                           const std::string& kind, const TrainingOptions& options) {
  MatchOptions mo;
  mo.dpi = plan.meta.dpi;
  mo.drawing_scale = plan.meta.scale;
  std::map<std::string, int> extent;
  for (const auto& t : templates) {
    const double f = template_base_scale(t, mo.dpi, mo.drawing_scale);
    const int e = static_cast<int>(std::lround(std::max(t.patch.width(), t.patch.height()) * f));
    extent[t.kind] = std::max(extent[t.kind], e);
  }
  if (!extent.count(kind)) throw ValidationError("no template of kind '" + kind + "'");
  const int crop = static_cast<int>(std::lround(options.crop_factor * extent[kind]));

  std::mt19937_64 rng(options.seed);
  auto jitter = [&]() { return std::uniform_int_distribution<int>(-options.jitter, options.jitter)(rng); };
  auto take = [&](int x, int y, int label, std::vector<LabeledPatch>& out) {
    GrayImage c = crop_patch(plan.image, x, y, crop);
    out.push_back({resample(c, options.patch_size, options.patch_size), label});
  };

  std::vector<LabeledPatch> out;
  for (const auto& t : plan.truth) {
    if (t.kind == kind) {
      for (int k = 0; k < 3; ++k) take(t.x + jitter(), t.y + jitter(), +1, out);
      // Off-centre crops of the same symbol teach the classifier to peak at
      // the centre.
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      std::uniform_real_distribution<double> reach(0.3 * extent[kind], 0.5 * extent[kind]);
      for (int k = 0; k < options.shifted_negatives; ++k) {
        const double a = angle(rng), r = reach(rng);
        take(t.x + static_cast<int>(std::lround(r * std::cos(a))), t.y + static_cast<int>(std::lround(r * std::sin(a))),
             -1, out);
      }
    } else {
      take(t.x, t.y, -1, out);
    }
  }
  auto near_truth = [&](int x, int y) {
    return std::any_of(plan.truth.begin(), plan.truth.end(), [&](const GroundTruth& t) {
      return t.kind == kind && std::hypot(t.x - x, t.y - y) < 0.35 * crop;
    });
  };
  FeatureOptions fo;
  fo.min_spacing = 0.25 * crop;
  auto features = detect_features(plan.image, fo);
  std::shuffle(features.begin(), features.end(), rng);
  int taken = 0;
  for (const auto& f : features) {
    if (taken >= options.negatives_per_plan) break;
    if (near_truth(f.x, f.y)) continue;
    take(f.x, f.y, -1, out);
    ++taken;
  }
  std::uniform_int_distribution<int> rx(0, plan.image.width() - 1), ry(0, plan.image.height() - 1);
  for (int k = 0; k < options.negatives_per_plan / 4; ++k) {
    const int x = rx(rng), y = ry(rng);
    if (!near_truth(x, y)) take(x, y, -1, out);
  }
  return out;
}

}  // namespace beaconmap
