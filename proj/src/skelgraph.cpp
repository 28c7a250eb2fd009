#include "beaconmap/skelgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <unordered_map>

namespace beaconmap {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

constexpr std::array<std::array<int, 2>, 8> kNeighbours = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

std::int64_t key_of(Pixel p) { return (static_cast<std::int64_t>(p.y) << 32) | static_cast<std::uint32_t>(p.x); }

}  // namespace

// --- Directions ---------------------------------------------------------------

const char* to_string(Dir d) {
  static constexpr const char* kNames[] = {"E", "W", "N", "S", "NE", "NW", "SE", "SW"};
  return kNames[static_cast<int>(d)];
}

Dir parse_dir(const std::string& s) {
  for (Dir d : kAllDirs) {
    if (s == to_string(d)) return d;
  }
  throw ValidationError("unknown direction '" + s + "'");
}

Dir reverse(Dir d) {
  switch (d) {
    case Dir::E: return Dir::W;
    case Dir::W: return Dir::E;
    case Dir::N: return Dir::S;
    case Dir::S: return Dir::N;
    case Dir::NE: return Dir::SW;
    case Dir::SW: return Dir::NE;
    case Dir::NW: return Dir::SE;
    case Dir::SE: return Dir::NW;
  }
  return d;
}

std::array<int, 2> dir_offset(Dir d) {
  switch (d) {
    case Dir::E: return {1, 0};
    case Dir::W: return {-1, 0};
    case Dir::N: return {0, -1};
    case Dir::S: return {0, 1};
    case Dir::NE: return {1, -1};
    case Dir::NW: return {-1, -1};
    case Dir::SE: return {1, 1};
    case Dir::SW: return {-1, 1};
  }
  return {0, 0};
}

std::optional<Dir> dir_from_offset(int dx, int dy) {
  for (Dir d : kAllDirs) {
    const auto o = dir_offset(d);
    if (o[0] == dx && o[1] == dy) return d;
  }
  return std::nullopt;
}

double step_length(Dir d) {
  const auto o = dir_offset(d);
  return (o[0] != 0 && o[1] != 0) ? kSqrt2 : 1.0;
}

namespace {

double length_of(const DirCounts& c) {
  std::int64_t axial = 0, diagonal = 0;
  for (Dir d : kAllDirs) (step_length(d) == 1.0 ? axial : diagonal) += c[static_cast<int>(d)];
  return static_cast<double>(axial) + static_cast<double>(diagonal) * kSqrt2;
}

DirCounts count_steps(std::span<const Dir> steps) {
  DirCounts c{};
  for (Dir d : steps) ++c[static_cast<int>(d)];
  return c;
}

}  // namespace

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Poi: return "poi";
    case NodeKind::Intersection: return "intersection";
    case NodeKind::Spacer: return "spacer";
  }
  return "?";
}

const char* to_string(NodeOrigin o) { return o == NodeOrigin::Detected ? "detected" : "manual"; }

NodeKind parse_node_kind(const std::string& s) {
  if (s == "poi") return NodeKind::Poi;
  if (s == "intersection") return NodeKind::Intersection;
  if (s == "spacer") return NodeKind::Spacer;
  throw ValidationError("unknown node kind '" + s + "'");
}

NodeOrigin parse_node_origin(const std::string& s) {
  if (s == "detected") return NodeOrigin::Detected;
  if (s == "manual") return NodeOrigin::Manual;
  throw ValidationError("unknown node origin '" + s + "'");
}

// --- Skeleton -----------------------------------------------------------------

BinaryImage prune_spurs(const BinaryImage& mask, int max_length) {
  BinaryImage out = mask;
  std::vector<Pixel> doomed;
  std::vector<Pixel> branch;
  std::set<std::int64_t> visited;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || neighbor_count(mask, x, y) != 1) continue;
      branch.assign(1, {x, y});
      visited.clear();
      visited.insert(key_of({x, y}));
      Pixel cur{x, y};
      bool reached_junction = false;
      while (static_cast<int>(branch.size()) <= max_length) {
        std::vector<Pixel> next;
        for (const auto& o : kNeighbours) {
          const Pixel n{cur.x + o[0], cur.y + o[1]};
          if (mask.get(n.x, n.y) && !visited.count(key_of(n))) next.push_back(n);
        }
        if (next.empty()) break;  // the whole component is a line
        if (next.size() > 1 || neighbor_count(mask, next[0].x, next[0].y) > 2) {
          if (next.size() > 1) branch.pop_back();  // cur itself branches
          reached_junction = true;
          break;
        }
        cur = next[0];
        visited.insert(key_of(cur));
        branch.push_back(cur);
      }
      if (reached_junction && !branch.empty() && static_cast<int>(branch.size()) < max_length) {
        doomed.insert(doomed.end(), branch.begin(), branch.end());
      }
    }
  }
  for (const auto& p : doomed) out.set(p.x, p.y, false);
  return out;
}

Skeleton make_skeleton(BinaryImage mask) {
  Skeleton s;
  s.mask = std::move(mask);
  for (int y = 0; y < s.mask.height(); ++y) {
    for (int x = 0; x < s.mask.width(); ++x) {
      if (!s.mask.at(x, y)) continue;
      const int n = neighbor_count(s.mask, x, y);
      if (n >= 3) s.junctions.push_back({x, y});
      if (n == 1) s.endpoints.push_back({x, y});
    }
  }
  return s;
}

Skeleton skeletonize(const IndoorPath& path, int prune_length) {
  if (path.mask.empty() || path.mask.count() == 0) throw ValidationError("skeletonize: empty indoor path");
  BinaryImage mask = thin(path.mask);
  if (prune_length > 0) mask = thin(prune_spurs(mask, prune_length));
  return make_skeleton(std::move(mask));
}

// --- Node placement -------------------------------------------------------------

std::optional<Pixel> nearest_skeleton_pixel(const Skeleton& skel, Pixel p) {
  const BinaryImage& m = skel.mask;
  if (m.empty()) return std::nullopt;
  const int max_r = std::max({p.x + 1, m.width() - p.x, p.y + 1, m.height() - p.y});
  std::optional<Pixel> best;
  std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
  auto consider = [&](int x, int y) {
    if (!m.get(x, y)) return;
    const std::int64_t dx = x - p.x, dy = y - p.y;
    const std::int64_t d = dx * dx + dy * dy;
    const Pixel q{x, y};
    if (d < best_d || (d == best_d && q < *best)) {
      best_d = d;
      best = q;
    }
  };
  for (int r = 0; r <= max_r; ++r) {
    if (best && static_cast<std::int64_t>(r) * r > best_d) break;
    if (r == 0) {
      consider(p.x, p.y);
      continue;
    }
    for (int x = p.x - r; x <= p.x + r; ++x) {
      consider(x, p.y - r);
      consider(x, p.y + r);
    }
    for (int y = p.y - r + 1; y <= p.y + r - 1; ++y) {
      consider(p.x - r, y);
      consider(p.x + r, y);
    }
  }
  return best;
}

std::vector<BeaconNode> map_to_skeleton(std::span<const MatchCandidate> cands, const Skeleton& skel, int first_id) {
  if (skel.mask.empty() || skel.mask.count() == 0) throw ValidationError("map_to_skeleton: empty skeleton");
  std::vector<BeaconNode> nodes;
  nodes.reserve(cands.size());
  int id = first_id;
  for (const auto& c : cands) {
    const auto p = nearest_skeleton_pixel(skel, {c.x, c.y});
    BeaconNode n;
    n.id = id++;
    n.pixel = *p;
    n.kind = NodeKind::Poi;
    n.block_class = c.kind;
    n.origin = NodeOrigin::Detected;
    nodes.push_back(std::move(n));
  }
  return nodes;
}

std::vector<BeaconNode> find_intersections(const Skeleton& skel, int first_id) {
  std::set<Pixel> junctions(skel.junctions.begin(), skel.junctions.end());
  std::set<Pixel> seen;
  std::vector<BeaconNode> nodes;
  int id = first_id;
  for (const auto& start : junctions) {
    if (seen.count(start)) continue;
    std::vector<Pixel> cluster{start};
    seen.insert(start);
    for (std::size_t i = 0; i < cluster.size(); ++i) {
      for (const auto& o : kNeighbours) {
        const Pixel n{cluster[i].x + o[0], cluster[i].y + o[1]};
        if (junctions.count(n) && !seen.count(n)) {
          seen.insert(n);
          cluster.push_back(n);
        }
      }
    }
    double cx = 0.0, cy = 0.0;
    for (const auto& p : cluster) {
      cx += p.x;
      cy += p.y;
    }
    cx /= static_cast<double>(cluster.size());
    cy /= static_cast<double>(cluster.size());
    Pixel best = cluster.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& p : cluster) {
      const double d = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
      if (d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && p < best)) {
        best_d = d;
        best = p;
      }
    }
    BeaconNode n;
    n.id = id++;
    n.pixel = best;
    n.kind = NodeKind::Intersection;
    nodes.push_back(std::move(n));
  }
  return nodes;
}

// --- Orientation ----------------------------------------------------------------

int orientation_code(const DirCounts& counts, double map_orientation) {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw ValidationError("orientation_code: negative count");
    total += c;
  }
  if (total == 0) throw ValidationError("orientation_code: no steps");

  // Unit compass vectors with image-up as +y.
  double rx = 0.0, ry = 0.0;
  for (Dir d : kAllDirs) {
    const auto o = dir_offset(d);
    const double len = std::hypot(o[0], o[1]);
    rx += counts[static_cast<int>(d)] * o[0] / len;
    ry += counts[static_cast<int>(d)] * -o[1] / len;
  }
  double bearing = 0.0;
  if (std::hypot(rx, ry) < 1e-9) {
    // Cancelling steps: fall back to the most frequent direction.
    Dir best = Dir::E;
    for (Dir d : kAllDirs) {
      if (counts[static_cast<int>(d)] > counts[static_cast<int>(best)]) best = d;
    }
    const auto o = dir_offset(best);
    bearing = std::atan2(o[0], -o[1]) * 180.0 / std::numbers::pi;
  } else {
    bearing = std::atan2(rx, ry) * 180.0 / std::numbers::pi;
  }
  bearing = std::fmod(bearing + map_orientation, 360.0);
  if (bearing < 0) bearing += 360.0;

  const double sector = bearing / 45.0;
  const double base = std::floor(sector);
  const double frac = sector - base;
  int code = 0;
  if (std::abs(frac - 0.5) < 1e-9) {
    const int lo = static_cast<int>(base);
    code = lo % 2 == 0 ? lo : lo + 1;  // cardinal codes are even
  } else {
    code = static_cast<int>(std::floor(sector + 0.5));
  }
  return ((code % 8) + 8) % 8;
}

std::int64_t Edge::step_count() const {
  std::int64_t n = 0;
  for (auto c : dir_counts) n += c;
  return n;
}

Edge Edge::reversed(double map_orientation) const {
  Edge r = *this;
  std::swap(r.a, r.b);
  r.steps.clear();
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) r.steps.push_back(reverse(*it));
  for (Dir d : kAllDirs) r.dir_counts[static_cast<int>(reverse(d))] = dir_counts[static_cast<int>(d)];
  if (r.step_count() > 0) r.dominant_code = orientation_code(r.dir_counts, map_orientation);
  return r;
}

const BeaconNode* ConnectivityGraph::find(int id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

int ConnectivityGraph::next_id() const {
  int next = 0;
  for (const auto& n : nodes) next = std::max(next, n.id + 1);
  return next;
}

double to_physical(double pixel_length, double dpi, double scale) {
  if (!(dpi > 0.0)) throw ValidationError("to_physical: dpi must be positive");
  if (!(scale > 0.0)) throw ValidationError("to_physical: scale must be positive");
  return pixel_length / dpi / scale;
}

// --- Tracing ----------------------------------------------------------------------

namespace {

int zone_level_along(const ZoneLevelMap* zones, Pixel start, std::span<const Dir> steps) {
  if (zones == nullptr || zones->empty()) return 0;
  Pixel p = start;
  int level = zones->at(p.x, p.y);
  for (Dir d : steps) {
    const auto o = dir_offset(d);
    p = {p.x + o[0], p.y + o[1]};
    level = std::max(level, zones->at(p.x, p.y));
  }
  return level;
}

Edge make_edge(int a, int b, Pixel start, std::vector<Dir> steps, const TraceContext& ctx) {
  Edge e;
  e.a = a;
  e.b = b;
  e.dir_counts = count_steps(steps);
  e.pixel_length = length_of(e.dir_counts);
  e.dominant_code = steps.empty() ? 0 : orientation_code(e.dir_counts, ctx.map_orientation);
  e.max_zone_level = zone_level_along(ctx.zones, start, steps);
  e.steps = std::move(steps);
  return e;
}

}  // namespace

std::vector<Edge> trace_edges(const TraceContext& ctx, std::span<const BeaconNode> nodes) {
  if (ctx.skeleton == nullptr) throw ValidationError("trace_edges: no skeleton");
  const BinaryImage& mask = ctx.skeleton->mask;
  std::unordered_map<std::int64_t, std::size_t> at_pixel;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!mask.get(n.pixel.x, n.pixel.y)) {
      throw ValidationError("trace_edges: node " + std::to_string(n.id) + " is off the skeleton");
    }
    if (!at_pixel.emplace(key_of(n.pixel), i).second) {
      throw ValidationError("trace_edges: two nodes share pixel of node " + std::to_string(n.id));
    }
  }

  // A junction cluster holding exactly one node belongs to it. Other searches
  // may enter the cluster but only move within it, so a branch cannot cut the
  // corner of a crossing past the node pixel.
  std::unordered_map<std::int64_t, std::size_t> owner;
  {
    std::unordered_map<std::int64_t, int> cluster_of;
    for (const auto& j : ctx.skeleton->junctions) cluster_of[key_of(j)] = -1;
    int clusters = 0;
    std::vector<std::vector<Pixel>> members;
    for (const auto& j : ctx.skeleton->junctions) {
      if (cluster_of[key_of(j)] >= 0) continue;
      members.emplace_back();
      std::vector<Pixel> stack{j};
      cluster_of[key_of(j)] = clusters;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        members.back().push_back(p);
        for (const auto& o : kNeighbours) {
          auto it = cluster_of.find(key_of({p.x + o[0], p.y + o[1]}));
          if (it != cluster_of.end() && it->second < 0) {
            it->second = clusters;
            stack.push_back({p.x + o[0], p.y + o[1]});
          }
        }
      }
      ++clusters;
    }
    for (const auto& cluster : members) {
      std::optional<std::size_t> node;
      int count = 0;
      for (const auto& p : cluster) {
        auto hit = at_pixel.find(key_of(p));
        if (hit != at_pixel.end()) node = hit->second, ++count;
      }
      if (count != 1) continue;
      for (const auto& p : cluster) owner[key_of(p)] = *node;
    }
  }
  auto owner_of = [&](Pixel p) -> std::optional<std::size_t> {
    auto it = owner.find(key_of(p));
    if (it == owner.end()) return std::nullopt;
    return it->second;
  };

  struct Visit {
    double dist;
    Pixel parent;
  };
  struct QueueItem {
    double dist;
    Pixel p;
    bool operator>(const QueueItem& o) const {
      if (dist != o.dist) return dist > o.dist;
      return o.p < p;
    }
  };

  std::vector<Edge> edges;
  std::unordered_map<std::int64_t, Visit> visit;
  for (std::size_t si = 0; si < nodes.size(); ++si) {
    const BeaconNode& src = nodes[si];
    visit.clear();
    std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> pq;
    visit[key_of(src.pixel)] = {0.0, src.pixel};
    pq.push({0.0, src.pixel});
    std::vector<std::pair<std::size_t, Pixel>> reached;
    while (!pq.empty()) {
      const QueueItem item = pq.top();
      pq.pop();
      const auto& v = visit[key_of(item.p)];
      if (item.dist > v.dist) continue;
      if (!(item.p == src.pixel)) {
        auto hit = at_pixel.find(key_of(item.p));
        if (hit != at_pixel.end()) {
          reached.emplace_back(hit->second, item.p);
          continue;  // branches stop at the first node
        }
      }
      const auto here = owner_of(item.p);
      const bool confined = here && *here != si;
      for (const auto& o : kNeighbours) {
        const Pixel n{item.p.x + o[0], item.p.y + o[1]};
        if (!mask.get(n.x, n.y)) continue;
        if (confined && owner_of(n) != here) continue;
        const double nd = item.dist + ((o[0] != 0 && o[1] != 0) ? kSqrt2 : 1.0);
        auto it = visit.find(key_of(n));
        if (it == visit.end() || nd < it->second.dist - 1e-12) {
          visit[key_of(n)] = {nd, item.p};
          pq.push({nd, n});
        }
      }
    }
    for (const auto& [ti, pixel] : reached) {
      const BeaconNode& dst = nodes[ti];
      if (dst.id <= src.id) continue;  // the lower id traces the pair
      std::vector<Dir> steps;
      Pixel p = pixel;
      while (!(p == src.pixel)) {
        const Pixel parent = visit[key_of(p)].parent;
        steps.push_back(*dir_from_offset(p.x - parent.x, p.y - parent.y));
        p = parent;
      }
      std::reverse(steps.begin(), steps.end());
      edges.push_back(make_edge(src.id, dst.id, src.pixel, std::move(steps), ctx));
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return edges;
}

void compute_physical(ConnectivityGraph& g) {
  for (auto& e : g.edges) {
    e.physical_length = (g.dpi > 0.0 && g.scale > 0.0) ? to_physical(e.pixel_length, g.dpi, g.scale) : 0.0;
  }
}

void retrace(ConnectivityGraph& g, const TraceContext& ctx) {
  g.edges = trace_edges(ctx, g.nodes);
  compute_physical(g);
}

// --- Spacers ------------------------------------------------------------------------

SpacerPlan spacer_plan(double length_ft, double max_spacing_ft) {
  if (!(max_spacing_ft > 0.0)) throw ValidationError("spacer spacing must be positive");
  if (length_ft < 0.0) throw ValidationError("edge length must be non-negative");
  if (length_ft <= max_spacing_ft) return {0, length_ft};
  const int pieces = static_cast<int>(std::ceil(length_ft / max_spacing_ft - 1e-9));
  return {pieces - 1, length_ft / pieces};
}

ConnectivityGraph insert_spacers(const ConnectivityGraph& g, double max_spacing_ft) {
  if (!(g.dpi > 0.0 && g.scale > 0.0)) throw ValidationError("insert_spacers: physical scale unknown");
  ConnectivityGraph out = g;
  out.edges.clear();
  int next_id = g.next_id();
  TraceContext ctx;
  ctx.map_orientation = g.map_orientation;
  std::set<Pixel> occupied;
  for (const auto& n : g.nodes) occupied.insert(n.pixel);
  for (const auto& e : g.edges) {
    const SpacerPlan plan = spacer_plan(e.physical_length, max_spacing_ft);
    const BeaconNode* a = g.find(e.a);
    if (plan.count == 0 || a == nullptr || e.steps.size() < 2) {
      out.edges.push_back(e);
      continue;
    }
    // Cumulative arc length after each step.
    std::vector<double> cum(e.steps.size() + 1, 0.0);
    for (std::size_t i = 0; i < e.steps.size(); ++i) cum[i + 1] = cum[i] + step_length(e.steps[i]);
    const double total = cum.back();
    std::vector<Pixel> pos{a->pixel};
    for (Dir d : e.steps) {
      const auto o = dir_offset(d);
      pos.push_back({pos.back().x + o[0], pos.back().y + o[1]});
    }
    const int pieces = plan.count + 1;
    std::vector<std::size_t> cuts;
    for (int k = 1; k < pieces; ++k) {
      const double target = total * k / pieces;
      auto it = std::lower_bound(cum.begin(), cum.end(), target);
      std::size_t idx = static_cast<std::size_t>(it - cum.begin());
      if (idx > 0 && (idx == cum.size() || target - cum[idx - 1] <= cum[idx] - target)) --idx;
      const std::size_t lo = cuts.empty() ? 1 : cuts.back() + 1;
      const std::size_t hi = e.steps.size() - 1;
      if (lo > hi) break;
      idx = std::clamp(idx, lo, hi);
      // Edges leaving one node can share their first pixels; never stack a
      // spacer on an existing node.
      std::optional<std::size_t> free_idx;
      for (std::size_t d = 0; !free_idx && (idx >= lo + d || idx + d <= hi); ++d) {
        if (idx >= lo + d && !occupied.count(pos[idx - d])) {
          free_idx = idx - d;
        } else if (idx + d <= hi && !occupied.count(pos[idx + d])) {
          free_idx = idx + d;
        }
      }
      if (!free_idx) break;
      occupied.insert(pos[*free_idx]);
      cuts.push_back(*free_idx);
    }
    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.push_back(e.steps.size());

    Pixel p = a->pixel;
    int prev_id = e.a;
    std::size_t step = 0;
    for (std::size_t piece = 0; piece + 1 < bounds.size(); ++piece) {
      const Pixel start = p;
      std::vector<Dir> sub(e.steps.begin() + static_cast<std::ptrdiff_t>(bounds[piece]),
                           e.steps.begin() + static_cast<std::ptrdiff_t>(bounds[piece + 1]));
      for (; step < bounds[piece + 1]; ++step) {
        const auto o = dir_offset(e.steps[step]);
        p = {p.x + o[0], p.y + o[1]};
      }
      int end_id = e.b;
      if (piece + 2 < bounds.size()) {
        BeaconNode spacer;
        spacer.id = next_id++;
        spacer.pixel = p;
        spacer.kind = NodeKind::Spacer;
        out.nodes.push_back(spacer);
        end_id = spacer.id;
      }
      Edge sub_edge = make_edge(prev_id, end_id, start, std::move(sub), ctx);
      sub_edge.max_zone_level = e.max_zone_level;
      sub_edge.physical_length = to_physical(sub_edge.pixel_length, g.dpi, g.scale);
      // Spacer ids are fresh, so keep the lower id first as tracing does.
      if (sub_edge.a > sub_edge.b) sub_edge = sub_edge.reversed(g.map_orientation);
      out.edges.push_back(std::move(sub_edge));
      prev_id = end_id;
    }
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return out;
}

// --- Merging ------------------------------------------------------------------------

namespace {

std::string join_nonempty(const std::string& a, const std::string& b, const std::string& sep) {
  if (a.empty()) return b;
  if (b.empty() || a == b) return a;
  return a + sep + b;
}

BeaconNode merged_node(const BeaconNode& x, const BeaconNode& y, Pixel at) {
  BeaconNode m;
  m.id = std::min(x.id, y.id);
  m.pixel = at;
  m.kind = NodeKind::Poi;
  const BeaconNode& first = x.id < y.id ? x : y;
  const BeaconNode& second = x.id < y.id ? y : x;
  m.block_class = join_nonempty(first.block_class, second.block_class, "+");
  m.label = join_nonempty(first.label, second.label, "; ");
  m.origin = (x.origin == NodeOrigin::Manual && y.origin == NodeOrigin::Manual) ? NodeOrigin::Manual
                                                                                : NodeOrigin::Detected;
  return m;
}

struct GraphPath {
  double length = std::numeric_limits<double>::infinity();
  std::vector<Pixel> pixels;  // from source to target inclusive
};

// Pixel sequence of the shortest graph route between two nodes, limited to
// `limit` pixels of arc length.
std::map<int, GraphPath> graph_routes(const ConnectivityGraph& g, int source, double limit) {
  std::map<int, std::vector<std::pair<int, const Edge*>>> adj;
  for (const auto& e : g.edges) {
    adj[e.a].emplace_back(e.b, &e);
    adj[e.b].emplace_back(e.a, &e);
  }
  std::map<int, double> dist{{source, 0.0}};
  std::map<int, std::pair<int, const Edge*>> parent;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, source});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, e] : adj[u]) {
      const double nd = d + e->pixel_length;
      if (nd > limit + 1e-9) continue;
      auto it = dist.find(v);
      if (it == dist.end() || nd < it->second - 1e-12) {
        dist[v] = nd;
        parent[v] = {u, e};
        pq.push({nd, v});
      }
    }
  }
  std::map<int, GraphPath> routes;
  for (const auto& [v, d] : dist) {
    if (v == source) continue;
    GraphPath route;
    route.length = d;
    // Walk back collecting edges, then expand to pixels forward.
    std::vector<std::pair<int, const Edge*>> chain;
    for (int cur = v; cur != source; cur = parent[cur].first) chain.push_back({cur, parent[cur].second});
    std::reverse(chain.begin(), chain.end());
    Pixel p = g.find(source)->pixel;
    route.pixels.push_back(p);
    for (const auto& [to, e] : chain) {
      const bool forward = e->b == to;
      if (forward) {
        for (Dir s : e->steps) {
          const auto o = dir_offset(s);
          p = {p.x + o[0], p.y + o[1]};
          route.pixels.push_back(p);
        }
      } else {
        for (auto it = e->steps.rbegin(); it != e->steps.rend(); ++it) {
          const auto o = dir_offset(reverse(*it));
          p = {p.x + o[0], p.y + o[1]};
          route.pixels.push_back(p);
        }
      }
    }
    routes[v] = std::move(route);
  }
  return routes;
}

}  // namespace

ConnectivityGraph merge_close(const ConnectivityGraph& g, const TraceContext& ctx, double radius_m) {
  if (!(g.dpi > 0.0 && g.scale > 0.0)) throw ValidationError("merge_close: physical scale unknown");
  const double radius_px = radius_m * kFeetPerMetre * g.scale * g.dpi;
  ConnectivityGraph out = g;

  // Points of interest sharing a pixel merge outright.
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < out.nodes.size();) {
      const auto& a = out.nodes[i];
      const auto& b = out.nodes[j];
      if (a.pixel == b.pixel && a.kind == NodeKind::Poi && b.kind == NodeKind::Poi) {
        out.nodes[i] = merged_node(a, b, a.pixel);
        out.nodes.erase(out.nodes.begin() + static_cast<std::ptrdiff_t>(j));
      } else {
        ++j;
      }
    }
  }
  retrace(out, ctx);

  while (true) {
    struct Pair {
      double d;
      int a, b;
      std::vector<Pixel> pixels;
    };
    std::optional<Pair> best;
    for (const auto& n : out.nodes) {
      if (n.kind != NodeKind::Poi) continue;
      for (auto& [other, route] : graph_routes(out, n.id, radius_px)) {
        if (other <= n.id) continue;
        const BeaconNode* o = out.find(other);
        if (o == nullptr || o->kind != NodeKind::Poi || route.length > radius_px + 1e-9) continue;
        if (!best || route.length < best->d - 1e-12 ||
            (std::abs(route.length - best->d) <= 1e-12 && std::pair(n.id, other) < std::pair(best->a, best->b))) {
          best = Pair{route.length, n.id, other, route.pixels};
        }
      }
    }
    if (!best) break;

    // Midpoint by arc length along the route.
    const auto& px = best->pixels;
    std::vector<double> cum(px.size(), 0.0);
    for (std::size_t i = 1; i < px.size(); ++i) {
      cum[i] = cum[i - 1] + ((px[i].x != px[i - 1].x && px[i].y != px[i - 1].y) ? kSqrt2 : 1.0);
    }
    const double half = cum.back() / 2.0;
    std::vector<std::size_t> order(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(cum[x] - half) < std::abs(cum[y] - half);
    });
    std::set<Pixel> occupied;
    for (const auto& n : out.nodes) {
      if (n.id != best->a && n.id != best->b) occupied.insert(n.pixel);
    }
    Pixel mid = px.front();
    for (std::size_t i : order) {
      if (!occupied.count(px[i])) {
        mid = px[i];
        break;
      }
    }
    const BeaconNode a = *out.find(best->a);
    const BeaconNode b = *out.find(best->b);
    std::erase_if(out.nodes, [&](const BeaconNode& n) { return n.id == a.id || n.id == b.id; });
    out.nodes.push_back(merged_node(a, b, mid));
    std::sort(out.nodes.begin(), out.nodes.end(), [](const BeaconNode& x, const BeaconNode& y) { return x.id < y.id; });
    retrace(out, ctx);
  }
  return out;
}

}  // namespace beaconmap
