#include "beaconmap/project.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <set>
#include <sstream>

namespace beaconmap {

namespace fs = std::filesystem;

std::uint32_t crc32_of(const std::string& data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

const char* to_string(EditType t) {
  switch (t) {
    case EditType::RemoveBeacon: return "remove_beacon";
    case EditType::AddBeacon: return "add_beacon";
    case EditType::RelabelBeacon: return "relabel_beacon";
    case EditType::MoveBeacon: return "move_beacon";
  }
  return "?";
}

EditType parse_edit_type(const std::string& s) {
  for (auto t : {EditType::RemoveBeacon, EditType::AddBeacon, EditType::RelabelBeacon, EditType::MoveBeacon}) {
    if (s == to_string(t)) return t;
  }
  throw ValidationError("unknown edit op '" + s + "'");
}

ExportFormat parse_export_format(const std::string& s) {
  if (s == "json" || s == "json-adjacency") return ExportFormat::JsonAdjacency;
  if (s == "csv" || s == "csv-edge-list") return ExportFormat::CsvEdgeList;
  if (s == "graphml") return ExportFormat::GraphMl;
  throw ValidationError("unknown export format '" + s + "'");
}

// --- JSON -----------------------------------------------------------------------

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

// Wraps nlohmann type errors as validation errors.
template <typename F>
auto checked(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

const char* to_string(PatchSymmetry s) { return s == PatchSymmetry::Dihedral ? "dihedral" : "none"; }

PatchSymmetry parse_symmetry(const std::string& s) {
  if (s == "none") return PatchSymmetry::None;
  if (s == "dihedral") return PatchSymmetry::Dihedral;
  throw ValidationError("unknown symmetry '" + s + "'");
}

std::string encode_steps(const std::vector<Dir>& steps) {
  std::string s;
  s.reserve(steps.size());
  for (Dir d : steps) s += static_cast<char>('0' + static_cast<int>(d));
  return s;
}

std::vector<Dir> decode_steps(const std::string& s) {
  std::vector<Dir> steps;
  steps.reserve(s.size());
  for (char c : s) {
    if (c < '0' || c > '7') throw ValidationError("bad step code");
    steps.push_back(static_cast<Dir>(c - '0'));
  }
  return steps;
}

Json dir_counts_json(const DirCounts& c) {
  Json j = Json::object();
  for (Dir d : kAllDirs) j[to_string(d)] = c[static_cast<int>(d)];
  return j;
}

DirCounts dir_counts_from(const Json& j) {
  DirCounts c{};
  for (Dir d : kAllDirs) c[static_cast<int>(d)] = j.at(to_string(d)).get<std::int64_t>();
  return c;
}

Json node_json(const BeaconNode& n) {
  return {{"id", n.id}, {"x", n.pixel.x}, {"y", n.pixel.y}, {"kind", to_string(n.kind)},
          {"block_class", n.block_class}, {"label", n.label}};
}

BeaconNode node_from(const Json& j) {
  BeaconNode n;
  n.id = j.at("id").get<int>();
  n.pixel = {j.at("x").get<int>(), j.at("y").get<int>()};
  n.kind = parse_node_kind(j.at("kind").get<std::string>());
  n.block_class = get_or<std::string>(j, "block_class", "");
  n.label = get_or<std::string>(j, "label", "");
  n.origin = parse_node_origin(get_or<std::string>(j, "origin", "detected"));
  return n;
}

}  // namespace

Json to_json(const Zone& z) {
  Json pts = Json::array();
  for (const auto& p : z.polygon) pts.push_back({p.x, p.y});
  return {{"polygon", pts}, {"level", z.level}};
}

Zone zone_from_json(const Json& j) {
  return checked("zone", [&] {
    Zone z;
    for (const auto& p : j.at("polygon")) {
      if (p.is_array()) {
        z.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      } else {
        z.polygon.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
      }
    }
    z.level = j.at("level").get<int>();
    return z;
  });
}

std::vector<Zone> zones_from_json(const Json& j) {
  const Json& list = j.is_object() && j.contains("zones") ? j.at("zones") : j;
  if (!list.is_array()) throw ValidationError("zones must be an array");
  std::vector<Zone> zones;
  for (const auto& z : list) zones.push_back(zone_from_json(z));
  return zones;
}

Json to_json(const EditOp& op) {
  Json j = {{"op", to_string(op.type)}};
  switch (op.type) {
    case EditType::RemoveBeacon:
      j["id"] = op.id;
      break;
    case EditType::AddBeacon:
      j["x"] = op.x;
      j["y"] = op.y;
      j["label"] = op.label;
      j["block_class"] = op.block_class;
      break;
    case EditType::RelabelBeacon:
      j["id"] = op.id;
      j["label"] = op.label;
      break;
    case EditType::MoveBeacon:
      j["id"] = op.id;
      j["x"] = op.x;
      j["y"] = op.y;
      break;
  }
  return j;
}

EditOp edit_from_json(const Json& j) {
  return checked("edit", [&] {
    EditOp op;
    op.type = parse_edit_type(j.at("op").get<std::string>());
    const bool needs_id = op.type != EditType::AddBeacon;
    const bool needs_xy = op.type == EditType::AddBeacon || op.type == EditType::MoveBeacon;
    if (needs_id) op.id = j.at("id").get<int>();
    if (needs_xy) {
      op.x = j.at("x").get<int>();
      op.y = j.at("y").get<int>();
    }
    if (op.type == EditType::RelabelBeacon) op.label = j.at("label").get<std::string>();
    if (op.type == EditType::AddBeacon) {
      op.label = get_or<std::string>(j, "label", "");
      op.block_class = get_or<std::string>(j, "block_class", "");
    }
    return op;
  });
}

Json to_json(const MatchCandidate& c) {
  return {{"x", c.x}, {"y", c.y}, {"kind", c.kind}, {"score", c.score}, {"source", to_string(c.source)},
          {"template_id", c.template_id}, {"width", c.width}, {"height", c.height}};
}

MatchCandidate candidate_from_json(const Json& j) {
  MatchCandidate c;
  c.x = j.at("x").get<int>();
  c.y = j.at("y").get<int>();
  c.kind = j.at("kind").get<std::string>();
  c.score = j.at("score").get<double>();
  const auto src = j.at("source").get<std::string>();
  bool known = false;
  for (auto s : {PipelineSource::Fdm, PipelineSource::FdmSml, PipelineSource::FdSml}) {
    if (src == to_string(s)) {
      c.source = s;
      known = true;
    }
  }
  if (!known) throw ValidationError("unknown candidate source '" + src + "'");
  c.template_id = get_or<std::string>(j, "template_id", "");
  c.width = get_or<int>(j, "width", 0);
  c.height = get_or<int>(j, "height", 0);
  return c;
}

Json to_json(const PlannerConfig& c) {
  const auto& p = c.pipeline;
  return {
      {"option", static_cast<int>(p.option)},
      {"mode", to_string(p.mode)},
      {"quality", p.quality},
      {"min_spacing", p.min_spacing},
      {"proximity", p.proximity},
      {"crop_factor", p.crop_factor},
      {"min_margin", p.min_margin},
      {"separation", p.separation},
      {"refine_radius", p.refine_radius},
      {"seed", p.seed},
      {"match",
       {{"max_score", p.match.max_score},
        {"scales", p.match.scales},
        {"dpi", p.match.dpi},
        {"drawing_scale", p.match.drawing_scale},
        {"max_keypoints", p.match.max_keypoints},
        {"jitter", p.match.jitter},
        {"keypoint_quality", p.match.keypoint_features.quality},
        {"keypoint_spacing", p.match.keypoint_features.min_spacing},
        {"keypoint_block", p.match.keypoint_features.block_size}}},
      {"threshold",
       {{"kind", c.threshold.kind == ThresholdPolicy::Kind::Otsu ? "otsu" : "fixed"}, {"value", c.threshold.value}}},
      {"access_cutoff", c.access_cutoff},
      {"prune_length", c.prune_length},
      {"max_spacing_ft", c.max_spacing_ft},
      {"merge_radius_m", c.merge_radius_m},
      {"room_dilation", c.room_dilation},
  };
}

PlannerConfig planner_config_from_json(const Json& j) {
  return checked("config", [&] {
    PlannerConfig c;
    auto& p = c.pipeline;
    p.option = parse_option(get_or<int>(j, "option", 1));
    p.mode = parse_mode(get_or<std::string>(j, "mode", "path-only"));
    p.quality = get_or(j, "quality", p.quality);
    p.min_spacing = get_or(j, "min_spacing", p.min_spacing);
    p.proximity = get_or(j, "proximity", p.proximity);
    p.crop_factor = get_or(j, "crop_factor", p.crop_factor);
    p.min_margin = get_or(j, "min_margin", p.min_margin);
    p.separation = get_or(j, "separation", p.separation);
    p.refine_radius = get_or(j, "refine_radius", p.refine_radius);
    p.seed = get_or(j, "seed", p.seed);
    if (j.contains("match")) {
      const Json& m = j.at("match");
      p.match.max_score = get_or(m, "max_score", p.match.max_score);
      p.match.scales = get_or(m, "scales", p.match.scales);
      p.match.dpi = get_or(m, "dpi", p.match.dpi);
      p.match.drawing_scale = get_or(m, "drawing_scale", p.match.drawing_scale);
      p.match.max_keypoints = get_or(m, "max_keypoints", p.match.max_keypoints);
      p.match.jitter = get_or(m, "jitter", p.match.jitter);
      p.match.keypoint_features.quality = get_or(m, "keypoint_quality", p.match.keypoint_features.quality);
      p.match.keypoint_features.min_spacing = get_or(m, "keypoint_spacing", p.match.keypoint_features.min_spacing);
      p.match.keypoint_features.block_size = get_or(m, "keypoint_block", p.match.keypoint_features.block_size);
    }
    if (j.contains("threshold")) {
      const Json& t = j.at("threshold");
      c.threshold.kind = get_or<std::string>(t, "kind", "fixed") == "otsu" ? ThresholdPolicy::Kind::Otsu
                                                                           : ThresholdPolicy::Kind::Fixed;
      c.threshold.value = get_or(t, "value", c.threshold.value);
    }
    c.access_cutoff = get_or(j, "access_cutoff", c.access_cutoff);
    c.prune_length = get_or(j, "prune_length", c.prune_length);
    c.max_spacing_ft = get_or(j, "max_spacing_ft", c.max_spacing_ft);
    c.merge_radius_m = get_or(j, "merge_radius_m", c.merge_radius_m);
    c.room_dilation = get_or(j, "room_dilation", c.room_dilation);
    if (c.access_cutoff < 0) throw ValidationError("access_cutoff must be >= 0");
    if (!(c.max_spacing_ft > 0.0)) throw ValidationError("max_spacing_ft must be positive");
    if (!(c.merge_radius_m >= 0.0)) throw ValidationError("merge_radius_m must be >= 0");
    return c;
  });
}

Json to_json(const ConnectivityGraph& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json j = node_json(n);
    j["origin"] = to_string(n.origin);
    nodes.push_back(j);
  }
  Json edges = Json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"a", e.a},
                     {"b", e.b},
                     {"pixel_length", e.pixel_length},
                     {"physical_length", e.physical_length},
                     {"dir_counts", dir_counts_json(e.dir_counts)},
                     {"code", e.dominant_code},
                     {"zone_level", e.max_zone_level},
                     {"steps", encode_steps(e.steps)}});
  }
  return {{"dpi", g.dpi}, {"scale", g.scale}, {"map_orientation", g.map_orientation}, {"nodes", nodes},
          {"edges", edges}};
}

ConnectivityGraph graph_from_json(const Json& j) {
  return checked("graph", [&] {
    ConnectivityGraph g;
    g.dpi = j.at("dpi").get<double>();
    g.scale = j.at("scale").get<double>();
    g.map_orientation = j.at("map_orientation").get<double>();
    for (const auto& n : j.at("nodes")) g.nodes.push_back(node_from(n));
    for (const auto& je : j.at("edges")) {
      Edge e;
      e.a = je.at("a").get<int>();
      e.b = je.at("b").get<int>();
      e.pixel_length = je.at("pixel_length").get<double>();
      e.physical_length = je.at("physical_length").get<double>();
      e.dir_counts = dir_counts_from(je.at("dir_counts"));
      e.dominant_code = je.at("code").get<int>();
      e.max_zone_level = je.at("zone_level").get<int>();
      e.steps = decode_steps(je.at("steps").get<std::string>());
      g.edges.push_back(std::move(e));
    }
    return g;
  });
}

Json to_json(const SvmModel& m) {
  return {{"positive_kind", m.positive_kind}, {"patch_size", m.patch_size}, {"symmetry", to_string(m.symmetry)},
          {"bias", m.bias}, {"weights", m.weights}};
}

SvmModel model_from_json(const Json& j) {
  return checked("model", [&] {
    SvmModel m;
    m.positive_kind = j.at("positive_kind").get<std::string>();
    m.patch_size = j.at("patch_size").get<int>();
    m.symmetry = parse_symmetry(get_or<std::string>(j, "symmetry", "none"));
    m.bias = j.at("bias").get<double>();
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.patch_size <= 0 || m.weights.size() != static_cast<std::size_t>(m.patch_size) * m.patch_size) {
      throw ValidationError("model weights do not match patch_size");
    }
    m.trained = true;
    return m;
  });
}

void save_model(const SvmModel& m, const fs::path& file) {
  if (!m.trained) throw ValidationError("cannot save an untrained model");
  write_file(file, to_json(m).dump(1) + "\n");
}

SvmModel load_model(const fs::path& file) {
  Json j;
  try {
    j = Json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model " + file.string() + ": " + e.what());
  }
  return model_from_json(j);
}

void save_templates(const std::vector<Template>& templates, const fs::path& dir) {
  fs::create_directories(dir);
  Json list = Json::array();
  for (const auto& t : templates) {
    const std::string file = t.id + ".pgm";
    save_pgm(t.patch, dir / file);
    list.push_back({{"id", t.id}, {"kind", t.kind}, {"group", t.group}, {"physical_width_ft", t.physical_width_ft},
                    {"rotations", t.rotations}, {"mirror", t.mirror}, {"dpi", t.patch.dpi_x}, {"file", file}});
  }
  write_file(dir / "manifest.json", Json{{"templates", list}}.dump(1) + "\n");
}

std::vector<Template> load_templates(const fs::path& dir) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("template manifest: " + std::string(e.what()));
  }
  return checked("template manifest", [&] {
    std::vector<Template> out;
    for (const auto& j : manifest.at("templates")) {
      Template t;
      t.id = j.at("id").get<std::string>();
      t.kind = j.at("kind").get<std::string>();
      t.group = get_or(j, "group", 0);
      t.physical_width_ft = get_or(j, "physical_width_ft", 0.0);
      t.rotations = get_or(j, "rotations", true);
      t.mirror = get_or(j, "mirror", false);
      t.patch = load_image(dir / j.at("file").get<std::string>());
      if (t.patch.empty()) throw TemplateError(t.id, "empty patch");
      if (j.contains("dpi")) t.patch.dpi_x = t.patch.dpi_y = j.at("dpi").get<double>();
      if (t.kind.empty()) throw TemplateError(t.id, "blank kind");
      out.push_back(std::move(t));
    }
    return out;
  });
}

// --- Exports --------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string export_graph(const ConnectivityGraph& g, ExportFormat format, bool include_dir_string) {
  switch (format) {
    case ExportFormat::JsonAdjacency: {
      Json nodes = Json::array();
      for (const auto& n : g.nodes) nodes.push_back(node_json(n));
      Json edges = Json::array();
      for (const auto& e : g.edges) {
        Json j = {{"a", e.a},
                  {"b", e.b},
                  {"length_ft", e.physical_length},
                  {"code", e.dominant_code},
                  {"dir_counts", dir_counts_json(e.dir_counts)},
                  {"zone_level", e.max_zone_level}};
        if (include_dir_string) {
          std::string s;
          for (std::size_t i = 0; i < e.steps.size(); ++i) {
            if (i) s += ',';
            s += to_string(e.steps[i]);
          }
          j["dir_string"] = s;
        }
        edges.push_back(std::move(j));
      }
      Json doc = {{"meta", {{"dpi", g.dpi}, {"scale", g.scale}, {"map_orientation", g.map_orientation},
                            {"units", "feet"}}},
                  {"nodes", nodes},
                  {"edges", edges}};
      return doc.dump(1) + "\n";
    }
    case ExportFormat::CsvEdgeList: {
      std::string out = "a,b,length_ft,code,zone_level\n";
      for (const auto& e : g.edges) {
        out += std::to_string(e.a) + "," + std::to_string(e.b) + "," + fmt_double(e.physical_length) + "," +
               std::to_string(e.dominant_code) + "," + std::to_string(e.max_zone_level) + "\n";
      }
      return out;
    }
    case ExportFormat::GraphMl: {
      std::ostringstream o;
      o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
      const char* node_keys[][2] = {{"x", "int"}, {"y", "int"}, {"kind", "string"}, {"block_class", "string"},
                                    {"label", "string"}};
      for (auto& k : node_keys) {
        o << "  <key id=\"" << k[0] << "\" for=\"node\" attr.name=\"" << k[0] << "\" attr.type=\"" << k[1]
          << "\"/>\n";
      }
      o << "  <key id=\"length_ft\" for=\"edge\" attr.name=\"length_ft\" attr.type=\"double\"/>\n"
        << "  <key id=\"code\" for=\"edge\" attr.name=\"code\" attr.type=\"int\"/>\n"
        << "  <key id=\"zone_level\" for=\"edge\" attr.name=\"zone_level\" attr.type=\"int\"/>\n";
      for (Dir d : kAllDirs) {
        o << "  <key id=\"dir_" << to_string(d) << "\" for=\"edge\" attr.name=\"dir_" << to_string(d)
          << "\" attr.type=\"long\"/>\n";
      }
      for (const char* k : {"dpi", "scale", "map_orientation"}) {
        o << "  <key id=\"" << k << "\" for=\"graph\" attr.name=\"" << k << "\" attr.type=\"double\"/>\n";
      }
      o << "  <graph id=\"G\" edgedefault=\"undirected\">\n"
        << "    <data key=\"dpi\">" << fmt_double(g.dpi) << "</data>\n"
        << "    <data key=\"scale\">" << fmt_double(g.scale) << "</data>\n"
        << "    <data key=\"map_orientation\">" << fmt_double(g.map_orientation) << "</data>\n";
      for (const auto& n : g.nodes) {
        o << "    <node id=\"n" << n.id << "\">"
          << "<data key=\"x\">" << n.pixel.x << "</data>"
          << "<data key=\"y\">" << n.pixel.y << "</data>"
          << "<data key=\"kind\">" << to_string(n.kind) << "</data>"
          << "<data key=\"block_class\">" << xml_escape(n.block_class) << "</data>"
          << "<data key=\"label\">" << xml_escape(n.label) << "</data></node>\n";
      }
      for (const auto& e : g.edges) {
        o << "    <edge source=\"n" << e.a << "\" target=\"n" << e.b << "\">"
          << "<data key=\"length_ft\">" << fmt_double(e.physical_length) << "</data>"
          << "<data key=\"code\">" << e.dominant_code << "</data>"
          << "<data key=\"zone_level\">" << e.max_zone_level << "</data>";
        for (Dir d : kAllDirs) {
          o << "<data key=\"dir_" << to_string(d) << "\">" << e.dir_counts[static_cast<int>(d)] << "</data>";
        }
        o << "</edge>\n";
      }
      o << "  </graph>\n</graphml>\n";
      return o.str();
    }
  }
  return {};
}

std::string export_graph(const Project& p, ExportFormat format, bool include_dir_string) {
  if (!p.graph) throw ValidationError("no graph yet");
  return export_graph(*p.graph, format, include_dir_string);
}

ConnectivityGraph import_json_adjacency(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("json-adjacency: ") + e.what());
  }
  return checked("json-adjacency", [&] {
    ConnectivityGraph g;
    const Json& meta = doc.at("meta");
    g.dpi = meta.at("dpi").get<double>();
    g.scale = meta.at("scale").get<double>();
    g.map_orientation = meta.at("map_orientation").get<double>();
    std::set<int> ids;
    for (const auto& n : doc.at("nodes")) {
      g.nodes.push_back(node_from(n));
      if (!ids.insert(g.nodes.back().id).second) throw ValidationError("duplicate node id");
    }
    for (const auto& je : doc.at("edges")) {
      Edge e;
      e.a = je.at("a").get<int>();
      e.b = je.at("b").get<int>();
      if (!ids.count(e.a) || !ids.count(e.b)) throw ValidationError("edge endpoint missing");
      e.physical_length = je.at("length_ft").get<double>();
      e.pixel_length = e.physical_length * g.dpi * g.scale;
      e.dominant_code = je.at("code").get<int>();
      e.dir_counts = dir_counts_from(je.at("dir_counts"));
      e.max_zone_level = je.at("zone_level").get<int>();
      if (je.contains("dir_string")) {
        std::stringstream ss(je.at("dir_string").get<std::string>());
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (!tok.empty()) e.steps.push_back(parse_dir(tok));
        }
      }
      g.edges.push_back(std::move(e));
    }
    return g;
  });
}

// --- Edits ----------------------------------------------------------------------

namespace {

struct EditContext {
  Skeleton skeleton;
  ZoneLevelMap zones;
};

EditContext edit_context(const Project& p) {
  if (p.skeleton.empty()) throw ValidationError("project has no skeleton");
  EditContext c;
  c.skeleton = make_skeleton(p.skeleton);
  c.zones = zone_levels(p.zones, p.skeleton.width(), p.skeleton.height(), p.config.access_cutoff);
  return c;
}

Pixel snap(const EditContext& c, const EditOp& op) {
  if (!c.skeleton.mask.contains(op.x, op.y)) {
    throw ValidationError("pixel (" + std::to_string(op.x) + ", " + std::to_string(op.y) + ") is off-plan");
  }
  const auto p = nearest_skeleton_pixel(c.skeleton, {op.x, op.y});
  if (!p) throw ValidationError("skeleton is empty");
  return *p;
}

BeaconNode& find_node(ConnectivityGraph& g, int id) {
  for (auto& n : g.nodes) {
    if (n.id == id) return n;
  }
  throw NotFoundError("beacon " + std::to_string(id) + " not found");
}

void ensure_free(const ConnectivityGraph& g, Pixel p, int except) {
  for (const auto& n : g.nodes) {
    if (n.id != except && n.pixel == p) {
      throw ValidationError("beacon " + std::to_string(n.id) + " already occupies (" + std::to_string(p.x) + ", " +
                            std::to_string(p.y) + ")");
    }
  }
}

// Applies ops to g; returns whether edges need re-tracing.
bool apply_ops(ConnectivityGraph& g, const EditContext& c, const std::vector<EditOp>& ops) {
  bool structural = false;
  for (const auto& op : ops) {
    switch (op.type) {
      case EditType::RemoveBeacon: {
        find_node(g, op.id);
        std::erase_if(g.nodes, [&](const BeaconNode& n) { return n.id == op.id; });
        structural = true;
        break;
      }
      case EditType::AddBeacon: {
        const Pixel p = snap(c, op);
        ensure_free(g, p, -1);
        BeaconNode n;
        n.id = g.next_id();
        n.pixel = p;
        n.kind = NodeKind::Poi;
        n.block_class = op.block_class;
        n.label = op.label;
        n.origin = NodeOrigin::Manual;
        g.nodes.push_back(std::move(n));
        structural = true;
        break;
      }
      case EditType::RelabelBeacon:
        find_node(g, op.id).label = op.label;
        break;
      case EditType::MoveBeacon: {
        BeaconNode& n = find_node(g, op.id);
        const Pixel p = snap(c, op);
        ensure_free(g, p, op.id);
        n.pixel = p;
        structural = true;
        break;
      }
    }
  }
  return structural;
}

void retrace_graph(ConnectivityGraph& g, const EditContext& c) {
  TraceContext ctx{&c.skeleton, &c.zones, g.map_orientation};
  retrace(g, ctx);
}

}  // namespace

Project apply_edits(const Project& p, const std::vector<EditOp>& ops) {
  if (!p.graph) throw ValidationError("no graph yet");
  const EditContext c = edit_context(p);
  Project out = p;
  if (apply_ops(*out.graph, c, ops)) retrace_graph(*out.graph, c);
  out.edits.insert(out.edits.end(), ops.begin(), ops.end());
  return out;
}

ConnectivityGraph replay_edits(const Project& p) {
  if (!p.detected) throw ValidationError("no graph yet");
  ConnectivityGraph g = *p.detected;
  if (p.edits.empty()) return g;
  const EditContext c = edit_context(p);
  // Re-tracing depends only on the node set, so one pass at the end matches
  // the incremental result.
  if (apply_ops(g, c, p.edits)) retrace_graph(g, c);
  return g;
}

void set_detection(Project& p, const PlanResult& result) {
  p.candidates = result.candidates;
  p.skeleton = result.skeleton.mask;
  p.detected = result.graph;
  p.graph = result.graph;
  p.edits.clear();
}

// --- Archive --------------------------------------------------------------------

namespace {

class LockFile {
 public:
  explicit LockFile(fs::path path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST) throw ConflictError("project is locked by another writer: " + path_.string());
      throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
  }
  ~LockFile() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

fs::path sibling(const fs::path& dir, const std::string& suffix) {
  fs::path clean = dir;
  if (!clean.has_filename()) clean = clean.parent_path();
  return clean.parent_path() / (clean.filename().string() + suffix);
}

}  // namespace

void save_project(const Project& p, const fs::path& dir_in) {
  const fs::path dir = sibling(dir_in, "");
  std::error_code ec;
  if (!dir.parent_path().empty()) fs::create_directories(dir.parent_path(), ec);
  LockFile lock(sibling(dir, ".lock"));
  const fs::path tmp = sibling(dir, ".tmp");
  fs::remove_all(tmp, ec);
  if (!fs::create_directories(tmp, ec) || ec) throw IoError("cannot create " + tmp.string());

  Json doc = {{"id", p.id},
              {"plan_source", p.plan_source},
              {"plan_dpi", {p.plan.dpi_x, p.plan.dpi_y}},
              {"meta", {{"dpi", p.meta.dpi}, {"scale", p.meta.scale}, {"map_orientation", p.meta.map_orientation}}},
              {"config", to_json(p.config)},
              {"template_set", p.template_set},
              {"model_ref", p.model_ref},
              {"created_at", p.created_at},
              {"updated_at", p.updated_at}};
  Json zones = Json::array();
  for (const auto& z : p.zones) zones.push_back(to_json(z));
  doc["zones"] = zones;
  Json cands = Json::array();
  for (const auto& c : p.candidates) cands.push_back(to_json(c));
  doc["candidates"] = cands;
  doc["detected"] = p.detected ? to_json(*p.detected) : Json();
  doc["graph"] = p.graph ? to_json(*p.graph) : Json();
  Json edits = Json::array();
  for (const auto& e : p.edits) edits.push_back(to_json(e));
  doc["edits"] = edits;

  std::vector<std::string> files;
  write_file(tmp / "project.json", doc.dump(1) + "\n");
  files.push_back("project.json");
  if (!p.plan.empty()) {
    save_png(p.plan, tmp / "plan.png");
    files.push_back("plan.png");
  }
  if (!p.skeleton.empty()) {
    GrayImage sk(p.skeleton.width(), p.skeleton.height(), 0);
    for (std::size_t i = 0; i < sk.size(); ++i) sk.pixels()[i] = p.skeleton.bits()[i] ? 255 : 0;
    save_png(sk, tmp / "skeleton.png");
    files.push_back("skeleton.png");
  }
  Json manifest = {{"schema", kProjectSchema}, {"version", kProjectVersion}, {"files", Json::object()}};
  for (const auto& f : files) {
    const std::string bytes = read_file(tmp / f);
    manifest["files"][f] = {{"crc32", crc32_of(bytes)}, {"size", bytes.size()}};
  }
  write_file(tmp / "manifest.json", manifest.dump(1) + "\n");

  const fs::path old = sibling(dir, ".old");
  fs::remove_all(old, ec);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old, ec);
}

Project load_project(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("no project archive at " + dir.string());
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(std::string("manifest unreadable: ") + e.what());
  } catch (const IoError&) {
    throw IntegrityError("manifest missing");
  }
  try {
    if (manifest.at("schema").get<std::string>() != kProjectSchema) throw IntegrityError("wrong schema");
    if (manifest.at("version").get<int>() != kProjectVersion) throw IntegrityError("unsupported version");
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad manifest: ") + e.what());
  }

  std::map<std::string, std::string> payload;
  for (const auto& [name, info] : manifest.at("files").items()) {
    std::string bytes;
    try {
      bytes = read_file(dir / name);
    } catch (const IoError&) {
      throw IntegrityError("missing " + name);
    }
    if (bytes.size() != info.at("size").get<std::size_t>() || crc32_of(bytes) != info.at("crc32").get<std::uint32_t>()) {
      throw IntegrityError("checksum mismatch in " + name);
    }
    payload[name] = std::move(bytes);
  }
  if (!payload.count("project.json")) throw IntegrityError("project.json not listed");

  try {
    const Json doc = Json::parse(payload["project.json"]);
    Project p;
    p.id = doc.at("id").get<std::string>();
    p.plan_source = doc.at("plan_source").get<std::string>();
    const Json& meta = doc.at("meta");
    p.meta = {meta.at("dpi").get<double>(), meta.at("scale").get<double>(), meta.at("map_orientation").get<double>()};
    p.config = planner_config_from_json(doc.at("config"));
    p.template_set = doc.at("template_set").get<std::string>();
    p.model_ref = doc.at("model_ref").get<std::string>();
    p.created_at = doc.at("created_at").get<std::string>();
    p.updated_at = doc.at("updated_at").get<std::string>();
    p.zones = zones_from_json(doc.at("zones"));
    for (const auto& c : doc.at("candidates")) p.candidates.push_back(candidate_from_json(c));
    if (!doc.at("detected").is_null()) p.detected = graph_from_json(doc.at("detected"));
    if (!doc.at("graph").is_null()) p.graph = graph_from_json(doc.at("graph"));
    for (const auto& e : doc.at("edits")) p.edits.push_back(edit_from_json(e));
    if (payload.count("plan.png")) {
      p.plan = decode_image(payload["plan.png"]);
      p.plan.dpi_x = doc.at("plan_dpi").at(0).get<double>();
      p.plan.dpi_y = doc.at("plan_dpi").at(1).get<double>();
    }
    if (payload.count("skeleton.png")) {
      const GrayImage sk = decode_image(payload["skeleton.png"]);
      p.skeleton = BinaryImage(sk.width(), sk.height());
      for (std::size_t i = 0; i < sk.size(); ++i) p.skeleton.bits()[i] = sk.pixels()[i] > 127 ? 1 : 0;
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("project.json: ") + e.what());
  } catch (const ValidationError& e) {
    throw IntegrityError(std::string("project.json: ") + e.what());
  }
}

}  // namespace beaconmap
