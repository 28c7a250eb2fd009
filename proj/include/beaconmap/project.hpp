#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beaconmap/detect.hpp"
#include "beaconmap/imageio.hpp"
#include "beaconmap/learn.hpp"
#include "beaconmap/pathfind.hpp"
#include "beaconmap/planner.hpp"
#include "beaconmap/skelgraph.hpp"

namespace beaconmap {

using Json = nlohmann::json;

enum class EditType { RemoveBeacon, AddBeacon, RelabelBeacon, MoveBeacon };
const char* to_string(EditType t);
EditType parse_edit_type(const std::string& s);

struct EditOp {
  EditType type = EditType::RelabelBeacon;
  int id = -1;          // target node (remove, relabel, move)
  int x = 0, y = 0;     // plan pixel (add, move)
  std::string label;    // add, relabel
  std::string block_class;  // add

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct Project {
  std::string id;
  std::string plan_source;  // original file name of the floor plan
  GrayImage plan;           // empty until uploaded
  PlanMeta meta;
  std::vector<Zone> zones;
  PlannerConfig config;
  std::string template_set;  // template library reference
  std::string model_ref;     // model reference(s), comma separated
  std::vector<MatchCandidate> candidates;
  BinaryImage skeleton;                     // skeleton the graph was traced on
  std::optional<ConnectivityGraph> detected;  // graph as produced by detection
  std::optional<ConnectivityGraph> graph;     // detected + edits
  std::vector<EditOp> edits;
  std::string created_at;
  std::string updated_at;

  friend bool operator==(const Project&, const Project&) = default;
};

inline constexpr const char* kProjectSchema = "beaconmap-project";
inline constexpr int kProjectVersion = 1;

// Directory archive: manifest.json (schema, version, per-file CRC-32),
// project.json, plan.png and skeleton.png. Written to a temporary sibling and
// renamed into place; a .lock file next to the archive guards writers.
void save_project(const Project& p, const std::filesystem::path& dir);
// Throws IntegrityError on checksum or schema mismatch, IoError when missing.
Project load_project(const std::filesystem::path& dir);

// Applies ops in order on the current graph, re-tracing edges after structural
// edits, and appends them to the log. Throws NotFoundError for unknown ids and
// ValidationError for off-plan pixels; the project is unchanged on error.
Project apply_edits(const Project& p, const std::vector<EditOp>& ops);

// Replays the whole edit log from the detected graph.
ConnectivityGraph replay_edits(const Project& p);

// Installs a detection result and clears the edit log.
void set_detection(Project& p, const PlanResult& result);

enum class ExportFormat { JsonAdjacency, CsvEdgeList, GraphMl };
ExportFormat parse_export_format(const std::string& s);

std::string export_graph(const ConnectivityGraph& g, ExportFormat format, bool include_dir_string = false);
// Throws ValidationError when no graph exists yet.
std::string export_graph(const Project& p, ExportFormat format, bool include_dir_string = false);
ConnectivityGraph import_json_adjacency(const std::string& text);

// JSON forms shared by the project file, the server and the CLI.
Json to_json(const Zone& z);
Zone zone_from_json(const Json& j);
std::vector<Zone> zones_from_json(const Json& j);
Json to_json(const EditOp& op);
EditOp edit_from_json(const Json& j);
Json to_json(const MatchCandidate& c);
MatchCandidate candidate_from_json(const Json& j);
Json to_json(const PlannerConfig& c);
PlannerConfig planner_config_from_json(const Json& j);
Json to_json(const ConnectivityGraph& g);  // full form, with step sequences
ConnectivityGraph graph_from_json(const Json& j);
Json to_json(const SvmModel& m);
SvmModel model_from_json(const Json& j);

// Model files and template libraries on disk.
void save_model(const SvmModel& m, const std::filesystem::path& file);
SvmModel load_model(const std::filesystem::path& file);
// Directory of PGM patches plus manifest.json.
void save_templates(const std::vector<Template>& templates, const std::filesystem::path& dir);
std::vector<Template> load_templates(const std::filesystem::path& dir);

std::uint32_t crc32_of(const std::string& data);

}  // namespace beaconmap
