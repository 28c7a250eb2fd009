// Command-line front end: run the planner on a floor plan, generate synthetic
// plans, write templates, train classifiers, export and edit projects.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "beaconmap/imageio.hpp"
#include "beaconmap/planner.hpp"
#include "beaconmap/project.hpp"
#include "beaconmap/synth.hpp"

namespace fs = std::filesystem;
using namespace beaconmap;

namespace {

// Usage problems detected after parsing; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << msg << "\n"; }

int fail(const std::string& kind, const std::string& msg, int code) {
  std::cerr << Json{{"error", msg}, {"kind", kind}, {"exit_code", code}}.dump() << "\n";
  return code;
}

std::string data_dir() {
  if (const char* v = std::getenv("BEACONMAP_DATA")) return v;
  return BEACONMAP_DATA_DIR;
}

// --- Overlay ----------------------------------------------------------------------

void disc(RgbImage& img, int cx, int cy, int r, std::array<std::uint8_t, 3> c) {
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      if (x * x + y * y <= r * r) img.put(cx + x, cy + y, c[0], c[1], c[2]);
    }
  }
}

void triangle(RgbImage& img, int cx, int cy, int r, std::array<std::uint8_t, 3> c) {
  // Upward triangle with apex at cy - r and base at cy + r.
  for (int y = -r; y <= r; ++y) {
    const double half = (y + r) * 0.5 + 0.5;
    for (int x = -r; x <= r; ++x) {
      if (std::abs(x) <= half) img.put(cx + x, cy + y, c[0], c[1], c[2]);
    }
  }
}

RgbImage render_overlay(const GrayImage& plan, const BinaryImage& skeleton, const ConnectivityGraph& g) {
  RgbImage img(plan.width(), plan.height());
  for (int y = 0; y < plan.height(); ++y) {
    for (int x = 0; x < plan.width(); ++x) {
      const auto v = static_cast<std::uint8_t>(155 + plan.at(x, y) * 100 / 255);
      img.put(x, y, v, v, v);
    }
  }
  for (int y = 0; y < skeleton.height(); ++y) {
    for (int x = 0; x < skeleton.width(); ++x) {
      if (skeleton.at(x, y)) img.put(x, y, 150, 190, 230);
    }
  }
  for (const auto& e : g.edges) {
    const BeaconNode* a = g.find(e.a);
    if (!a) continue;
    Pixel p = a->pixel;
    for (Dir d : e.steps) {
      const auto o = dir_offset(d);
      p = {p.x + o[0], p.y + o[1]};
      const std::uint8_t shade = e.max_zone_level > 0 ? 200 : 0;
      img.put(p.x, p.y, shade, 150, 60);
      img.put(p.x + 1, p.y, shade, 150, 60);
    }
  }
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Poi) {
      disc(img, n.pixel.x, n.pixel.y, 7, n.origin == NodeOrigin::Manual ? std::array<std::uint8_t, 3>{230, 140, 0}
                                                                        : std::array<std::uint8_t, 3>{20, 60, 220});
    } else {
      triangle(img, n.pixel.x, n.pixel.y, 7, {220, 30, 30});
    }
  }
  return img;
}

// --- run ----------------------------------------------------------------------------

struct RunArgs {
  std::string input;
  std::optional<double> dpi;
  std::string scale;
  std::string orientation = "N";
  int option = 1;
  std::string mode = "path-only";
  std::string templates;
  std::vector<std::string> models;
  std::string zones;
  std::string out = "beaconmap-out";
  std::uint64_t seed = 42;
  std::string format = "json";
  double max_spacing_ft = 30.0;
  int access_cutoff = 2;
  double max_score = 0.0;
  bool dir_string = false;
};

int cmd_run(const RunArgs& a) {
  if (a.scale.empty()) throw UsageError("--scale is required");
  if (a.option < 1 || a.option > 3) throw UsageError("--option must be 1, 2 or 3");
  if (a.option != 1 && a.models.empty()) throw UsageError("model required: --option " + std::to_string(a.option) + " needs --model");
  PlanMeta meta;
  try {
    meta.scale = parse_scale(a.scale);
    meta.map_orientation = parse_orientation(a.orientation);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  DetectionMode mode;
  try {
    mode = parse_mode(a.mode);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  ExportFormat format;
  try {
    format = parse_export_format(a.format);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }

  const auto t0 = std::chrono::steady_clock::now();
  GrayImage plan = load_image(a.input);
  meta.dpi = a.dpi ? *a.dpi : plan.dpi_x;
  if (!(meta.dpi > 0.0)) throw UsageError("--dpi is required: the image carries no resolution");

  const std::string tdir = a.templates.empty() ? data_dir() + "/templates" : a.templates;
  const auto templates = load_templates(tdir);
  std::vector<SvmModel> models;
  for (const auto& m : a.models) models.push_back(load_model(m));
  std::vector<Zone> zones;
  if (!a.zones.empty()) zones = zones_from_json(Json::parse(read_file(a.zones)));

  PlannerConfig cfg;
  cfg.pipeline.option = parse_option(a.option);
  cfg.pipeline.mode = mode;
  cfg.pipeline.seed = a.seed;
  if (a.max_score > 0.0) cfg.pipeline.match.max_score = a.max_score;
  cfg.max_spacing_ft = a.max_spacing_ft;
  cfg.access_cutoff = a.access_cutoff;

  const double load_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const PlanResult r = plan_beacons(plan, meta, zones, cfg, templates, models, [](double f, const std::string& phase) {
    log("phase " + phase + " done (" + std::to_string(static_cast<int>(std::lround(f * 100))) + "%)");
  });

  Project p;
  p.id = fs::path(a.input).stem().string();
  p.plan_source = fs::path(a.input).filename().string();
  p.plan = plan;
  p.meta = meta;
  p.zones = zones;
  p.config = cfg;
  p.config.pipeline.match.dpi = meta.dpi;
  p.config.pipeline.match.drawing_scale = meta.scale;
  p.template_set = tdir;
  for (const auto& m : a.models) p.model_ref += (p.model_ref.empty() ? "" : ",") + m;
  set_detection(p, r);

  const fs::path out(a.out);
  fs::create_directories(out);
  save_project(p, out / "project");
  const char* ext = format == ExportFormat::JsonAdjacency ? "json" : format == ExportFormat::CsvEdgeList ? "csv" : "graphml";
  write_file(out / (std::string("graph.") + ext), export_graph(r.graph, format, a.dir_string));
  save_png(render_overlay(plan, r.skeleton.mask, r.graph), out / "overlay.png");

  Json timings = Json::array();
  double total = load_s;
  timings.push_back({{"phase", "load"}, {"seconds", load_s}});
  for (const auto& t : r.timings) {
    timings.push_back({{"phase", t.phase}, {"seconds", t.seconds}});
    total += t.seconds;
  }
  write_file(out / "timing.json", Json{{"phases", timings}, {"total_seconds", total}}.dump(1) + "\n");

  std::size_t pois = 0;
  for (const auto& n : r.graph.nodes) pois += n.kind == NodeKind::Poi;
  std::cout << Json{{"candidates", r.candidates.size()},
                    {"nodes", r.graph.nodes.size()},
                    {"pois", pois},
                    {"edges", r.graph.edges.size()},
                    {"total_seconds", total},
                    {"out", out.string()}}
                   .dump()
            << "\n";
  return 0;
}

// --- synth / templates / train --------------------------------------------------------

struct SynthArgs {
  std::string out = "plan.png";
  std::string truth;
  int pois = 30;
  std::uint64_t seed = 1;
  int width = 2200;
  int height = 3400;
  int degrade_factor = 1;
  double noise = 0.0;
};

Json truth_json(const SynthPlan& s) {
  Json list = Json::array();
  for (const auto& t : s.truth) list.push_back({{"kind", t.kind}, {"x", t.x}, {"y", t.y}, {"orientation", t.orientation}});
  return {{"dpi", s.meta.dpi}, {"scale", s.meta.scale}, {"symbols", list}};
}

int cmd_synth(const SynthArgs& a) {
  SynthOptions o;
  o.poi_count = a.pois;
  o.seed = a.seed;
  o.width = a.width;
  o.height = a.height;
  SynthPlan s = generate_plan(o);
  if (a.degrade_factor > 1 || a.noise > 0.0) s = degrade(s, std::max(1, a.degrade_factor), a.noise, a.seed + 1000);
  const fs::path out(a.out);
  if (out.extension() == ".pgm") {
    save_pgm(s.image, out);
  } else {
    save_png(s.image, out);
  }
  if (!a.truth.empty()) write_file(a.truth, truth_json(s).dump(1) + "\n");
  std::cout << Json{{"image", out.string()}, {"width", s.image.width()}, {"height", s.image.height()},
                    {"dpi", s.meta.dpi}, {"symbols", s.truth.size()}}
                   .dump()
            << "\n";
  return 0;
}

struct TrainArgs {
  std::string kind = "door";
  std::string out;
  int plans = 4;
  std::uint64_t seed = 11;
  int patch_size = 24;
  int iterations = 400;
  double reg = 1e-3;
};

int cmd_train(const TrainArgs& a) {
  if (a.out.empty()) throw UsageError("--out is required");
  const auto templates = builtin_templates();
  std::vector<LabeledPatch> samples;
  TrainingOptions to;
  to.patch_size = a.patch_size;
  for (int i = 0; i < a.plans; ++i) {
    SynthOptions so;
    so.poi_count = 60;
    so.stair_fraction = 0.3;
    so.seed = a.seed + static_cast<std::uint64_t>(i);
    const SynthPlan hi = generate_plan(so);
    to.seed = so.seed * 31;
    auto s1 = training_patches(hi, templates, a.kind, to);
    samples.insert(samples.end(), s1.begin(), s1.end());
    const SynthPlan lo = degrade(hi, 2, 10.0, so.seed + 1000);
    auto s2 = training_patches(lo, templates, a.kind, to);
    samples.insert(samples.end(), s2.begin(), s2.end());
    log("plan " + std::to_string(i + 1) + "/" + std::to_string(a.plans) + ": " + std::to_string(samples.size()) +
        " patches");
  }
  SvmOptions so;
  so.reg = a.reg;
  so.iterations = a.iterations;
  so.seed = a.seed;
  so.symmetry = PatchSymmetry::Dihedral;
  const SvmModel m = train_svm(samples, a.kind, so);
  int right = 0;
  for (const auto& s : samples) right += classify_patch(m, s.patch).label == s.label;
  save_model(m, a.out);
  std::cout << Json{{"kind", a.kind}, {"samples", samples.size()},
                    {"training_accuracy", static_cast<double>(right) / samples.size()}, {"out", a.out}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beaconmap: beacon locations and a connectivity graph from floor-plan images"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run the full pipeline on a floor plan");
  run_cmd->add_option("--input,-i", run.input, "floor plan image (PNG/PNM)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--dpi", run.dpi, "resolution override (pixels per inch)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--scale", run.scale, "drawing scale, e.g. 1/16=1ft");
  run_cmd->add_option("--orientation", run.orientation, "compass direction of image-up: N, E, S, W or degrees");
  run_cmd->add_option("--option", run.option, "1 = FDM, 2 = FDM+SML, 3 = FD+SML");
  run_cmd->add_option("--mode", run.mode, "path-only or full");
  run_cmd->add_option("--templates", run.templates, "template library directory");
  run_cmd->add_option("--model", run.models, "SVM model file (repeatable)");
  run_cmd->add_option("--zones", run.zones, "restricted zones JSON");
  run_cmd->add_option("--out,-o", run.out, "output directory");
  run_cmd->add_option("--seed", run.seed, "random seed");
  run_cmd->add_option("--format", run.format, "graph export: json, csv or graphml");
  run_cmd->add_option("--max-spacing", run.max_spacing_ft, "maximum beacon spacing in feet")->check(CLI::PositiveNumber);
  run_cmd->add_option("--access-cutoff", run.access_cutoff, "zones at or above this level are blocked");
  run_cmd->add_option("--max-score", run.max_score, "template match acceptance threshold");
  run_cmd->add_flag("--dir-string", run.dir_string, "include step sequences in the JSON export");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic floor plan with ground truth");
  synth_cmd->add_option("--out,-o", synth.out, "output image (.png or .pgm)");
  synth_cmd->add_option("--truth", synth.truth, "ground-truth JSON output");
  synth_cmd->add_option("--pois", synth.pois, "number of door and stair symbols");
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("--width", synth.width, "page width in pixels");
  synth_cmd->add_option("--height", synth.height, "page height in pixels");
  synth_cmd->add_option("--degrade", synth.degrade_factor, "downsampling factor for a low-resolution scan");
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise sigma");

  std::string templates_out;
  auto* templates_cmd = app.add_subcommand("templates", "write the built-in template library");
  templates_cmd->add_option("--out,-o", templates_out, "output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a one-vs-all classifier on synthetic patches");
  train_cmd->add_option("--kind", train.kind, "positive building-block kind");
  train_cmd->add_option("--out,-o", train.out, "model JSON output");
  train_cmd->add_option("--plans", train.plans, "synthetic plans to sample");
  train_cmd->add_option("--seed", train.seed, "random seed");
  train_cmd->add_option("--patch-size", train.patch_size, "classifier patch size");
  train_cmd->add_option("--iterations", train.iterations, "subgradient iterations");
  train_cmd->add_option("--reg", train.reg, "regularisation weight");

  std::string project_dir, export_out, export_format = "json", ops_file;
  bool export_dir_string = false;
  auto* export_cmd = app.add_subcommand("export", "export the graph of a saved project");
  export_cmd->add_option("--project,-p", project_dir, "project archive")->required();
  export_cmd->add_option("--format", export_format, "json, csv or graphml");
  export_cmd->add_option("--out,-o", export_out, "output file (default stdout)");
  export_cmd->add_flag("--dir-string", export_dir_string, "include step sequences");

  auto* edit_cmd = app.add_subcommand("edit", "apply beacon edits to a saved project");
  edit_cmd->add_option("--project,-p", project_dir, "project archive")->required();
  edit_cmd->add_option("--ops", ops_file, "JSON array of edit ops")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*synth_cmd) return cmd_synth(synth);
    if (*templates_cmd) {
      save_templates(builtin_templates(), templates_out);
      std::cout << Json{{"out", templates_out}}.dump() << "\n";
      return 0;
    }
    if (*train_cmd) return cmd_train(train);
    if (*export_cmd) {
      const Project p = load_project(project_dir);
      const std::string text = export_graph(p, parse_export_format(export_format), export_dir_string);
      if (export_out.empty()) {
        std::cout << text;
      } else {
        write_file(export_out, text);
      }
      return 0;
    }
    if (*edit_cmd) {
      const Json doc = Json::parse(read_file(ops_file));
      const Json& list = doc.is_object() && doc.contains("ops") ? doc.at("ops") : doc;
      std::vector<EditOp> ops;
      for (const auto& j : list) ops.push_back(edit_from_json(j));
      const Project p = apply_edits(load_project(project_dir), ops);
      save_project(p, project_dir);
      std::cout << Json{{"nodes", p.graph->nodes.size()}, {"edges", p.graph->edges.size()}, {"edits", p.edits.size()}}
                       .dump()
                << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    return fail("usage", e.what(), 2);
  } catch (const ValidationError& e) {
    return fail("validation", e.what(), 1);
  } catch (const NotFoundError& e) {
    return fail("not_found", e.what(), 1);
  } catch (const ConflictError& e) {
    return fail("conflict", e.what(), 1);
  } catch (const IntegrityError& e) {
    return fail("integrity", e.what(), 1);
  } catch (const IoError& e) {
    return fail("io", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
