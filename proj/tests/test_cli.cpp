#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "beaconmap/imageio.hpp"
#include "beaconmap/project.hpp"

using namespace beaconmap;
namespace fs = std::filesystem;

namespace {

const fs::path kData = BEACONMAP_DATA_DIR;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with stdout and stderr captured to files in `dir`.
Run cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + BEACONMAP_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// The last stderr line, parsed as the machine-readable error.
Json error_of(const Run& r) {
  std::string s = r.err;
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return Json::parse(s.substr(s.rfind('\n') == std::string::npos ? 0 : s.rfind('\n') + 1));
}

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) : path(fs::temp_directory_path() / ("beaconmap-cli-" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return "\"" + (path / f).string() + "\""; }
};

}  // namespace

TEST_CASE("cli: usage errors exit 2 with a JSON error") {
  Workdir w("usage");
  const Run none = cli(w.path, "");
  CHECK(none.code == 2);
  CHECK(error_of(none)["kind"] == "usage");

  CHECK(cli(w.path, "synth --out " + (w / "p.png") + " --width 600 --height 600 --pois 4").code == 0);
  const Run no_scale = cli(w.path, "run --input " + (w / "p.png"));
  CHECK(no_scale.code == 2);
  const Json e = error_of(no_scale);
  CHECK(e["exit_code"] == 2);
  CHECK(e["error"].get<std::string>().find("--scale") != std::string::npos);

  const Run no_model = cli(w.path, "run --input " + (w / "p.png") + " --scale 1/16=1ft --option 3");
  CHECK(no_model.code == 2);
  CHECK(error_of(no_model)["error"].get<std::string>().find("model required") != std::string::npos);

  CHECK(cli(w.path, "run --input " + (w / "p.png") + " --scale 1/16=1ft --mode sideways").code == 2);
  CHECK(cli(w.path, "run --input " + (w / "p.png") + " --scale banana").code == 2);
  CHECK(cli(w.path, "run --input " + (w / "missing.png") + " --scale 1/16=1ft").code == 2);
  CHECK(cli(w.path, "frobnicate").code == 2);
}

TEST_CASE("cli: runtime failures exit 1 with a JSON error") {
  Workdir w("runtime");
  write_file(w.path / "junk.png", "not an image");
  const Run bad = cli(w.path, "run --input " + (w / "junk.png") + " --scale 1/16=1ft --dpi 200");
  CHECK(bad.code == 1);
  CHECK(error_of(bad)["kind"] == "io");
  const Run gone = cli(w.path, "export --project " + (w / "nothing"));
  CHECK(gone.code == 1);
  CHECK(error_of(gone)["kind"] == "io");
}

TEST_CASE("cli: synth, run, export and edit produce their artifacts") {
  Workdir w("flow");
  const Run s = cli(w.path, "synth --out " + (w / "plan.png") + " --truth " + (w / "truth.json") +
                                " --width 900 --height 800 --pois 8 --seed 12");
  REQUIRE(s.code == 0);
  const Json sj = Json::parse(s.out);
  CHECK(sj["width"] == 900);
  const Json truth = Json::parse(read_file(w.path / "truth.json"));
  CHECK(truth["symbols"].size() == sj["symbols"]);
  // The resolution travels inside the PNG, so run needs no --dpi.
  CHECK(load_image(w.path / "plan.png").dpi_x == 200.0);

  const std::string run_args = "run --input " + (w / "plan.png") + " --scale 1/16=1ft --orientation E --seed 3";
  const Run r = cli(w.path, run_args + " --out " + (w / "out1"));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const Json rj = Json::parse(r.out);
  CHECK(rj["nodes"].get<int>() > 0);
  for (const char* f : {"graph.json", "overlay.png", "timing.json", "project/manifest.json", "project/plan.png"})
    CHECK(fs::exists(w.path / "out1" / f));
  CHECK(r.err.find("phase graph done") != std::string::npos);
  const Json timing = Json::parse(read_file(w.path / "out1" / "timing.json"));
  CHECK(timing["phases"].size() == 5);
  const GrayImage overlay = load_image(w.path / "out1" / "overlay.png");
  CHECK(overlay.width() == 900);
  CHECK(overlay.height() == 800);

  // Same inputs and seed give a byte-identical export.
  REQUIRE(cli(w.path, run_args + " --out " + (w / "out2")).code == 0);
  CHECK(read_file(w.path / "out1" / "graph.json") == read_file(w.path / "out2" / "graph.json"));

  const Json graph = Json::parse(read_file(w.path / "out1" / "graph.json"));
  CHECK(graph["meta"]["map_orientation"] == 90.0);
  CHECK(graph["nodes"].size() == rj["nodes"]);

  const Run csv = cli(w.path, "export --project " + (w / "out1/project") + " --format csv");
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("a,b,length_ft,code,zone_level\n", 0) == 0);
  CHECK(cli(w.path, "export --project " + (w / "out1/project") + " --format graphml --out " + (w / "g.graphml"))
            .code == 0);
  CHECK(read_file(w.path / "g.graphml").find("<graphml") != std::string::npos);
  const Run xls = cli(w.path, "export --project " + (w / "out1/project") + " --format xls");
  CHECK(xls.code == 1);
  CHECK(error_of(xls)["kind"] == "validation");

  int poi = -1;
  for (const auto& n : graph["nodes"])
    if (n["kind"] == "poi") poi = n["id"];
  REQUIRE(poi >= 0);
  write_file(w.path / "ops.json", Json::array({{{"op", "relabel_beacon"}, {"id", poi}, {"label", "Lobby"}},
                                               {{"op", "add_beacon"}, {"x", 450}, {"y", 400}}})
                                      .dump());
  const Run e = cli(w.path, "edit --project " + (w / "out1/project") + " --ops " + (w / "ops.json"));
  INFO(e.err);
  REQUIRE(e.code == 0);
  CHECK(Json::parse(e.out)["edits"] == 2);
  CHECK(Json::parse(e.out)["nodes"] == graph["nodes"].size() + 1);
  const Project p = load_project(w.path / "out1" / "project");
  CHECK(p.edits.size() == 2);
  CHECK(replay_edits(p) == *p.graph);

  write_file(w.path / "bad.json", R"([{"op": "remove_beacon", "id": 99999}])");
  const Run nf = cli(w.path, "edit --project " + (w / "out1/project") + " --ops " + (w / "bad.json"));
  CHECK(nf.code == 1);
  CHECK(error_of(nf)["kind"] == "not_found");
  CHECK(load_project(w.path / "out1" / "project").edits.size() == 2);
}

TEST_CASE("cli: templates writes a loadable library") {
  Workdir w("templates");
  REQUIRE(cli(w.path, "templates --out " + (w / "lib")).code == 0);
  const auto lib = load_templates(w.path / "lib");
  const auto shipped = load_templates(kData / "templates");
  REQUIRE(lib.size() == shipped.size());
  for (std::size_t i = 0; i < lib.size(); ++i) CHECK(lib[i].patch.pixels() == shipped[i].patch.pixels());
}
