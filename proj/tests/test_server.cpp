#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include "beaconmap/synth.hpp"
#include "server.hpp"

using namespace beaconmap;
namespace fs = std::filesystem;

namespace {

const fs::path kData = BEACONMAP_DATA_DIR;

struct Harness {
  fs::path store;
  std::unique_ptr<BeaconServer> server;
  std::unique_ptr<httplib::Client> client;

  explicit Harness(const std::string& name, std::vector<fs::path> models = {}, std::string token = "",
                   bool fresh = true) {
    store = fs::temp_directory_path() / ("beaconmap-server-" + name);
    if (fresh) fs::remove_all(store);
    ServerConfig cfg;
    cfg.port = 0;
    cfg.store = store;
    cfg.templates = kData / "templates";
    cfg.models = std::move(models);
    cfg.token = std::move(token);
    server = std::make_unique<BeaconServer>(cfg);
    const int port = server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(120, 0);
  }
  ~Harness() {
    client.reset();
    server.reset();
  }
};

Json body(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

std::string plan_png(int w, int h, int pois, std::uint64_t seed) {
  SynthOptions so;
  so.width = w;
  so.height = h;
  so.poi_count = pois;
  so.seed = seed;
  const fs::path tmp = fs::temp_directory_path() / ("beaconmap-upload-" + std::to_string(seed) + ".png");
  save_png(generate_plan(so).image, tmp);
  std::string bytes = read_file(tmp);
  fs::remove(tmp);
  return bytes;
}

std::string new_project(httplib::Client& c) {
  auto r = c.Post("/projects", "{}", "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  return body(r)["id"];
}

Json wait_job(httplib::Client& c, const std::string& id) {
  for (int i = 0; i < 600; ++i) {
    const Json j = body(c.Get("/jobs/" + id));
    if (j["state"] == "done" || j["state"] == "failed") return j;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  FAIL("job did not finish");
  return {};
}

void upload(httplib::Client& c, const std::string& pid, const std::string& png) {
  httplib::MultipartFormDataItems items = {{"file", png, "plan.png", "image/png"}};
  auto r = c.Post("/projects/" + pid + "/floorplan", items);
  REQUIRE(r);
  CHECK(r->status == 200);
}

}  // namespace

TEST_CASE("server: full detection and editing flow") {
  Harness h("flow", {kData / "models" / "door.json", kData / "models" / "stair.json"});
  auto& c = *h.client;
  const std::string pid = new_project(c);
  CHECK(body(c.Get("/projects/" + pid))["has_graph"] == false);
  CHECK(c.Get("/projects/" + pid + "/graph")->status == 404);

  upload(c, pid, plan_png(900, 800, 8, 12));
  const Json proj = body(c.Get("/projects/" + pid));
  CHECK(proj["width"] == 900);
  CHECK(proj["meta"]["dpi"] == 200.0);  // read from the PNG

  auto meta = c.Put("/projects/" + pid + "/meta", R"({"scale": "1/16=1ft", "map_orientation": "E"})",
                    "application/json");
  CHECK(meta->status == 200);
  CHECK(body(meta)["scale"] == 0.0625);
  CHECK(body(meta)["map_orientation"] == 90.0);
  auto zones = c.Put("/projects/" + pid + "/zones", R"([{"polygon": [[0,0],[40,0],[40,40]], "level": 1}])",
                     "application/json");
  CHECK(zones->status == 200);

  for (int option : {1, 3}) {
    auto d = c.Post("/projects/" + pid + "/detect?option=" + std::to_string(option) + "&mode=path-only", "",
                    "text/plain");
    REQUIRE(d);
    CHECK(d->status == 202);
    const Json job = wait_job(c, body(d)["id"]);
    INFO(job.dump());
    CHECK(job["state"] == "done");
    CHECK(job["progress"] == 1.0);
    CHECK(job["timings"].size() == 4);
  }

  const Json graph = body(c.Get("/projects/" + pid + "/graph"));
  CHECK(graph["meta"]["map_orientation"] == 90.0);
  REQUIRE(graph["nodes"].size() > 0);
  int poi = -1;
  for (const auto& n : graph["nodes"])
    if (n["kind"] == "poi") poi = n["id"];
  REQUIRE(poi >= 0);

  Json ops = Json::array({{{"op", "relabel_beacon"}, {"id", poi}, {"label", "Lobby"}},
                          {{"op", "add_beacon"}, {"x", 450}, {"y", 400}, {"label", "kiosk"}}});
  auto e = c.Post("/projects/" + pid + "/edits", Json{{"ops", ops}}.dump(), "application/json");
  CHECK(e->status == 200);
  const Json er = body(e);
  CHECK(er["edits"] == 2);
  CHECK(er["regenerated"] == true);
  CHECK(er["nodes"] == graph["nodes"].size() + 1);
  CHECK(er["job"]["state"] == "done");
  const Json bad = Json::array({{{"op", "remove_beacon"}, {"id", 123456}}});
  auto nf = c.Post("/projects/" + pid + "/edits", bad.dump(), "application/json");
  CHECK(nf->status == 404);
  CHECK(body(nf).contains("error"));
  CHECK(body(c.Get("/projects/" + pid))["edits"] == 2);

  auto csv = c.Get("/projects/" + pid + "/export?format=csv");
  CHECK(csv->status == 200);
  CHECK(csv->body.rfind("a,b,length_ft,code,zone_level\n", 0) == 0);
  auto xml = c.Get("/projects/" + pid + "/export?format=graphml");
  CHECK(xml->body.find("<graphml") != std::string::npos);
  const Json js = body(c.Get("/projects/" + pid + "/export?format=json&dir_string=1"));
  REQUIRE(js["edges"].size() > 0);
  CHECK(js["edges"][0].contains("dir_string"));
  bool relabelled = false;
  for (const auto& n : js["nodes"]) relabelled |= n["label"] == "Lobby";
  CHECK(relabelled);
  CHECK(c.Get("/projects/" + pid + "/export?format=xls")->status == 422);

  // A restarted server finds the project in its store.
  const std::string before = c.Get("/projects/" + pid + "/export?format=json")->body;
  h.client.reset();
  h.server.reset();
  Harness again("flow", {}, "", false);
  CHECK(again.client->Get("/projects/" + pid + "/export?format=json")->body == before);
  CHECK(new_project(*again.client) != pid);
}

TEST_CASE("server: validation and not-found errors") {
  Harness h("errors");
  auto& c = *h.client;
  CHECK(c.Get("/projects/p999")->status == 404);
  CHECK(c.Get("/jobs/j999")->status == 404);
  const std::string pid = new_project(c);
  // Zones need a plan; detection needs a plan and metadata.
  CHECK(c.Put("/projects/" + pid + "/zones", "[]", "application/json")->status == 422);
  CHECK(c.Post("/projects/" + pid + "/detect", "", "text/plain")->status == 422);
  CHECK(c.Post("/projects/" + pid + "/floorplan", "not an image", "application/octet-stream")->status == 422);
  upload(c, pid, plan_png(700, 700, 4, 2));
  auto m = c.Put("/projects/" + pid + "/meta", R"({"scale": "nonsense"})", "application/json");
  CHECK(m->status == 422);
  CHECK(body(m)["status"] == 422);
  CHECK(c.Put("/projects/" + pid + "/meta", R"({"dpi": -3, "scale": 0.0625})", "application/json")->status == 422);
  CHECK(c.Put("/projects/" + pid + "/meta", "{bad json", "application/json")->status == 422);
  CHECK(c.Put("/projects/" + pid + "/zones", R"([{"polygon": [[0,0],[9000,0],[0,10]], "level": 1}])",
              "application/json")
            ->status == 422);
  CHECK(c.Post("/projects/" + pid + "/detect?option=7", "", "text/plain")->status == 422);
  CHECK(c.Post("/projects/" + pid + "/detect?mode=sideways", "", "text/plain")->status == 422);
  CHECK(c.Post("/projects/" + pid + "/edits", "[]", "application/json")->status == 404);

  // Without models, the learning pipelines fail inside the job.
  CHECK(c.Put("/projects/" + pid + "/meta", R"({"scale": 0.0625})", "application/json")->status == 200);
  auto d = c.Post("/projects/" + pid + "/detect?option=3", "", "text/plain");
  CHECK(d->status == 202);
  const Json job = wait_job(c, body(d)["id"]);
  CHECK(job["state"] == "failed");
  CHECK(job["error"].get<std::string>().find("model required") != std::string::npos);
  CHECK(c.Get("/projects/" + pid + "/graph")->status == 404);
}

TEST_CASE("server: one detection per project at a time") {
  Harness h("conflict");
  auto& c = *h.client;
  const std::string pid = new_project(c);
  upload(c, pid, plan_png(2200, 3400, 30, 8));
  CHECK(c.Put("/projects/" + pid + "/meta", R"({"scale": 0.0625})", "application/json")->status == 200);
  auto d = c.Post("/projects/" + pid + "/detect", "", "text/plain");
  CHECK(d->status == 202);
  auto again = c.Post("/projects/" + pid + "/detect", "", "text/plain");
  CHECK(again->status == 409);
  CHECK(c.Put("/projects/" + pid + "/meta", R"({"scale": 0.125})", "application/json")->status == 409);
  CHECK(wait_job(c, body(d)["id"])["state"] == "done");
  CHECK(c.Post("/projects/" + pid + "/detect", "", "text/plain")->status == 202);
  h.server->wait_idle();
}

TEST_CASE("server: bearer token") {
  Harness h("auth", {}, "s3cret");
  auto& c = *h.client;
  auto r = c.Post("/projects", "{}", "application/json");
  CHECK(r->status == 401);
  CHECK(body(r)["status"] == 401);
  c.set_bearer_token_auth("wrong");
  CHECK(c.Get("/projects/p1")->status == 401);
  c.set_bearer_token_auth("s3cret");
  CHECK(c.Post("/projects", "{}", "application/json")->status == 201);
}
