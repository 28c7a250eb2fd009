#include "server.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "beaconmap/imageio.hpp"

namespace beaconmap {

namespace fs = std::filesystem;

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(1) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, {{"error", msg}, {"status", status}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

Json job_json(const Job& j) {
  Json timings = Json::array();
  for (const auto& t : j.timings) timings.push_back({{"phase", t.phase}, {"seconds", t.seconds}});
  Json out = {{"id", j.id},
              {"project_id", j.project_id},
              {"kind", j.kind},
              {"state", to_string(j.state)},
              {"progress", j.progress},
              {"timings", timings}};
  if (!j.error.empty()) out["error"] = j.error;
  if (j.kind == "detection") {
    out["option"] = static_cast<int>(j.option);
    out["mode"] = to_string(j.mode);
  }
  return out;
}

Json meta_json(const PlanMeta& m) {
  return {{"dpi", m.dpi}, {"scale", m.scale}, {"map_orientation", m.map_orientation}};
}

Json project_json(const Project& p) {
  Json zones = Json::array();
  for (const auto& z : p.zones) zones.push_back(to_json(z));
  Json out = {{"id", p.id},
              {"plan_source", p.plan_source},
              {"width", p.plan.width()},
              {"height", p.plan.height()},
              {"meta", meta_json(p.meta)},
              {"zones", zones},
              {"config", to_json(p.config)},
              {"candidates", p.candidates.size()},
              {"has_graph", p.graph.has_value()},
              {"edits", p.edits.size()},
              {"created_at", p.created_at},
              {"updated_at", p.updated_at}};
  if (p.graph) {
    out["nodes"] = p.graph->nodes.size();
    out["edges"] = p.graph->edges.size();
  }
  return out;
}

void clear_results(Project& p) {
  p.candidates.clear();
  p.skeleton = BinaryImage();
  p.detected.reset();
  p.graph.reset();
  p.edits.clear();
}

double number_or_text(const Json& j, double (*parse)(const std::string&)) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse(j.get<std::string>());
  throw ValidationError("expected a number or string");
}

// Maps library errors to HTTP responses.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const ValidationError& e) {
    send_error(res, 422, e.what());
  } catch (const DimensionError& e) {
    send_error(res, 422, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 422, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace

const char* to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

void ServerConfig::apply_env() {
  if (auto bind = env("BEACONMAP_BIND"); !bind.empty()) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
      host = bind;
    } else {
      host = bind.substr(0, colon);
      port = std::stoi(bind.substr(colon + 1));
    }
  }
  if (auto v = env("BEACONMAP_STORE"); !v.empty()) store = v;
  if (auto v = env("BEACONMAP_WORKERS"); !v.empty()) workers = std::max(1, std::stoi(v));
  if (auto v = env("BEACONMAP_TOKEN"); !v.empty()) token = v;
  if (auto v = env("BEACONMAP_TEMPLATES"); !v.empty()) templates = v;
  if (auto v = env("BEACONMAP_MODELS"); !v.empty()) {
    models.clear();
    for (const auto& m : split(v, ',')) models.emplace_back(m);
  }
}

BeaconServer::BeaconServer(ServerConfig config) : config_(std::move(config)) {
  if (!config_.templates.empty()) templates_ = load_templates(config_.templates);
  for (const auto& m : config_.models) models_.push_back(load_model(m));
  fs::create_directories(config_.store);
  load_store();
  routes();
  for (int i = 0; i < std::max(1, config_.workers); ++i) workers_.emplace_back([this] { worker_loop(); });
}

BeaconServer::~BeaconServer() {
  stop();
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
}

int BeaconServer::start() {
  int port = config_.port;
  if (port == 0) {
    port = http_.bind_to_any_port(config_.host);
  } else if (!http_.bind_to_port(config_.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  listener_ = std::thread([this] { http_.listen_after_bind(); });
  http_.wait_until_ready();
  return port;
}

bool BeaconServer::listen() { return http_.listen(config_.host, config_.port); }

void BeaconServer::stop() {
  http_.stop();
  if (listener_.joinable()) listener_.join();
}

void BeaconServer::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

std::string BeaconServer::now() const {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void BeaconServer::load_store() {
  for (const auto& entry : fs::directory_iterator(config_.store)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "manifest.json")) continue;
    Project p = load_project(entry.path());
    const std::string id = p.id;
    if (id.rfind("p", 0) == 0) {
      try {
        next_project_ = std::max(next_project_, std::stoi(id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
    projects_.emplace(id, std::move(p));
  }
}

void BeaconServer::persist(const Project& p) { save_project(p, config_.store / p.id); }

Project& BeaconServer::project_or_throw(const std::string& id) {
  auto it = projects_.find(id);
  if (it == projects_.end()) throw NotFoundError("project " + id + " not found");
  return it->second;
}

void BeaconServer::ensure_idle(const std::string& project_id) {
  if (active_.count(project_id)) {
    throw ConflictError("detection job " + active_[project_id] + " is running on project " + project_id);
  }
}

void BeaconServer::routes() {
  http_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (config_.token.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + config_.token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_error(res, 401, "missing or wrong bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  http_.Post("/projects", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      std::lock_guard lock(mu_);
      Project p;
      p.id = "p" + std::to_string(next_project_++);
      p.created_at = p.updated_at = now();
      if (body.contains("config")) p.config = planner_config_from_json(body.at("config"));
      p.template_set = config_.templates.string();
      for (const auto& m : config_.models) p.model_ref += (p.model_ref.empty() ? "" : ",") + m.string();
      persist(p);
      send_json(res, 201, project_json(p));
      projects_.emplace(p.id, std::move(p));
    });
  });

  http_.Get(R"(/projects/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::lock_guard lock(mu_);
      send_json(res, 200, project_json(project_or_throw(req.matches[1])));
    });
  });

  http_.Post(R"(/projects/([^/]+)/floorplan)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::string bytes = req.body;
      std::string name = "upload";
      if (req.is_multipart_form_data()) {
        if (!req.has_file("file")) throw ValidationError("multipart field 'file' is required");
        const auto f = req.get_file_value("file");
        bytes = f.content;
        name = f.filename.empty() ? name : f.filename;
      }
      if (bytes.empty()) throw ValidationError("empty upload");
      GrayImage img;
      try {
        img = decode_image(bytes);
      } catch (const Error& e) {
        throw ValidationError(std::string("bad image: ") + e.what());
      }
      std::lock_guard lock(mu_);
      Project& p = project_or_throw(req.matches[1]);
      ensure_idle(p.id);
      Project next = p;
      next.plan = std::move(img);
      next.plan_source = name;
      if (next.plan.has_dpi()) next.meta.dpi = next.plan.dpi_x;
      clear_results(next);
      next.zones.clear();
      next.updated_at = now();
      persist(next);
      p = std::move(next);
      send_json(res, 200, project_json(p));
    });
  });

  http_.Put(R"(/projects/([^/]+)/meta)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      std::lock_guard lock(mu_);
      Project& p = project_or_throw(req.matches[1]);
      ensure_idle(p.id);
      PlanMeta m = p.meta;
      if (body.contains("dpi")) m.dpi = body.at("dpi").get<double>();
      if (body.contains("scale")) m.scale = number_or_text(body.at("scale"), parse_scale);
      if (body.contains("map_orientation")) m.map_orientation = number_or_text(body.at("map_orientation"), parse_orientation);
      if (!(m.dpi > 0.0)) throw ValidationError("dpi must be positive");
      if (!(m.scale > 0.0)) throw ValidationError("scale must be positive");
      if (!std::isfinite(m.map_orientation)) throw ValidationError("map_orientation must be finite");
      if (m == p.meta) {
        send_json(res, 200, meta_json(m));
        return;
      }
      Project next = p;
      next.meta = m;
      clear_results(next);
      next.updated_at = now();
      persist(next);
      p = std::move(next);
      send_json(res, 200, meta_json(m));
    });
  });

  http_.Put(R"(/projects/([^/]+)/zones)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto zones = zones_from_json(parse_body(req));
      std::lock_guard lock(mu_);
      Project& p = project_or_throw(req.matches[1]);
      ensure_idle(p.id);
      if (p.plan.empty()) throw ValidationError("upload a floor plan before setting zones");
      validate_zones(zones, p.plan.width(), p.plan.height());
      Project next = p;
      next.zones = zones;
      clear_results(next);
      next.updated_at = now();
      persist(next);
      p = std::move(next);
      Json out = Json::array();
      for (const auto& z : p.zones) out.push_back(to_json(z));
      send_json(res, 200, {{"zones", out}});
    });
  });

  http_.Post(R"(/projects/([^/]+)/detect)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      int option_value = 1;
      if (req.has_param("option")) {
        try {
          option_value = std::stoi(req.get_param_value("option"));
        } catch (const std::exception&) {
          throw ValidationError("option must be 1, 2 or 3");
        }
      }
      const DetectionOption option = parse_option(option_value);
      const DetectionMode mode =
          parse_mode(req.has_param("mode") ? req.get_param_value("mode") : std::string("path-only"));
      std::lock_guard lock(mu_);
      Project& p = project_or_throw(req.matches[1]);
      ensure_idle(p.id);
      if (p.plan.empty()) throw ValidationError("no floor plan uploaded");
      if (!(p.meta.dpi > 0.0) || !(p.meta.scale > 0.0)) throw ValidationError("set dpi and scale first");
      Job job;
      job.id = "j" + std::to_string(next_job_++);
      job.project_id = p.id;
      job.kind = "detection";
      job.option = option;
      job.mode = mode;
      active_[p.id] = job.id;
      queue_.push_back(job.id);
      send_json(res, 202, job_json(job));
      jobs_.emplace(job.id, std::move(job));
      cv_.notify_one();
    });
  });

  http_.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::lock_guard lock(mu_);
      auto it = jobs_.find(req.matches[1]);
      if (it == jobs_.end()) throw NotFoundError("job " + std::string(req.matches[1]) + " not found");
      send_json(res, 200, job_json(it->second));
    });
  });

  http_.Get(R"(/projects/([^/]+)/graph)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::lock_guard lock(mu_);
      const Project& p = project_or_throw(req.matches[1]);
      if (!p.graph) throw NotFoundError("no graph yet");
      res.status = 200;
      res.set_content(export_graph(*p.graph, ExportFormat::JsonAdjacency), "application/json");
    });
  });

  http_.Post(R"(/projects/([^/]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      const Json& list = body.is_object() && body.contains("ops") ? body.at("ops") : body;
      if (!list.is_array()) throw ValidationError("edits must be an array of ops");
      std::vector<EditOp> ops;
      for (const auto& j : list) ops.push_back(edit_from_json(j));
      std::lock_guard lock(mu_);
      Project& p = project_or_throw(req.matches[1]);
      ensure_idle(p.id);
      if (!p.graph) throw NotFoundError("no graph yet");
      Project next = apply_edits(p, ops);
      next.updated_at = now();
      persist(next);
      p = std::move(next);
      bool structural = false;
      for (const auto& op : ops) structural |= op.type != EditType::RelabelBeacon;
      Job job;
      job.id = "j" + std::to_string(next_job_++);
      job.project_id = p.id;
      job.kind = "regen";
      job.state = JobState::Done;
      job.progress = 1.0;
      Json out = {{"nodes", p.graph->nodes.size()},
                  {"edges", p.graph->edges.size()},
                  {"edits", p.edits.size()},
                  {"regenerated", structural},
                  {"job", job_json(job)}};
      jobs_.emplace(job.id, std::move(job));
      send_json(res, 200, out);
    });
  });

  http_.Get(R"(/projects/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const ExportFormat fmt =
          parse_export_format(req.has_param("format") ? req.get_param_value("format") : std::string("json"));
      const bool dir_string = req.has_param("dir_string") && req.get_param_value("dir_string") == "1";
      std::lock_guard lock(mu_);
      const Project& p = project_or_throw(req.matches[1]);
      if (!p.graph) throw NotFoundError("no graph yet");
      const char* type = fmt == ExportFormat::JsonAdjacency ? "application/json"
                         : fmt == ExportFormat::CsvEdgeList ? "text/csv"
                                                            : "application/xml";
      res.status = 200;
      res.set_content(export_graph(*p.graph, fmt, dir_string), type);
    });
  });
}

void BeaconServer::worker_loop() {
  while (true) {
    std::string job_id;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job_id = queue_.front();
      queue_.pop_front();
      ++running_;
    }
    run_job(job_id);
    {
      std::lock_guard lock(mu_);
      --running_;
    }
    idle_cv_.notify_all();
  }
}

void BeaconServer::run_job(const std::string& job_id) {
  Project snapshot;
  Job job;
  {
    std::lock_guard lock(mu_);
    Job& j = jobs_.at(job_id);
    j.state = JobState::Running;
    job = j;
    snapshot = projects_.at(j.project_id);
  }
  auto set_progress = [&](double f, const std::string&) {
    std::lock_guard lock(mu_);
    Job& j = jobs_.at(job_id);
    j.progress = std::max(j.progress, f);
  };
  try {
    PlannerConfig cfg = snapshot.config;
    cfg.pipeline.option = job.option;
    cfg.pipeline.mode = job.mode;
    const PlanResult result =
        plan_beacons(snapshot.plan, snapshot.meta, snapshot.zones, cfg, templates_, models_, set_progress);
    std::lock_guard lock(mu_);
    Project next = projects_.at(job.project_id);
    next.config = cfg;
    set_detection(next, result);
    next.updated_at = now();
    persist(next);
    projects_[job.project_id] = std::move(next);
    Job& j = jobs_.at(job_id);
    j.state = JobState::Done;
    j.progress = 1.0;
    j.timings = result.timings;
    active_.erase(job.project_id);
  } catch (const std::exception& e) {
    std::lock_guard lock(mu_);
    Job& j = jobs_.at(job_id);
    j.state = JobState::Failed;
    j.error = e.what();
    active_.erase(job.project_id);
  }
}

}  // namespace beaconmap
