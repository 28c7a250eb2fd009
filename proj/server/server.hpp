#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "beaconmap/project.hpp"

namespace beaconmap {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;                    // 0 = any free port
  std::filesystem::path store = "beaconmap-store";
  int workers = 1;
  std::string token;                  // shared bearer token; empty = open
  std::filesystem::path templates;    // template library directory
  std::vector<std::filesystem::path> models;

  // Overrides fields from BEACONMAP_BIND (host:port), BEACONMAP_STORE,
  // BEACONMAP_WORKERS, BEACONMAP_TOKEN, BEACONMAP_TEMPLATES and
  // BEACONMAP_MODELS (comma separated).
  void apply_env();
};

enum class JobState { Queued, Running, Done, Failed };
const char* to_string(JobState s);

struct Job {
  std::string id;
  std::string project_id;
  std::string kind;  // "detection" or "regen"
  JobState state = JobState::Queued;
  double progress = 0.0;
  std::string error;
  std::vector<PhaseTiming> timings;
  DetectionOption option = DetectionOption::Fdm;
  DetectionMode mode = DetectionMode::PathOnly;
};

class BeaconServer {
 public:
  explicit BeaconServer(ServerConfig config);
  ~BeaconServer();
  BeaconServer(const BeaconServer&) = delete;
  BeaconServer& operator=(const BeaconServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Serves on the calling thread until stop().
  bool listen();
  void stop();

  // Blocks until no job is queued or running.
  void wait_idle();

  httplib::Server& http() { return http_; }

 private:
  void routes();
  void load_store();
  void persist(const Project& p);
  void worker_loop();
  void run_job(const std::string& job_id);

  Project& project_or_throw(const std::string& id);
  void ensure_idle(const std::string& project_id);
  std::string now() const;

  ServerConfig config_;
  httplib::Server http_;
  std::vector<Template> templates_;
  std::vector<SvmModel> models_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, Project> projects_;
  std::map<std::string, Job> jobs_;
  std::map<std::string, std::string> active_;  // project id -> detection job id
  std::deque<std::string> queue_;
  int running_ = 0;
  int next_project_ = 1;
  int next_job_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::thread listener_;
};

}  // namespace beaconmap
