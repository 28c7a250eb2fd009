#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "server.hpp"

namespace {
beaconmap::BeaconServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->http().stop();
}
}  // namespace

int main(int argc, char** argv) {
  beaconmap::ServerConfig cfg;
  cfg.templates = std::string(BEACONMAP_DATA_DIR) + "/templates";
  cfg.apply_env();

  CLI::App app{"beaconmap HTTP service"};
  std::string bind;
  std::vector<std::string> models;
  app.add_option("--bind", bind, "host:port to listen on");
  app.add_option("--store", cfg.store, "project store directory");
  app.add_option("--workers", cfg.workers, "detection worker threads")->check(CLI::PositiveNumber);
  app.add_option("--token", cfg.token, "shared bearer token");
  app.add_option("--templates", cfg.templates, "template library directory");
  app.add_option("--model", models, "SVM model file (repeatable)");
  CLI11_PARSE(app, argc, argv);

  if (!bind.empty()) {
    const auto colon = bind.rfind(':');
    cfg.host = bind.substr(0, colon);
    if (colon != std::string::npos) cfg.port = std::stoi(bind.substr(colon + 1));
  }
  for (const auto& m : models) cfg.models.emplace_back(m);

  try {
    beaconmap::BeaconServer server(cfg);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << cfg.host << ":" << cfg.port << "\n";
    if (!server.listen()) {
      std::cerr << "{\"error\": \"cannot listen on " << cfg.host << ":" << cfg.port << "\"}\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": " << nlohmann::json(e.what()).dump() << "}\n";
    return 1;
  }
  return 0;
}
