// al-serve: HTTP annotation service over one dataset and snapshot.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cocoba/cocoba.h"

namespace {

cocoba_service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) cocoba_service_stop(g_service);
}

int fail(cocoba_status status) {
  std::cerr << "al-serve: " << cocoba_status_name(status) << ": " << cocoba_last_error() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-in-the-loop annotation service"};
  std::string dataset, meta, snapshot, strategy = "cocoba", state_dir = "state", static_dir;
  std::string bind = std::getenv("AL_BIND") ? std::getenv("AL_BIND") : "127.0.0.1";
  int port = std::getenv("AL_PORT") ? std::atoi(std::getenv("AL_PORT")) : 8080;
  std::size_t cold_start = 50;
  std::string bandwidth = "fixed";
  app.add_option("--dataset", dataset, "Dataset JSON Lines file")->required();
  app.add_option("--meta", meta, "Dataset metadata JSON (default: <dataset stem>.meta.json)");
  app.add_option("--snapshot", snapshot, "Embedding snapshot")->required();
  app.add_option("--strategy", strategy, "Query strategy");
  app.add_option("--cold-start", cold_start, "Initial labeled set size per session");
  app.add_option("--bandwidth", bandwidth, "fixed (30/45) or auto");
  app.add_option("--bind", bind, "Bind address (env AL_BIND)");
  app.add_option("--port", port, "Port (env AL_PORT)");
  app.add_option("--state-dir", state_dir, "Session checkpoint directory");
  app.add_option("--static-dir", static_dir, "Static UI assets served at /");
  CLI11_PARSE(app, argc, argv);

  if (meta.empty()) {
    meta = dataset;
    if (const auto dot = meta.rfind(".jsonl"); dot != std::string::npos) meta.resize(dot);
    meta += ".meta.json";
  }
  nlohmann::json cell{{"cold_start", cold_start}};
  if (bandwidth == "auto") cell["bandwidth"] = "auto";
  const nlohmann::json options{{"strategy", strategy},
                               {"state_dir", state_dir},
                               {"static_dir", static_dir},
                               {"options", cell}};

  cocoba_dataset* ds = nullptr;
  cocoba_snapshot* snap = nullptr;
  auto st = cocoba_dataset_load(dataset.c_str(), meta.c_str(), &ds);
  if (st == COCOBA_OK) st = cocoba_snapshot_load(snapshot.c_str(), &snap);
  if (st == COCOBA_OK) st = cocoba_service_create(ds, snap, options.dump().c_str(), &g_service);
  if (st != COCOBA_OK) {
    cocoba_snapshot_free(snap);
    cocoba_dataset_free(ds);
    return fail(st);
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "al-serve: listening on " << bind << ":" << port << "\n";
  st = cocoba_service_listen(g_service, bind.c_str(), port);
  cocoba_service_free(g_service);
  g_service = nullptr;
  cocoba_snapshot_free(snap);
  cocoba_dataset_free(ds);
  return st == COCOBA_OK ? 0 : fail(st);
}
