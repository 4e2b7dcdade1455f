#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"
#include "cocoba/harness.hpp"
#include "cocoba/loop.hpp"

namespace httplib {
class Server;
}

namespace cocoba {

struct ServiceOptions {
  std::string strategy = "cocoba";
  CellOptions cell;
  // Session state files live here; empty disables persistence.
  std::string state_dir;
  // Served at "/" when non-empty.
  std::string static_dir;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

struct AnnotationEntry {
  PostingId id;
  Label label;
  std::string time;  // RFC 3339
};

// Live human-in-the-loop labeling over one dataset. Each session owns a query
// loop; commits on a session are serialized, sessions are independent.
class AnnotationService {
 public:
  AnnotationService(std::shared_ptr<const Dataset> dataset,
                    std::shared_ptr<const EmbeddingSnapshot> snapshot, ServiceOptions options);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Reloads every session checkpoint found in state_dir; returns the count.
  std::size_t load_sessions();

  HttpReply create_session(const nlohmann::json& body);
  HttpReply list_sessions() const;
  HttpReply next(const std::string& session_id);
  HttpReply label(const std::string& session_id, const nlohmann::json& body);
  HttpReply status(const std::string& session_id) const;

  // Rebuilds a fresh loop from the session's seed and annotation log and
  // returns its pool and pending query, for replay checks.
  std::pair<PoolState, std::optional<PostingId>> replay(const std::string& session_id) const;

  void mount(httplib::Server& server);

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id) const;
  std::unique_ptr<QueryLoop> fresh_loop(std::uint64_t seed) const;
  nlohmann::json session_state(const Session& session) const;
  void persist(const Session& session) const;
  std::shared_ptr<Session> restore(const nlohmann::json& state) const;
  std::optional<double> evaluate(QueryLoop& loop) const;

  std::shared_ptr<const Dataset> dataset_;
  std::shared_ptr<const EmbeddingSnapshot> snapshot_;
  ServiceOptions options_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

std::string rfc3339_now();

}  // namespace cocoba
