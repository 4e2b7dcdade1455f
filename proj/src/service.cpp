#include "cocoba/service.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>

#include <httplib.h>

#include "cocoba/engine.hpp"
#include "cocoba/error.hpp"

namespace cocoba {

using nlohmann::json;
namespace fs = std::filesystem;

struct AnnotationService::Session {
  std::string id;
  std::uint64_t seed = 0;
  std::string created;
  std::string updated;
  std::vector<AnnotationEntry> log;
  json curve = json::array();
  std::unique_ptr<QueryLoop> loop;
  mutable std::mutex mutex;
};

std::string rfc3339_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

HttpReply error_reply(int status, const std::string& error, const std::string& message) {
  return {status, json{{"error", error}, {"message", message}}};
}

HttpReply unknown_session(const std::string& id) {
  return error_reply(404, "UnknownSession", "no session '" + id + "'");
}

HttpReply pool_exhausted() {
  return error_reply(409, "PoolExhausted", "the unlabeled pool is empty");
}

std::string random_session_id() {
  std::random_device rd;
  const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json counts(const PoolState& pool) {
  return json{{"labeled", pool.labeled.size()},
              {"unlabeled", pool.unlabeled.size()},
              {"test", pool.test.size()}};
}

}  // namespace

AnnotationService::AnnotationService(std::shared_ptr<const Dataset> dataset,
                                     std::shared_ptr<const EmbeddingSnapshot> snapshot,
                                     ServiceOptions options)
    : dataset_(std::move(dataset)), snapshot_(std::move(snapshot)), options_(std::move(options)) {
  if (!is_engine_strategy(options_.strategy) && options_.strategy != "random" &&
      options_.strategy != "uncertainty") {
    throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + options_.strategy + "'");
  }
  if (!options_.state_dir.empty()) fs::create_directories(options_.state_dir);
}

AnnotationService::~AnnotationService() = default;

std::unique_ptr<QueryLoop> AnnotationService::fresh_loop(std::uint64_t seed) const {
  auto pool = cold_start_split(*dataset_, options_.cell.cold_start, seed);
  const auto opts = resolve_options(options_.cell, *dataset_, *snapshot_, seed);
  return make_loop(options_.strategy, dataset_, snapshot_, std::move(pool), opts, seed);
}

std::optional<double> AnnotationService::evaluate(QueryLoop& loop) const {
  std::vector<PostingId> ids;
  std::map<PostingId, Label> gold;
  for (const auto& id : loop.pool().test) {
    if (const auto& label = dataset_->at(id).gold_label) {
      ids.push_back(id);
      gold.emplace(id, *label);
    }
  }
  if (ids.empty()) return std::nullopt;
  const auto labels = loop.predict(ids);
  std::map<PostingId, Label> predictions;
  for (std::size_t i = 0; i < ids.size(); ++i) predictions.emplace(ids[i], labels[i]);
  return f1_positive(predictions, gold);
}

std::shared_ptr<AnnotationService::Session> AnnotationService::find(
    const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

json AnnotationService::session_state(const Session& s) const {
  json log = json::array();
  for (const auto& e : s.log) log.push_back({{"id", e.id}, {"label", to_int(e.label)}, {"time", e.time}});
  json state{{"format", "cocoba-session"},
             {"version", 1},
             {"session_id", s.id},
             {"seed", s.seed},
             {"strategy", options_.strategy},
             {"created", s.created},
             {"updated", s.updated},
             {"log", std::move(log)},
             {"curve", s.curve}};
  if (const auto* engine = dynamic_cast<const Engine*>(s.loop.get())) {
    state["checkpoint"] = engine->checkpoint();
  }
  return state;
}

void AnnotationService::persist(const Session& s) const {
  if (options_.state_dir.empty()) return;
  const fs::path dir(options_.state_dir);
  const auto target = dir / ("session-" + s.id + ".json");
  const auto tmp = dir / ("session-" + s.id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << session_state(s).dump() << '\n';
  }
  fs::rename(tmp, target);
}

std::shared_ptr<AnnotationService::Session> AnnotationService::restore(const json& state) const {
  auto s = std::make_shared<Session>();
  s->id = state.at("session_id").get<std::string>();
  s->seed = state.at("seed").get<std::uint64_t>();
  s->created = state.value("created", std::string());
  s->updated = state.value("updated", std::string());
  s->curve = state.value("curve", json::array());
  for (const auto& e : state.at("log")) {
    s->log.push_back({e.at("id").get<std::string>(), label_from_int(e.at("label").get<int>()),
                      e.value("time", std::string())});
  }
  if (state.value("strategy", options_.strategy) != options_.strategy) {
    throw Error(ErrorCode::kFormatError,
                "session '" + s->id + "' was created with another strategy");
  }
  if (state.contains("checkpoint") && is_engine_strategy(options_.strategy)) {
    s->loop = std::make_unique<Engine>(Engine::restore(state["checkpoint"], dataset_, snapshot_));
  } else {
    s->loop = fresh_loop(s->seed);
    for (const auto& e : s->log) {
      s->loop->next_id();
      s->loop->commit_label(e.id, e.label);
    }
  }
  return s;
}

std::size_t AnnotationService::load_sessions() {
  if (options_.state_dir.empty()) return 0;
  std::size_t loaded = 0;
  for (const auto& entry : fs::directory_iterator(options_.state_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("session-", 0) != 0 || entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    json state;
    try {
      state = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError, entry.path().string() + ": " + e.what());
    }
    auto s = restore(state);
    std::unique_lock lock(sessions_mutex_);
    sessions_[s->id] = std::move(s);
    ++loaded;
  }
  return loaded;
}

HttpReply AnnotationService::create_session(const json& body) {
  std::uint64_t seed = 1;
  if (body.is_object() && body.contains("seed")) {
    const auto& v = body["seed"];
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
      return error_reply(422, "InvalidSeed", "seed must be a non-negative integer");
    }
    seed = body["seed"].get<std::uint64_t>();
  }
  auto s = std::make_shared<Session>();
  s->seed = seed;
  s->created = s->updated = rfc3339_now();
  try {
    s->loop = fresh_loop(seed);
  } catch (const Error& e) {
    return error_reply(422, error_code_name(e.code()), e.what());
  }
  {
    std::unique_lock lock(sessions_mutex_);
    do {
      s->id = random_session_id();
    } while (sessions_.count(s->id) != 0);
    sessions_[s->id] = s;
  }
  std::lock_guard<std::mutex> lock(s->mutex);
  persist(*s);
  return {201, json{{"session_id", s->id}, {"seed", seed}, {"strategy", options_.strategy},
                    {"counts", counts(s->loop->pool())}}};
}

HttpReply AnnotationService::list_sessions() const {
  std::shared_lock lock(sessions_mutex_);
  json ids = json::array();
  for (const auto& entry : sessions_) ids.push_back(entry.first);
  return {200, json{{"sessions", std::move(ids)}}};
}

HttpReply AnnotationService::next(const std::string& session_id) {
  const auto s = find(session_id);
  if (!s) return unknown_session(session_id);
  std::lock_guard<std::mutex> lock(s->mutex);
  if (s->loop->pool().unlabeled.empty()) return pool_exhausted();
  const PostingId id = s->loop->next_id();
  const auto& posting = dataset_->at(id);
  json spans = json::array();
  for (const auto& sp : posting.term_spans) spans.push_back({sp.start, sp.end});
  json reply{{"posting_id", id}, {"text", posting.text}, {"term_spans", std::move(spans)}};
  if (auto* engine = dynamic_cast<Engine*>(s->loop.get())) {
    const auto& q = engine->next_query();
    reply["aggregate_score"] = q.aggregate_score;
    reply["rank_context"] = {
        {"source", q.source == QuerySource::kContention ? "contention" : "fallback"},
        {"rank", 1},
        {"candidates", q.candidates},
        {"bags_in_contention", q.bags_in_contention},
        {"bags", engine->bags().size()}};
  } else {
    reply["aggregate_score"] = nullptr;
    reply["rank_context"] = {{"source", s->loop->name()}, {"rank", 1}};
  }
  return {200, std::move(reply)};
}

HttpReply AnnotationService::label(const std::string& session_id, const json& body) {
  const auto s = find(session_id);
  if (!s) return unknown_session(session_id);
  if (!body.is_object() || !body.contains("posting_id") || !body["posting_id"].is_string()) {
    return error_reply(422, "InvalidBody", "posting_id must be a string");
  }
  if (!body.contains("label") || !body["label"].is_number_integer() ||
      (body["label"].get<long long>() != 1 && body["label"].get<long long>() != -1)) {
    return error_reply(422, "InvalidLabel", "label must be 1 or -1");
  }
  const auto posting_id = body["posting_id"].get<std::string>();
  const Label label = label_from_int(body["label"].get<int>());

  std::lock_guard<std::mutex> lock(s->mutex);
  if (s->loop->pool().unlabeled.empty()) return pool_exhausted();
  const PostingId pending = s->loop->next_id();
  if (posting_id != pending) {
    auto reply = error_reply(409, "StaleQuery", "posting '" + posting_id + "' is not pending");
    reply.body["pending_id"] = pending;
    return reply;
  }
  s->loop->commit_label(posting_id, label);
  const auto now = rfc3339_now();
  s->log.push_back({posting_id, label, now});
  s->updated = now;
  const auto& pool = s->loop->pool();
  json metrics{{"labeled", pool.labeled.size()}, {"unlabeled", pool.unlabeled.size()}};
  if (const auto f1 = evaluate(*s->loop)) {
    metrics["f1"] = *f1;
    s->curve.push_back({{"budget", pool.labeled.size()}, {"f1", *f1}});
  } else {
    metrics["f1"] = nullptr;
  }
  if (!pool.unlabeled.empty()) s->loop->next_id();
  persist(*s);
  return {200, json{{"accepted", true}, {"new_metrics", std::move(metrics)}}};
}

HttpReply AnnotationService::status(const std::string& session_id) const {
  const auto s = find(session_id);
  if (!s) return unknown_session(session_id);
  std::lock_guard<std::mutex> lock(s->mutex);
  json config;
  if (const auto* engine = dynamic_cast<const Engine*>(s->loop.get())) {
    config = config_to_json(engine->config());
  } else {
    config = {{"strategy", options_.strategy}};
  }
  return {200, json{{"session_id", s->id},
                    {"strategy", options_.strategy},
                    {"seed", s->seed},
                    {"counts", counts(s->loop->pool())},
                    {"annotations", s->log.size()},
                    {"config", std::move(config)},
                    {"curve", s->curve},
                    {"created", s->created},
                    {"updated", s->updated}}};
}

std::pair<PoolState, std::optional<PostingId>> AnnotationService::replay(
    const std::string& session_id) const {
  const auto s = find(session_id);
  if (!s) throw Error(ErrorCode::kUnknownId, "no session '" + session_id + "'");
  std::vector<AnnotationEntry> log;
  {
    std::lock_guard<std::mutex> lock(s->mutex);
    log = s->log;
  }
  auto loop = fresh_loop(s->seed);
  for (const auto& e : log) {
    const auto id = loop->next_id();
    if (id != e.id) {
      throw Error(ErrorCode::kStaleQuery, "replay diverged at '" + e.id + "', engine chose '" +
                                              id + "'");
    }
    loop->commit_label(e.id, e.label);
  }
  std::optional<PostingId> pending;
  if (!loop->pool().unlabeled.empty()) pending = loop->next_id();
  return {loop->pool(), pending};
}

void AnnotationService::mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json; charset=utf-8");
  };
  auto parse = [](const httplib::Request& req, json& out) {
    if (req.body.empty()) {
      out = json::object();
      return true;
    }
    out = json::parse(req.body, nullptr, false);
    return !out.is_discarded();
  };
  server.Post("/session", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!parse(req, body)) return send(res, error_reply(400, "BadJson", "body is not JSON"));
    send(res, create_session(body));
  });
  server.Get("/session", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, list_sessions());
  });
  server.Get(R"(/session/([^/]+)/next)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, next(req.matches[1]));
             });
  server.Post(R"(/session/([^/]+)/label)",
              [this, send, parse](const httplib::Request& req, httplib::Response& res) {
                json body;
                if (!parse(req, body)) {
                  return send(res, error_reply(400, "BadJson", "body is not JSON"));
                }
                send(res, label(req.matches[1], body));
              });
  server.Get(R"(/session/([^/]+)/status)",
             [this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, status(req.matches[1]));
             });
  server.set_exception_handler(
      [send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const Error& e) {
          send(res, error_reply(500, error_code_name(e.code()), e.what()));
        } catch (const std::exception& e) {
          send(res, error_reply(500, "Internal", e.what()));
        }
      });
  if (!options_.static_dir.empty()) server.set_mount_point("/", options_.static_dir);
}

}  // namespace cocoba
