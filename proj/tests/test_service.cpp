#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "cocoba/error.hpp"
#include "cocoba/service.hpp"
#include "fixtures.hpp"

using namespace cocoba;
using nlohmann::json;

namespace {

ServiceOptions options(const std::string& strategy = "cocoba", const std::string& state_dir = "") {
  ServiceOptions o;
  o.strategy = strategy;
  o.cell.engine.estimators = 5;
  o.cell.bandwidth_mode = BandwidthMode::kAuto;
  o.state_dir = state_dir;
  return o;
}

struct Fixture {
  fixtures::Corpus corpus = fixtures::synthetic(300, 3);

  std::unique_ptr<AnnotationService> service(ServiceOptions o = options()) const {
    return std::make_unique<AnnotationService>(corpus.dataset, corpus.snapshot, std::move(o));
  }
};

std::string create(AnnotationService& svc, std::uint64_t seed = 1) {
  const auto r = svc.create_session({{"seed", seed}});
  REQUIRE(r.status == 201);
  return r.body["session_id"].get<std::string>();
}

// Labels the pending posting with its gold label.
HttpReply answer(AnnotationService& svc, const Dataset& ds, const std::string& sid) {
  const auto next = svc.next(sid);
  REQUIRE(next.status == 200);
  const auto id = next.body["posting_id"].get<std::string>();
  return svc.label(sid, {{"posting_id", id}, {"label", to_int(*ds.at(id).gold_label)}});
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("session creation") {
    Fixture f;
    auto svc = f.service();
    const auto r = svc->create_session({{"seed", 4}});
    CHECK(r.status == 201);
    CHECK(r.body["seed"] == 4);
    CHECK(r.body["strategy"] == "cocoba");
    CHECK(r.body["counts"]["labeled"] == 50);
    CHECK(svc->create_session(json::object()).status == 201);
    CHECK(svc->create_session({{"seed", -1}}).status == 422);
    CHECK(svc->list_sessions().body["sessions"].size() == 2);
    CHECK_THROWS_AS(AnnotationService(f.corpus.dataset, f.corpus.snapshot, options("qbc")), Error);
  }

  TEST_CASE("unknown sessions are 404") {
    Fixture f;
    auto svc = f.service();
    CHECK(svc->next("nope").status == 404);
    CHECK(svc->status("nope").status == 404);
    CHECK(svc->label("nope", {{"posting_id", "x"}, {"label", 1}}).status == 404);
    CHECK(svc->next("nope").body["error"] == "UnknownSession");
  }

  TEST_CASE("next is idempotent and label advances the query") {
    Fixture f;
    auto svc = f.service();
    const auto sid = create(*svc);
    const auto a = svc->next(sid);
    const auto b = svc->next(sid);
    CHECK(a.status == 200);
    CHECK(a.body == b.body);
    const auto id = a.body["posting_id"].get<std::string>();
    const auto& p = f.corpus.dataset->at(id);
    CHECK(a.body["text"] == p.text);
    CHECK(a.body["term_spans"][0][0] == p.term_spans[0].start);
    CHECK(a.body["rank_context"]["bags"] == 5);
    CHECK(a.body["aggregate_score"].is_number());

    const auto r = svc->label(sid, {{"posting_id", id}, {"label", 1}});
    CHECK(r.status == 200);
    CHECK(r.body["accepted"] == true);
    CHECK(r.body["new_metrics"]["labeled"] == 51);
    CHECK(r.body["new_metrics"]["f1"].is_number());
    CHECK(svc->next(sid).body["posting_id"] != id);
  }

  TEST_CASE("stale and malformed labels") {
    Fixture f;
    auto svc = f.service();
    const auto sid = create(*svc);
    const auto pending = svc->next(sid).body["posting_id"].get<std::string>();
    std::string other;
    for (const auto& p : f.corpus.dataset->postings()) {
      if (p.id != pending) {
        other = p.id;
        break;
      }
    }
    const auto stale = svc->label(sid, {{"posting_id", other}, {"label", 1}});
    CHECK(stale.status == 409);
    CHECK(stale.body["error"] == "StaleQuery");
    CHECK(stale.body["pending_id"] == pending);

    CHECK(svc->label(sid, {{"posting_id", pending}, {"label", 0}}).status == 422);
    CHECK(svc->label(sid, {{"posting_id", pending}, {"label", 2}}).status == 422);
    CHECK(svc->label(sid, {{"posting_id", pending}, {"label", "yes"}}).status == 422);
    CHECK(svc->label(sid, {{"label", 1}}).status == 422);
    CHECK(svc->status(sid).body["counts"]["labeled"] == 50);
  }

  TEST_CASE("status after three labels") {
    Fixture f;
    auto svc = f.service();
    const auto sid = create(*svc);
    for (int i = 0; i < 3; ++i) CHECK(answer(*svc, *f.corpus.dataset, sid).status == 200);
    const auto s = svc->status(sid);
    CHECK(s.status == 200);
    CHECK(s.body["counts"]["labeled"] == 53);
    CHECK(s.body["counts"]["unlabeled"] == 200 - 53);
    CHECK(s.body["annotations"] == 3);
    CHECK(s.body["curve"].size() == 3);
    CHECK(s.body["curve"][2]["budget"] == 53);
    CHECK(s.body["config"]["estimators"] == 5);
  }

  TEST_CASE("exhausted pool is 409") {
    Fixture f;
    auto o = options("uncertainty");
    o.cell.cold_start = 196;
    auto svc = f.service(o);
    const auto sid = create(*svc);
    for (int i = 0; i < 4; ++i) CHECK(answer(*svc, *f.corpus.dataset, sid).status == 200);
    const auto r = svc->next(sid);
    CHECK(r.status == 409);
    CHECK(r.body["error"] == "PoolExhausted");
    CHECK(svc->label(sid, {{"posting_id", "x"}, {"label", 1}}).status == 409);
  }

  TEST_CASE("replaying the annotation log reproduces the live state") {
    Fixture f;
    for (const char* strategy : {"cocoba", "random", "uncertainty"}) {
      CAPTURE(strategy);
      auto svc = f.service(options(strategy));
      const auto sid = create(*svc, 6);
      for (int i = 0; i < 6; ++i) answer(*svc, *f.corpus.dataset, sid);
      const auto [pool, pending] = svc->replay(sid);
      CHECK(pool.labeled.size() == 56);
      CHECK(json(pool.labeled.size()) == svc->status(sid).body["counts"]["labeled"]);
      REQUIRE(pending);
      CHECK(*pending == svc->next(sid).body["posting_id"].get<std::string>());
    }
  }

  TEST_CASE("sessions persist and reload") {
    Fixture f;
    fixtures::TempDir dir;
    std::string sid, pending;
    json before;
    {
      auto svc = f.service(options("cocoba", dir.file("state")));
      sid = create(*svc);
      for (int i = 0; i < 4; ++i) answer(*svc, *f.corpus.dataset, sid);
      pending = svc->next(sid).body["posting_id"].get<std::string>();
      before = svc->status(sid).body;
      const auto rnd = f.service(options("random", dir.file("rstate")));
      const auto rsid = create(*rnd);
      for (int i = 0; i < 3; ++i) answer(*rnd, *f.corpus.dataset, rsid);
    }
    CHECK(std::filesystem::exists(dir.path() / "state" / ("session-" + sid + ".json")));

    auto svc = f.service(options("cocoba", dir.file("state")));
    CHECK(svc->load_sessions() == 1);
    CHECK(svc->status(sid).body == before);
    CHECK(svc->next(sid).body["posting_id"] == pending);
    CHECK(answer(*svc, *f.corpus.dataset, sid).body["new_metrics"]["labeled"] == 55);

    auto rnd = f.service(options("random", dir.file("rstate")));
    CHECK(rnd->load_sessions() == 1);
    const auto rsid = rnd->list_sessions().body["sessions"][0].get<std::string>();
    CHECK(rnd->status(rsid).body["counts"]["labeled"] == 53);

    // A state file written under another strategy is refused.
    auto other = f.service(options("coba", dir.file("state")));
    CHECK_THROWS_AS(other->load_sessions(), Error);
  }

  TEST_CASE("HTTP interface") {
    Fixture f;
    auto svc = f.service();
    httplib::Server server;
    svc->mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto created = client.Post("/session", R"({"seed": 2})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto sid = json::parse(created->body)["session_id"].get<std::string>();

    auto next = client.Get("/session/" + sid + "/next");
    REQUIRE(next);
    CHECK(next->status == 200);
    CHECK(next->get_header_value("Content-Type").rfind("application/json", 0) == 0);
    const auto id = json::parse(next->body)["posting_id"].get<std::string>();

    const json body{{"posting_id", id}, {"label", -1}};
    auto labeled = client.Post("/session/" + sid + "/label", body.dump(), "application/json");
    REQUIRE(labeled);
    CHECK(labeled->status == 200);
    auto again = client.Post("/session/" + sid + "/label", body.dump(), "application/json");
    REQUIRE(again);
    CHECK(again->status == 409);

    auto bad = client.Post("/session/" + sid + "/label", "{not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    auto status = client.Get("/session/" + sid + "/status");
    REQUIRE(status);
    CHECK(json::parse(status->body)["counts"]["labeled"] == 51);
    auto missing = client.Get("/session/zzz/next");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto listed = client.Get("/session");
    REQUIRE(listed);
    CHECK(json::parse(listed->body)["sessions"].size() == 1);

    server.stop();
    thread.join();
  }
}
