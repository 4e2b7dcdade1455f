#include "cocoba/cocoba.h"

#include <cstring>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"
#include "cocoba/engine.hpp"
#include "cocoba/error.hpp"
#include "cocoba/harness.hpp"
#include "cocoba/service.hpp"

struct cocoba_dataset {
  std::shared_ptr<const cocoba::Dataset> value;
};

struct cocoba_snapshot {
  std::shared_ptr<const cocoba::EmbeddingSnapshot> value;
};

struct cocoba_engine {
  std::unique_ptr<cocoba::Engine> value;
};

struct cocoba_service {
  std::unique_ptr<cocoba::AnnotationService> service;
  httplib::Server server;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
cocoba_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return COCOBA_OK;
  } catch (const cocoba::Error& e) {
    g_last_error = e.what();
    return static_cast<cocoba_status>(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return COCOBA_ERR_FORMAT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return COCOBA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return COCOBA_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) {
    throw cocoba::Error(cocoba::ErrorCode::kInvalidArgument, std::string(name) + " is NULL");
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_json(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw cocoba::Error(cocoba::ErrorCode::kInvalidArgument,
                        std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

extern "C" {

COCOBA_API const char* cocoba_version(void) { return "1.0.0"; }

COCOBA_API const char* cocoba_last_error(void) { return g_last_error.c_str(); }

COCOBA_API const char* cocoba_status_name(cocoba_status status) {
  if (status == COCOBA_OK) return "Ok";
  if (status == COCOBA_ERR_INTERNAL) return "Internal";
  return cocoba::error_code_name(static_cast<cocoba::ErrorCode>(status));
}

COCOBA_API void cocoba_string_free(char* s) { delete[] s; }

COCOBA_API cocoba_status cocoba_dataset_load(const char* jsonl_path, const char* meta_path,
                                             cocoba_dataset** out) {
  return guarded([&] {
    require(jsonl_path, "jsonl_path");
    require(meta_path, "meta_path");
    require(out, "out");
    *out = new cocoba_dataset{
        std::make_shared<const cocoba::Dataset>(cocoba::load_dataset(jsonl_path, meta_path))};
  });
}

COCOBA_API size_t cocoba_dataset_size(const cocoba_dataset* dataset) {
  return dataset == nullptr ? 0 : dataset->value->size();
}

COCOBA_API cocoba_status cocoba_dataset_canonicalize(const cocoba_dataset* dataset,
                                                     cocoba_dataset** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    *out = new cocoba_dataset{
        std::make_shared<const cocoba::Dataset>(dataset->value->canonicalized())};
  });
}

COCOBA_API cocoba_status cocoba_dataset_save(const cocoba_dataset* dataset,
                                             const char* jsonl_path, const char* meta_path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(jsonl_path, "jsonl_path");
    require(meta_path, "meta_path");
    cocoba::save_dataset(*dataset->value, jsonl_path, meta_path);
  });
}

COCOBA_API void cocoba_dataset_free(cocoba_dataset* dataset) { delete dataset; }

COCOBA_API cocoba_status cocoba_snapshot_load(const char* path, cocoba_snapshot** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new cocoba_snapshot{
        std::make_shared<const cocoba::EmbeddingSnapshot>(cocoba::load_snapshot(path))};
  });
}

COCOBA_API cocoba_status cocoba_snapshot_write(const cocoba_snapshot* snapshot,
                                               const char* path) {
  return guarded([&] {
    require(snapshot, "snapshot");
    require(path, "path");
    cocoba::write_snapshot(*snapshot->value, path);
  });
}

COCOBA_API cocoba_status cocoba_snapshot_hash_embed(const cocoba_dataset* canonical_dataset,
                                                    uint32_t doc_dim, uint32_t word_dim,
                                                    uint32_t window, cocoba_snapshot** out) {
  return guarded([&] {
    require(canonical_dataset, "dataset");
    require(out, "out");
    *out = new cocoba_snapshot{std::make_shared<const cocoba::EmbeddingSnapshot>(
        cocoba::hash_embed_dataset(*canonical_dataset->value, {doc_dim, word_dim}, window))};
  });
}

COCOBA_API cocoba_status cocoba_snapshot_info(const cocoba_snapshot* snapshot, size_t* count,
                                              uint32_t* doc_dim, uint32_t* word_dim,
                                              uint64_t* epoch) {
  return guarded([&] {
    require(snapshot, "snapshot");
    const auto& s = *snapshot->value;
    if (count) *count = s.size();
    if (doc_dim) *doc_dim = static_cast<uint32_t>(s.dims().doc);
    if (word_dim) *word_dim = static_cast<uint32_t>(s.dims().word);
    if (epoch) *epoch = s.epoch();
  });
}

COCOBA_API void cocoba_snapshot_free(cocoba_snapshot* snapshot) { delete snapshot; }

COCOBA_API cocoba_status cocoba_engine_create(const cocoba_dataset* dataset,
                                              const cocoba_snapshot* snapshot,
                                              const char* config_json, uint32_t cold_start,
                                              uint64_t seed, cocoba_engine** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(snapshot, "snapshot");
    require(out, "out");
    auto config = cocoba::config_from_json(parse_json(config_json, "config_json"));
    config.rng_seed = cocoba::derive_seed(seed, 1);
    auto pool = cocoba::cold_start_split(*dataset->value, cold_start, seed);
    *out = new cocoba_engine{std::make_unique<cocoba::Engine>(dataset->value, snapshot->value,
                                                              std::move(pool), config)};
  });
}

COCOBA_API cocoba_status cocoba_engine_restore(const cocoba_dataset* dataset,
                                               const cocoba_snapshot* snapshot,
                                               const char* checkpoint_json,
                                               cocoba_engine** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(snapshot, "snapshot");
    require(checkpoint_json, "checkpoint_json");
    require(out, "out");
    *out = new cocoba_engine{std::make_unique<cocoba::Engine>(cocoba::Engine::restore(
        parse_json(checkpoint_json, "checkpoint_json"), dataset->value, snapshot->value))};
  });
}

COCOBA_API cocoba_status cocoba_engine_next_query(cocoba_engine* engine, char** id_out,
                                                  double* score, int* fallback) {
  return guarded([&] {
    require(engine, "engine");
    require(id_out, "id_out");
    const auto& q = engine->value->next_query();
    *id_out = dup_string(q.id);
    if (score) *score = q.aggregate_score;
    if (fallback) *fallback = q.source == cocoba::QuerySource::kFallback ? 1 : 0;
  });
}

COCOBA_API cocoba_status cocoba_engine_commit(cocoba_engine* engine, const char* id, int label) {
  return guarded([&] {
    require(engine, "engine");
    require(id, "id");
    engine->value->commit_label(id, cocoba::label_from_int(label));
  });
}

COCOBA_API cocoba_status cocoba_engine_predict(cocoba_engine* engine, const char* id,
                                               int* label_out) {
  return guarded([&] {
    require(engine, "engine");
    require(id, "id");
    require(label_out, "label_out");
    *label_out = cocoba::to_int(engine->value->predict(cocoba::PostingId(id)));
  });
}

COCOBA_API cocoba_status cocoba_engine_swap_snapshot(cocoba_engine* engine,
                                                     const cocoba_snapshot* snapshot) {
  return guarded([&] {
    require(engine, "engine");
    require(snapshot, "snapshot");
    engine->value->swap_snapshot(snapshot->value);
  });
}

COCOBA_API cocoba_status cocoba_engine_pool_counts(const cocoba_engine* engine,
                                                   size_t* labeled, size_t* unlabeled,
                                                   size_t* test) {
  return guarded([&] {
    require(engine, "engine");
    const auto& pool = engine->value->pool();
    if (labeled) *labeled = pool.labeled.size();
    if (unlabeled) *unlabeled = pool.unlabeled.size();
    if (test) *test = pool.test.size();
  });
}

COCOBA_API cocoba_status cocoba_engine_checkpoint(const cocoba_engine* engine, char** json_out) {
  return guarded([&] {
    require(engine, "engine");
    require(json_out, "json_out");
    *json_out = dup_string(engine->value->checkpoint().dump());
  });
}

COCOBA_API void cocoba_engine_free(cocoba_engine* engine) { delete engine; }

COCOBA_API cocoba_status cocoba_experiment_run(const char* spec_json, char** summary_out) {
  return guarded([&] {
    require(spec_json, "spec_json");
    const auto spec = cocoba::experiment_spec_from_json(parse_json(spec_json, "spec_json"));
    const auto summary = cocoba::run_experiment(spec);
    if (summary_out) *summary_out = dup_string(summary.dump(2));
  });
}

COCOBA_API cocoba_status cocoba_synth_generate(const char* spec_json, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto spec = cocoba::synth_spec_from_json(parse_json(spec_json, "spec_json"));
    cocoba::write_synthetic(cocoba::make_synthetic_dataset(spec), out_dir);
  });
}

COCOBA_API cocoba_status cocoba_service_create(const cocoba_dataset* dataset,
                                               const cocoba_snapshot* snapshot,
                                               const char* options_json,
                                               cocoba_service** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(snapshot, "snapshot");
    require(out, "out");
    const auto j = parse_json(options_json, "options_json");
    cocoba::ServiceOptions options;
    options.strategy = j.value("strategy", options.strategy);
    options.state_dir = j.value("state_dir", std::string());
    options.static_dir = j.value("static_dir", std::string());
    if (j.contains("options")) options.cell = cocoba::cell_options_from_json(j["options"]);
    auto handle = std::make_unique<cocoba_service>();
    handle->service = std::make_unique<cocoba::AnnotationService>(dataset->value,
                                                                  snapshot->value, options);
    handle->service->load_sessions();
    handle->service->mount(handle->server);
    *out = handle.release();
  });
}

COCOBA_API cocoba_status cocoba_service_listen(cocoba_service* service, const char* host,
                                               int port) {
  return guarded([&] {
    require(service, "service");
    require(host, "host");
    if (!service->server.listen(host, port)) {
      throw cocoba::Error(cocoba::ErrorCode::kIoError,
                          "cannot listen on " + std::string(host) + ":" + std::to_string(port));
    }
  });
}

COCOBA_API cocoba_status cocoba_service_stop(cocoba_service* service) {
  return guarded([&] {
    require(service, "service");
    service->server.stop();
  });
}

COCOBA_API void cocoba_service_free(cocoba_service* service) { delete service; }

}  // extern "C"
