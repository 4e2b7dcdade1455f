#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"
#include "cocoba/engine.hpp"
#include "cocoba/loop.hpp"

namespace cocoba {

struct RunRecord {
  std::size_t iteration = 0;
  std::size_t budget = 0;
  PostingId queried_id;
  double f1_positive = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

using Curve = std::vector<RunRecord>;

// F1 on the positive class over aligned id sets; 0 when precision + recall
// is 0. Throws IdMismatch when the key sets differ.
double f1_positive(const std::map<PostingId, Label>& predictions,
                   const std::map<PostingId, Label>& gold);

inline constexpr const char* kAllStrategies[] = {"cocoba",    "coba",        "coco",
                                                  "cotesting", "uncertainty", "random"};

bool is_engine_strategy(std::string_view name);

enum class BandwidthMode { kFixed, kAuto };

// Knobs shared by every cell of one experiment.
struct CellOptions {
  std::size_t cold_start = 50;
  double budget_frac = 1.0;
  // Absolute cap on |L|; overrides budget_frac when set.
  std::optional<std::size_t> budget_cap;
  std::size_t eval_every = 10;
  std::size_t swap_every = 350;
  BandwidthMode bandwidth_mode = BandwidthMode::kFixed;
  // Estimators, subsample ratio, bandwidths and learner settings; strategy
  // and rng_seed are set per cell.
  EngineConfig engine;
};

// Per-seed derivation so cells sharing a seed share their cold start.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Mean pairwise distance per view over the train split, independent of labels.
std::pair<double, double> pool_bandwidths(const Dataset& dataset,
                                          const EmbeddingSnapshot& snapshot, std::uint64_t seed);

// Replaces auto bandwidths by pool_bandwidths(); fixed ones pass through.
CellOptions resolve_options(const CellOptions& options, const Dataset& dataset,
                            const EmbeddingSnapshot& snapshot, std::uint64_t seed);

std::unique_ptr<QueryLoop> make_loop(std::string_view strategy,
                                     std::shared_ptr<const Dataset> dataset,
                                     std::shared_ptr<const EmbeddingSnapshot> snapshot,
                                     PoolState pool, const CellOptions& options,
                                     std::uint64_t seed);

struct CellResult {
  std::string strategy;
  std::uint64_t seed = 0;
  PoolState cold_start;
  Curve curve;
  // Every queried id in order.
  std::vector<PostingId> queries;
  std::size_t fallback_queries = 0;
  std::size_t swaps = 0;
};

// One (strategy, seed) learning curve with the gold labels as the oracle.
// snapshots[0] is the initial snapshot; snapshots[k] (clamped to the last) is
// swapped in after k * swap_every queries.
CellResult run_cell(std::shared_ptr<const Dataset> dataset,
                    const std::vector<std::shared_ptr<const EmbeddingSnapshot>>& snapshots,
                    std::string_view strategy, std::uint64_t seed, const CellOptions& options);

std::string curve_csv(const Curve& curve);

// F1 at an exact budget, linearly interpolated between evaluated records and
// clamped at the ends.
double f1_at_budget(const Curve& curve, double budget);

struct TTestResult {
  double mean_difference = 0.0;
  std::optional<double> t;  // absent when the differences have zero variance
  double p_value = 1.0;
  bool degenerate = false;
  bool significant = false;
};

// Two-sided paired t-test. Throws InsufficientSeeds for fewer than two pairs.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Mean F1 per strategy at each budget fraction, plus paired t-tests between
// the reference strategy and every other strategy.
nlohmann::json summarize(const std::map<std::string, std::vector<Curve>>& curves,
                         const std::vector<double>& fractions, std::size_t train_size,
                         const std::string& reference);

struct ExperimentSpec {
  std::string dataset_path;
  std::string meta_path;
  std::vector<std::string> snapshot_paths;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  CellOptions options;
  std::string out_dir;
  bool queries_log = false;
  std::size_t jobs = 1;
};

// JSON forms used by the C API. Unknown keys are rejected.
CellOptions cell_options_from_json(const nlohmann::json& j);
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

// Runs every (strategy, seed) cell, writes <out>/<strategy>/seed-<s>/curve.csv
// (and queries.log) plus <out>/summary.json, and returns the summary.
nlohmann::json run_experiment(const ExperimentSpec& spec);

struct SynthSpec {
  std::size_t n = 4000;
  ViewDims dims{48, 48};
  std::size_t contexts = 8;
  double noise = 1.25;
  double pos_rate = 0.18;
  double test_fraction = 1.0 / 3.0;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  Dataset dataset;
  EmbeddingSnapshot snapshot;
};

// Context-clustered two-view corpus. Throws InvalidArgument for n < 200 or
// fewer than two contexts.
SynthCorpus make_synthetic_dataset(const SynthSpec& spec);

SynthSpec synth_spec_from_json(const nlohmann::json& j);

// Writes dataset.jsonl, dataset.meta.json and snapshot.cvec under dir.
void write_synthetic(const SynthCorpus& corpus, const std::string& dir);

}  // namespace cocoba
