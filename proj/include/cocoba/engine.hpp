#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoba/corpus.hpp"
#include "cocoba/density.hpp"
#include "cocoba/embeddings.hpp"
#include "cocoba/learner.hpp"
#include "cocoba/loop.hpp"
#include "cocoba/rng.hpp"

namespace cocoba {

enum class Strategy { kCocoba, kCoba, kCoco, kCotesting };

const char* strategy_name(Strategy s);
// Throws InvalidArgument for unknown names.
Strategy parse_strategy(std::string_view name);

struct EngineConfig {
  std::size_t estimators = 15;
  double subsample_ratio = 0.6;
  double bandwidth_doc = kDocBandwidth;
  double bandwidth_word = kWordBandwidth;
  Strategy strategy = Strategy::kCocoba;
  std::uint64_t rng_seed = 0;
  LearnerConfig learner;
  // Ablation knobs; the coba/coco/cotesting strategies switch these on.
  bool unit_density = false;
  bool full_sample = false;

  void validate() const;

  std::size_t effective_estimators() const;
  bool uses_density() const;
  bool uses_full_sample() const;
};

nlohmann::json config_to_json(const EngineConfig& config);
EngineConfig config_from_json(const nlohmann::json& j);

struct ContentionPoint {
  PostingId id;
  double conf_doc;
  double conf_word;
};

struct BagState {
  // Multiset of labeled ids, kept sorted so training order is canonical.
  std::vector<PostingId> sample;
  LinearLearner doc_learner;
  LinearLearner word_learner;
  // Sorted by id.
  std::vector<ContentionPoint> contention;
  std::optional<ParzenEstimator> doc_density;
  std::optional<ParzenEstimator> word_density;
  // Densities of the contention points themselves, aligned with `contention`.
  std::vector<double> contention_p_doc;
  std::vector<double> contention_p_word;
  bool stale = true;
};

struct BagDetail {
  std::size_t bag = 0;
  double conf_doc = 0.0;
  double conf_word = 0.0;
  double p_doc = 0.0;
  double p_word = 0.0;
  double score = 0.0;
};

struct ScoredCandidate {
  PostingId id;
  std::vector<BagDetail> details;
  double aggregate = 0.0;
};

// P_D |Conf_D| + P_W |Conf_W|
double contention_score(double conf_doc, double conf_word, double p_doc, double p_word);

// The two views disagree; a zero confidence counts as the positive class.
bool is_contention(Confidence doc, Confidence word);

// Per-bag pair label is positive iff conf_doc + conf_word >= 0; the final
// label is positive iff at least half the pairs are positive.
Label majority_vote(std::span<const std::pair<double, double>> pair_confidences);

// Draws the bag samples from L (with replacement, round(ratio |L|) each, or L
// itself under full_sample) and trains both learners of every bag.
std::vector<BagState> train_bags(const PoolState& pool, const EmbeddingSnapshot& snapshot,
                                 const EngineConfig& config, Rng& rng);

// Retrains both learners of a bag on its current sample.
void retrain_bag(BagState& bag, const PoolState& pool, const EmbeddingSnapshot& snapshot,
                 const LearnerConfig& config);

std::vector<ContentionPoint> detect_contention(const BagState& bag,
                                               const std::set<PostingId>& unlabeled,
                                               const EmbeddingSnapshot& snapshot);

// Fits the per-view Parzen estimators on the bag's contention vectors; clears
// them when the bag has no contention.
void fit_densities(BagState& bag, const EmbeddingSnapshot& snapshot, const EngineConfig& config);

// Ranks the union of all contention sets by the cross-bag sum of per-bag
// scores, descending, ties by id. Expects contention and densities computed.
// Throws NoContention when every bag's contention set is empty.
std::vector<ScoredCandidate> score_candidates(const std::vector<BagState>& bags,
                                              const EngineConfig& config);

// Posting with the smallest |conf_doc + conf_word| under the given pair,
// ties by id. Throws EmptyUnlabeledPool.
PostingId pair_uncertainty_query(const LinearLearner& doc_learner,
                                 const LinearLearner& word_learner,
                                 const std::set<PostingId>& unlabeled,
                                 const EmbeddingSnapshot& snapshot);

Label predict(const std::vector<BagState>& bags, const ViewVectors& vectors);

enum class QuerySource { kContention, kFallback };

struct Query {
  PostingId id;
  QuerySource source = QuerySource::kContention;
  double aggregate_score = 0.0;
  // Number of ranked contention candidates (0 on fallback).
  std::size_t candidates = 0;
  // Number of bags whose contention set contains the query.
  std::size_t bags_in_contention = 0;
};

// Stateful Algorithm-1 loop over one pool. Not thread-safe; callers serialize.
class Engine : public QueryLoop {
 public:
  Engine(std::shared_ptr<const Dataset> dataset, std::shared_ptr<const EmbeddingSnapshot> snapshot,
         PoolState pool, EngineConfig config);

  // Rebuilds an engine from checkpoint(); learners are retrained.
  static Engine restore(const nlohmann::json& checkpoint, std::shared_ptr<const Dataset> dataset,
                        std::shared_ptr<const EmbeddingSnapshot> snapshot);

  // Current pending query; recomputed only after a commit or snapshot swap.
  const Query& next_query();
  // Ranked contention candidates behind the pending query (empty on fallback).
  const std::vector<ScoredCandidate>& ranked();

  void commit_label(const PostingId& id, Label label) override;

  PostingId next_id() override { return next_query().id; }

  Label predict(const PostingId& id);
  std::vector<Label> predict(const std::vector<PostingId>& ids) override;

  // Replaces the snapshot and marks every bag stale. Throws CoverageError.
  void swap_snapshot(std::shared_ptr<const EmbeddingSnapshot> snapshot) override;

  nlohmann::json checkpoint() const;

  const PoolState& pool() const override { return pool_; }
  std::string name() const override { return strategy_name(config_.strategy); }
  const std::vector<BagState>& bags() const { return bags_; }
  const EngineConfig& config() const { return config_; }
  const EmbeddingSnapshot& snapshot() const { return *snapshot_; }
  const Dataset& dataset() const { return *dataset_; }
  std::uint64_t epoch() const { return snapshot_->epoch(); }
  const Rng& rng() const { return rng_; }

 private:
  struct Restored {};
  Engine(Restored, std::shared_ptr<const Dataset> dataset,
         std::shared_ptr<const EmbeddingSnapshot> snapshot, PoolState pool, EngineConfig config,
         std::vector<std::vector<PostingId>> samples, Rng rng);

  void ensure_trained();
  void compute_query();

  std::shared_ptr<const Dataset> dataset_;
  std::shared_ptr<const EmbeddingSnapshot> snapshot_;
  PoolState pool_;
  EngineConfig config_;
  Rng rng_;
  std::vector<BagState> bags_;
  std::optional<Query> pending_;
  std::vector<ScoredCandidate> ranked_;
};

}  // namespace cocoba
