#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string_view>
#include <unordered_map>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"
#include "cocoba/learner.hpp"
#include "cocoba/loop.hpp"
#include "cocoba/rng.hpp"

namespace cocoba {

enum class BaselineKind { kRandom, kUncertainty };

const char* baseline_name(BaselineKind kind);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kRandom;
  std::uint64_t rng_seed = 0;
  LearnerConfig learner;
};

// Uniform seeded draw. Throws EmptyUnlabeledPool.
PostingId random_query(const std::set<PostingId>& unlabeled, Rng& rng);

// doc ++ word
Vec concat_views(const ViewVectors& v);

// argmin |confidence| over U of the learner on concatenated views, ties by id.
// Throws EmptyUnlabeledPool.
PostingId uncertainty_query(const LinearLearner& learner, const std::set<PostingId>& unlabeled,
                            const EmbeddingSnapshot& snapshot);

// Single learner on doc ++ word, retrained on all of L after every commit.
class BaselineLoop : public QueryLoop {
 public:
  BaselineLoop(std::shared_ptr<const EmbeddingSnapshot> snapshot, PoolState pool,
               BaselineConfig config);

  PostingId next_id() override;
  void commit_label(const PostingId& id, Label label) override;
  std::vector<Label> predict(const std::vector<PostingId>& ids) override;
  void swap_snapshot(std::shared_ptr<const EmbeddingSnapshot> snapshot) override;
  const PoolState& pool() const override { return pool_; }
  std::string name() const override { return baseline_name(config_.kind); }

  const LinearLearner& learner() const { return learner_; }

 private:
  void retrain();

  std::shared_ptr<const EmbeddingSnapshot> snapshot_;
  PoolState pool_;
  BaselineConfig config_;
  Rng rng_;
  std::unordered_map<PostingId, Vec> joined_;
  LinearLearner learner_;
  std::optional<PostingId> pending_;
};

}  // namespace cocoba
