#include "cocoba/baselines.hpp"

#include <cmath>
#include <iterator>

#include "cocoba/error.hpp"

namespace cocoba {

const char* baseline_name(BaselineKind kind) {
  return kind == BaselineKind::kRandom ? "random" : "uncertainty";
}

PostingId random_query(const std::set<PostingId>& unlabeled, Rng& rng) {
  if (unlabeled.empty()) throw Error(ErrorCode::kEmptyUnlabeledPool, "U is empty");
  auto it = unlabeled.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.uniform_below(unlabeled.size())));
  return *it;
}

Vec concat_views(const ViewVectors& v) {
  Vec out;
  out.reserve(v.doc.size() + v.word.size());
  out.insert(out.end(), v.doc.begin(), v.doc.end());
  out.insert(out.end(), v.word.begin(), v.word.end());
  return out;
}

namespace {

template <typename MagnitudeFn>
PostingId least_confident(const std::set<PostingId>& unlabeled, MagnitudeFn magnitude) {
  if (unlabeled.empty()) throw Error(ErrorCode::kEmptyUnlabeledPool, "U is empty");
  const PostingId* best = nullptr;
  double best_mag = 0.0;
  for (const auto& id : unlabeled) {
    const double mag = magnitude(id);
    if (best == nullptr || mag < best_mag) {
      best = &id;
      best_mag = mag;
    }
  }
  return *best;
}

}  // namespace

PostingId uncertainty_query(const LinearLearner& learner, const std::set<PostingId>& unlabeled,
                            const EmbeddingSnapshot& snapshot) {
  return least_confident(unlabeled, [&](const PostingId& id) {
    return learner.confidence(concat_views(snapshot.at(id))).magnitude();
  });
}

BaselineLoop::BaselineLoop(std::shared_ptr<const EmbeddingSnapshot> snapshot, PoolState pool,
                           BaselineConfig config)
    : pool_(std::move(pool)), config_(config), rng_(config.rng_seed) {
  if (pool_.labeled.empty()) throw Error(ErrorCode::kEmptyLabeledPool, "L is empty");
  swap_snapshot(std::move(snapshot));
}

void BaselineLoop::swap_snapshot(std::shared_ptr<const EmbeddingSnapshot> snapshot) {
  std::unordered_map<PostingId, Vec> joined;
  auto add = [&](const PostingId& id) { joined.emplace(id, concat_views(snapshot->at(id))); };
  for (const auto& entry : pool_.labeled) add(entry.first);
  for (const auto& id : pool_.unlabeled) add(id);
  for (const auto& id : pool_.test) add(id);
  const auto epoch = snapshot_ ? snapshot_->epoch() + 1 : snapshot->epoch();
  snapshot_ = std::make_shared<const EmbeddingSnapshot>(snapshot->with_epoch(epoch));
  joined_ = std::move(joined);
  retrain();
}

void BaselineLoop::retrain() {
  std::vector<Example> examples;
  examples.reserve(pool_.labeled.size());
  for (const auto& [id, label] : pool_.labeled) examples.push_back({&joined_.at(id), label});
  learner_ = LinearLearner::train(examples, config_.learner);
  pending_.reset();
}

PostingId BaselineLoop::next_id() {
  if (!pending_) {
    if (pool_.unlabeled.empty()) throw Error(ErrorCode::kEmptyUnlabeledPool, "U is empty");
    if (config_.kind == BaselineKind::kRandom) {
      pending_ = random_query(pool_.unlabeled, rng_);
    } else {
      pending_ = least_confident(pool_.unlabeled, [&](const PostingId& id) {
        return learner_.confidence(joined_.at(id)).magnitude();
      });
    }
  }
  return *pending_;
}

void BaselineLoop::commit_label(const PostingId& id, Label label) {
  if (pool_.labeled.count(id) != 0) {
    throw Error(ErrorCode::kAlreadyLabeled, "posting '" + id + "' is already labeled");
  }
  if (pool_.unlabeled.erase(id) == 0) {
    throw Error(ErrorCode::kUnknownId, "posting '" + id + "' is not in the unlabeled pool");
  }
  pool_.labeled.emplace(id, label);
  retrain();
}

std::vector<Label> BaselineLoop::predict(const std::vector<PostingId>& ids) {
  std::vector<Label> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(learner_.confidence(joined_.at(id)).predicted());
  return out;
}

}  // namespace cocoba
