#include "cocoba/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cocoba/error.hpp"

namespace cocoba {

using nlohmann::json;

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kCocoba: return "cocoba";
    case Strategy::kCoba: return "coba";
    case Strategy::kCoco: return "coco";
    case Strategy::kCotesting: return "cotesting";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kCocoba, Strategy::kCoba, Strategy::kCoco, Strategy::kCotesting}) {
    if (name == strategy_name(s)) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown engine strategy '" + std::string(name) + "'");
}

void EngineConfig::validate() const {
  if (estimators < 1) throw Error(ErrorCode::kInvalidArgument, "estimators must be >= 1");
  if (!(subsample_ratio > 0.0 && subsample_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "subsample_ratio must lie in (0, 1]");
  }
  if (!(bandwidth_doc > 0.0) || !(bandwidth_word > 0.0)) {
    throw Error(ErrorCode::kNonPositiveBandwidth, "bandwidths must be positive");
  }
  if (learner.epochs < 0 || !(learner.learning_rate > 0.0) || learner.l2 < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid learner config");
  }
}

std::size_t EngineConfig::effective_estimators() const {
  return strategy == Strategy::kCoco || strategy == Strategy::kCotesting ? 1 : estimators;
}

bool EngineConfig::uses_density() const {
  return !unit_density && strategy != Strategy::kCoba && strategy != Strategy::kCotesting;
}

bool EngineConfig::uses_full_sample() const {
  return full_sample || strategy == Strategy::kCoco || strategy == Strategy::kCotesting;
}

json config_to_json(const EngineConfig& c) {
  return json{{"estimators", c.estimators},
              {"subsample_ratio", c.subsample_ratio},
              {"bandwidth_doc", c.bandwidth_doc},
              {"bandwidth_word", c.bandwidth_word},
              {"strategy", strategy_name(c.strategy)},
              {"rng_seed", c.rng_seed},
              {"learning_rate", c.learner.learning_rate},
              {"epochs", c.learner.epochs},
              {"l2", c.learner.l2},
              {"init_seed", c.learner.init_seed},
              {"unit_density", c.unit_density},
              {"full_sample", c.full_sample}};
}

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  try {
    c.estimators = j.value("estimators", c.estimators);
    c.subsample_ratio = j.value("subsample_ratio", c.subsample_ratio);
    c.bandwidth_doc = j.value("bandwidth_doc", c.bandwidth_doc);
    c.bandwidth_word = j.value("bandwidth_word", c.bandwidth_word);
    c.strategy = parse_strategy(j.value("strategy", std::string("cocoba")));
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.learner.learning_rate = j.value("learning_rate", c.learner.learning_rate);
    c.learner.epochs = j.value("epochs", c.learner.epochs);
    c.learner.l2 = j.value("l2", c.learner.l2);
    c.learner.init_seed = j.value("init_seed", c.learner.init_seed);
    c.unit_density = j.value("unit_density", c.unit_density);
    c.full_sample = j.value("full_sample", c.full_sample);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("engine config: ") + e.what());
  }
  c.validate();
  return c;
}

double contention_score(double conf_doc, double conf_word, double p_doc, double p_word) {
  return p_doc * std::fabs(conf_doc) + p_word * std::fabs(conf_word);
}

bool is_contention(Confidence doc, Confidence word) {
  return doc.predicted() != word.predicted();
}

Label majority_vote(std::span<const std::pair<double, double>> pair_confidences) {
  std::size_t positive = 0;
  for (const auto& [doc, word] : pair_confidences) {
    if (doc + word >= 0.0) ++positive;
  }
  // PCount >= K / 2 without integer truncation.
  return 2 * positive >= pair_confidences.size() ? Label::kPositive : Label::kNegative;
}

void retrain_bag(BagState& bag, const PoolState& pool, const EmbeddingSnapshot& snapshot,
                 const LearnerConfig& config) {
  std::vector<Example> doc_examples;
  std::vector<Example> word_examples;
  doc_examples.reserve(bag.sample.size());
  word_examples.reserve(bag.sample.size());
  for (const auto& id : bag.sample) {
    const auto it = pool.labeled.find(id);
    if (it == pool.labeled.end()) {
      throw Error(ErrorCode::kUnknownId, "bag sample holds unlabeled posting '" + id + "'");
    }
    const auto& v = snapshot.at(id);
    doc_examples.push_back({&v.doc, it->second});
    word_examples.push_back({&v.word, it->second});
  }
  bag.doc_learner = LinearLearner::train(doc_examples, config);
  bag.word_learner = LinearLearner::train(word_examples, config);
  bag.contention.clear();
  bag.doc_density.reset();
  bag.word_density.reset();
  bag.contention_p_doc.clear();
  bag.contention_p_word.clear();
  bag.stale = false;
}

std::vector<BagState> train_bags(const PoolState& pool, const EmbeddingSnapshot& snapshot,
                                 const EngineConfig& config, Rng& rng) {
  if (pool.labeled.empty()) throw Error(ErrorCode::kEmptyLabeledPool, "L is empty");
  config.validate();
  std::vector<PostingId> labeled;
  labeled.reserve(pool.labeled.size());
  for (const auto& entry : pool.labeled) labeled.push_back(entry.first);

  const std::size_t k = config.effective_estimators();
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.subsample_ratio * labeled.size())));
  std::vector<BagState> bags(k);
  for (auto& bag : bags) {
    if (config.uses_full_sample()) {
      bag.sample = labeled;
    } else {
      bag.sample.reserve(sample_size);
      for (std::size_t i = 0; i < sample_size; ++i) {
        bag.sample.push_back(labeled[rng.uniform_below(labeled.size())]);
      }
      std::sort(bag.sample.begin(), bag.sample.end());
    }
    retrain_bag(bag, pool, snapshot, config.learner);
  }
  return bags;
}

std::vector<ContentionPoint> detect_contention(const BagState& bag,
                                               const std::set<PostingId>& unlabeled,
                                               const EmbeddingSnapshot& snapshot) {
  std::vector<ContentionPoint> out;
  for (const auto& id : unlabeled) {
    const auto& v = snapshot.at(id);
    const auto doc = bag.doc_learner.confidence(v.doc);
    const auto word = bag.word_learner.confidence(v.word);
    if (is_contention(doc, word)) out.push_back({id, doc.value, word.value});
  }
  return out;
}

void fit_densities(BagState& bag, const EmbeddingSnapshot& snapshot, const EngineConfig& config) {
  bag.doc_density.reset();
  bag.word_density.reset();
  bag.contention_p_doc.clear();
  bag.contention_p_word.clear();
  if (bag.contention.empty()) return;
  std::vector<Vec> doc_points;
  std::vector<Vec> word_points;
  doc_points.reserve(bag.contention.size());
  word_points.reserve(bag.contention.size());
  for (const auto& c : bag.contention) {
    const auto& v = snapshot.at(c.id);
    doc_points.push_back(v.doc);
    word_points.push_back(v.word);
  }
  bag.doc_density = ParzenEstimator::fit(std::move(doc_points), config.bandwidth_doc);
  bag.word_density = ParzenEstimator::fit(std::move(word_points), config.bandwidth_word);
  bag.contention_p_doc = bag.doc_density->self_densities();
  bag.contention_p_word = bag.word_density->self_densities();
}

std::vector<ScoredCandidate> score_candidates(const std::vector<BagState>& bags,
                                              const EngineConfig& config) {
  const bool density = config.uses_density();
  std::map<PostingId, ScoredCandidate> by_id;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const auto& bag = bags[b];
    if (bag.contention.empty()) continue;
    if (density && bag.contention_p_doc.size() != bag.contention.size()) {
      throw Error(ErrorCode::kInvalidArgument, "bag densities not fitted");
    }
    for (std::size_t i = 0; i < bag.contention.size(); ++i) {
      const auto& c = bag.contention[i];
      BagDetail d;
      d.bag = b;
      d.conf_doc = c.conf_doc;
      d.conf_word = c.conf_word;
      if (density) {
        d.p_doc = bag.contention_p_doc[i];
        d.p_word = bag.contention_p_word[i];
      } else {
        d.p_doc = 1.0;
        d.p_word = 1.0;
      }
      d.score = contention_score(d.conf_doc, d.conf_word, d.p_doc, d.p_word);
      auto& cand = by_id[c.id];
      cand.id = c.id;
      cand.aggregate += d.score;
      cand.details.push_back(d);
    }
  }
  if (by_id.empty()) throw Error(ErrorCode::kNoContention, "no bag has contention points");
  std::vector<ScoredCandidate> ranked;
  ranked.reserve(by_id.size());
  for (auto& entry : by_id) ranked.push_back(std::move(entry.second));
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.aggregate > b.aggregate;
  });
  return ranked;
}

PostingId pair_uncertainty_query(const LinearLearner& doc_learner,
                                 const LinearLearner& word_learner,
                                 const std::set<PostingId>& unlabeled,
                                 const EmbeddingSnapshot& snapshot) {
  if (unlabeled.empty()) throw Error(ErrorCode::kEmptyUnlabeledPool, "U is empty");
  const PostingId* best = nullptr;
  double best_margin = 0.0;
  for (const auto& id : unlabeled) {
    const auto& v = snapshot.at(id);
    const double m =
        std::fabs(doc_learner.confidence(v.doc).value + word_learner.confidence(v.word).value);
    if (best == nullptr || m < best_margin) {
      best = &id;
      best_margin = m;
    }
  }
  return *best;
}

Label predict(const std::vector<BagState>& bags, const ViewVectors& vectors) {
  std::vector<std::pair<double, double>> confs;
  confs.reserve(bags.size());
  for (const auto& bag : bags) {
    confs.emplace_back(bag.doc_learner.confidence(vectors.doc).value,
                       bag.word_learner.confidence(vectors.word).value);
  }
  return majority_vote(confs);
}

namespace {

void require_pool_coverage(const PoolState& pool, const EmbeddingSnapshot& snapshot) {
  for (const auto& entry : pool.labeled) {
    if (!snapshot.contains(entry.first)) snapshot.require_coverage({entry.first});
  }
  for (const auto& id : pool.unlabeled) {
    if (!snapshot.contains(id)) snapshot.require_coverage({id});
  }
  for (const auto& id : pool.test) {
    if (!snapshot.contains(id)) snapshot.require_coverage({id});
  }
}

}  // namespace

Engine::Engine(std::shared_ptr<const Dataset> dataset,
               std::shared_ptr<const EmbeddingSnapshot> snapshot, PoolState pool,
               EngineConfig config)
    : dataset_(std::move(dataset)),
      snapshot_(std::move(snapshot)),
      pool_(std::move(pool)),
      config_(config),
      rng_(config.rng_seed) {
  config_.validate();
  require_pool_coverage(pool_, *snapshot_);
  bags_ = train_bags(pool_, *snapshot_, config_, rng_);
}

Engine::Engine(Restored, std::shared_ptr<const Dataset> dataset,
               std::shared_ptr<const EmbeddingSnapshot> snapshot, PoolState pool,
               EngineConfig config, std::vector<std::vector<PostingId>> samples, Rng rng)
    : dataset_(std::move(dataset)),
      snapshot_(std::move(snapshot)),
      pool_(std::move(pool)),
      config_(config),
      rng_(rng) {
  config_.validate();
  require_pool_coverage(pool_, *snapshot_);
  if (pool_.labeled.empty()) throw Error(ErrorCode::kEmptyLabeledPool, "L is empty");
  bags_.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bags_[i].sample = std::move(samples[i]);
    std::sort(bags_[i].sample.begin(), bags_[i].sample.end());
    retrain_bag(bags_[i], pool_, *snapshot_, config_.learner);
  }
}

void Engine::ensure_trained() {
  for (auto& bag : bags_) {
    if (bag.stale) retrain_bag(bag, pool_, *snapshot_, config_.learner);
  }
}

void Engine::compute_query() {
  ensure_trained();
  if (pool_.unlabeled.empty()) throw Error(ErrorCode::kEmptyUnlabeledPool, "U is empty");
  for (auto& bag : bags_) {
    bag.contention = detect_contention(bag, pool_.unlabeled, *snapshot_);
    if (config_.uses_density()) fit_densities(bag, *snapshot_, config_);
  }
  Query q;
  try {
    ranked_ = score_candidates(bags_, config_);
    const auto& top = ranked_.front();
    q.id = top.id;
    q.source = QuerySource::kContention;
    q.aggregate_score = top.aggregate;
    q.candidates = ranked_.size();
    q.bags_in_contention = top.details.size();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoContention) throw;
    ranked_.clear();
    q.source = QuerySource::kFallback;
    if (bags_.size() == 1 && config_.uses_full_sample()) {
      q.id = pair_uncertainty_query(bags_[0].doc_learner, bags_[0].word_learner,
                                    pool_.unlabeled, *snapshot_);
    } else {
      BagState pair;
      for (const auto& entry : pool_.labeled) pair.sample.push_back(entry.first);
      retrain_bag(pair, pool_, *snapshot_, config_.learner);
      q.id = pair_uncertainty_query(pair.doc_learner, pair.word_learner, pool_.unlabeled,
                                    *snapshot_);
    }
  }
  pending_ = std::move(q);
}

const Query& Engine::next_query() {
  if (!pending_) compute_query();
  return *pending_;
}

const std::vector<ScoredCandidate>& Engine::ranked() {
  next_query();
  return ranked_;
}

void Engine::commit_label(const PostingId& id, Label label) {
  if (pool_.labeled.count(id) != 0) {
    throw Error(ErrorCode::kAlreadyLabeled, "posting '" + id + "' is already labeled");
  }
  if (pool_.unlabeled.count(id) == 0) {
    throw Error(ErrorCode::kUnknownId, "posting '" + id + "' is not in the unlabeled pool");
  }
  pool_.unlabeled.erase(id);
  pool_.labeled.emplace(id, label);
  for (auto& bag : bags_) {
    bag.sample.insert(std::upper_bound(bag.sample.begin(), bag.sample.end(), id), id);
    retrain_bag(bag, pool_, *snapshot_, config_.learner);
  }
  pending_.reset();
  ranked_.clear();
}

Label Engine::predict(const PostingId& id) {
  ensure_trained();
  return cocoba::predict(bags_, snapshot_->at(id));
}

std::vector<Label> Engine::predict(const std::vector<PostingId>& ids) {
  ensure_trained();
  std::vector<Label> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(cocoba::predict(bags_, snapshot_->at(id)));
  return out;
}

void Engine::swap_snapshot(std::shared_ptr<const EmbeddingSnapshot> snapshot) {
  require_pool_coverage(pool_, *snapshot);
  snapshot_ = std::make_shared<const EmbeddingSnapshot>(snapshot->with_epoch(epoch() + 1));
  for (auto& bag : bags_) bag.stale = true;
  pending_.reset();
  ranked_.clear();
}

json Engine::checkpoint() const {
  json labeled = json::array();
  for (const auto& [id, label] : pool_.labeled) labeled.push_back({id, to_int(label)});
  json samples = json::array();
  for (const auto& bag : bags_) samples.push_back(bag.sample);
  return json{{"format", "cocoba-engine-checkpoint"},
              {"version", 1},
              {"config", config_to_json(config_)},
              {"labeled", std::move(labeled)},
              {"unlabeled", pool_.unlabeled},
              {"test", pool_.test},
              {"bags", std::move(samples)},
              {"rng", {{"seed", rng_.seed()}, {"position", rng_.position()}}},
              {"epoch", epoch()}};
}

Engine Engine::restore(const json& cp, std::shared_ptr<const Dataset> dataset,
                       std::shared_ptr<const EmbeddingSnapshot> snapshot) {
  try {
    if (cp.value("format", std::string()) != "cocoba-engine-checkpoint") {
      throw Error(ErrorCode::kFormatError, "not an engine checkpoint");
    }
    auto config = config_from_json(cp.at("config"));
    PoolState pool;
    for (const auto& e : cp.at("labeled")) {
      pool.labeled.emplace(e.at(0).get<std::string>(), label_from_int(e.at(1).get<int>()));
    }
    pool.unlabeled = cp.at("unlabeled").get<std::set<PostingId>>();
    pool.test = cp.at("test").get<std::set<PostingId>>();
    auto samples = cp.at("bags").get<std::vector<std::vector<PostingId>>>();
    if (samples.size() != config.effective_estimators()) {
      throw Error(ErrorCode::kFormatError, "checkpoint bag count does not match config");
    }
    const auto& r = cp.at("rng");
    auto rng = Rng::at_position(r.at("seed").get<std::uint64_t>(),
                                r.at("position").get<std::uint64_t>());
    const auto epoch = cp.value("epoch", std::uint64_t{0});
    if (snapshot->epoch() != epoch) {
      snapshot = std::make_shared<const EmbeddingSnapshot>(snapshot->with_epoch(epoch));
    }
    return Engine(Restored{}, std::move(dataset), std::move(snapshot), std::move(pool), config,
                  std::move(samples), rng);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace cocoba
