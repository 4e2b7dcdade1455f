#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cocoba/error.hpp"
#include "cocoba/harness.hpp"
#include "cocoba/rng.hpp"

namespace cocoba {
namespace {

Vec gaussian(Rng& rng, std::size_t dim) {
  Vec v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

void scale_to_norm(Vec& v, double norm) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (double& x : v) x *= norm / s;
}

// Picks an index with probability proportional to weights.
std::size_t pick(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

constexpr double kLabelSignal = 1.25;
constexpr double kWordContextNorm = 2.0;
constexpr double kWordNoiseScale = 0.5;

const char* kQueryTerms[] = {"flu", "influenza"};

}  // namespace

SynthCorpus make_synthetic_dataset(const SynthSpec& spec) {
  if (spec.n < 200) throw Error(ErrorCode::kInvalidArgument, "synthetic corpus needs n >= 200");
  if (spec.contexts < 2) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic corpus needs at least two contexts");
  }
  if (!(spec.pos_rate > 0.0 && spec.pos_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pos_rate must lie in (0, 1)");
  }
  if (spec.dims.doc < 2 || spec.dims.word < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic dims too small");
  }
  Rng rng(spec.seed);
  const std::size_t n_pos_contexts = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.contexts * spec.pos_rate)), 1,
      spec.contexts - 1);

  // Context c < n_pos_contexts carries the positive label. The doc view knows
  // nothing about contexts, so the two views are independent given the label.
  std::vector<Vec> word_centroids;
  std::vector<double> weights;
  for (std::size_t c = 0; c < spec.contexts; ++c) {
    auto w = gaussian(rng, spec.dims.word);
    scale_to_norm(w, kWordContextNorm);
    word_centroids.push_back(std::move(w));
    weights.push_back(0.5 + rng.uniform01());
  }
  const std::vector<double> pos_weights(weights.begin(), weights.begin() + n_pos_contexts);
  const std::vector<double> neg_weights(weights.begin() + n_pos_contexts, weights.end());

  const auto n_pos = static_cast<std::size_t>(std::llround(spec.pos_rate * spec.n));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * spec.n));
  std::vector<bool> positive(spec.n, false);
  std::vector<bool> test(spec.n, false);
  std::fill(positive.begin(), positive.begin() + n_pos, true);
  std::fill(test.begin(), test.begin() + n_test, true);
  for (std::size_t i = spec.n; i > 1; --i) {
    std::swap(positive[i - 1], positive[rng.uniform_below(i)]);
  }
  for (std::size_t i = spec.n; i > 1; --i) std::swap(test[i - 1], test[rng.uniform_below(i)]);

  const int width = static_cast<int>(std::to_string(spec.n).size());
  std::vector<Posting> postings;
  std::map<PostingId, ViewVectors> vectors;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool pos = positive[i];
    const std::size_t context =
        pos ? pick(rng, pos_weights) : n_pos_contexts + pick(rng, neg_weights);
    const double y = pos ? 1.0 : -1.0;

    ViewVectors v;
    v.doc.assign(spec.dims.doc, 0.0);
    v.doc[0] = y * kLabelSignal;
    for (double& x : v.doc) x = static_cast<float>(x + spec.noise * rng.normal());
    v.word = word_centroids[context];
    for (double& x : v.word) {
      x = static_cast<float>(x + kWordNoiseScale * spec.noise * rng.normal());
    }

    char id[32];
    std::snprintf(id, sizeof(id), "s%0*zu", width, i);
    const char* term = kQueryTerms[rng.uniform_below(2)];
    std::string text = "c" + std::to_string(context) + "w" + std::to_string(rng.uniform_below(5)) +
                       " " + term + " c" + std::to_string(context) + "w" +
                       std::to_string(rng.uniform_below(5)) + " filler" +
                       std::to_string(rng.uniform_below(50));
    auto spans = find_term_spans(text, {kQueryTerms[0], kQueryTerms[1]});
    postings.push_back(make_posting(id, std::move(text), std::move(spans),
                                    pos ? Label::kPositive : Label::kNegative,
                                    test[i] ? Split::kTest : Split::kTrain));
    vectors.emplace(id, std::move(v));
  }
  return SynthCorpus{
      Dataset("synthetic", {kQueryTerms[0], kQueryTerms[1]}, std::move(postings)),
      EmbeddingSnapshot(spec.dims, std::move(vectors))};
}

void write_synthetic(const SynthCorpus& corpus, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  save_dataset(corpus.dataset, (root / "dataset.jsonl").string(),
               (root / "dataset.meta.json").string());
  write_snapshot(corpus.snapshot, (root / "snapshot.cvec").string());
}

}  // namespace cocoba
