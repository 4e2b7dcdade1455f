#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"

namespace cocoba {

struct LearnerConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  double l2 = 1e-4;
  // Weights start at zero; the seed is recorded for interface stability only.
  std::uint64_t init_seed = 0;
};

struct Example {
  const Vec* x;
  Label y;
};

// Signed margin 2*sigmoid(w.x + b) - 1, in [-1, 1].
struct Confidence {
  double value = 0.0;

  Label predicted() const { return value >= 0.0 ? Label::kPositive : Label::kNegative; }
  double magnitude() const { return value < 0.0 ? -value : value; }
};

// Affine-plus-sigmoid binary classifier trained by full-batch gradient
// descent on mean logistic loss with an L2 penalty on the weights:
//   loss = (1/n) sum log(1 + exp(-y (w.x + b))) + (l2/2) |w|^2
class LinearLearner {
 public:
  LinearLearner() = default;
  LinearLearner(Vec weights, double bias, LearnerConfig config = {});

  // Throws DegenerateSet on an empty set, DimMismatch on ragged vectors.
  static LinearLearner train(std::span<const Example> examples, const LearnerConfig& config = {});

  Confidence confidence(std::span<const double> x) const;
  double margin(std::span<const double> x) const;

  double loss(std::span<const Example> examples) const;
  // Gradient of loss(); the bias component is last.
  Vec gradient(std::span<const Example> examples) const;

  const Vec& weights() const { return weights_; }
  double bias() const { return bias_; }
  std::size_t dim() const { return weights_.size(); }
  const LearnerConfig& config() const { return config_; }

 private:
  Vec weights_;
  double bias_ = 0.0;
  LearnerConfig config_;
};

// 2*sigmoid(z) - 1 == tanh(z/2), evaluated stably.
double signed_confidence(double z);

}  // namespace cocoba
