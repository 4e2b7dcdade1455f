#include "cocoba/learner.hpp"

#include <algorithm>
#include <cmath>

#include "cocoba/error.hpp"

namespace cocoba {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-m))
double logistic_loss(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// Four independent partial sums; the fixed association keeps results
// identical across compilers while letting the loop pipeline.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

std::size_t check_examples(std::span<const Example> examples) {
  if (examples.empty()) throw Error(ErrorCode::kDegenerateSet, "no training examples");
  const std::size_t dim = examples.front().x->size();
  for (const auto& ex : examples) {
    if (ex.x->size() != dim) {
      throw Error(ErrorCode::kDimMismatch, "training vectors differ in dimension");
    }
  }
  return dim;
}

}  // namespace

double signed_confidence(double z) { return std::tanh(0.5 * z); }

LinearLearner::LinearLearner(Vec weights, double bias, LearnerConfig config)
    : weights_(std::move(weights)), bias_(bias), config_(config) {}

LinearLearner LinearLearner::train(std::span<const Example> examples,
                                   const LearnerConfig& config) {
  const std::size_t dim = check_examples(examples);
  const std::size_t n = examples.size();
  // Row-major copy so each epoch streams contiguous memory.
  std::vector<double> rows(n * dim);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(examples[i].x->begin(), examples[i].x->end(), rows.begin() + i * dim);
    ys[i] = to_int(examples[i].y);
  }
  Vec w(dim, 0.0);
  double b = 0.0;
  Vec g(dim);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(g.begin(), g.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = rows.data() + i * dim;
      const double z = b + dot(w.data(), x, dim);
      const double coef = -ys[i] * sigmoid(-ys[i] * z);
      for (std::size_t j = 0; j < dim; ++j) g[j] += coef * x[j];
      gb += coef;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      w[j] -= config.learning_rate * (g[j] * inv_n + config.l2 * w[j]);
    }
    b -= config.learning_rate * gb * inv_n;
  }
  return LinearLearner(std::move(w), b, config);
}

double LinearLearner::margin(std::span<const double> x) const {
  if (x.size() != weights_.size()) {
    throw Error(ErrorCode::kDimMismatch, "input has dimension " + std::to_string(x.size()) +
                                             ", learner expects " +
                                             std::to_string(weights_.size()));
  }
  return dot(weights_.data(), x.data(), x.size()) + bias_;
}

Confidence LinearLearner::confidence(std::span<const double> x) const {
  return Confidence{signed_confidence(margin(x))};
}

double LinearLearner::loss(std::span<const Example> examples) const {
  check_examples(examples);
  double total = 0.0;
  for (const auto& ex : examples) total += logistic_loss(to_int(ex.y) * margin(*ex.x));
  double reg = 0.0;
  for (double w : weights_) reg += w * w;
  return total / static_cast<double>(examples.size()) + 0.5 * config_.l2 * reg;
}

Vec LinearLearner::gradient(std::span<const Example> examples) const {
  const std::size_t dim = check_examples(examples);
  if (dim != weights_.size()) {
    throw Error(ErrorCode::kDimMismatch, "examples do not match learner dimension");
  }
  Vec g(dim + 1, 0.0);
  for (const auto& ex : examples) {
    const double y = to_int(ex.y);
    // d/dz log(1 + exp(-y z)) = -y * sigmoid(-y z)
    const double coef = -y * sigmoid(-y * margin(*ex.x));
    const auto& x = *ex.x;
    for (std::size_t j = 0; j < dim; ++j) g[j] += coef * x[j];
    g[dim] += coef;
  }
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  for (std::size_t j = 0; j < dim; ++j) g[j] = g[j] * inv_n + config_.l2 * weights_[j];
  g[dim] *= inv_n;
  return g;
}

}  // namespace cocoba
