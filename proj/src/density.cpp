#include "cocoba/density.hpp"

#include <cmath>

#include "cocoba/error.hpp"
#include "cocoba/rng.hpp"

namespace cocoba {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

ParzenEstimator ParzenEstimator::fit(std::vector<Vec> points, double bandwidth) {
  if (points.empty()) throw Error(ErrorCode::kEmptySet, "Parzen estimator needs points");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorCode::kNonPositiveBandwidth,
                "bandwidth must be positive, got " + std::to_string(bandwidth));
  }
  const std::size_t dim = points.front().size();
  ParzenEstimator est;
  est.flat_.reserve(points.size() * dim);
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(ErrorCode::kDimMismatch, "points differ in dimension");
    est.flat_.insert(est.flat_.end(), p.begin(), p.end());
  }
  est.count_ = points.size();
  est.dim_ = dim;
  est.bandwidth_ = bandwidth;
  return est;
}

inline double ParzenEstimator::kernel(const double* a, const double* b) const {
  const double h2 = bandwidth_ * bandwidth_;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= dim_; k += 4) {
    const double d0 = a[k] - b[k], d1 = a[k + 1] - b[k + 1];
    const double d2 = a[k + 2] - b[k + 2], d3 = a[k + 3] - b[k + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; k < dim_; ++k) s0 += (a[k] - b[k]) * (a[k] - b[k]);
  const double s = (s0 + s1) + (s2 + s3);
  if (s >= h2) return 0.0;
  return 1.0 - std::sqrt(s) / bandwidth_;
}

double ParzenEstimator::density(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw Error(ErrorCode::kDimMismatch, "query has dimension " + std::to_string(x.size()) +
                                             ", estimator has " + std::to_string(dim_));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < count_; ++i) sum += kernel(x.data(), flat_.data() + i * dim_);
  return sum / static_cast<double>(count_);
}

std::vector<double> ParzenEstimator::self_densities() const {
  std::vector<double> acc(count_, 0.0);
  for (std::size_t i = 0; i < count_; ++i) {
    const double* a = flat_.data() + i * dim_;
    acc[i] += 1.0;
    for (std::size_t j = i + 1; j < count_; ++j) {
      const double k = kernel(a, flat_.data() + j * dim_);
      acc[i] += k;
      acc[j] += k;
    }
  }
  for (double& v : acc) v /= static_cast<double>(count_);
  return acc;
}

double auto_bandwidth(std::span<const Vec> points, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (n < 2) {
    throw Error(ErrorCode::kUndefinedBandwidth, "mean pairwise distance needs two points");
  }
  for (const auto& p : points) {
    if (p.size() != points.front().size()) {
      throw Error(ErrorCode::kDimMismatch, "points differ in dimension");
    }
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  if (n <= kExactBandwidthLimit) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        sum += euclidean_distance(points[i], points[j]);
        ++pairs;
      }
    }
  } else {
    Rng rng(seed);
    for (; pairs < kBandwidthPairSample; ++pairs) {
      const auto i = rng.uniform_below(n);
      auto j = rng.uniform_below(n - 1);
      if (j >= i) ++j;
      sum += euclidean_distance(points[i], points[j]);
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace cocoba
