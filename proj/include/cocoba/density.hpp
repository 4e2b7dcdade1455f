#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cocoba/embeddings.hpp"

namespace cocoba {

inline constexpr double kDocBandwidth = 30.0;
inline constexpr double kWordBandwidth = 45.0;

// Parzen window estimator with the triangular kernel K(u) = max(0, 1 - u):
//   p(x) = (1/n) sum_i max(0, 1 - |x - p_i| / h)
// Left unnormalized by kernel volume so values stay in [0, 1].
class ParzenEstimator {
 public:
  // Throws EmptySet / NonPositiveBandwidth / DimMismatch.
  static ParzenEstimator fit(std::vector<Vec> points, double bandwidth);

  double density(std::span<const double> x) const;

  // density() at every stored point, in storage order, using the symmetry of
  // the kernel to halve the pair count.
  std::vector<double> self_densities() const;

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  double bandwidth() const { return bandwidth_; }
  std::span<const double> point(std::size_t i) const {
    return {flat_.data() + i * dim_, dim_};
  }

 private:
  double kernel(const double* a, const double* b) const;

  std::vector<double> flat_;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  double bandwidth_ = 1.0;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kExactBandwidthLimit = 2000;
inline constexpr std::size_t kBandwidthPairSample = 2000;

// Mean pairwise Euclidean distance. Exact up to kExactBandwidthLimit points,
// otherwise averaged over kBandwidthPairSample seeded uniform distinct pairs.
// Throws UndefinedBandwidth for fewer than two points.
double auto_bandwidth(std::span<const Vec> points, std::uint64_t seed = 0);

}  // namespace cocoba
