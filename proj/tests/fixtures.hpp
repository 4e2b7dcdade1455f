#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"
#include "cocoba/error.hpp"
#include "cocoba/harness.hpp"

namespace fixtures {

struct Corpus {
  std::shared_ptr<const cocoba::Dataset> dataset;
  std::shared_ptr<const cocoba::EmbeddingSnapshot> snapshot;
};

inline Corpus synthetic(std::size_t n, std::uint64_t seed = 1, double noise = 1.25,
                        std::size_t dim = 8) {
  cocoba::SynthSpec spec;
  spec.n = n;
  spec.seed = seed;
  spec.noise = noise;
  spec.dims = {dim, dim};
  auto c = cocoba::make_synthetic_dataset(spec);
  return {std::make_shared<const cocoba::Dataset>(std::move(c.dataset)),
          std::make_shared<const cocoba::EmbeddingSnapshot>(std::move(c.snapshot))};
}

// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cocoba-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Code of the cocoba::Error thrown by f, or nullopt when nothing is thrown.
template <class F>
std::optional<cocoba::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const cocoba::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(gen);
  return v;
}

}  // namespace fixtures
