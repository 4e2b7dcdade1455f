#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cocoba/corpus.hpp"

namespace cocoba {

using Vec = std::vector<double>;

// Document-level and query-word-level vectors of one posting.
struct ViewVectors {
  Vec doc;
  Vec word;

  friend bool operator==(const ViewVectors&, const ViewVectors&) = default;
};

struct ViewDims {
  std::size_t doc = 0;
  std::size_t word = 0;

  friend bool operator==(const ViewDims&, const ViewDims&) = default;
};

// Immutable id -> ViewVectors table. Values are stored as doubles but the
// binary format carries f32, so vectors meant for disk should be f32-exact.
class EmbeddingSnapshot {
 public:
  EmbeddingSnapshot() = default;
  // Validates dims and finiteness; throws DimMismatch / FormatError.
  EmbeddingSnapshot(ViewDims dims, std::map<PostingId, ViewVectors> vectors,
                    std::uint64_t epoch = 0);

  ViewDims dims() const { return dims_; }
  std::uint64_t epoch() const { return epoch_; }
  std::size_t size() const { return vectors_.size(); }
  const std::map<PostingId, ViewVectors>& vectors() const { return vectors_; }

  bool contains(const PostingId& id) const { return vectors_.count(id) != 0; }
  const ViewVectors& at(const PostingId& id) const;

  EmbeddingSnapshot with_epoch(std::uint64_t epoch) const;

  // Throws CoverageError naming the first id without vectors.
  void require_coverage(const std::vector<PostingId>& ids) const;

 private:
  ViewDims dims_;
  std::map<PostingId, ViewVectors> vectors_;
  std::uint64_t epoch_ = 0;
};

// Reads the binary CVEC1 format, or the JSON Lines alternative when the file
// does not start with the magic.
EmbeddingSnapshot load_snapshot(const std::string& path);
void write_snapshot(const EmbeddingSnapshot& snapshot, const std::string& path);
void write_snapshot_jsonl(const EmbeddingSnapshot& snapshot, const std::string& path);

inline constexpr std::size_t kDefaultContextWindow = 5;

struct HashEmbedding {
  ViewVectors vectors;
  // Set when no token besides <QTERM> sits in the anchor window; the word view
  // then repeats the doc view.
  bool empty_context = false;
};

// Deterministic bag-of-signed-hashes embedder. Expects a canonicalized posting.
HashEmbedding hash_embed(const Posting& posting, ViewDims dims,
                         std::size_t window = kDefaultContextWindow);

// hash_embed over every posting in a canonicalized dataset.
EmbeddingSnapshot hash_embed_dataset(const Dataset& dataset, ViewDims dims,
                                     std::size_t window = kDefaultContextWindow);

}  // namespace cocoba
